//! Ordered element pipelines and their evaluation.

use crate::elements::{Element, ElementKind};
use crate::error::{Error, Result};
use crate::state::{embed, Ket, State};

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    /// Register dimension, 4 (one photon) or 16 (a pair).
    pub dimension: usize,
    pub source: Option<Ket>,
    pub elements: Vec<Element>,
    /// Terminal measurement, if any.
    pub analyzer: Option<Element>,
}

/// Result of pushing a state through a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Product of all renormalization factors before the analyzer.
    pub success_probability: f64,
    /// Normalized state just before the analyzer.
    pub state: State,
    /// Analyzer probability conditional on `state`.
    pub detection_probability: Option<f64>,
}

impl RunOutcome {
    /// Unconditional probability of a detection event.
    pub fn joint_probability(&self) -> Option<f64> {
        self.detection_probability.map(|p| p * self.success_probability)
    }
}

impl Pipeline {
    pub fn num_qubits(&self) -> usize {
        self.dimension.trailing_zeros() as usize
    }

    pub fn labels(&self) -> Vec<&str> {
        self.elements
            .iter()
            .chain(self.analyzer.iter())
            .map(|e| e.label.as_str())
            .collect()
    }

    /// Runs the pipeline on its declared source.
    pub fn run(&self) -> Result<RunOutcome> {
        let source = self.source.clone().ok_or(Error::NoSource)?;
        self.run_from(State::Pure(source))
    }

    pub fn run_from(&self, input: State) -> Result<RunOutcome> {
        if input.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                left: input.dim(),
                right: self.dimension,
            });
        }
        let (success, state) = self.prepare(input)?;
        let detection_probability = match &self.analyzer {
            Some(a) => Some(detect(a, &state)?),
            None => None,
        };
        Ok(RunOutcome {
            success_probability: success,
            state,
            detection_probability,
        })
    }

    /// Applies every non-terminal element.
    pub fn prepare(&self, input: State) -> Result<(f64, State)> {
        let mut success = 1.0;
        let mut state = input;
        for el in &self.elements {
            let (p, next) = step(el, state).map_err(|e| match e {
                Error::Annihilated { probability, .. } => Error::Annihilated {
                    probability,
                    label: el.label.clone(),
                },
                other => other,
            })?;
            success *= p;
            state = next;
        }
        Ok((success, state))
    }
}

fn step(el: &Element, state: State) -> Result<(f64, State)> {
    match (&el.kind, state) {
        (ElementKind::Unitary(u), s) => Ok((1.0, crate::state::apply_unitary(u, &s, &el.targets)?)),
        (ElementKind::PostSelect(m), State::Pure(k)) => {
            let (p, k) = k.filter(m, &el.targets)?;
            Ok((p, State::Pure(k)))
        }
        (ElementKind::Channel(ks), State::Pure(k)) if ks.len() == 1 => {
            let (p, k) = k.filter(&ks[0], &el.targets)?;
            Ok((p, State::Pure(k)))
        }
        (ElementKind::PostSelect(m), s) => {
            let (p, r) = s.to_density().apply_kraus(std::slice::from_ref(m), &el.targets)?;
            Ok((p, State::Mixed(r)))
        }
        (ElementKind::Channel(ks), s) => {
            let (p, r) = s.to_density().apply_kraus(ks, &el.targets)?;
            Ok((p, State::Mixed(r)))
        }
        (ElementKind::Detection(_), _) => Err(Error::InvalidMeasurement(format!(
            "detection element `{}` used before the end of the pipeline",
            el.label
        ))),
    }
}

/// Probability that a terminal analyzer fires on `state`. Zero is a valid outcome.
pub fn detect(analyzer: &Element, state: &State) -> Result<f64> {
    let n = state.num_qubits();
    let op = match &analyzer.kind {
        ElementKind::PostSelect(m) => {
            let full = embed(m, &analyzer.targets, n)?;
            full.adjoint() * full
        }
        ElementKind::Detection(e) => embed(e, &analyzer.targets, n)?,
        _ => {
            return Err(Error::InvalidMeasurement(format!(
                "`{}` is not an analyzer",
                analyzer.label
            )))
        }
    };
    let p = state.expectation(&op)?;
    Ok(p.max(0.0))
}
