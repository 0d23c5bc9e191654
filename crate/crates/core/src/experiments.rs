//! Measurement campaigns on the compiled bench: gate truth table, analysis
//! scans of the entangled output, and the two-photon swap/GHZ constructions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bench::{compile_text, pcnot_stage};
use crate::counting::{sample_trace, CountingConfig};
use crate::elements::{analyzer_i, analyzer_ii_effect, ImperfectionSet};
use crate::error::{Error, Result};
use crate::fitting::{fit_malus_weighted, fit_sin_squared, FitResult, Visibility};
use crate::pipeline::Pipeline;
use crate::state::{DensityOp, Ket, State};

/// Prepares the polarization/momentum Bell state on the signal photon.
pub const ENTANGLER_BENCH: &str = "\
source pair
block T idler
hwp 22.5deg signal
pcnot signal
";

pub const SWAP_BENCH: &str = "\
source pair
pcnot signal
mcnot signal
pcnot signal
pcnot idler
mcnot idler
pcnot idler
";

pub const GHZ_BENCH: &str = "\
source pair
mcnot signal
mcnot idler
";

/// Output probabilities of the P-CNOT for each computational input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    /// `probabilities[input][output]`, each row normalized.
    pub probabilities: [[f64; 4]; 4],
    /// Post-selection probability of each input surviving the gate.
    pub row_success: [f64; 4],
}

impl TruthTable {
    pub const LABELS: [&'static str; 4] = ["00", "01", "10", "11"];

    /// Ideal output index for each input.
    pub const fn expected(input: usize) -> usize {
        if input < 2 {
            input
        } else {
            input ^ 1
        }
    }

    /// Probability of the wrong outputs, per row.
    pub fn error_sums(&self) -> [f64; 4] {
        std::array::from_fn(|i| {
            (0..4)
                .filter(|&j| j != Self::expected(i))
                .map(|j| self.probabilities[i][j])
                .sum()
        })
    }

    pub fn mean_error(&self) -> f64 {
        self.error_sums().iter().sum::<f64>() / 4.0
    }
}

pub fn truth_table(imp: &ImperfectionSet) -> Result<TruthTable> {
    imp.validate()?;
    let gate = Pipeline {
        dimension: 4,
        source: None,
        elements: pcnot_stage(imp)?,
        analyzer: None,
    };
    let mut probabilities = [[0.0; 4]; 4];
    let mut row_success = [0.0; 4];
    for (input, row) in probabilities.iter_mut().enumerate() {
        let out = gate.run_from(State::Pure(Ket::basis(2, input)?))?;
        let pops = out.state.to_density().populations();
        let total: f64 = pops.iter().sum();
        for (cell, p) in row.iter_mut().zip(&pops) {
            *cell = p / total;
        }
        row_success[input] = out.success_probability;
    }
    Ok(TruthTable {
        probabilities,
        row_success,
    })
}

/// The signal photon after the entangling bench, with its survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub success_probability: f64,
    /// Reduced two-qubit state of the signal photon.
    pub signal: DensityOp,
}

impl Prepared {
    pub fn from_signal(signal: DensityOp) -> Result<Self> {
        if signal.dim() != 4 {
            return Err(Error::UnsupportedDimension(signal.dim()));
        }
        Ok(Prepared {
            success_probability: 1.0,
            signal,
        })
    }
}

pub fn prepare_entangled(imp: &ImperfectionSet) -> Result<Prepared> {
    let pipeline = compile_text(ENTANGLER_BENCH, imp)?;
    let out = pipeline.run()?;
    Ok(Prepared {
        success_probability: out.success_probability,
        signal: out.state.to_density().partial_trace(&[0, 1])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// Analysis angle θ_A in radians.
    AnalysisAngle,
    /// Scan time in seconds.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub control: f64,
    /// Detection probability conditional on the photon surviving the bench.
    pub probability: f64,
    pub success_probability: f64,
    pub counts: Option<u64>,
}

impl ScanPoint {
    /// Probability per pair of a coincidence at this point.
    pub fn joint_probability(&self) -> f64 {
        self.probability * self.success_probability
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub control: Control,
    pub points: Vec<ScanPoint>,
}

impl ScanTrace {
    pub fn controls(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.control).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.probability).collect()
    }

    /// Sampled counts as floats, if the trace has been sampled.
    pub fn counts(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.counts.map(|c| c as f64)).collect()
    }

    /// Draws counts from the stream of scan `index`.
    pub fn sample(&mut self, cfg: &CountingConfig, index: u64) -> Result<()> {
        let probs: Vec<f64> = self
            .points
            .iter()
            .map(|p| p.joint_probability().clamp(0.0, 1.0))
            .collect();
        let counts = sample_trace(&probs, cfg, index)?;
        for (p, c) in self.points.iter_mut().zip(counts) {
            p.counts = Some(c);
        }
        Ok(())
    }

    /// Counts if sampled, probabilities otherwise.
    pub fn values(&self) -> Vec<f64> {
        self.counts().unwrap_or_else(|| self.probabilities())
    }
}

pub fn polarization_scan(thetas: &[f64], m: usize, imp: &ImperfectionSet) -> Result<ScanTrace> {
    polarization_scan_on(&prepare_entangled(imp)?, thetas, m)
}

/// Analyzer-I scan of an already prepared signal state.
pub fn polarization_scan_on(prep: &Prepared, thetas: &[f64], m: usize) -> Result<ScanTrace> {
    let points = thetas
        .iter()
        .map(|&theta| {
            let a = analyzer_i(theta, m)?;
            let p = prep.signal.expectation(a.matrix().expect("projector"))?;
            Ok(ScanPoint {
                control: theta,
                probability: p.clamp(0.0, 1.0),
                success_probability: prep.success_probability,
                counts: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScanTrace {
        control: Control::AnalysisAngle,
        points,
    })
}

/// Motion of the analysis interferometer's scanning mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    /// Path-length change per second, m/s.
    pub velocity: f64,
    /// Centre wavelength, m.
    pub wavelength: f64,
    /// Path mismatch at `t = 0`, m.
    pub path_offset: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            velocity: 2e-7,
            wavelength: 797e-9,
            path_offset: 0.0,
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.velocity > 0.0 && self.velocity.is_finite()) {
            return Err(Error::OutOfRange {
                name: "velocity",
                value: self.velocity,
            });
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::OutOfRange {
                name: "wavelength",
                value: self.wavelength,
            });
        }
        if !self.path_offset.is_finite() {
            return Err(Error::OutOfRange {
                name: "path_offset",
                value: self.path_offset,
            });
        }
        Ok(())
    }

    pub fn phase(&self, t: f64) -> f64 {
        2.0 * PI * self.velocity * t / self.wavelength
    }

    pub fn mismatch(&self, t: f64) -> f64 {
        self.path_offset + self.velocity * t
    }

    /// Angular frequency of the fitted `sin²(δt + γ)` fringe.
    pub fn fringe_delta(&self) -> f64 {
        PI * self.velocity / self.wavelength
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Default scan times: 0 to 20 s in 101 points.
pub fn default_times() -> Vec<f64> {
    linspace(0.0, 20.0, 101)
}

pub fn interferometer_scan(
    theta_a: f64,
    ts: &[f64],
    settings: &ScanSettings,
    imp: &ImperfectionSet,
) -> Result<ScanTrace> {
    interferometer_scan_on(&prepare_entangled(imp)?, theta_a, ts, settings, imp)
}

/// Analyzer-II scan of an already prepared signal state.
pub fn interferometer_scan_on(
    prep: &Prepared,
    theta_a: f64,
    ts: &[f64],
    settings: &ScanSettings,
    imp: &ImperfectionSet,
) -> Result<ScanTrace> {
    settings.validate()?;
    imp.validate()?;
    let points = ts
        .iter()
        .map(|&t| {
            let effect = analyzer_ii_effect(
                theta_a,
                settings.phase(t),
                imp.bs_reflectivity,
                imp.envelope(settings.mismatch(t)),
            );
            let p = prep.signal.expectation(&effect)?;
            Ok(ScanPoint {
                control: t,
                probability: p.clamp(0.0, 1.0),
                success_probability: prep.success_probability,
                counts: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScanTrace {
        control: Control::Time,
        points,
    })
}

/// Fitted fringe extremes of one interferometer scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub theta: f64,
    pub max: f64,
    pub min: f64,
    pub max_std_error: f64,
    pub min_std_error: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCurve {
    pub points: Vec<VisibilityPoint>,
    /// Whether the extremes are in counts rather than probabilities.
    pub sampled: bool,
}

/// Runs and fits one interferometer scan per analysis angle.
///
/// With a counting config each scan `i` is sampled from the stream seeded by
/// `rng_seed ^ i` and the fit is made on counts.
pub fn visibility_curve(
    thetas: &[f64],
    ts: &[f64],
    settings: &ScanSettings,
    imp: &ImperfectionSet,
    counting: Option<&CountingConfig>,
) -> Result<VisibilityCurve> {
    visibility_curve_on(&prepare_entangled(imp)?, thetas, ts, settings, imp, counting)
}

pub fn visibility_curve_on(
    prep: &Prepared,
    thetas: &[f64],
    ts: &[f64],
    settings: &ScanSettings,
    imp: &ImperfectionSet,
    counting: Option<&CountingConfig>,
) -> Result<VisibilityCurve> {
    let mut points = Vec::with_capacity(thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let mut trace = interferometer_scan_on(prep, theta, ts, settings, imp)?;
        if let Some(cfg) = counting {
            trace.sample(cfg, i as u64)?;
        }
        let fit = fit_sin_squared(ts, &trace.values(), None)?;
        let c = &fit.covariance;
        points.push(VisibilityPoint {
            theta,
            max: fit.max(),
            min: fit.min(),
            max_std_error: (c[0][0] + 2.0 * c[0][1] + c[1][1]).max(0.0).sqrt(),
            min_std_error: fit.std_errors[0],
            fit,
        });
    }
    Ok(VisibilityCurve {
        points,
        sampled: counting.is_some(),
    })
}

/// Malus fits through the fringe maxima and minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFits {
    pub max_fit: FitResult,
    pub min_fit: FitResult,
    pub max_visibility: Visibility,
    pub min_visibility: Visibility,
    /// Analysis angle of the fitted maxima peak, degrees in [0, 180).
    pub center_deg: f64,
    /// Analysis angle of the fitted minima trough, degrees in [0, 180).
    pub trough_deg: f64,
}

pub fn fit_curves(curve: &VisibilityCurve) -> Result<CurveFits> {
    let thetas: Vec<f64> = curve.points.iter().map(|p| p.theta).collect();
    let weights = |se: Vec<f64>| -> Option<Vec<f64>> {
        (curve.sampled && se.iter().all(|&s| s > 0.0)).then(|| se.iter().map(|s| 1.0 / (s * s)).collect())
    };
    let maxima: Vec<f64> = curve.points.iter().map(|p| p.max).collect();
    let minima: Vec<f64> = curve.points.iter().map(|p| p.min).collect();
    let w_max = weights(curve.points.iter().map(|p| p.max_std_error).collect());
    let w_min = weights(curve.points.iter().map(|p| p.min_std_error).collect());
    let max_fit = fit_malus_weighted(&thetas, &maxima, w_max.as_deref())?;
    let min_fit = fit_malus_weighted(&thetas, &minima, w_min.as_deref())?;
    let max_visibility = max_fit.visibility()?;
    let min_visibility = min_fit.visibility()?;
    let center_deg = (PI / 2.0 - max_fit.gamma).rem_euclid(PI).to_degrees();
    let trough_deg = (-min_fit.gamma).rem_euclid(PI).to_degrees();
    Ok(CurveFits {
        max_fit,
        min_fit,
        max_visibility,
        min_visibility,
        center_deg,
        trough_deg,
    })
}

/// Applies P-CNOT, M-CNOT, P-CNOT to each photon of the source pair.
pub fn swap_experiment() -> Result<Ket> {
    run_pure(SWAP_BENCH)
}

/// Applies an M-CNOT to each photon of the source pair.
pub fn ghz_experiment() -> Result<Ket> {
    run_pure(GHZ_BENCH)
}

fn run_pure(bench: &str) -> Result<Ket> {
    let out = compile_text(bench, &ImperfectionSet::ideal())?.run()?;
    match out.state {
        State::Pure(k) => Ok(k),
        State::Mixed(_) => unreachable!("unitary benches stay pure"),
    }
}

/// Momentum section of the idler blocked before coincidence detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    T,
    B,
}

/// Signal momentum distribution `[P(T), P(B)]` in coincidence with the idler.
pub fn momentum_correlation(blocked: Option<Section>) -> Result<[f64; 2]> {
    let bench = match blocked {
        None => "source pair".to_owned(),
        Some(Section::T) => "source pair\nblock T idler".to_owned(),
        Some(Section::B) => "source pair\nblock B idler".to_owned(),
    };
    let out = compile_text(&bench, &ImperfectionSet::ideal())?.run()?;
    let reduced = out.state.to_density().partial_trace(&[1])?;
    Ok([reduced.population(0), reduced.population(1)])
}
