//! Optical elements of the bench as operators on the qubit register.
//!
//! Every constructor returns an [`Element`] addressing qubits of a single photon
//! (`0` = polarization, `1` = momentum). [`Element::on_photon`] shifts the
//! targets onto the idler (`2`, `3`) in a two-photon register.


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{self, c, CMatrix, DensityOp, C64, OPERATOR_TOL};

/// Which photon of a down-converted pair an element acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Photon {
    Signal,
    Idler,
}

impl Photon {
    pub fn qubit_offset(self) -> usize {
        match self {
            Photon::Signal => 0,
            Photon::Idler => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Photon::Signal => "signal",
            Photon::Idler => "idler",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Unitary(CMatrix),
    /// Kraus operators; trace-decreasing sets model loss and are renormalized
    /// under single-photon post-selection.
    Channel(Vec<CMatrix>),
    /// A projector or measurement operator that conditions the state.
    PostSelect(CMatrix),
    /// A POVM effect whose expectation value is the detection probability.
    Detection(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub targets: Vec<usize>,
    pub label: String,
}

impl Element {
    /// Validates the payload against its kind.
    pub fn new(kind: ElementKind, targets: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        match &kind {
            ElementKind::Unitary(u) => state::check_unitary(u)?,
            ElementKind::Channel(ks) => {
                let n = ks.first().map_or(0, |k| k.nrows());
                let mut sum = CMatrix::zeros(n, n);
                for k in ks {
                    sum += k.adjoint() * k;
                }
                let slack = CMatrix::identity(n, n) - sum;
                if state::min_eigenvalue(&slack) < -OPERATOR_TOL {
                    return Err(Error::InvalidMeasurement(
                        "Kraus operators sum above identity".into(),
                    ));
                }
            }
            ElementKind::PostSelect(m) => state::check_measurement(m)?,
            ElementKind::Detection(e) => {
                let n = e.nrows();
                if state::min_eigenvalue(e) < -OPERATOR_TOL
                    || state::min_eigenvalue(&(CMatrix::identity(n, n) - e)) < -OPERATOR_TOL
                {
                    return Err(Error::InvalidMeasurement("effect outside [0, 1]".into()));
                }
            }
        }
        Ok(Element {
            kind,
            targets,
            label: label.into(),
        })
    }

    /// Moves the element onto the given photon of a pair register.
    pub fn on_photon(mut self, photon: Photon) -> Self {
        let offset = photon.qubit_offset();
        for t in &mut self.targets {
            *t = *t % 2 + offset;
        }
        self
    }

    pub fn is_analyzer(&self) -> bool {
        matches!(self.kind, ElementKind::Detection(_)) || self.label.starts_with("analyzer")
    }

    /// The operator payload if the element is a single matrix.
    pub fn matrix(&self) -> Option<&CMatrix> {
        match &self.kind {
            ElementKind::Unitary(m) | ElementKind::PostSelect(m) | ElementKind::Detection(m) => {
                Some(m)
            }
            ElementKind::Channel(_) => None,
        }
    }
}

fn real_matrix(n: usize, rows: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(n, n, rows.iter().map(|&x| c(x)))
}

/// Bench imperfections. The ideal set reproduces the textbook gate.
///
/// All transmissions are intensity transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionSet {
    /// Two-pass transmission of the Sagnac PBS for H light.
    pub pbs_transmission_h: f64,
    /// Compensation plate transmissions.
    pub plate_transmission_h: f64,
    pub plate_transmission_v: f64,
    /// Reflectivity of the analysis beam splitter.
    pub bs_reflectivity: f64,
    /// Coherence length in meters; `None` is infinite.
    pub coherence_length: Option<f64>,
    /// Peak fringe contrast of the analysis interferometer (spatial mode overlap).
    pub mode_overlap: f64,
    /// Probability that the image rotation fails to route the momentum mode
    /// correctly for a photon circulating with H (clockwise) or V polarization.
    pub routing_error_h: f64,
    pub routing_error_v: f64,
}

impl Default for ImperfectionSet {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ImperfectionSet {
    pub const fn ideal() -> Self {
        ImperfectionSet {
            pbs_transmission_h: 1.0,
            plate_transmission_h: 1.0,
            plate_transmission_v: 1.0,
            bs_reflectivity: 0.5,
            coherence_length: None,
            mode_overlap: 1.0,
            routing_error_h: 0.0,
            routing_error_v: 0.0,
        }
    }

    /// A PBS with the given H transmission and a plate that balances it up to a
    /// residual: the net V/H transmission ratio through the gate is `1 - residual`.
    pub fn compensated(pbs_transmission_h: f64, residual: f64) -> Self {
        ImperfectionSet {
            pbs_transmission_h,
            plate_transmission_h: 1.0,
            plate_transmission_v: pbs_transmission_h * (1.0 - residual),
            ..Self::ideal()
        }
    }

    /// Parameters reproducing the reported gate and analysis figures.
    ///
    /// Produced by [`crate::calibration::calibrate_bench`]: PBS two-pass H
    /// transmission 0.90 balanced by the plate, coherence length of the 1 nm
    /// filter at 797 nm. `tests/calibration.rs` re-derives every value.
    pub const fn calibrated() -> Self {
        ImperfectionSet {
            pbs_transmission_h: 0.90,
            plate_transmission_h: 1.0,
            plate_transmission_v: 0.9,
            bs_reflectivity: CALIBRATED_REFLECTIVITY,
            coherence_length: Some(CALIBRATED_COHERENCE_LENGTH),
            mode_overlap: CALIBRATED_MODE_OVERLAP,
            routing_error_h: CALIBRATED_ROUTING_ERROR_H,
            routing_error_v: CALIBRATED_ROUTING_ERROR_V,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::OutOfRange { name, value: v })
            }
        };
        unit("pbs_transmission_h", self.pbs_transmission_h)?;
        unit("plate_transmission_h", self.plate_transmission_h)?;
        unit("plate_transmission_v", self.plate_transmission_v)?;
        unit("bs_reflectivity", self.bs_reflectivity)?;
        unit("mode_overlap", self.mode_overlap)?;
        unit("routing_error_h", self.routing_error_h)?;
        unit("routing_error_v", self.routing_error_v)?;
        if let Some(l) = self.coherence_length {
            if !(l > 0.0) {
                return Err(Error::OutOfRange {
                    name: "coherence_length",
                    value: l,
                });
            }
        }
        Ok(())
    }

    /// Fringe contrast of the analysis interferometer at path mismatch `delta`.
    pub fn envelope(&self, delta: f64) -> f64 {
        let decay = match self.coherence_length {
            Some(l) => (-(delta / l).powi(2)).exp(),
            None => 1.0,
        };
        self.mode_overlap * decay
    }
}

pub const CALIBRATED_ROUTING_ERROR_H: f64 = 0.019176107106113706;
pub const CALIBRATED_ROUTING_ERROR_V: f64 = 0.009907312049426766;
pub const CALIBRATED_REFLECTIVITY: f64 = 0.48368595155484384;
pub const CALIBRATED_MODE_OVERLAP: f64 = 0.9083667747582069;
/// `λ₀²/Δλ` for 797 nm and 1 nm.
pub const CALIBRATED_COHERENCE_LENGTH: f64 = 0.0006352089999999999;

/// CNOT with polarization control and momentum target.
pub fn pcnot() -> Element {
    let m = real_matrix(
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    Element::new(ElementKind::Unitary(m), vec![0, 1], "pcnot").expect("permutation is unitary")
}

/// CNOT with momentum control and polarization target (45° HWP in the B beam).
pub fn mcnot() -> Element {
    let m = real_matrix(
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        ],
    );
    Element::new(ElementKind::Unitary(m), vec![0, 1], "mcnot").expect("permutation is unitary")
}

/// Half-wave plate with its fast axis at physical angle `theta` (radians).
pub fn hwp(theta: f64) -> Element {
    let (s, co) = (2.0 * theta).sin_cos();
    let m = real_matrix(2, &[co, s, s, -co]);
    Element::new(ElementKind::Unitary(m), vec![0], format!("hwp({theta})"))
        .expect("reflection matrix is unitary")
}

/// Polarization-dependent loss with amplitude transmissions `t_h`, `t_v`.
pub fn attenuator(t_h: f64, t_v: f64) -> Result<Element> {
    for (name, v) in [("t_h", t_h), ("t_v", t_v)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    let m = real_matrix(2, &[t_h, 0.0, 0.0, t_v]);
    Element::new(
        ElementKind::Channel(vec![m]),
        vec![0],
        format!("attenuator({t_h}, {t_v})"),
    )
}

/// Polarization-conditioned momentum bit flip with probabilities `q_h`, `q_v`.
pub fn routing_error(q_h: f64, q_v: f64) -> Result<Element> {
    for (name, v) in [("routing_error_h", q_h), ("routing_error_v", q_v)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    let (kh, kv) = ((1.0 - q_h).sqrt(), (1.0 - q_v).sqrt());
    let (fh, fv) = (q_h.sqrt(), q_v.sqrt());
    let keep = real_matrix(
        4,
        &[
            kh, 0.0, 0.0, 0.0, //
            0.0, kh, 0.0, 0.0, //
            0.0, 0.0, kv, 0.0, //
            0.0, 0.0, 0.0, kv,
        ],
    );
    let flip = real_matrix(
        4,
        &[
            0.0, fh, 0.0, 0.0, //
            fh, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, fv, //
            0.0, 0.0, fv, 0.0,
        ],
    );
    Element::new(
        ElementKind::Channel(vec![keep, flip]),
        vec![0, 1],
        format!("routing_error({q_h}, {q_v})"),
    )
}

/// Blocks the momentum section `blocked_bit` (0 = T, 1 = B) of `photon`,
/// passing the complementary section.
pub fn beam_block(blocked_bit: usize, photon: Photon) -> Result<Element> {
    if blocked_bit > 1 {
        return Err(Error::OutOfRange {
            name: "momentum_bit",
            value: blocked_bit as f64,
        });
    }
    let mut p = CMatrix::zeros(2, 2);
    p[(1 - blocked_bit, 1 - blocked_bit)] = c(1.0);
    let section = if blocked_bit == 0 { 'T' } else { 'B' };
    Ok(Element::new(
        ElementKind::PostSelect(p),
        vec![1],
        format!("block({section}, {})", photon.name()),
    )?
    .on_photon(photon))
}

/// Projector onto `[cos θ_A |0⟩ + sin θ_A |1⟩]_C ⊗ |m⟩_T`.
pub fn analyzer_i(theta_a: f64, m: usize) -> Result<Element> {
    if m > 1 {
        return Err(Error::OutOfRange {
            name: "m",
            value: m as f64,
        });
    }
    let (s, co) = theta_a.sin_cos();
    let mut v = [0.0; 4];
    v[m] = co;
    v[2 + m] = s;
    let p = CMatrix::from_fn(4, 4, |i, j| c(v[i] * v[j]));
    Element::new(
        ElementKind::PostSelect(p),
        vec![0, 1],
        format!("analyzer1({theta_a}, {m})"),
    )
}

/// POVM effect of the second analysis stage: polarization projection onto
/// `cos θ_A |0⟩ + sin θ_A |1⟩` followed by recombination of the momentum modes
/// on a beam splitter of reflectivity `r` with relative phase `phi` and fringe
/// contrast `contrast`.
pub fn analyzer_ii_effect(theta_a: f64, phi: f64, r: f64, contrast: f64) -> CMatrix {
    let (s, co) = theta_a.sin_cos();
    let pol = real_matrix(2, &[co * co, co * s, co * s, s * s]);
    let cross = (r * (1.0 - r)).sqrt() * contrast;
    let mom = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(1.0 - r),
            C64::from_polar(cross, -phi),
            C64::from_polar(cross, phi),
            c(r),
        ],
    );
    pol.kronecker(&mom)
}

/// Detection element for the second analysis stage at path mismatch `delta`.
pub fn analyzer_ii(theta_a: f64, phi: f64, imp: &ImperfectionSet, delta: f64) -> Result<Element> {
    let effect = analyzer_ii_effect(theta_a, phi, imp.bs_reflectivity, imp.envelope(delta));
    Element::new(
        ElementKind::Detection(effect),
        vec![0, 1],
        format!("analyzer2({theta_a}, {phi}, {delta})"),
    )
}

/// Detection probability of the second analysis stage for a one-photon state.
///
/// `p = (1−r)·p₀ + r·p₁ + 2√(r(1−r))·γ(Δ)·Re(e^{iφ}·c)` with `p₀`, `p₁`, `c`
/// the populations and coherence of the polarization-projected momentum qubit.
pub fn analyzer_ii_prob(
    rho: &DensityOp,
    theta_a: f64,
    phi: f64,
    imp: &ImperfectionSet,
    delta: f64,
) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    imp.validate()?;
    let effect = analyzer_ii_effect(theta_a, phi, imp.bs_reflectivity, imp.envelope(delta));
    rho.expectation(&effect)
}

/// `L_c = λ₀² / Δλ`.
pub fn coherence_length(lambda_0: f64, delta_lambda: f64) -> Result<f64> {
    if !(lambda_0 > 0.0) {
        return Err(Error::OutOfRange {
            name: "lambda_0",
            value: lambda_0,
        });
    }
    if !(delta_lambda > 0.0) {
        return Err(Error::OutOfRange {
            name: "delta_lambda",
            value: delta_lambda,
        });
    }
    Ok(lambda_0 * lambda_0 / delta_lambda)
}

/// Physical HWP angle that rotates polarization by `rotation` radians.
pub fn hwp_for_rotation(rotation: f64) -> f64 {
    rotation / 2.0
}
