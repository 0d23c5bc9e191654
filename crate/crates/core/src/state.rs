//! State vectors and density operators over the polarization/momentum qubits.
//!
//! A single photon carries two qubits ordered `|P M⟩` (polarization is the
//! control, momentum the target). A photon pair carries four qubits ordered
//! `|P_S M_S P_I M_I⟩`. Qubit 0 is the most significant bit of the basis index,
//! so the label `0110` addresses amplitude 6 of 16.
//!
//! States are always stored normalized. Success probabilities of post-selection
//! travel separately as plain `f64` values.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Tolerance on norms, traces and Hermiticity of stored states.
pub const STATE_TOL: f64 = 1e-12;
/// Tolerance for accepting a matrix as unitary or a projector as idempotent.
pub const OPERATOR_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density operator.
pub const POSITIVITY_TOL: f64 = -1e-10;
/// Post-selection probabilities below this are treated as annihilation.
pub const ANNIHILATION_THRESHOLD: f64 = 1e-15;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Logical labelling of the physical modes.
///
/// `H`, `T` and `R` are logical 0; `V`, `B` and `L` are logical 1. The output
/// momentum modes `R`/`L` denote the same logical qubit as the input `T`/`B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BasisConvention;

impl BasisConvention {
    pub const POLARIZATION: [char; 2] = ['H', 'V'];
    pub const MOMENTUM_INPUT: [char; 2] = ['T', 'B'];
    pub const MOMENTUM_OUTPUT: [char; 2] = ['R', 'L'];

    pub fn polarization_bit(symbol: char) -> Option<usize> {
        Self::POLARIZATION.iter().position(|&s| s == symbol)
    }

    pub fn momentum_bit(symbol: char) -> Option<usize> {
        Self::MOMENTUM_INPUT
            .iter()
            .position(|&s| s == symbol)
            .or_else(|| Self::MOMENTUM_OUTPUT.iter().position(|&s| s == symbol))
    }
}

fn qubit_count(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        16 => Ok(4),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// A normalized pure state of 1, 2 or 4 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: Vec<C64>,
}

impl Ket {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        qubit_count(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Ket {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| c(a)).collect())
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        qubit_count(dim)?;
        if index >= dim {
            return Err(Error::InvalidLabel {
                label: index.to_string(),
                reason: format!("index outside {dim}-dim space"),
            });
        }
        let mut amps = vec![C64::default(); dim];
        amps[index] = c(1.0);
        Ok(Ket { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Ket) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Kronecker product `self ⊗ other`. Supported pairs: 2⊗2 and 4⊗4.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        match (self.dim(), other.dim()) {
            (2, 2) | (4, 4) => {}
            (l, r) => return Err(Error::DimensionMismatch { left: l, right: r }),
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ket::new(amps)
    }

    pub fn to_vector(&self) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(&self.amps)
    }

    fn from_vector_unchecked(v: nalgebra::DVector<C64>) -> Ket {
        Ket {
            amps: v.iter().copied().collect(),
        }
    }

    /// Applies `op` to the listed qubits; `op` must be unitary.
    pub fn apply_unitary(&self, op: &CMatrix, targets: &[usize]) -> Result<Ket> {
        check_unitary(op)?;
        let full = embed(op, targets, self.num_qubits())?;
        Ok(Ket::from_vector_unchecked(&full * self.to_vector()))
    }

    /// Applies a (possibly trace-decreasing) operator and renormalizes.
    /// Returns the success probability alongside the surviving state.
    pub fn filter(&self, op: &CMatrix, targets: &[usize]) -> Result<(f64, Ket)> {
        let full = embed(op, targets, self.num_qubits())?;
        let v = &full * self.to_vector();
        let p = v.norm_squared();
        if p < ANNIHILATION_THRESHOLD {
            return Err(Error::Annihilated {
                probability: p,
                label: String::new(),
            });
        }
        Ok((p, Ket::from_vector_unchecked(v / C64::new(p.sqrt(), 0.0))))
    }

    pub fn to_density(&self) -> DensityOp {
        let v = self.to_vector();
        DensityOp {
            matrix: &v * v.adjoint(),
        }
    }
}

/// Parses a basis label such as `"00"`, `"HT"`, `"VL"` or `"0110"`.
///
/// Even positions are polarization qubits (`0`/`1`/`H`/`V`), odd positions are
/// momentum qubits (`0`/`1`/`T`/`B`/`R`/`L`).
pub fn ket_from_label(label: &str) -> Result<Ket> {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != 2 && chars.len() != 4 {
        return Err(Error::InvalidLabel {
            label: label.to_owned(),
            reason: format!("length {} (expected 2 or 4)", chars.len()),
        });
    }
    let mut index = 0usize;
    for (pos, &ch) in chars.iter().enumerate() {
        let bit = match ch {
            '0' => Some(0),
            '1' => Some(1),
            _ if pos % 2 == 0 => BasisConvention::polarization_bit(ch),
            _ => BasisConvention::momentum_bit(ch),
        }
        .ok_or_else(|| Error::InvalidLabel {
            label: label.to_owned(),
            reason: format!("unknown character `{ch}` at position {pos}"),
        })?;
        index = (index << 1) | bit;
    }
    Ket::basis(chars.len(), index)
}

/// Formats a basis index as a binary label of `num_qubits` digits.
pub fn basis_label(index: usize, num_qubits: usize) -> String {
    format!("{:0width$b}", index, width = num_qubits)
}

pub fn tensor(a: &Ket, b: &Ket) -> Result<Ket> {
    a.tensor(b)
}

pub fn overlap(a: &Ket, b: &Ket) -> Result<C64> {
    a.overlap(b)
}

/// Lifts an operator on `targets` to the full `num_qubits` register.
///
/// `targets[0]` is the most significant qubit of the operator's own index.
pub fn embed(op: &CMatrix, targets: &[usize], num_qubits: usize) -> Result<CMatrix> {
    let k = targets.len();
    let bad = || Error::BadTargets {
        targets: targets.to_vec(),
        num_qubits,
    };
    if k == 0 || op.nrows() != 1 << k || op.ncols() != 1 << k {
        return Err(bad());
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qubits || targets[..i].contains(&t) {
            return Err(bad());
        }
    }
    let dim = 1usize << num_qubits;
    let bit = |idx: usize, q: usize| (idx >> (num_qubits - 1 - q)) & 1;
    let sub = |idx: usize| targets.iter().fold(0usize, |acc, &q| (acc << 1) | bit(idx, q));
    let mask: usize = targets
        .iter()
        .map(|&q| 1usize << (num_qubits - 1 - q))
        .sum();
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        if i & !mask == j & !mask {
            op[(sub(i), sub(j))]
        } else {
            C64::default()
        }
    }))
}

/// Largest entrywise deviation of `U†U` from the identity.
pub fn unitarity_defect(op: &CMatrix) -> f64 {
    let n = op.nrows();
    let prod = op.adjoint() * op;
    (prod - CMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub(crate) fn check_unitary(op: &CMatrix) -> Result<()> {
    if !op.is_square() {
        return Err(Error::NotUnitary(f64::INFINITY));
    }
    let defect = unitarity_defect(op);
    if defect > OPERATOR_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn hermitize(m: CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj) * c(0.5)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub(crate) fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitize(m.clone())
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Checks that `op` is an idempotent projector or satisfies `M†M ≤ 1`.
pub(crate) fn check_measurement(op: &CMatrix) -> Result<()> {
    if !op.is_square() {
        return Err(Error::InvalidMeasurement("operator is not square".into()));
    }
    let idempotent = (op * op - op)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        <= OPERATOR_TOL;
    if idempotent {
        return Ok(());
    }
    let n = op.nrows();
    let slack = CMatrix::identity(n, n) - op.adjoint() * op;
    let lowest = min_eigenvalue(&slack);
    if lowest < -OPERATOR_TOL {
        return Err(Error::InvalidMeasurement(format!(
            "M†M exceeds identity (slack eigenvalue {lowest:.3e})"
        )));
    }
    Ok(())
}

/// A Hermitian, unit-trace, positive operator on 1, 2 or 4 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    matrix: CMatrix,
}

impl DensityOp {
    /// Validates and wraps a matrix.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity("matrix is not square".into()));
        }
        qubit_count(matrix.nrows())?;
        let herm = hermitian_defect(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let lowest = min_eigenvalue(&matrix);
        if lowest < POSITIVITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(DensityOp { matrix })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        qubit_count(dim)?;
        Ok(DensityOp {
            matrix: CMatrix::identity(dim, dim) * c(1.0 / dim as f64),
        })
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights are normalized.
    pub fn mixture(parts: &[(f64, DensityOp)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::ZeroNorm);
        };
        let dim = first.dim();
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if total <= 0.0 || parts.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::InvalidDensity("mixture weights must be non-negative".into()));
        }
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: rho.dim(),
                });
            }
            acc += &rho.matrix * c(w / total);
        }
        Ok(DensityOp { matrix: acc })
    }

    /// Wraps the result of a trace-non-increasing map, renormalizing it.
    pub(crate) fn renormalized(matrix: CMatrix) -> (f64, DensityOp) {
        let m = hermitize(matrix);
        let p = m.trace().re;
        (p, DensityOp { matrix: m * c(1.0 / p) })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Population of basis element `index`.
    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    /// `tr(E ρ)` for an operator `E` on the full register.
    pub fn expectation(&self, op: &CMatrix) -> Result<f64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: op.nrows(),
                right: self.dim(),
            });
        }
        Ok((op * &self.matrix).trace().re)
    }

    pub fn apply_unitary(&self, op: &CMatrix, targets: &[usize]) -> Result<DensityOp> {
        check_unitary(op)?;
        let full = embed(op, targets, self.num_qubits())?;
        Ok(DensityOp {
            matrix: hermitize(&full * &self.matrix * full.adjoint()),
        })
    }

    /// Applies Kraus operators `Σ K ρ K†` and renormalizes.
    pub fn apply_kraus(&self, kraus: &[CMatrix], targets: &[usize]) -> Result<(f64, DensityOp)> {
        let n = self.num_qubits();
        let mut acc = CMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            let full = embed(k, targets, n)?;
            acc += &full * &self.matrix * full.adjoint();
        }
        let p = acc.trace().re;
        if p < ANNIHILATION_THRESHOLD {
            return Err(Error::Annihilated {
                probability: p.max(0.0),
                label: String::new(),
            });
        }
        Ok(Self::renormalized(acc))
    }

    /// Reduced state on the `keep` qubits (kept in ascending order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOp> {
        let n = self.num_qubits();
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.iter().any(|&q| q >= n) {
            return Err(Error::BadTargets {
                targets: keep,
                num_qubits: n,
            });
        }
        let k = keep.len();
        let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
        let sub = |idx: usize| keep.iter().fold(0usize, |acc, &q| (acc << 1) | bit(idx, q));
        let mask: usize = keep.iter().map(|&q| 1usize << (n - 1 - q)).sum();
        let mut out = CMatrix::zeros(1 << k, 1 << k);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i & !mask == j & !mask {
                    out[(sub(i), sub(j))] += self.matrix[(i, j)];
                }
            }
        }
        Ok(DensityOp { matrix: out })
    }
}

/// A state flowing through a pipeline: pure until a mixing channel is applied.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(Ket),
    Mixed(DensityOp),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(k) => k.dim(),
            State::Mixed(r) => r.dim(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn to_density(&self) -> DensityOp {
        match self {
            State::Pure(k) => k.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }

    pub fn as_ket(&self) -> Option<&Ket> {
        match self {
            State::Pure(k) => Some(k),
            State::Mixed(_) => None,
        }
    }

    pub fn expectation(&self, op: &CMatrix) -> Result<f64> {
        match self {
            State::Pure(k) => {
                if op.nrows() != k.dim() {
                    return Err(Error::DimensionMismatch {
                        left: op.nrows(),
                        right: k.dim(),
                    });
                }
                let v = k.to_vector();
                Ok((v.adjoint() * op * &v)[(0, 0)].re)
            }
            State::Mixed(r) => r.expectation(op),
        }
    }
}

impl From<Ket> for State {
    fn from(k: Ket) -> Self {
        State::Pure(k)
    }
}

impl From<DensityOp> for State {
    fn from(r: DensityOp) -> Self {
        State::Mixed(r)
    }
}

pub fn apply_unitary(op: &CMatrix, state: &State, targets: &[usize]) -> Result<State> {
    Ok(match state {
        State::Pure(k) => State::Pure(k.apply_unitary(op, targets)?),
        State::Mixed(r) => State::Mixed(r.apply_unitary(op, targets)?),
    })
}

/// Conditions `rho` on the outcome described by `op` (full-register operator).
///
/// Returns `(tr(P ρ P†), P ρ P† / tr(P ρ P†))`.
pub fn postselect(op: &CMatrix, rho: &DensityOp) -> Result<(f64, DensityOp)> {
    if op.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: op.nrows(),
            right: rho.dim(),
        });
    }
    check_measurement(op)?;
    let out = op * rho.matrix() * op.adjoint();
    let p = out.trace().re;
    if p < ANNIHILATION_THRESHOLD {
        return Err(Error::Annihilated {
            probability: p.max(0.0),
            label: "postselect".into(),
        });
    }
    Ok(DensityOp::renormalized(out))
}

/// `⟨target|ρ|target⟩`.
pub fn fidelity(rho: &DensityOp, target: &Ket) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: target.dim(),
        });
    }
    let v = target.to_vector();
    Ok((v.adjoint() * rho.matrix() * &v)[(0, 0)].re)
}

/// Eigenvalues below this fraction of the largest are dropped when
/// decomposing ρ for the concurrence.
const CONCURRENCE_RANK_CUTOFF: f64 = 1e-13;

/// Wootters concurrence of a two-qubit state.
///
/// ρ is decomposed as `W W†` with subnormalized eigenvectors as the columns of
/// `W`; the λᵢ are then the singular values of `Wᵀ (σy⊗σy) W`.
pub fn concurrence(rho: &DensityOp) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let eig = hermitize(rho.matrix().clone()).symmetric_eigen();
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let columns: Vec<_> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > CONCURRENCE_RANK_CUTOFF * largest)
        .map(|(i, &w)| eig.eigenvectors.column(i) * c(w.sqrt()))
        .collect();
    let w = CMatrix::from_columns(&columns);
    let yy = CMatrix::from_fn(4, 4, |i, j| match (i, j) {
        (0, 3) | (3, 0) => c(-1.0),
        (1, 2) | (2, 1) => c(1.0),
        _ => C64::default(),
    });
    let tau = w.transpose() * yy * &w;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let rest: f64 = lambdas.iter().skip(1).sum();
    Ok((lambdas[0] - rest).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8};

    fn bell() -> Ket {
        Ket::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn theta_state() -> Ket {
        let mut amps = vec![C64::default(); 16];
        amps[0b0110] = c(1.0);
        amps[0b0011] = c(1.0);
        Ket::new(amps).unwrap()
    }

    fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(i, j)] = c(1.0);
        }
        m
    }

    #[test]
    fn labels() {
        assert_eq!(ket_from_label("00").unwrap().amplitudes()[0], c(1.0));
        assert_eq!(ket_from_label("HT").unwrap(), ket_from_label("00").unwrap());
        assert_eq!(ket_from_label("VL").unwrap(), ket_from_label("11").unwrap());
        assert_eq!(ket_from_label("HR").unwrap(), ket_from_label("00").unwrap());
        let k = ket_from_label("0110").unwrap();
        assert_eq!(k.dim(), 16);
        assert_eq!(k.amplitude(6), c(1.0));
        assert!(matches!(ket_from_label("0x"), Err(Error::InvalidLabel { .. })));
        assert!(matches!(ket_from_label("TH"), Err(Error::InvalidLabel { .. })));
        assert!(matches!(ket_from_label("010"), Err(Error::InvalidLabel { .. })));
    }

    #[test]
    fn tensor_products() {
        let zero = Ket::from_real(&[1.0, 0.0]).unwrap();
        let plus = Ket::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(zero.tensor(&zero).unwrap(), ket_from_label("00").unwrap());
        let input = plus.tensor(&zero).unwrap();
        for (a, e) in input.amplitudes().iter().zip([FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]) {
            assert!((a - c(e)).norm() < 1e-15);
        }
        let pair = ket_from_label("01").unwrap().tensor(&ket_from_label("10").unwrap()).unwrap();
        assert_eq!(pair, ket_from_label("0110").unwrap());
        assert!(zero.tensor(&pair).is_err());
    }

    #[test]
    fn projection_overlaps() {
        let out = bell();
        // ⟨Ψ₁(θ=0)| = ⟨00|, ⟨Ψ₂(θ=0)| = ⟨01|
        let psi1 = ket_from_label("00").unwrap();
        let psi2 = ket_from_label("01").unwrap();
        assert!((psi1.overlap(&out).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(psi2.overlap(&out).unwrap().norm(), 0.0);
        assert!(psi1.overlap(&theta_state()).is_err());
    }

    #[test]
    fn unitary_application() {
        let k = ket_from_label("10").unwrap();
        assert_eq!(k.apply_unitary(&cnot(), &[0, 1]).unwrap(), ket_from_label("11").unwrap());
        let id = CMatrix::identity(4, 4);
        assert_eq!(bell().apply_unitary(&id, &[0, 1]).unwrap(), bell());
        // Control P_S = 0, so the signal pair is untouched.
        let pair = ket_from_label("0110").unwrap();
        assert_eq!(pair.apply_unitary(&cnot(), &[0, 1]).unwrap(), pair);
        // Idler control P_I = 1 flips M_I.
        assert_eq!(
            pair.apply_unitary(&cnot(), &[2, 3]).unwrap(),
            ket_from_label("0111").unwrap()
        );
        let mut bad = cnot();
        bad[(0, 0)] = c(2.0);
        assert!(matches!(pair.apply_unitary(&bad, &[0, 1]), Err(Error::NotUnitary(_))));
        assert!(matches!(pair.apply_unitary(&cnot(), &[0, 0]), Err(Error::BadTargets { .. })));
        assert!(matches!(pair.apply_unitary(&cnot(), &[3, 4]), Err(Error::BadTargets { .. })));
    }

    #[test]
    fn embedding_matches_kron() {
        // X on qubit 1 of 2 equals I ⊗ X.
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let full = embed(&x, &[1], 2).unwrap();
        let kron = CMatrix::identity(2, 2).kronecker(&x);
        assert_eq!(full, kron);
        // Reversed target order swaps the roles of control and target.
        let rev = embed(&cnot(), &[1, 0], 2).unwrap();
        let k = ket_from_label("01").unwrap();
        assert_eq!(
            Ket::from_vector_unchecked(rev * k.to_vector()),
            ket_from_label("11").unwrap()
        );
    }

    fn momentum_projector(bit: usize) -> CMatrix {
        let mut p = CMatrix::zeros(2, 2);
        p[(bit, bit)] = c(1.0);
        embed(&p, &[1], 2).unwrap()
    }

    #[test]
    fn postselection() {
        let rho = ket_from_label("00").unwrap().to_density();
        let (p, out) = postselect(&momentum_projector(0), &rho).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(out, rho);

        let input = Ket::from_real(&[1.0, 0.0, 1.0, 0.0]).unwrap().to_density();
        assert!(matches!(
            postselect(&momentum_projector(1), &input),
            Err(Error::Annihilated { .. })
        ));

        let (p, out) = postselect(&momentum_projector(0), &bell().to_density()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((fidelity(&out, &ket_from_label("00").unwrap()).unwrap() - 1.0).abs() < 1e-15);

        let mut too_big = CMatrix::identity(4, 4) * c(1.5);
        too_big[(0, 0)] = c(1.0);
        assert!(matches!(
            postselect(&too_big, &rho),
            Err(Error::InvalidMeasurement(_))
        ));
    }

    #[test]
    fn concurrence_values() {
        assert!((concurrence(&bell().to_density()).unwrap() - 1.0).abs() < 1e-12);
        let mix = DensityOp::mixture(&[
            (0.5, ket_from_label("00").unwrap().to_density()),
            (0.5, ket_from_label("11").unwrap().to_density()),
        ])
        .unwrap();
        assert!(concurrence(&mix).unwrap().abs() < 1e-12);
        let partial =
            Ket::from_real(&[FRAC_PI_8.cos(), 0.0, 0.0, FRAC_PI_8.sin()]).unwrap();
        assert!((concurrence(&partial.to_density()).unwrap() - FRAC_PI_4.sin()).abs() < 1e-12);
        // Werner state p|Φ+⟩⟨Φ+| + (1-p) I/4 has C = max(0, (3p-1)/2).
        for p in [0.2, 1.0 / 3.0, 0.5, 0.8] {
            let werner = DensityOp::mixture(&[
                (p, bell().to_density()),
                (1.0 - p, DensityOp::maximally_mixed(2).unwrap()),
            ])
            .unwrap();
            let expected = ((3.0 * p - 1.0) / 2.0).max(0.0);
            assert!((concurrence(&werner).unwrap() - expected).abs() < 1e-10, "p={p}");
        }
        assert!(concurrence(&DensityOp::maximally_mixed(4).unwrap()).is_err());
    }

    #[test]
    fn fidelities() {
        let theta = theta_state();
        assert!((fidelity(&theta.to_density(), &theta).unwrap() - 1.0).abs() < 1e-15);
        let f = fidelity(&ket_from_label("0110").unwrap().to_density(), &theta).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        let f = fidelity(&DensityOp::maximally_mixed(4).unwrap(), &theta).unwrap();
        assert!((f - 1.0 / 16.0).abs() < 1e-15);
        assert!(fidelity(&bell().to_density(), &theta).is_err());
    }

    #[test]
    fn density_validation() {
        let mut m = bell().to_density().matrix().clone();
        m[(0, 0)] = c(0.7);
        assert!(DensityOp::new(m).is_err());
        let mut m = CMatrix::identity(4, 4) * c(0.25);
        m[(0, 1)] = c(0.3);
        assert!(DensityOp::new(m).is_err());
        let neg = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.1),
            c(-0.1),
            c(0.0),
            c(0.0),
        ]));
        assert!(DensityOp::new(neg).is_err());
        assert!(DensityOp::new(bell().to_density().matrix().clone()).is_ok());
    }

    #[test]
    fn partial_traces() {
        let theta = theta_state().to_density();
        let signal_m = theta.partial_trace(&[1]).unwrap();
        assert!((signal_m.population(0) - 0.5).abs() < 1e-15);
        assert!((signal_m.population(1) - 0.5).abs() < 1e-15);
        let rho_b = bell().to_density().partial_trace(&[0]).unwrap();
        assert_eq!(rho_b.matrix()[(0, 1)], C64::default());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn ket4() -> impl Strategy<Value = Ket> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
                .prop_filter_map("nonzero", |v| {
                    Ket::new(v.into_iter().map(|(r, i)| C64::new(r, i)).collect()).ok()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn concurrence_of_schmidt_states(theta in -10.0f64..10.0) {
                let k = Ket::from_real(&[theta.cos(), 0.0, 0.0, theta.sin()]).unwrap();
                let conc = concurrence(&k.to_density()).unwrap();
                prop_assert!((conc - (2.0 * theta).sin().abs()).abs() < 1e-10);
            }

            #[test]
            fn concurrence_matches_pure_state_formula(k in ket4()) {
                // C(ψ) = 2|ad − bc| for ψ = (a, b, c, d).
                let a = k.amplitudes();
                let expected = 2.0 * (a[0] * a[3] - a[1] * a[2]).norm();
                let conc = concurrence(&k.to_density()).unwrap();
                prop_assert!((conc - expected).abs() < 1e-10);
            }

            #[test]
            fn overlap_is_conjugate_symmetric(a in ket4(), b in ket4()) {
                prop_assert_eq!(a.overlap(&b).unwrap(), b.overlap(&a).unwrap().conj());
            }

            #[test]
            fn unitaries_preserve_norm_and_trace(k in ket4(), t in 0.0f64..6.3, phi in 0.0f64..6.3) {
                let u = CMatrix::from_row_slice(2, 2, &[
                    c(t.cos()), -C64::from_polar(1.0, phi) * t.sin(),
                    c(t.sin()), C64::from_polar(1.0, phi) * t.cos(),
                ]);
                let out = k.apply_unitary(&u, &[1]).unwrap();
                prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
                let rho = DensityOp::mixture(&[(0.3, k.to_density()), (0.7, DensityOp::maximally_mixed(2).unwrap())]).unwrap();
                let evolved = rho.apply_unitary(&u, &[0]).unwrap();
                prop_assert!((evolved.trace() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn complete_projectors_sum_to_one(k in ket4()) {
                let rho = k.to_density();
                let total: f64 = (0..4)
                    .map(|i| {
                        let mut p = CMatrix::zeros(4, 4);
                        p[(i, i)] = c(1.0);
                        postselect(&p, &rho).map(|(prob, _)| prob).unwrap_or(0.0)
                    })
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
