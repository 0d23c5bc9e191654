//! Least-squares fits of `α + β sin²(δt + γ)` and fringe visibilities.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 200;
pub const PARAMETER_TOL: f64 = 1e-10;
const LAMBDA_CEILING: f64 = 1e10;
const GAMMA_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("length mismatch: {xs} abscissae, {ys} ordinates, {weights} weights")]
    LengthMismatch { xs: usize, ys: usize, weights: usize },
    #[error("non-finite input at index {0}")]
    NonFinite(usize),
    #[error("invalid weight at index {0}")]
    InvalidWeight(usize),
    #[error("abscissae span zero width")]
    ZeroSpan,
    #[error("visibility undefined for a degenerate fit")]
    UndefinedVisibility,
}

/// Parameters of `α + β sin²(δt + γ)` in canonical form: `β ≥ 0`, `δ ≥ 0`,
/// `γ ∈ [0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Standard errors in (α, β, δ, γ) order. Zero for a fixed δ.
    pub std_errors: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub converged: bool,
    /// Constant input; only α is meaningful.
    pub degenerate: bool,
    pub iterations: usize,
    pub delta_fixed: bool,
}

impl FitResult {
    pub fn params(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.delta, self.gamma]
    }

    pub fn model(&self, t: f64) -> f64 {
        model(&self.params(), t)
    }

    /// Fitted maximum `α + β`.
    pub fn max(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Fitted minimum `α`.
    pub fn min(&self) -> f64 {
        self.alpha
    }

    pub fn visibility(&self) -> Result<Visibility, FitError> {
        visibility(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub std_error: f64,
}

fn model(p: &[f64; 4], t: f64) -> f64 {
    p[0] + p[1] * (p[2] * t + p[3]).sin().powi(2)
}

fn check_inputs(xs: &[f64], ys: &[f64], weights: Option<&[f64]>, needed: usize) -> Result<Vec<f64>, FitError> {
    let nw = weights.map_or(ys.len(), <[f64]>::len);
    if xs.len() != ys.len() || nw != ys.len() {
        return Err(FitError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
            weights: nw,
        });
    }
    if ys.len() < needed {
        return Err(FitError::TooFewPoints {
            needed,
            found: ys.len(),
        });
    }
    if let Some(i) = (0..ys.len()).find(|&i| !xs[i].is_finite() || !ys[i].is_finite()) {
        return Err(FitError::NonFinite(i));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => ys.iter().map(|&y| 1.0 / y.max(1.0)).collect(),
    };
    if let Some(i) = w.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(FitError::InvalidWeight(i));
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(FitError::InvalidWeight(0));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi > lo) {
        return Err(FitError::ZeroSpan);
    }
    Ok(w)
}

struct Problem<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    sqrt_w: Vec<f64>,
    fixed_delta: Option<f64>,
    scales: [f64; 4],
}

impl Problem<'_> {
    fn free(&self) -> usize {
        if self.fixed_delta.is_some() {
            3
        } else {
            4
        }
    }

    fn full(&self, q: &[f64]) -> [f64; 4] {
        match self.fixed_delta {
            Some(d) => [q[0], q[1], d, q[2]],
            None => [q[0], q[1], q[2], q[3]],
        }
    }

    fn reduce(&self, p: [f64; 4]) -> Vec<f64> {
        match self.fixed_delta {
            Some(_) => vec![p[0], p[1], p[3]],
            None => p.to_vec(),
        }
    }

    fn scale(&self, j: usize) -> f64 {
        match (self.fixed_delta, j) {
            (Some(_), 2) => self.scales[3],
            _ => self.scales[j],
        }
    }

    fn residuals(&self, q: &[f64]) -> DVector<f64> {
        let p = self.full(q);
        DVector::from_iterator(
            self.ys.len(),
            (0..self.ys.len()).map(|i| self.sqrt_w[i] * (self.ys[i] - model(&p, self.xs[i]))),
        )
    }

    fn cost(&self, q: &[f64]) -> f64 {
        self.residuals(q).norm_squared()
    }

    /// Central-difference Jacobian of the weighted model.
    fn jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let n = self.ys.len();
        let k = self.free();
        let mut jac = DMatrix::zeros(n, k);
        let mut qp = q.to_vec();
        for j in 0..k {
            let h = 6e-6 * q[j].abs().max(self.scale(j));
            qp[j] = q[j] + h;
            let up = self.full(&qp);
            qp[j] = q[j] - h;
            let down = self.full(&qp);
            qp[j] = q[j];
            for i in 0..n {
                let d = model(&up, self.xs[i]) - model(&down, self.xs[i]);
                jac[(i, j)] = self.sqrt_w[i] * d / (2.0 * h);
            }
        }
        jac
    }

    /// Levenberg–Marquardt from `q`. Returns (params, cost, converged, iterations).
    fn solve(&self, mut q: Vec<f64>) -> (Vec<f64>, f64, bool, usize) {
        let k = self.free();
        let mut cost = self.cost(&q);
        let mut lambda = 1e-3;
        let mut converged = cost == 0.0;
        let mut iterations = 0;
        while !converged && iterations < MAX_ITERATIONS {
            iterations += 1;
            let jac = self.jacobian(&q);
            let r = self.residuals(&q);
            let a = jac.transpose() * &jac;
            let g = jac.transpose() * r;
            loop {
                let mut damped = a.clone();
                for j in 0..k {
                    damped[(j, j)] += lambda * a[(j, j)].max(1e-300);
                }
                let step = damped.lu().solve(&g);
                if let Some(step) = step.filter(|s| s.iter().all(|x| x.is_finite())) {
                    let trial: Vec<f64> = q.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    let trial_cost = self.cost(&trial);
                    if trial_cost < cost {
                        let rel = (0..k)
                            .map(|j| step[j].abs() / q[j].abs().max(self.scale(j)))
                            .fold(0.0, f64::max);
                        q = trial;
                        cost = trial_cost;
                        lambda = (lambda / 10.0).max(1e-12);
                        converged = rel < PARAMETER_TOL || cost == 0.0;
                        break;
                    }
                }
                lambda *= 10.0;
                if lambda > LAMBDA_CEILING {
                    // No downhill step at any damping: a numerical minimum.
                    converged = true;
                    break;
                }
            }
        }
        (q, cost, converged, iterations)
    }
}

fn canonical(mut p: [f64; 4]) -> [f64; 4] {
    if p[1] < 0.0 {
        p[0] += p[1];
        p[1] = -p[1];
        p[3] += PI / 2.0;
    }
    if p[2] < 0.0 {
        p[2] = -p[2];
        p[3] = -p[3];
    }
    p[3] = p[3].rem_euclid(PI);
    if p[3] >= PI {
        p[3] = 0.0;
    }
    p
}

/// Angular frequency of the strongest nonzero periodogram component.
fn dominant_frequency(xs: &[f64], ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let power = |omega: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &y) in xs.iter().zip(ys) {
            let (s, c) = (omega * t).sin_cos();
            re += (y - mean) * c;
            im += (y - mean) * s;
        }
        re * re + im * im
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    let typical = gaps[gaps.len() / 2];
    let step = 2.0 * PI / (16.0 * span);
    let nyquist = PI / typical;
    let count = ((nyquist / step) as usize).clamp(16, 50_000);
    let (mut best, mut best_p) = (step, f64::NEG_INFINITY);
    for i in 1..=count {
        let w = i as f64 * step;
        let p = power(w);
        if p > best_p {
            best = w;
            best_p = p;
        }
    }
    // Golden-section refinement inside one grid cell either side.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best - step).max(step * 0.5), best + step);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn degenerate_result(ys: &[f64], w: &[f64], fixed_delta: Option<f64>) -> FitResult {
    let wsum: f64 = w.iter().sum();
    let alpha = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let rss = ys.iter().zip(w).map(|(y, w)| w * (y - alpha).powi(2)).sum();
    FitResult {
        alpha,
        beta: 0.0,
        delta: fixed_delta.unwrap_or(0.0),
        gamma: 0.0,
        std_errors: [0.0; 4],
        covariance: [[0.0; 4]; 4],
        rss,
        converged: true,
        degenerate: true,
        iterations: 0,
        delta_fixed: fixed_delta.is_some(),
    }
}

fn fit(xs: &[f64], ys: &[f64], w: Vec<f64>, fixed_delta: Option<f64>) -> FitResult {
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let y_scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if hi - lo <= 1e-12 * y_scale {
        return degenerate_result(ys, &w, fixed_delta);
    }

    let delta0 = fixed_delta.unwrap_or_else(|| 0.5 * dominant_frequency(xs, ys));
    let mut problem = Problem {
        xs,
        ys,
        sqrt_w: w.iter().map(|x| x.sqrt()).collect(),
        fixed_delta,
        scales: [y_scale, y_scale, delta0.abs().max(f64::MIN_POSITIVE), 1.0],
    };
    let (alpha0, beta0) = (lo, hi - lo);
    let gamma0 = (0..GAMMA_GRID)
        .map(|i| PI * i as f64 / GAMMA_GRID as f64)
        .map(|g| (g, problem.cost(&problem.reduce([alpha0, beta0, delta0, g]))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(g, _)| g)
        .unwrap_or(0.0);

    let start = problem.reduce([alpha0, beta0, delta0, gamma0]);
    let (q, rss, converged, iterations) = problem.solve(start);
    let p = canonical(problem.full(&q));
    problem.scales[2] = p[2].abs().max(f64::MIN_POSITIVE);

    // Covariance at the canonical point.
    let q = problem.reduce(p);
    let k = problem.free();
    let dof = (ys.len() - k) as f64;
    let jac = problem.jacobian(&q);
    let normal = jac.transpose() * &jac;
    let free_cov = normal
        .try_inverse()
        .map(|inv| inv * (rss / dof))
        .unwrap_or_else(|| DMatrix::from_element(k, k, f64::INFINITY));
    let index: Vec<usize> = if fixed_delta.is_some() { vec![0, 1, 3] } else { vec![0, 1, 2, 3] };
    let mut covariance = [[0.0; 4]; 4];
    for (a, &i) in index.iter().enumerate() {
        for (b, &j) in index.iter().enumerate() {
            covariance[i][j] = free_cov[(a, b)];
        }
    }
    let std_errors = std::array::from_fn(|i| covariance[i][i].max(0.0).sqrt());

    FitResult {
        alpha: p[0],
        beta: p[1],
        delta: p[2],
        gamma: p[3],
        std_errors,
        covariance,
        rss,
        converged,
        degenerate: false,
        iterations,
        delta_fixed: fixed_delta.is_some(),
    }
}

/// Fits `α + β sin²(δt + γ)` to a scan trace.
///
/// Weights default to `1/max(y, 1)`. Non-convergence is reported through
/// [`FitResult::converged`] with the best point found.
pub fn fit_sin_squared(ts: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<FitResult, FitError> {
    let w = check_inputs(ts, ys, weights, 8)?;
    Ok(fit(ts, ys, w, None))
}

/// Fits `α + β sin²(θ + γ)` (frequency fixed to one) to an angle scan.
pub fn fit_malus(thetas: &[f64], ys: &[f64]) -> Result<FitResult, FitError> {
    fit_malus_weighted(thetas, ys, None)
}

pub fn fit_malus_weighted(thetas: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<FitResult, FitError> {
    let w = check_inputs(thetas, ys, weights, 5)?;
    Ok(fit(thetas, ys, w, Some(1.0)))
}

/// `V = β / (2α + β)` with a first-order standard error from the fit covariance.
///
/// The value is clamped to `[0, 1]`.
pub fn visibility(fit: &FitResult) -> Result<Visibility, FitError> {
    let denom = 2.0 * fit.alpha + fit.beta;
    if fit.degenerate || !(denom > 0.0) {
        return Err(FitError::UndefinedVisibility);
    }
    let value = fit.beta / denom;
    let grad = [-2.0 * fit.beta / (denom * denom), 2.0 * fit.alpha / (denom * denom)];
    let c = &fit.covariance;
    let var = grad[0] * grad[0] * c[0][0] + 2.0 * grad[0] * grad[1] * c[0][1] + grad[1] * grad[1] * c[1][1];
    Ok(Visibility {
        value: value.clamp(0.0, 1.0),
        std_error: var.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CountSampler;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn synth(p: [f64; 4], ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| model(&p, t)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn noiseless_round_trip() {
        let truth = [100.0, 900.0, 0.5, 0.3];
        let ts = grid(0.0, 30.0, 200);
        let f = fit_sin_squared(&ts, &synth(truth, &ts), None).unwrap();
        assert!(f.converged && !f.degenerate);
        for (got, want) in f.params().iter().zip(truth) {
            assert!(rel(*got, want) < 1e-6, "{:?}", f.params());
        }
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let ts = grid(0.0, 10.0, 20);
        let f = fit_sin_squared(&ts, &[5.0; 20], None).unwrap();
        assert!(f.degenerate);
        assert!((f.alpha - 5.0).abs() < 1e-12 && f.beta == 0.0);
        assert_eq!(visibility(&f), Err(FitError::UndefinedVisibility));
        let g = fit_malus(&grid(0.0, 3.0, 7), &[2.0; 7]).unwrap();
        assert!(g.degenerate);
    }

    #[test]
    fn malus_canonical_phases() {
        let th = grid(0.0, PI, 181);
        let cos2: Vec<f64> = th.iter().map(|t| t.cos().powi(2) / 2.0).collect();
        let f = fit_malus(&th, &cos2).unwrap();
        assert!(f.alpha.abs() < 1e-8 && (f.beta - 0.5).abs() < 1e-8, "{f:?}");
        assert!((f.gamma - PI / 2.0).abs() < 1e-8);
        assert_eq!(f.delta, 1.0);

        let sin2: Vec<f64> = th.iter().map(|t| t.sin().powi(2) / 2.0).collect();
        let f = fit_malus(&th, &sin2).unwrap();
        assert!(f.alpha.abs() < 1e-8 && (f.beta - 0.5).abs() < 1e-8);
        let g = f.gamma.min(PI - f.gamma);
        assert!(g < 1e-8, "{}", f.gamma);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            fit_sin_squared(&[0.0; 4], &[1.0; 4], None),
            Err(FitError::TooFewPoints { needed: 8, found: 4 })
        ));
        assert!(matches!(fit_malus(&[0.0; 4], &[1.0; 4]), Err(FitError::TooFewPoints { .. })));
        assert!(matches!(fit_sin_squared(&[0.0; 9], &[1.0; 8], None), Err(FitError::LengthMismatch { .. })));
        let ts = grid(0.0, 1.0, 10);
        let mut ys = vec![1.0; 10];
        ys[3] = f64::NAN;
        assert_eq!(fit_sin_squared(&ts, &ys, None).unwrap_err(), FitError::NonFinite(3));
        assert_eq!(fit_sin_squared(&[1.0; 10], &[1.0; 10], None).unwrap_err(), FitError::ZeroSpan);
        let w = vec![-1.0; 10];
        assert_eq!(fit_sin_squared(&ts, &[1.0; 10], Some(&w)).unwrap_err(), FitError::InvalidWeight(0));
    }

    #[test]
    fn visibility_examples() {
        let mut f = degenerate_result(&[1.0], &[1.0], None);
        f.degenerate = false;
        f.alpha = 1.0;
        f.beta = 98.0;
        assert!((visibility(&f).unwrap().value - 0.98).abs() < 1e-15);
        f.alpha = 0.0;
        assert_eq!(visibility(&f).unwrap().value, 1.0);
        f.alpha = 3.0;
        f.beta = 0.0;
        assert_eq!(visibility(&f).unwrap().value, 0.0);
    }

    fn noisy(seed: u64) -> (Vec<f64>, Vec<f64>) {
        let truth = [100.0, 900.0, 0.5, 0.3];
        let ts = grid(0.0, 30.0, 200);
        let mut s = CountSampler::new(seed);
        let ys = ts.iter().map(|&t| s.draw(model(&truth, t)).unwrap() as f64).collect();
        (ts, ys)
    }

    #[test]
    fn poisson_coverage() {
        let truth = [100.0, 900.0, 0.5, 0.3];
        let mut hits = 0;
        for seed in 0..100 {
            let (ts, ys) = noisy(seed);
            let f = fit_sin_squared(&ts, &ys, None).unwrap();
            let ok = f
                .params()
                .iter()
                .zip(truth)
                .zip(f.std_errors)
                .all(|((got, want), se)| (got - want).abs() <= 3.0 * se);
            hits += usize::from(ok);
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn scaling_invariance() {
        let (ts, ys) = noisy(7);
        let k = 3.7;
        let scaled: Vec<f64> = ys.iter().map(|y| y * k).collect();
        let w: Vec<f64> = ys.iter().map(|y| 1.0 / y.max(1.0)).collect();
        let wk: Vec<f64> = w.iter().map(|x| x / k).collect();
        let a = fit_sin_squared(&ts, &ys, Some(&w)).unwrap();
        let b = fit_sin_squared(&ts, &scaled, Some(&wk)).unwrap();
        assert!(rel(b.alpha, k * a.alpha) < 1e-9);
        assert!(rel(b.beta, k * a.beta) < 1e-9);
        assert!((a.delta - b.delta).abs() < 1e-9);
        assert!((a.gamma - b.gamma).abs() < 1e-9);
        let (va, vb) = (a.visibility().unwrap(), b.visibility().unwrap());
        assert!((va.value - vb.value).abs() < 1e-9);
    }

    #[test]
    fn translation_shifts_phase() {
        let (ts, ys) = noisy(11);
        let dt = 1.25;
        let shifted: Vec<f64> = ts.iter().map(|t| t + dt).collect();
        let a = fit_sin_squared(&ts, &ys, None).unwrap();
        let b = fit_sin_squared(&shifted, &ys, None).unwrap();
        assert!(rel(a.alpha, b.alpha) < 1e-7 && rel(a.beta, b.beta) < 1e-7);
        assert!((a.delta - b.delta).abs() < 1e-9);
        let expected = (a.gamma - a.delta * dt).rem_euclid(PI);
        let diff = (b.gamma - expected).rem_euclid(PI);
        assert!(diff.min(PI - diff) < 1e-7, "{} vs {expected}", b.gamma);
    }

    #[test]
    fn residuals_orthogonal_to_jacobian() {
        let (ts, ys) = noisy(3);
        let f = fit_sin_squared(&ts, &ys, None).unwrap();
        let w: Vec<f64> = ys.iter().map(|y| 1.0 / y.max(1.0)).collect();
        let problem = Problem {
            xs: &ts,
            ys: &ys,
            sqrt_w: w.iter().map(|x| x.sqrt()).collect(),
            fixed_delta: None,
            scales: [ys.iter().cloned().fold(0.0, f64::max), 1.0, f.delta, 1.0],
        };
        let q = f.params();
        let jac = problem.jacobian(&q);
        let r = problem.residuals(&q);
        let g = jac.transpose() * &r;
        for j in 0..4 {
            let col = jac.column(j).norm();
            assert!(g[j].abs() < 1e-6 * col * r.norm(), "column {j}: {}", g[j]);
        }
    }

    #[test]
    fn visibility_monotone_in_beta() {
        let mut f = degenerate_result(&[1.0], &[1.0], None);
        f.degenerate = false;
        f.alpha = 10.0;
        let mut last = -1.0;
        for b in [0.0, 1.0, 5.0, 50.0, 500.0] {
            f.beta = b;
            let v = visibility(&f).unwrap().value;
            assert!(v > last);
            last = v;
        }
    }
}
