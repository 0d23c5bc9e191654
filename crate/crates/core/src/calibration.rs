//! Searches for imperfection parameters that reproduce measured figures of merit.

use serde::{Deserialize, Serialize};

use crate::elements::{coherence_length, ImperfectionSet};
use crate::error::{Error, Result};
use crate::experiments::{
    fit_curves, linspace, polarization_scan_on, prepare_entangled, truth_table, visibility_curve_on,
    CurveFits, ScanSettings,
};
use crate::fitting::fit_malus;

/// Two-pass H transmission of the Sagnac PBS.
pub const PBS_TRANSMISSION_H: f64 = 0.90;
/// Net V/H transmission imbalance left after the compensation plate.
pub const PLATE_RESIDUAL: f64 = 0.0;
pub const TARGET_ROW_ERROR: f64 = 0.01;
pub const TARGET_VISIBILITY_M0: f64 = 0.98;
pub const TARGET_VISIBILITY_M1: f64 = 0.962;
pub const TARGET_CENTER_SHIFT_DEG: f64 = 1.0;
pub const TARGET_CURVE_VISIBILITY: f64 = 0.908;
pub const FILTER_CENTER: f64 = 797e-9;
pub const FILTER_BANDWIDTH: f64 = 1e-9;

const TOL: f64 = 1e-13;

/// Root of a monotone function on `[lo, hi]` by bisection.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, name: &'static str) -> Result<f64> {
    let (mut f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Calibration(format!(
            "`{name}` target not bracketed by [{lo}, {hi}]"
        )));
    }
    while hi - lo > TOL * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds the symmetric routing error giving mean truth-table error `target`.
pub fn calibrate_truth_table(base: &ImperfectionSet, target: f64) -> Result<ImperfectionSet> {
    let with = |q: f64| ImperfectionSet {
        routing_error_h: q,
        routing_error_v: q,
        ..*base
    };
    let q = bisect(|q| Ok(truth_table(&with(q))?.mean_error() - target), 0.0, 0.5, "row error")?;
    Ok(with(q))
}

/// Analysis angles of the analyzer-I scans, 0° to 180° in 10° steps.
pub fn polarization_grid() -> Vec<f64> {
    linspace(0.0, 180.0, 19).into_iter().map(f64::to_radians).collect()
}

/// Fitted visibilities of the `m = 0` and `m = 1` analyzer-I curves.
pub fn polarization_visibilities(imp: &ImperfectionSet) -> Result<[f64; 2]> {
    let prep = prepare_entangled(imp)?;
    let thetas = polarization_grid();
    let mut out = [0.0; 2];
    for (m, v) in out.iter_mut().enumerate() {
        let trace = polarization_scan_on(&prep, &thetas, m)?;
        *v = fit_malus(&thetas, &trace.probabilities())?.visibility()?.value;
    }
    Ok(out)
}

/// Alternating 1-D searches on `routing_error_v` (for `m = 0`) and
/// `routing_error_h` (for `m = 1`).
pub fn calibrate_polarization_visibilities(base: &ImperfectionSet, targets: [f64; 2]) -> Result<ImperfectionSet> {
    let mut imp = *base;
    for _ in 0..30 {
        let before = imp;
        imp.routing_error_v = bisect(
            |q| Ok(polarization_visibilities(&ImperfectionSet { routing_error_v: q, ..imp })?[0] - targets[0]),
            0.0,
            0.2,
            "routing_error_v",
        )?;
        imp.routing_error_h = bisect(
            |q| Ok(polarization_visibilities(&ImperfectionSet { routing_error_h: q, ..imp })?[1] - targets[1]),
            0.0,
            0.2,
            "routing_error_h",
        )?;
        if (imp.routing_error_h - before.routing_error_h).abs() < 1e-14
            && (imp.routing_error_v - before.routing_error_v).abs() < 1e-14
        {
            break;
        }
    }
    Ok(imp)
}

/// Analysis angles of the interferometer campaign, 5° to 85° in 5° steps.
pub fn curve_grid() -> Vec<f64> {
    linspace(5.0, 85.0, 17).into_iter().map(f64::to_radians).collect()
}

/// Exact-mode curve fits on the standard grids.
pub fn curve_fits(imp: &ImperfectionSet) -> Result<CurveFits> {
    let ts = crate::experiments::default_times();
    let prep = prepare_entangled(imp)?;
    let curve = visibility_curve_on(&prep, &curve_grid(), &ts, &ScanSettings::default(), imp, None)?;
    fit_curves(&curve)
}

/// Beam-splitter reflectivity in `[0.45, 0.5]` moving the maxima peak by
/// `shift_deg` below 45°.
pub fn calibrate_reflectivity(base: &ImperfectionSet, shift_deg: f64) -> Result<ImperfectionSet> {
    let with = |r: f64| ImperfectionSet {
        bs_reflectivity: r,
        ..*base
    };
    let r = bisect(
        |r| Ok(45.0 - curve_fits(&with(r))?.center_deg - shift_deg),
        0.45,
        0.5,
        "bs_reflectivity",
    )?;
    Ok(with(r))
}

/// Mode overlap giving fitted maxima-curve visibility `target`.
pub fn calibrate_mode_overlap(base: &ImperfectionSet, target: f64) -> Result<ImperfectionSet> {
    let with = |g: f64| ImperfectionSet {
        mode_overlap: g,
        ..*base
    };
    let g = bisect(
        |g| Ok(curve_fits(&with(g))?.max_visibility.value - target),
        0.5,
        1.0,
        "mode_overlap",
    )?;
    Ok(with(g))
}

/// Every calibration step, from the measured PBS loss to the analysis
/// interferometer, in dependency order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCalibration {
    /// Symmetric-error set reproducing the truth-table error rate.
    pub truth_table: ImperfectionSet,
    /// Full set reproducing the analysis figures.
    pub bench: ImperfectionSet,
}

pub fn calibrate_bench() -> Result<BenchCalibration> {
    let lossy = ImperfectionSet {
        coherence_length: Some(coherence_length(FILTER_CENTER, FILTER_BANDWIDTH)?),
        ..ImperfectionSet::compensated(PBS_TRANSMISSION_H, PLATE_RESIDUAL)
    };
    let truth = calibrate_truth_table(&lossy, TARGET_ROW_ERROR)?;
    let mut bench = calibrate_polarization_visibilities(&lossy, [TARGET_VISIBILITY_M0, TARGET_VISIBILITY_M1])?;
    for _ in 0..3 {
        bench = calibrate_reflectivity(&bench, TARGET_CENTER_SHIFT_DEG)?;
        bench = calibrate_mode_overlap(&bench, TARGET_CURVE_VISIBILITY)?;
    }
    Ok(BenchCalibration {
        truth_table: truth,
        bench,
    })
}
