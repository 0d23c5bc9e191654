use std::path::Path;

use serde_json::{json, Value};
use sptq_core::counting::sample_trace;
use sptq_core::experiments::{
    fit_curves, ghz_experiment, interferometer_scan, momentum_correlation, polarization_scan,
    swap_experiment, truth_table, visibility_curve, Section, TruthTable,
};
use sptq_core::fitting::fit_malus_weighted;
use sptq_core::state::basis_label;
use sptq_core::{fidelity, fit_sin_squared, FitResult, Ket, RNG_ALGORITHM};

use crate::config::{Experiment, RunConfig};
use crate::CliError;

/// Result record plus the flat table written next to it.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub result: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ExperimentOutput {
    pub fn write_json(&self, config: &RunConfig, path: &Path) -> Result<(), CliError> {
        let doc = json!({
            "tool": "sptq-sim",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": sptq_core::VERSION,
            "rng_algorithm": RNG_ALGORITHM,
            "seed": config.seed(),
            "config": config,
            "result": self.result,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let to_io = |e: csv::Error| CliError::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(to_io)?;
        w.write_record(&self.header).map_err(to_io)?;
        for row in &self.rows {
            w.write_record(row).map_err(to_io)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// A fit summary for the result file; failures are recorded, not fatal.
fn fit_record(fit: Result<FitResult, sptq_core::FitError>) -> Value {
    match fit {
        Ok(f) => {
            let vis = f.visibility().ok();
            json!({ "fit": f, "visibility": vis })
        }
        Err(e) => json!({ "fit_error": e.to_string() }),
    }
}

pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput, CliError> {
    let imp = config.imperfections.resolve();
    let counting = config.counting.as_ref();
    let scan = &config.scan;
    match config.experiment() {
        Experiment::TruthTable => {
            let table = truth_table(&imp)?;
            let counts = match counting {
                Some(cfg) => Some(
                    (0..4)
                        .map(|i| {
                            let probs: Vec<f64> = table.probabilities[i]
                                .iter()
                                .map(|p| (p * table.row_success[i]).clamp(0.0, 1.0))
                                .collect();
                            sample_trace(&probs, cfg, i as u64)
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                None => None,
            };
            let mut rows = Vec::new();
            for i in 0..4 {
                for j in 0..4 {
                    rows.push(vec![
                        TruthTable::LABELS[i].to_owned(),
                        TruthTable::LABELS[j].to_owned(),
                        num(table.probabilities[i][j]),
                        num(table.row_success[i]),
                        opt(counts.as_ref().map(|c| c[i][j])),
                    ]);
                }
            }
            Ok(ExperimentOutput {
                result: json!({
                    "probabilities": table.probabilities,
                    "row_success": table.row_success,
                    "error_sums": table.error_sums(),
                    "counts": counts,
                }),
                header: vec!["input", "output", "probability", "row_success", "counts"],
                rows,
            })
        }
        Experiment::PolScan => {
            let degrees = scan.theta_deg.expect("resolved").degrees("scan.theta_deg")?;
            let thetas: Vec<f64> = degrees.iter().map(|d| d.to_radians()).collect();
            let m = scan.analyzer_m.expect("resolved");
            let mut trace = polarization_scan(&thetas, m, &imp)?;
            if let Some(cfg) = counting {
                trace.sample(cfg, 0)?;
            }
            let rows = degrees
                .iter()
                .zip(&trace.points)
                .map(|(d, p)| {
                    vec![
                        num(*d),
                        m.to_string(),
                        num(p.probability),
                        num(p.success_probability),
                        opt(p.counts),
                    ]
                })
                .collect();
            let fit = fit_record(fit_malus_weighted(&thetas, &trace.values(), None));
            Ok(ExperimentOutput {
                result: json!({ "analyzer_m": m, "trace": trace, "malus": fit }),
                header: vec!["theta_deg", "m", "probability", "success_probability", "counts"],
                rows,
            })
        }
        Experiment::IfoScan => {
            let theta_deg = scan.theta_a_deg.expect("resolved");
            let ts = scan.time_s.expect("resolved").seconds()?;
            let settings = scan.settings();
            let mut trace = interferometer_scan(theta_deg.to_radians(), &ts, &settings, &imp)?;
            if let Some(cfg) = counting {
                trace.sample(cfg, 0)?;
            }
            let rows = trace
                .points
                .iter()
                .map(|p| {
                    vec![
                        num(p.control),
                        num(settings.phase(p.control)),
                        num(settings.mismatch(p.control)),
                        num(p.probability),
                        num(p.success_probability),
                        opt(p.counts),
                    ]
                })
                .collect();
            let fit = fit_record(fit_sin_squared(&ts, &trace.values(), None));
            Ok(ExperimentOutput {
                result: json!({ "theta_a_deg": theta_deg, "trace": trace, "fringe": fit }),
                header: vec![
                    "t_s",
                    "phase_rad",
                    "mismatch_m",
                    "probability",
                    "success_probability",
                    "counts",
                ],
                rows,
            })
        }
        Experiment::VisibilityCurve => {
            let degrees = scan.theta_deg.expect("resolved").degrees("scan.theta_deg")?;
            let thetas: Vec<f64> = degrees.iter().map(|d| d.to_radians()).collect();
            let ts = scan.time_s.expect("resolved").seconds()?;
            let curve = visibility_curve(&thetas, &ts, &scan.settings(), &imp, counting)?;
            let fits = fit_curves(&curve)?;
            let rows = degrees
                .iter()
                .zip(&curve.points)
                .map(|(d, p)| {
                    let v = p.fit.visibility().ok();
                    vec![
                        num(*d),
                        num(p.max),
                        num(p.min),
                        num(p.max_std_error),
                        num(p.min_std_error),
                        opt(v.map(|v| v.value)),
                        opt(v.map(|v| v.std_error)),
                    ]
                })
                .collect();
            Ok(ExperimentOutput {
                result: json!({ "curve": curve, "fits": fits }),
                header: vec![
                    "theta_deg",
                    "max",
                    "min",
                    "max_std_error",
                    "min_std_error",
                    "visibility",
                    "visibility_std_error",
                ],
                rows,
            })
        }
        Experiment::Swap => state_output(swap_experiment()?, ["1001", "0011"]),
        Experiment::Ghz => state_output(ghz_experiment()?, ["1110", "0001"]),
        Experiment::MomentumCheck => {
            let cases = [("none", None), ("T", Some(Section::T)), ("B", Some(Section::B))];
            let mut rows = Vec::new();
            let mut result = serde_json::Map::new();
            for (name, blocked) in cases {
                let dist = momentum_correlation(blocked)?;
                for (section, p) in ["T", "B"].iter().zip(dist) {
                    rows.push(vec![name.to_owned(), section.to_string(), num(p)]);
                }
                result.insert(name.to_owned(), json!(dist));
            }
            Ok(ExperimentOutput {
                result: Value::Object(result),
                header: vec!["blocked", "signal_section", "probability"],
                rows,
            })
        }
    }
}

/// Amplitude table of a four-qubit state and its fidelity to `(|a⟩ + |b⟩)/√2`.
fn state_output(state: Ket, target: [&str; 2]) -> Result<ExperimentOutput, CliError> {
    let parts: Vec<Ket> = target
        .iter()
        .map(|l| sptq_core::state::ket_from_label(l))
        .collect::<Result<_, _>>()?;
    let amps = parts[0]
        .amplitudes()
        .iter()
        .zip(parts[1].amplitudes())
        .map(|(a, b)| a + b)
        .collect();
    let expected = Ket::new(amps)?;
    let f = fidelity(&state.to_density(), &expected)?;
    let rows = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| vec![basis_label(i, 4), num(a.re), num(a.im), num(a.norm_sqr())])
        .collect();
    let amplitudes: Vec<[f64; 2]> = state.amplitudes().iter().map(|a| [a.re, a.im]).collect();
    Ok(ExperimentOutput {
        result: json!({
            "amplitudes": amplitudes,
            "target": format!("(|{}> + |{}>)/sqrt2", target[0], target[1]),
            "fidelity": f,
        }),
        header: vec!["basis", "amplitude_re", "amplitude_im", "probability"],
        rows,
    })
}
