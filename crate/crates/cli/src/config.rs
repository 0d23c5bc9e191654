//! JSON run configuration and its resolution into an effective config.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sptq_core::experiments::{linspace, ScanSettings};
use sptq_core::{CountingConfig, Error as CoreError, ImperfectionSet};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TruthTable,
    PolScan,
    IfoScan,
    VisibilityCurve,
    Swap,
    Ghz,
    MomentumCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::TruthTable => "truth-table",
            Experiment::PolScan => "pol-scan",
            Experiment::IfoScan => "ifo-scan",
            Experiment::VisibilityCurve => "visibility-curve",
            Experiment::Swap => "swap",
            Experiment::Ghz => "ghz",
            Experiment::MomentumCheck => "momentum-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Ideal,
    Calibrated,
}

/// A preset plus per-field overrides.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionConfig {
    #[serde(default)]
    pub preset: Preset,
    pub pbs_transmission_h: Option<f64>,
    pub plate_transmission_h: Option<f64>,
    pub plate_transmission_v: Option<f64>,
    pub bs_reflectivity: Option<f64>,
    pub coherence_length: Option<f64>,
    pub mode_overlap: Option<f64>,
    pub routing_error_h: Option<f64>,
    pub routing_error_v: Option<f64>,
}

impl ImperfectionConfig {
    pub fn resolve(&self) -> ImperfectionSet {
        let base = match self.preset {
            Preset::Ideal => ImperfectionSet::ideal(),
            Preset::Calibrated => ImperfectionSet::calibrated(),
        };
        ImperfectionSet {
            pbs_transmission_h: self.pbs_transmission_h.unwrap_or(base.pbs_transmission_h),
            plate_transmission_h: self.plate_transmission_h.unwrap_or(base.plate_transmission_h),
            plate_transmission_v: self.plate_transmission_v.unwrap_or(base.plate_transmission_v),
            bs_reflectivity: self.bs_reflectivity.unwrap_or(base.bs_reflectivity),
            coherence_length: self.coherence_length.or(base.coherence_length),
            mode_overlap: self.mode_overlap.unwrap_or(base.mode_overlap),
            routing_error_h: self.routing_error_h.unwrap_or(base.routing_error_h),
            routing_error_v: self.routing_error_v.unwrap_or(base.routing_error_v),
        }
    }

    fn filled(&self) -> Self {
        let s = self.resolve();
        ImperfectionConfig {
            preset: self.preset,
            pbs_transmission_h: Some(s.pbs_transmission_h),
            plate_transmission_h: Some(s.plate_transmission_h),
            plate_transmission_v: Some(s.plate_transmission_v),
            bs_reflectivity: Some(s.bs_reflectivity),
            coherence_length: s.coherence_length,
            mode_overlap: Some(s.mode_overlap),
            routing_error_h: Some(s.routing_error_h),
            routing_error_v: Some(s.routing_error_v),
        }
    }
}

/// Inclusive angle range in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AngleRange {
    pub fn degrees(&self, field: &str) -> Result<Vec<f64>, CliError> {
        let bad = |name: &str, msg: &str| CliError::config(format!("{field}.{name}"), msg);
        if !self.start.is_finite() {
            return Err(bad("start", "must be finite"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(bad("step", "must be positive"));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(bad("stop", "must be finite and not below start"));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err(bad("step", "grid exceeds 100000 points"));
        }
        Ok((0..n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Evenly spaced scan times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn seconds(&self) -> Result<Vec<f64>, CliError> {
        if !self.start.is_finite() {
            return Err(CliError::config("scan.time_s.start", "must be finite"));
        }
        if !(self.stop > self.start && self.stop.is_finite()) {
            return Err(CliError::config("scan.time_s.stop", "must be finite and above start"));
        }
        if !(8..=1_000_000).contains(&self.points) {
            return Err(CliError::config("scan.time_s.points", "must be between 8 and 1000000"));
        }
        Ok(linspace(self.start, self.stop, self.points))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<AngleRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analyzer_m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_a_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_s: Option<TimeGrid>,
    /// Mirror speed in m/s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    /// Metres.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    /// Metres.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_offset: Option<f64>,
}

impl ScanConfig {
    pub fn settings(&self) -> ScanSettings {
        let d = ScanSettings::default();
        ScanSettings {
            velocity: self.velocity.unwrap_or(d.velocity),
            wavelength: self.wavelength.unwrap_or(d.wavelength),
            path_offset: self.path_offset.unwrap_or(d.path_offset),
        }
    }

    fn fill_interferometer(&mut self) {
        let s = self.settings();
        self.velocity = Some(s.velocity);
        self.wavelength = Some(s.wavelength);
        self.path_offset = Some(s.path_offset);
        self.time_s.get_or_insert(TimeGrid {
            start: 0.0,
            stop: 20.0,
            points: 101,
        });
    }
}

/// Contents of a config file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    /// Report exact probabilities instead of sampled counts.
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counting: Option<CountingConfig>,
    #[serde(default)]
    pub imperfections: ImperfectionConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub exact: bool,
    pub out: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "(root)".to_owned() } else { path };
        CliError::config(field, e.into_inner().to_string())
    })
}

fn field_error(prefix: &str, e: CoreError) -> CliError {
    match e {
        CoreError::OutOfRange { name, value } => {
            CliError::config(format!("{prefix}.{name}"), format!("value {value} out of range"))
        }
        other => CliError::config(prefix, other.to_string()),
    }
}

impl RunConfig {
    /// Applies overrides, fills defaults for the chosen experiment and validates.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<RunConfig, CliError> {
        if let Some(e) = overrides.experiment {
            self.experiment = Some(e);
        }
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::config("experiment", "no experiment given"))?;
        if overrides.exact {
            self.exact = true;
            self.counting = None;
        }
        if self.exact && self.counting.is_some() {
            return Err(CliError::config(
                "counting",
                "exact mode and a counting config are mutually exclusive",
            ));
        }
        if !self.exact {
            let counting = self.counting.get_or_insert_with(CountingConfig::default);
            if let Some(seed) = overrides.seed {
                counting.rng_seed = seed;
            }
            counting.validate().map_err(|e| field_error("counting", e))?;
        }
        if let Some(out) = &overrides.out {
            self.output_dir = Some(out.clone());
        }
        self.output_dir.get_or_insert_with(|| PathBuf::from("out"));

        self.imperfections
            .resolve()
            .validate()
            .map_err(|e| field_error("imperfections", e))?;
        self.imperfections = self.imperfections.filled();

        let scan = &mut self.scan;
        match experiment {
            Experiment::PolScan => {
                scan.theta_deg.get_or_insert(AngleRange {
                    start: 0.0,
                    stop: 180.0,
                    step: 10.0,
                });
                let m = *scan.analyzer_m.get_or_insert(0);
                if m > 1 {
                    return Err(CliError::config("scan.analyzer_m", "must be 0 or 1"));
                }
            }
            Experiment::IfoScan => {
                let theta = *scan.theta_a_deg.get_or_insert(25.0);
                if !theta.is_finite() {
                    return Err(CliError::config("scan.theta_a_deg", "must be finite"));
                }
                scan.fill_interferometer();
            }
            Experiment::VisibilityCurve => {
                scan.theta_deg.get_or_insert(AngleRange {
                    start: 5.0,
                    stop: 85.0,
                    step: 5.0,
                });
                scan.fill_interferometer();
            }
            _ => {}
        }
        if let Some(r) = &scan.theta_deg {
            r.degrees("scan.theta_deg")?;
        }
        if let Some(g) = &scan.time_s {
            g.seconds()?;
        }
        scan.settings().validate().map_err(|e| field_error("scan", e))?;
        Ok(self)
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("resolved config names an experiment")
    }

    pub fn seed(&self) -> Option<u64> {
        self.counting.map(|c| c.rng_seed)
    }
}
