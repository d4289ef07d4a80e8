//! Experiment driver behind the `theta` binary.
//!
//! An [`ExperimentConfig`] fully determines a run. [`run`] produces a
//! [`RunOutput`]: a JSON [`Report`] (config, results, claims with their rigor
//! class and tolerance, warnings, soundness re-checks, wall time) and a CSV
//! [`Table`] of plot data.

mod config;
mod experiments;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use theta_core::inradius::Rigor;

pub use config::{Experiment, ExperimentConfig, Format, PieceCount};

/// Exit status for a run whose soundness re-checks all passed.
pub const EXIT_OK: i32 = 0;
/// Exit status when some soundness re-check failed.
pub const EXIT_UNSOUND: i32 = 1;
/// Exit status for configurations that cannot be run.
pub const EXIT_INVALID: i32 = 2;

/// A configuration the requested experiment cannot run on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub(crate) fn new(msg: impl fmt::Display) -> Self {
        ConfigError(msg.to_string())
    }
}

/// One numeric statement in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub value: f64,
    pub rigor: Rigor,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Soundness {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl Soundness {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub results: Value,
    pub claims: Vec<Claim>,
    pub warnings: Vec<String>,
    pub soundness: Soundness,
    pub membership_tolerance: f64,
    pub wall_time_s: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// CSV plot data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub(crate) fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub(crate) fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("in-memory CSV");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub table: Table,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.soundness.passed() {
            EXIT_OK
        } else {
            EXIT_UNSOUND
        }
    }

    /// Writes `<experiment>.json` and `<experiment>.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = self.report.experiment.name();
        std::fs::write(dir.join(format!("{stem}.json")), self.report.to_json() + "\n")?;
        self.table.write(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        Ok(())
    }
}

/// Partial output of one experiment, before timing and packaging.
#[derive(Default)]
pub(crate) struct Outcome {
    pub results: Value,
    pub claims: Vec<Claim>,
    pub warnings: Vec<String>,
    pub soundness: Soundness,
    pub table: Table,
}

impl Outcome {
    pub(crate) fn claim(&mut self, name: impl Into<String>, value: f64, rigor: Rigor, tolerance: f64) {
        self.claims.push(Claim { name: name.into(), value, rigor, tolerance });
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, ConfigError> {
    config.validate().map_err(ConfigError)?;
    let start = Instant::now();
    let outcome = experiments::dispatch(config)?;
    let report = Report {
        experiment: config.experiment,
        config: config.clone(),
        results: outcome.results,
        claims: outcome.claims,
        warnings: outcome.warnings,
        soundness: outcome.soundness,
        membership_tolerance: theta_core::coverings::MEMBERSHIP_TOL,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, table: outcome.table })
}
