use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use theta_core::moduli::DEFAULT_T_GRID;
use theta_core::SpaceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    CoverVerify,
    Inradius,
    Modulus,
    Clarkson,
    Hilbert2,
    LpSweep,
    CompareRaja,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::CoverVerify => "cover_verify",
            Experiment::Inradius => "inradius",
            Experiment::Modulus => "modulus",
            Experiment::Clarkson => "clarkson",
            Experiment::Hilbert2 => "hilbert2",
            Experiment::LpSweep => "lp_sweep",
            Experiment::CompareRaja => "compare_raja",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Number of covering pieces: one value or an inclusive range `lo..hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PieceCount {
    Single(usize),
    Range([usize; 2]),
}

impl PieceCount {
    pub fn values(self) -> Vec<usize> {
        match self {
            PieceCount::Single(n) => vec![n],
            PieceCount::Range([lo, hi]) => (lo..=hi).collect(),
        }
    }
}

impl Default for PieceCount {
    fn default() -> Self {
        PieceCount::Single(2)
    }
}

impl FromStr for PieceCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("invalid piece count {t:?}: {e}"));
        match s.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (parse(lo)?, parse(hi.trim_start_matches('='))?);
                if lo == 0 || lo > hi {
                    return Err(format!("empty or zero range {s:?}"));
                }
                Ok(PieceCount::Range([lo, hi]))
            }
            None => parse(s).map(PieceCount::Single),
        }
    }
}

impl fmt::Display for PieceCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceCount::Single(n) => write!(f, "{n}"),
            PieceCount::Range([lo, hi]) => write!(f, "{lo}..{hi}"),
        }
    }
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub space: SpaceSpec,
    #[serde(default)]
    pub n: PieceCount,
    /// Explicit atom partition; overrides the contiguous split into `n` pieces.
    #[serde(default)]
    pub partition: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_codim_budget")]
    pub codim_budget: usize,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Sampled points (cover verification), pairs (Clarkson) or re-check draws.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_bisection_tol")]
    pub bisection_tol: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_codim_budget() -> usize {
    3
}
fn default_t_grid() -> Vec<f64> {
    DEFAULT_T_GRID.to_vec()
}
fn default_samples() -> usize {
    100_000
}
fn default_restarts() -> usize {
    32
}
fn default_max_iter() -> usize {
    500
}
fn default_bisection_tol() -> f64 {
    1e-4
}

impl ExperimentConfig {
    /// Defaults for everything but the experiment and the space.
    pub fn new(experiment: Experiment, space: SpaceSpec) -> Self {
        ExperimentConfig {
            experiment,
            space,
            n: PieceCount::default(),
            partition: None,
            codim_budget: default_codim_budget(),
            t_grid: default_t_grid(),
            seed: 0,
            samples: default_samples(),
            restarts: default_restarts(),
            max_iter: default_max_iter(),
            bisection_tol: default_bisection_tol(),
            out: None,
            format: Format::Json,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.space.validate().map_err(|e| e.to_string())?;
        if self.n.values().contains(&0) {
            return Err("piece count must be positive".into());
        }
        if self.samples == 0 {
            return Err("samples must be positive".into());
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err("t grid must be nonempty with positive finite entries".into());
        }
        if !(self.bisection_tol > 0.0 && self.bisection_tol < 1.0) {
            return Err(format!("bisection tolerance {} must lie in (0, 1)", self.bisection_tol));
        }
        Ok(())
    }
}
