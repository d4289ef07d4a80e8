//! Multi-restart projected ascent on norm spheres.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentConfig {
    /// Random restarts, in addition to any structured starting points.
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Ascent on one restart stops once the step falls below this.
    pub min_step: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { restarts: 32, max_iter: 500, seed: 0, min_step: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscentStats {
    pub runs: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub value: f64,
    pub point: Vec<f64>,
    pub stats: AscentStats,
}

/// The pieces of a constrained ascent problem over `R^dim`.
pub trait AscentProblem: Sync {
    fn dim(&self) -> usize;
    /// Objective value and (sub)gradient.
    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>);
    /// Maps a point back onto the feasible surface; `None` if impossible (e.g. zero).
    fn retract(&self, z: &[f64]) -> Option<Vec<f64>>;
    /// Removes the component of `g` normal to the feasible surface at `z`.
    fn tangent(&self, _z: &[f64], _g: &mut [f64]) {}
}

struct RunOutcome {
    value: f64,
    point: Vec<f64>,
    iterations: usize,
    evaluations: usize,
}

fn run_one<P: AscentProblem>(problem: &P, start: &[f64], config: &AscentConfig) -> Option<RunOutcome> {
    let mut z = problem.retract(start)?;
    let (mut v, mut g) = problem.evaluate(&z);
    let mut evaluations = 1;
    let mut step = 0.25_f64;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        problem.tangent(&z, &mut g);
        let gn = norm(&g);
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let zn = norm(&z).max(f64::MIN_POSITIVE);
        let trial: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + step * zn * gi / gn).collect();
        let Some(trial) = problem.retract(&trial) else {
            step *= 0.5;
            continue;
        };
        let (tv, tg) = problem.evaluate(&trial);
        evaluations += 1;
        if tv > v {
            z = trial;
            v = tv;
            g = tg;
            step = (step * 2.0).min(1.0);
        } else {
            step *= 0.5;
            if step < config.min_step {
                break;
            }
        }
    }
    Some(RunOutcome { value: v, point: z, iterations, evaluations })
}

/// Runs ascent from each structured start and from `config.restarts` seeded
/// Gaussian starts; returns the best point (lowest run index on ties).
pub fn maximize<P: AscentProblem>(problem: &P, starts: &[Vec<f64>], config: &AscentConfig) -> Option<AscentResult> {
    let dim = problem.dim();
    let runs = starts.len() + config.restarts;
    let outcomes: Vec<Option<RunOutcome>> = (0..runs)
        .into_par_iter()
        .map(|k| {
            if k < starts.len() {
                run_one(problem, &starts[k], config)
            } else {
                let mut rng = sampling::stream_rng(config.seed, k as u64);
                run_one(problem, &sampling::gaussian_vec(&mut rng, dim), config)
            }
        })
        .collect();
    let mut stats = AscentStats { runs, iterations: 0, evaluations: 0, seed: config.seed };
    let mut best: Option<RunOutcome> = None;
    for o in outcomes.into_iter().flatten() {
        stats.iterations += o.iterations;
        stats.evaluations += o.evaluations;
        if best.as_ref().is_none_or(|b| o.value > b.value) {
            best = Some(o);
        }
    }
    best.map(|b| AscentResult { value: b.value, point: b.point, stats })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Removes the component of `g` along `n`.
pub(crate) fn remove_component(g: &mut [f64], n: &[f64]) {
    let nn: f64 = n.iter().map(|x| x * x).sum();
    if nn > 0.0 {
        let c: f64 = g.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / nn;
        g.iter_mut().zip(n).for_each(|(a, b)| *a -= c * b);
    }
}
