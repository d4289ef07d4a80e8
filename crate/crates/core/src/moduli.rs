//! Moduli of smoothness, power-type fits and Clarkson inequality checks.
//!
//! The symmetric modulus is `ρ'(t) = sup ½‖x+ty‖ + ½‖x−ty‖ − 1` over unit `x, y`.
//! The asymptotic modulus replaces the inner supremum by
//! `inf_Y sup_{y ∈ S_Y} ‖x+ty‖ − 1` over finite-codimension `Y`; here the
//! infimum runs over a finite candidate family of codimension at most `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inradius::{basis_matrix, SectionAscent};
use crate::optimize::{self, AscentConfig, AscentProblem, AscentStats};
use crate::sampling;
use crate::space::{Element, Shape, SpaceError, SpaceSpec};
use crate::subspace::{self, Subspace};

/// Default `t` grid for power-type sweeps.
pub const DEFAULT_T_GRID: [f64; 5] = [0.001, 0.003, 0.01, 0.03, 0.1];
/// Relative slack in [`clarkson_check`].
pub const CLARKSON_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModuliError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("t must be positive and finite (got {0})")]
    InvalidT(f64),
    #[error("codimension budget must be at least 1 and below the dimension (got {0})")]
    InvalidBudget(usize),
    #[error("candidate subspace family is empty")]
    EmptyFamily,
    #[error("candidate subspace has codimension {codim} > budget {budget}")]
    CandidateCodim { codim: usize, budget: usize },
    #[error("need at least 5 usable samples with distinct t (got {0})")]
    TooFewSamples(usize),
    #[error("exponent must exceed 1 (got {0})")]
    InvalidExponent(f64),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    Symmetric,
    AsymptoticSurrogate,
}

/// Points achieving a modulus sample.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusWitness {
    pub x: Element,
    pub y: Element,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Subspace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusSample {
    pub space: SpaceSpec,
    pub t: f64,
    pub value: f64,
    pub kind: ModulusKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codim_budget: Option<usize>,
    pub optimizer_stats: AscentStats,
    pub witness: ModulusWitness,
}

/// One CSV line of a modulus sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusRow {
    pub space: String,
    pub kind: ModulusKind,
    pub t: f64,
    pub value: f64,
    pub codim_budget: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
}

impl ModulusSample {
    pub fn row(&self, restarts: usize) -> ModulusRow {
        ModulusRow {
            space: space_label(&self.space),
            kind: self.kind,
            t: self.t,
            value: self.value,
            codim_budget: self.codim_budget,
            restarts,
            seed: self.optimizer_stats.seed,
        }
    }
}

/// Short human-readable description of a space, e.g. `schatten_3(8x8)`.
pub fn space_label(space: &SpaceSpec) -> String {
    match space {
        SpaceSpec::EllP { p, dim } => format!("ell_{p}^{dim}"),
        SpaceSpec::WeightedLp { p, weights } => format!("weighted_L_{p}({})", weights.len()),
        SpaceSpec::Schatten { p, rows, cols } => format!("schatten_{p}({rows}x{cols})"),
        SpaceSpec::Bochner { p, weights, inner } => {
            format!("bochner_L_{p}({};ell_{}^{})", weights.len(), inner.p, inner.dim)
        }
    }
}

fn check_t(t: f64) -> Result<(), ModuliError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ModuliError::InvalidT(t))
    }
}

/// `(x, y) ↦ ½‖x+ty‖ + ½‖x−ty‖ − 1` on the product of unit spheres, flattened to `R^{2n}`.
struct PairAscent<'a> {
    space: &'a SpaceSpec,
    t: f64,
}

impl PairAscent<'_> {
    fn split(&self, z: &[f64]) -> (Element, Element) {
        let n = self.space.dimension();
        let shape = self.space.shape();
        (Element::from_flat(shape, z[..n].to_vec()), Element::from_flat(shape, z[n..].to_vec()))
    }
}

impl AscentProblem for PairAscent<'_> {
    fn dim(&self) -> usize {
        2 * self.space.dimension()
    }

    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let (x, y) = self.split(z);
        let plus = x.axpy(self.t, &y);
        let minus = x.axpy(-self.t, &y);
        let value = 0.5 * self.space.norm_unchecked(&plus) + 0.5 * self.space.norm_unchecked(&minus) - 1.0;
        let gp = self.space.norm_gradient(&plus);
        let gm = self.space.norm_gradient(&minus);
        let gx = gp.as_slice().iter().zip(gm.as_slice()).map(|(a, b)| 0.5 * (a + b));
        let gy = gp.as_slice().iter().zip(gm.as_slice()).map(|(a, b)| 0.5 * self.t * (a - b));
        (value, gx.chain(gy).collect())
    }

    fn retract(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (x, y) = self.split(z);
        let x = sampling::normalize(self.space, &x)?;
        let y = sampling::normalize(self.space, &y)?;
        Some(x.into_vec().into_iter().chain(y.into_vec()).collect())
    }

    fn tangent(&self, z: &[f64], g: &mut [f64]) {
        let n = self.space.dimension();
        let (x, y) = self.split(z);
        let (gx, gy) = g.split_at_mut(n);
        optimize::remove_component(gx, self.space.norm_gradient(&x).as_slice());
        optimize::remove_component(gy, self.space.norm_gradient(&y).as_slice());
    }
}

/// Flat indices `j` such that `(e_0, e_j)` and `(e_0 ± e_j)` are useful starting pairs:
/// a neighbour in the same atom and a disjoint atom (diagonal entry for matrices).
fn partner_indices(space: &SpaceSpec) -> Vec<usize> {
    let n = space.dimension();
    let mut out = Vec::new();
    match space {
        SpaceSpec::Schatten { rows, cols, .. } if *rows >= 2 && *cols >= 2 => out.push(cols + 1),
        SpaceSpec::Bochner { inner, .. } if inner.dim < n => out.push(inner.dim),
        _ => {}
    }
    if n >= 2 && !out.contains(&1) {
        out.push(1);
    }
    out
}

fn structured_pairs(space: &SpaceSpec) -> Vec<Vec<f64>> {
    let n = space.dimension();
    let partners = partner_indices(space);
    if partners.is_empty() {
        let e0 = subspace::unit(n, 0);
        return vec![e0.iter().chain(&e0).copied().collect()];
    }
    let mut starts = Vec::new();
    for j in partners {
        let (e0, ej) = (subspace::unit(n, 0), subspace::unit(n, j));
        starts.push(e0.iter().chain(&ej).copied().collect());
        let sum = e0.iter().zip(&ej).map(|(a, b)| a + b);
        let diff = e0.iter().zip(&ej).map(|(a, b)| a - b);
        starts.push(sum.chain(diff).collect());
    }
    starts
}

/// Lower estimate of the symmetric modulus by pair ascent on the unit spheres.
pub fn symmetric_modulus(space: &SpaceSpec, t: f64, config: &AscentConfig) -> Result<ModulusSample, ModuliError> {
    space.validate()?;
    check_t(t)?;
    let problem = PairAscent { space, t };
    let best = optimize::maximize(&problem, &structured_pairs(space), config).expect("structured starts are feasible");
    let (x, y) = problem.split(&best.point);
    Ok(ModulusSample {
        space: space.clone(),
        t,
        value: best.value.max(0.0),
        kind: ModulusKind::Symmetric,
        codim_budget: None,
        optimizer_stats: best.stats,
        witness: ModulusWitness { x, y, subspace: None },
    })
}

/// Symmetric modulus on each `t`, evaluated in parallel.
pub fn symmetric_sweep(space: &SpaceSpec, ts: &[f64], config: &AscentConfig) -> Result<Vec<ModulusSample>, ModuliError> {
    ts.par_iter().map(|&t| symmetric_modulus(space, t, config)).collect()
}

/// Subspaces over which the asymptotic infimum is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateFamily {
    /// For each `x`, the kernel of the `k` flat coordinates of largest `|x_i|`
    /// (ties to the lowest index).
    CoordinateTail,
    Explicit(Vec<Subspace>),
}

/// Points `x` over which the outer supremum is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum XDomain {
    /// Unit vectors with at most `support` nonzero flat coordinates: every
    /// coordinate vector, plus random draws when `support > 1`.
    Sparse { support: usize },
    /// Random sphere points.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticConfig {
    pub x_domain: XDomain,
    /// Random `x` draws (sphere, or sparse with `support > 1`).
    pub x_samples: usize,
    /// Ascent over unit `y ∈ Y`.
    pub inner: AscentConfig,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        AsymptoticConfig {
            x_domain: XDomain::Sparse { support: 1 },
            x_samples: 32,
            inner: AscentConfig { restarts: 4, max_iter: 200, seed: 0, min_step: 1e-10 },
        }
    }
}

fn x_candidates(space: &SpaceSpec, config: &AsymptoticConfig) -> Vec<Element> {
    let n = space.dimension();
    let seed = config.inner.seed;
    let normalize = |v: Vec<f64>| sampling::normalize(space, &Element::from_flat(space.shape(), v));
    match config.x_domain {
        XDomain::Sphere => sampling::sample_sphere(space, seed, config.x_samples),
        XDomain::Sparse { support } => {
            let mut xs: Vec<Element> = (0..n).filter_map(|i| normalize(subspace::unit(n, i))).collect();
            if support > 1 {
                xs.extend((0..config.x_samples as u64).filter_map(|i| {
                    let mut rng = sampling::stream_rng(seed ^ 0x005A_4D5E, i);
                    let dense = sampling::sphere_point(space, seed ^ 0x005A_4D5E, i).into_vec();
                    let mut keep: Vec<usize> = (0..n).collect();
                    // partial Fisher–Yates for a uniformly random support
                    for j in 0..support.min(n) {
                        let k = j + rand::Rng::random_range(&mut rng, 0..n - j);
                        keep.swap(j, k);
                    }
                    let mut v = vec![0.0; n];
                    for &i in &keep[..support.min(n)] {
                        v[i] = dense[i];
                    }
                    normalize(v)
                }));
            }
            xs
        }
    }
}

/// Kernel of the `k` flat coordinates of largest `|x_i|`.
pub fn coordinate_tail(space: &SpaceSpec, x: &Element, k: usize) -> Result<Subspace, SpaceError> {
    let n = space.dimension();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x.as_slice()[j].abs().total_cmp(&x.as_slice()[i].abs()).then(i.cmp(&j)));
    Subspace::from_kernel(space, order[..k.min(n)].iter().map(|&i| subspace::unit(n, i)).collect())
}

struct InnerResult {
    value: f64,
    y: Element,
    stats: AscentStats,
}

/// `sup_{y ∈ S_Y} ‖x + ty‖ − 1`.
fn inner_sup(space: &SpaceSpec, x: &Element, y: &Subspace, t: f64, config: &AscentConfig) -> InnerResult {
    let b = basis_matrix(y);
    let problem = SectionAscent { ambient: space, target: space.clone(), basis: &b, map: &b, offset: x.clone(), r: t };
    let d = y.dim();
    let starts: Vec<Vec<f64>> = (0..d.min(16)).map(|j| subspace::unit(d, j)).collect();
    let best = optimize::maximize(&problem, &starts, config).expect("nonempty subspace");
    let u = y.combine(&best.point);
    InnerResult { value: best.value - 1.0, y: u, stats: best.stats }
}

/// Surrogate of the asymptotic modulus: the maximum over sampled `x` of the
/// minimum over candidate `Y` of the ascended `sup_{y ∈ S_Y} ‖x+ty‖ − 1`.
pub fn asymptotic_modulus_surrogate(
    space: &SpaceSpec,
    t: f64,
    k: usize,
    candidates: &CandidateFamily,
    config: &AsymptoticConfig,
) -> Result<ModulusSample, ModuliError> {
    space.validate()?;
    check_t(t)?;
    if matches!(space, SpaceSpec::Schatten { .. }) {
        return Err(ModuliError::Unsupported("asymptotic surrogate needs kernel subspaces of a coordinate space"));
    }
    if k == 0 || k >= space.dimension() {
        return Err(ModuliError::InvalidBudget(k));
    }
    if let CandidateFamily::Explicit(list) = candidates {
        if list.is_empty() {
            return Err(ModuliError::EmptyFamily);
        }
        for y in list {
            if y.ambient() != space {
                return Err(SpaceError::Unsupported("candidate subspace lives in another space").into());
            }
            if y.codim() > k {
                return Err(ModuliError::CandidateCodim { codim: y.codim(), budget: k });
            }
            if y.dim() == 0 {
                return Err(ModuliError::Unsupported("candidate subspace is trivial"));
            }
        }
    }
    let xs = x_candidates(space, config);
    let per_x: Vec<(f64, ModulusWitness, AscentStats)> = xs
        .par_iter()
        .map(|x| -> Result<_, ModuliError> {
            let family = match candidates {
                CandidateFamily::CoordinateTail => vec![coordinate_tail(space, x, k)?],
                CandidateFamily::Explicit(list) => list.clone(),
            };
            let mut stats = AscentStats { runs: 0, iterations: 0, evaluations: 0, seed: config.inner.seed };
            let mut best: Option<(f64, ModulusWitness)> = None;
            for y in family {
                let r = inner_sup(space, x, &y, t, &config.inner);
                stats.runs += r.stats.runs;
                stats.iterations += r.stats.iterations;
                stats.evaluations += r.stats.evaluations;
                if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
                    best = Some((r.value, ModulusWitness { x: x.clone(), y: r.y, subspace: Some(y) }));
                }
            }
            let (v, w) = best.expect("nonempty family");
            Ok((v, w, stats))
        })
        .collect::<Result<_, _>>()?;

    let mut stats = AscentStats { runs: 0, iterations: 0, evaluations: 0, seed: config.inner.seed };
    let mut best: Option<(f64, ModulusWitness)> = None;
    for (v, w, s) in per_x {
        stats.runs += s.runs;
        stats.iterations += s.iterations;
        stats.evaluations += s.evaluations;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, w));
        }
    }
    let (value, witness) = best.ok_or(ModuliError::Unsupported("no admissible x sample"))?;
    Ok(ModulusSample {
        space: space.clone(),
        t,
        value: value.max(0.0),
        kind: ModulusKind::AsymptoticSurrogate,
        codim_budget: Some(k),
        optimizer_stats: stats,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFit {
    pub samples: Vec<(f64, f64)>,
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    /// Max absolute deviation of `log value` from the fitted line.
    pub residual: f64,
    pub rejected: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `log value = log C + r log t`.
///
/// Nonpositive values are dropped with a warning; `t` outside `[1e-3, 1e-1]`
/// is accepted with a warning.
pub fn power_type_fit(samples: &[(f64, f64)]) -> Result<PowerFit, ModuliError> {
    let mut warnings = Vec::new();
    let (kept, rejected): (Vec<_>, Vec<_>) =
        samples.iter().copied().partition(|&(t, v)| t > 0.0 && v > 0.0 && t.is_finite() && v.is_finite());
    for (t, v) in &rejected {
        let msg = format!("dropped sample t = {t}, value = {v}: log undefined");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut ts: Vec<f64> = kept.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 5 || ts.len() != kept.len() {
        return Err(ModuliError::TooFewSamples(ts.len().min(kept.len())));
    }
    if ts.iter().any(|&t| !(1e-3 * (1.0 - 1e-9)..=1e-1 * (1.0 + 1e-9)).contains(&t)) {
        warnings.push("some t lie outside [1e-3, 1e-1]".into());
    }
    let xs: Vec<f64> = kept.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|s| s.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let r = sxy / sxx;
    let intercept = my - r * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - r * x).abs()).fold(0.0, f64::max);
    Ok(PowerFit { samples: kept, c: intercept.exp(), r, residual, rejected, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClarksonForm {
    /// `‖x+y‖^p + ‖x−y‖^p ≤ 2^{p−1}(‖x‖^p + ‖y‖^p)`, `p ≥ 2`.
    Primal,
    /// `‖x+y‖^{p'} + ‖x−y‖^{p'} ≤ 2(‖x‖^p + ‖y‖^p)^{p'/p}`, `1 < p < 2`.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClarksonReport {
    pub p: f64,
    pub form: ClarksonForm,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs·(1 + 1e-12)`.
    pub holds: bool,
}

/// Checks the Clarkson inequality of the appropriate form for one pair.
pub fn clarkson_check(space: &SpaceSpec, x: &Element, y: &Element) -> Result<ClarksonReport, ModuliError> {
    if matches!(space, SpaceSpec::Bochner { .. }) {
        return Err(ModuliError::Unsupported("Clarkson check covers ℓ_p, weighted L_p and Schatten spaces"));
    }
    let p = space.p();
    if p <= 1.0 {
        return Err(ModuliError::InvalidExponent(p));
    }
    let nx = space.norm(x)?;
    let ny = space.norm(y)?;
    let ns = space.norm(&x.add(y))?;
    let nd = space.norm(&x.sub(y))?;
    let (form, lhs, rhs) = if p >= 2.0 {
        (ClarksonForm::Primal, ns.powf(p) + nd.powf(p), 2f64.powf(p - 1.0) * (nx.powf(p) + ny.powf(p)))
    } else {
        let q = p / (p - 1.0);
        (ClarksonForm::Dual, ns.powf(q) + nd.powf(q), 2.0 * (nx.powf(p) + ny.powf(p)).powf(q / p))
    };
    Ok(ClarksonReport { p, form, lhs, rhs, holds: lhs <= rhs * (1.0 + CLARKSON_RTOL) })
}

/// Largest `value − t` over the samples; nonpositive up to rounding.
pub fn triangle_bound_excess(samples: &[ModulusSample]) -> f64 {
    samples.iter().map(|s| s.value - s.t).fold(f64::NEG_INFINITY, f64::max)
}

/// Shape-respecting random element for Clarkson sweeps.
pub fn gaussian_element(space: &SpaceSpec, seed: u64, index: u64) -> Element {
    let mut rng = sampling::stream_rng(seed, index);
    let n = space.dimension();
    let data = sampling::gaussian_vec(&mut rng, n);
    match space.shape() {
        Shape::Vector(_) => Element::vector(data),
        Shape::Matrix { rows, cols } => Element::matrix(rows, cols, data),
    }
}
