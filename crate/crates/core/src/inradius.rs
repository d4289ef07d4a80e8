//! Codimension-budget essential inradius of norm-cap sets.
//!
//! A radius `r` is certified for a set `A` by checking `x + r(B_X ∩ Y) ⊂ A`,
//! i.e. that both `‖x + ru‖ ≤ 1` and `‖L(x + ru)‖ ≤ c` over the unit ball of
//! `Y`. A radius is refuted by constructing a unit `u ∈ Y` with
//! `‖L(x + ru)‖ > c`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverings::{CapProjection, ContractiveMap, CoverError, NormCapSet};
use crate::linalg;
use crate::optimize::{self, AscentConfig, AscentProblem, AscentStats};
use crate::projection::BlockKind;
use crate::sampling;
use crate::space::{Element, SpaceError, SpaceSpec};
use crate::subspace::{self, Subspace};

/// Slack allowed when comparing section maxima against their bounds.
pub const CONTAINMENT_TOL: f64 = 1e-9;
/// Tolerance for witness invariants (`u ∈ Y`, `‖u‖ = 1`, attained formula).
pub const WITNESS_TOL: f64 = 1e-10;
/// A refuter only succeeds when `F(a)` beats the threshold by this much.
pub const THRESHOLD_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InradiusError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error("subspace has dimension {dim}, below the minimum {d_min}")]
    SubspaceTooSmall { dim: usize, d_min: usize },
    #[error("radius must be positive (got {0})")]
    NonPositiveRadius(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rigor {
    /// `x = 0`, `Y = X`: containment iff `r ≤ min(1, c)` by contractivity.
    Analytic,
    /// Euclidean ambient and target: both maxima solved exactly as trust-region subproblems.
    ExactHilbert,
    /// Multi-restart ascent; the maxima are lower estimates.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Verified,
    Failed,
    /// Ascent found no violation, which proves nothing.
    Heuristic,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionCertificate {
    pub set: NormCapSet,
    pub center: Element,
    pub subspace: Subspace,
    pub radius: f64,
    pub rigor: Rigor,
    pub status: CertificateStatus,
    /// `max ‖x + ru‖` over `u ∈ B_X ∩ Y` (best found, for heuristic certificates).
    pub max_norm: f64,
    /// `max ‖L(x + ru)‖` over the same section.
    pub max_seminorm: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AscentStats>,
}

impl SectionCertificate {
    pub fn is_verified(&self) -> bool {
        self.status == CertificateStatus::Verified
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refuter {
    Hilbert,
    Lp,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefutationWitness {
    pub set: NormCapSet,
    pub center: Element,
    pub subspace: Subspace,
    pub radius: f64,
    pub direction: Element,
    /// `‖L(x + ru)‖`.
    pub attained: f64,
    /// Closed-form lower bound for `attained`: `√(‖Px‖² + r²)` or `F(a)^{1/p}`.
    pub certified_bound: f64,
    pub refuter: Refuter,
    pub tolerance: f64,
}

impl RefutationWitness {
    /// Re-derives every witness invariant from scratch.
    pub fn recheck(&self) -> Result<(), String> {
        let space = self.set.ambient();
        if !self.subspace.contains(&self.direction, WITNESS_TOL) {
            return Err("direction is not in Y".into());
        }
        let un = space.norm(&self.direction).map_err(|e| e.to_string())?;
        if (un - 1.0).abs() > WITNESS_TOL {
            return Err(format!("direction has norm {un}"));
        }
        let moved = self.center.axpy(self.radius, &self.direction);
        let attained = self.set.seminorm(&moved).map_err(|e| e.to_string())?;
        if attained <= self.set.cap() + CONTAINMENT_TOL {
            return Err(format!("attained {attained} does not exceed cap {}", self.set.cap()));
        }
        if self.set.contains(&moved).map_err(|e| e.to_string())? {
            return Err("x + r·u is still a member".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InradiusConfig {
    /// Smallest admissible `dim Y`, standing in for "infinite dimensional".
    pub d_min: usize,
    /// Relative bisection tolerance on the refuted radius.
    pub bisection_tol: f64,
    pub ascent: AscentConfig,
    /// Subspaces of codimension `k` on which every bisection radius must be refuted.
    pub probes: usize,
    /// Extra random `(x, Y)` pairs tried for a better lower bound.
    pub random_search: usize,
    pub seed: u64,
}

impl Default for InradiusConfig {
    fn default() -> Self {
        InradiusConfig {
            d_min: 2,
            bisection_tol: 1e-4,
            ascent: AscentConfig::default(),
            probes: 4,
            random_search: 0,
            seed: 0,
        }
    }
}

fn check_inputs(set: &NormCapSet, x: &Element, y: &Subspace) -> Result<(), InradiusError> {
    set.ambient().check(x)?;
    if y.ambient() != set.ambient() {
        return Err(CoverError::SpaceMismatch("subspace and set live in different spaces").into());
    }
    Ok(())
}

/// Checks `x + r(B_X ∩ Y) ⊂ A` with the strongest applicable rigor class.
pub fn certify_lower(
    set: &NormCapSet,
    x: &Element,
    y: &Subspace,
    r: f64,
    config: &InradiusConfig,
) -> Result<SectionCertificate, InradiusError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(InradiusError::NonPositiveRadius(r));
    }
    if y.dim() < config.d_min {
        return Err(InradiusError::SubspaceTooSmall { dim: y.dim(), d_min: config.d_min });
    }
    check_inputs(set, x, y)?;
    let space = set.ambient();
    let (rigor, max_norm, max_seminorm, optimizer) = if x.is_zero() && y.codim() == 0 {
        let operator_norm = if set.projection().is_zero() { 0.0 } else { 1.0 };
        (Rigor::Analytic, r, r * operator_norm, None)
    } else if space.is_euclidean() && set.projection().target().is_euclidean() {
        let (n, s) = exact_hilbert_maxima(set, x, y, r);
        (Rigor::ExactHilbert, n, s, None)
    } else {
        let (n, s, stats) = ascent_maxima(set, x, y, r, &config.ascent);
        (Rigor::Heuristic, n, s, Some(stats))
    };
    let within = match rigor {
        // exact comparison: r ≤ min(1, c)
        Rigor::Analytic => max_norm <= 1.0 && max_seminorm <= set.cap(),
        _ => max_norm <= 1.0 + CONTAINMENT_TOL && max_seminorm <= set.cap() + CONTAINMENT_TOL,
    };
    let status = match (within, rigor) {
        (false, _) => CertificateStatus::Failed,
        (true, Rigor::Heuristic) => CertificateStatus::Heuristic,
        (true, _) => CertificateStatus::Verified,
    };
    Ok(SectionCertificate {
        set: set.clone(),
        center: x.clone(),
        subspace: y.clone(),
        radius: r,
        rigor,
        status,
        max_norm,
        max_seminorm,
        tolerance: if rigor == Rigor::Analytic { 0.0 } else { CONTAINMENT_TOL },
        optimizer,
    })
}

/// Columns `L b_j` for the basis of `y`, as a dense matrix over the target's flat coordinates.
fn image_matrix(set: &NormCapSet, y: &Subspace) -> DMatrix<f64> {
    let target_len = set.projection().target().dimension();
    let mut m = DMatrix::zeros(target_len, y.dim());
    for j in 0..y.dim() {
        let img = set.projection().image(&y.basis_element(j));
        for (i, v) in img.as_slice().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

pub(crate) fn basis_matrix(y: &Subspace) -> DMatrix<f64> {
    let n = y.ambient().dimension();
    DMatrix::from_fn(n, y.dim(), |i, j| y.basis()[j][i])
}

/// `max_{‖z‖≤1} ‖c + r M z‖₂`.
fn max_affine_euclidean(c: &[f64], m: &DMatrix<f64>, r: f64) -> f64 {
    let cvec = DVector::from_column_slice(c);
    let a = m.transpose() * m * (r * r);
    let b = m.transpose() * &cvec * r;
    let q = linalg::maximize_quadratic_on_ball(&a, &b);
    (cvec.dot(&cvec) + q.value).max(0.0).sqrt()
}

fn exact_hilbert_maxima(set: &NormCapSet, x: &Element, y: &Subspace, r: f64) -> (f64, f64) {
    let b = basis_matrix(y);
    let max_norm = max_affine_euclidean(x.as_slice(), &b, r);
    let lx = set.projection().image(x);
    let m = image_matrix(set, y);
    let max_seminorm = max_affine_euclidean(lx.as_slice(), &m, r);
    (max_norm, max_seminorm)
}

/// Ascent of `u ↦ ‖c + r M z‖_T` over `z` with `‖B z‖_X = 1`.
pub(crate) struct SectionAscent<'a> {
    pub(crate) ambient: &'a SpaceSpec,
    pub(crate) target: SpaceSpec,
    pub(crate) basis: &'a DMatrix<f64>,
    pub(crate) map: &'a DMatrix<f64>,
    pub(crate) offset: Element,
    pub(crate) r: f64,
}

impl SectionAscent<'_> {
    fn lift(&self, z: &[f64]) -> Vec<f64> {
        (self.basis * DVector::from_column_slice(z)).iter().copied().collect()
    }
}

impl AscentProblem for SectionAscent<'_> {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let mz = self.map * DVector::from_column_slice(z);
        let mut point = self.offset.clone();
        point.as_mut_slice().iter_mut().zip(mz.iter()).for_each(|(p, v)| *p += self.r * v);
        let value = self.target.norm_unchecked(&point);
        let g = self.target.norm_gradient(&point);
        let grad = self.map.transpose() * DVector::from_column_slice(g.as_slice()) * self.r;
        (value, grad.iter().copied().collect())
    }

    fn retract(&self, z: &[f64]) -> Option<Vec<f64>> {
        let u = Element::from_flat(self.ambient.shape(), self.lift(z));
        let n = self.ambient.norm_unchecked(&u);
        (n > 0.0 && n.is_finite()).then(|| z.iter().map(|v| v / n).collect())
    }

    fn tangent(&self, z: &[f64], g: &mut [f64]) {
        let u = Element::from_flat(self.ambient.shape(), self.lift(z));
        let normal = self.basis.transpose() * DVector::from_column_slice(self.ambient.norm_gradient(&u).as_slice());
        optimize::remove_component(g, normal.as_slice());
    }
}

fn ascent_maxima(set: &NormCapSet, x: &Element, y: &Subspace, r: f64, config: &AscentConfig) -> (f64, f64, AscentStats) {
    let space = set.ambient();
    let b = basis_matrix(y);
    let m = image_matrix(set, y);
    let d = y.dim();
    let mut starts: Vec<Vec<f64>> = (0..d.min(16)).map(|j| subspace::unit(d, j)).collect();
    let toward = y.coordinates(x);
    if toward.iter().any(|&v| v != 0.0) {
        starts.push(toward);
    }

    let norm_problem = SectionAscent { ambient: space, target: space.clone(), basis: &b, map: &b, offset: x.clone(), r };
    let semi_problem = SectionAscent {
        ambient: space,
        target: set.projection().target(),
        basis: &b,
        map: &m,
        offset: set.projection().image(x),
        r,
    };
    let mut semi_starts = starts.clone();
    let lx = set.projection().image(x);
    let pulled: Vec<f64> = (m.transpose() * DVector::from_column_slice(lx.as_slice())).iter().copied().collect();
    if pulled.iter().any(|&v| v != 0.0) {
        semi_starts.push(pulled);
    }
    let a = optimize::maximize(&norm_problem, &starts, config).expect("nonempty section");
    let s = optimize::maximize(&semi_problem, &semi_starts, config).expect("nonempty section");
    let stats = AscentStats {
        runs: a.stats.runs + s.stats.runs,
        iterations: a.stats.iterations + s.stats.iterations,
        evaluations: a.stats.evaluations + s.stats.evaluations,
        seed: config.seed,
    };
    (a.value, s.value, stats)
}

/// Result of re-sampling a certificate's section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateRecheck {
    pub samples: usize,
    pub counterexamples: usize,
    pub max_excess: f64,
}

/// Samples `u ∈ B_X ∩ Y` (half on the sphere, half inside) and checks
/// `x + r u ∈ A` for each.
pub fn recheck_certificate(cert: &SectionCertificate, seed: u64, count: usize) -> CertificateRecheck {
    let space = cert.set.ambient();
    let y = &cert.subspace;
    let d = y.dim();
    let excesses: Vec<f64> = {
        use rayon::prelude::*;
        (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = sampling::stream_rng(seed, i);
                let z = sampling::gaussian_vec(&mut rng, d);
                let u = y.combine(&z);
                let n = space.norm_unchecked(&u);
                if n == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let scale = if i % 2 == 0 {
                    1.0
                } else {
                    rand::Rng::random::<f64>(&mut rng).powf(1.0 / d as f64)
                };
                let point = cert.center.axpy(cert.radius * scale / n, &u);
                cert.set.excess(&point).unwrap_or(f64::INFINITY)
            })
            .collect()
    };
    CertificateRecheck {
        samples: count,
        counterexamples: excesses.iter().filter(|&&e| e > crate::coverings::MEMBERSHIP_TOL).count(),
        max_excess: excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Hilbert refutation: a unit `u ∈ Y ∩ range(P)` orthogonal to `Px`, giving
/// `‖P(x + ru)‖ = √(‖Px‖² + r²) ≥ r > c`.
pub fn refute_hilbert(set: &NormCapSet, x: &Element, y: &Subspace, r: f64) -> Result<RefutationWitness, InradiusError> {
    check_inputs(set, x, y)?;
    let space = set.ambient();
    let block = set
        .projection()
        .as_block()
        .ok_or(InradiusError::Unsupported("Hilbert refuter needs a block or orthogonal projection"))?;
    if !space.is_euclidean() {
        return Err(InradiusError::Unsupported("Hilbert refuter needs a Euclidean ambient norm"));
    }
    if r.partial_cmp(&set.cap()) != Some(Ordering::Greater) {
        return Err(InradiusError::Precondition(format!("r = {r} does not exceed the cap {}", set.cap())));
    }
    let yh = y.intersect(&block.range()?)?;
    if yh.dim() < 2 {
        return Err(InradiusError::Inconclusive(format!("dim(Y ∩ range P) = {} < 2", yh.dim())));
    }
    let px = block.project(x)?;
    let candidates = if px.is_zero() { yh } else { yh.with_functional(px.as_slice().to_vec())? };
    if candidates.dim() == 0 {
        return Err(InradiusError::Inconclusive("no direction orthogonal to Px".into()));
    }
    let u = candidates.basis_element(0);
    let attained = set.seminorm(&x.axpy(r, &u))?;
    let expected = (px.dot(&px) + r * r).sqrt();
    if (attained - expected).abs() > WITNESS_TOL {
        return Err(InradiusError::Inconclusive(format!("attained {attained} vs closed form {expected}")));
    }
    Ok(RefutationWitness {
        set: set.clone(),
        center: x.clone(),
        subspace: y.clone(),
        radius: r,
        direction: u,
        attained,
        certified_bound: expected,
        refuter: Refuter::Hilbert,
        tolerance: WITNESS_TOL,
    })
}

/// `F(a) = ‖v‖^p - a^p + (r - a)^p`, evaluated as `‖v·1_{E∖S}‖^p + (r - a)^p`
/// so that no cancellation occurs. Returns `(F, a)`.
pub fn threshold_function(space: &SpaceSpec, v: &Element, block: &[usize], selected: &[usize], r: f64) -> (f64, f64) {
    let p = space.p();
    let mass = |i: usize| space.weight(i) * v.as_slice()[i].abs().powf(p);
    let a = selected.iter().map(|&i| mass(i)).sum::<f64>().powf(1.0 / p);
    let rest: f64 = block.iter().filter(|i| !selected.contains(i)).map(|&i| mass(i)).sum();
    (rest + (r - a).powf(p), a)
}

/// `L_p` refutation against the cap `n^{-1/p}`.
pub fn refute_lp(set: &NormCapSet, x: &Element, y: &Subspace, r: f64, n: usize) -> Result<RefutationWitness, InradiusError> {
    if n == 0 {
        return Err(InradiusError::Precondition("n must be positive".into()));
    }
    refute_lp_threshold(set, x, y, r, 1.0 / n as f64)
}

/// `L_p` refutation for a coordinate cap with `‖P f‖^p ≤ threshold`.
///
/// Picks the `m+1` block coordinates of least mass under `v = Px` (ties to the
/// lowest index), solves the `m x (m+1)` homogeneous system of `Y`'s
/// functionals on them and normalizes the kernel vector to `u`. Succeeds when
/// `F(a) > threshold`, in which case `‖P(x + ru)‖^p ≥ F(a)`.
pub fn refute_lp_threshold(
    set: &NormCapSet,
    x: &Element,
    y: &Subspace,
    r: f64,
    threshold: f64,
) -> Result<RefutationWitness, InradiusError> {
    check_inputs(set, x, y)?;
    let space = set.ambient();
    if !space.is_scalar_lp() {
        return Err(InradiusError::Unsupported("L_p refuter needs an ℓ_p or weighted L_p space"));
    }
    let block = set
        .projection()
        .as_block()
        .and_then(|b| match b.kind() {
            BlockKind::Coordinates(idx) => Some(idx.clone()),
            BlockKind::Orthogonal(_) => None,
        })
        .ok_or(InradiusError::Unsupported("L_p refuter needs a coordinate block"))?;
    let p = space.p();
    if r.partial_cmp(&threshold.powf(1.0 / p)) != Some(Ordering::Greater) {
        return Err(InradiusError::Precondition(format!("r = {r} does not exceed {}", threshold.powf(1.0 / p))));
    }
    let m = y.codim();
    if block.len() <= m {
        return Err(InradiusError::Inconclusive(format!("block has {} atoms, need more than m = {m}", block.len())));
    }
    let v = set.projection().image(x);
    let mut order = block.clone();
    let mass = |i: usize| space.weight(i) * v.as_slice()[i].abs().powf(p);
    order.sort_by(|&i, &j| mass(i).total_cmp(&mass(j)).then(i.cmp(&j)));
    let mut selected: Vec<usize> = order[..=m].to_vec();
    selected.sort_unstable();

    let (f_value, a) = threshold_function(space, &v, &block, &selected, r);
    if a >= r {
        return Err(InradiusError::Inconclusive(format!("selected mass a = {a} is not below r = {r}")));
    }
    if f_value.partial_cmp(&(threshold + THRESHOLD_MARGIN)) != Some(Ordering::Greater) {
        return Err(InradiusError::Inconclusive(format!("F(a) = {f_value} does not exceed {threshold}")));
    }

    let restricted: Vec<Vec<f64>> =
        y.functionals().iter().map(|phi| selected.iter().map(|&i| phi[i]).collect()).collect();
    let kernel = linalg::kernel_basis(&restricted, m + 1);
    let w = kernel.first().ok_or_else(|| InradiusError::Inconclusive("restricted system has trivial kernel".into()))?;
    let mut u = space.zeros();
    for (&i, &wi) in selected.iter().zip(w) {
        u.as_mut_slice()[i] = wi;
    }
    let un = space.norm(&u)?;
    let u = u.scaled(1.0 / un);
    if !y.contains(&u, WITNESS_TOL) {
        return Err(InradiusError::Inconclusive("kernel vector left Y numerically".into()));
    }
    let attained = set.seminorm(&x.axpy(r, &u))?;
    let bound = f_value.powf(1.0 / p);
    if attained < bound * (1.0 - 1e-12) || attained <= set.cap() + CONTAINMENT_TOL {
        return Err(InradiusError::Inconclusive(format!("attained {attained} vs bound {bound}, cap {}", set.cap())));
    }
    Ok(RefutationWitness {
        set: set.clone(),
        center: x.clone(),
        subspace: y.clone(),
        radius: r,
        direction: u,
        attained,
        certified_bound: bound,
        refuter: Refuter::Lp,
        tolerance: WITNESS_TOL,
    })
}

/// The refuter applicable to a set, if any.
pub fn applicable_refuter(set: &NormCapSet) -> Option<Refuter> {
    let block = set.projection().as_block()?;
    if set.ambient().is_euclidean() {
        Some(Refuter::Hilbert)
    } else if set.ambient().is_scalar_lp() && block.block().is_some() {
        Some(Refuter::Lp)
    } else {
        None
    }
}

fn refute_with(
    refuter: Refuter,
    set: &NormCapSet,
    x: &Element,
    y: &Subspace,
    r: f64,
) -> Result<RefutationWitness, InradiusError> {
    match refuter {
        Refuter::Hilbert => refute_hilbert(set, x, y, r),
        Refuter::Lp => refute_lp_threshold(set, x, y, r, set.cap().powf(set.ambient().p())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InradiusEstimate {
    pub lower: f64,
    pub upper: f64,
    pub lower_rigor: Rigor,
    pub codim_budget: usize,
    pub refuter: Option<Refuter>,
    /// No radius below 1 could be refuted; `upper = 1` is only the trivial bound.
    pub upper_vacuous: bool,
    pub bisection_steps: usize,
    pub certificate: SectionCertificate,
    /// Witnesses at `r = upper`, one per probe.
    pub witnesses: Vec<RefutationWitness>,
}

/// Probe subspaces of codimension `k`: the kernel of the first `k` flat
/// coordinates of the cap's block, then kernels of seeded Gaussian functionals.
fn probe_subspaces(set: &NormCapSet, k: usize, count: usize, seed: u64) -> Result<Vec<Subspace>, InradiusError> {
    let space = set.ambient();
    let n = space.dimension();
    if k == 0 {
        return Ok(vec![Subspace::full(space)?]);
    }
    let mut out = Vec::with_capacity(count.max(1));
    let flat = set.projection().as_block().and_then(|b| b.flat_indices()).unwrap_or_else(|| (0..n).collect());
    let rest = (0..n).filter(|i| !flat.contains(i));
    let coords: Vec<Vec<f64>> = flat.iter().copied().chain(rest).take(k).map(|i| subspace::unit(n, i)).collect();
    out.push(Subspace::from_kernel(space, coords)?);
    for j in 1..count.max(1) {
        let mut rng = sampling::stream_rng(seed ^ 0x5EED_0F9A_0BE5, j as u64);
        let functionals = (0..k).map(|_| sampling::gaussian_vec(&mut rng, n)).collect();
        out.push(Subspace::from_kernel(space, functionals)?);
    }
    Ok(out)
}

/// Brackets the codimension-`k` inradius of `set` between a certified lower
/// radius and the smallest radius refuted on every probe subspace.
pub fn estimate_inradius(set: &NormCapSet, k: usize, config: &InradiusConfig) -> Result<InradiusEstimate, InradiusError> {
    let space = set.ambient();
    if space.dimension() < k + config.d_min {
        return Err(InradiusError::Precondition(format!(
            "dimension {} minus codimension budget {k} is below d_min = {}",
            space.dimension(),
            config.d_min
        )));
    }
    let full = Subspace::full(space)?;
    let zero = space.zeros();
    let r0 = if set.projection().is_zero() { 1.0 } else { set.cap().min(1.0) };
    let mut certificate = certify_lower(set, &zero, &full, r0, config)?;
    debug_assert!(certificate.is_verified());
    let mut lower = r0;

    if config.random_search > 0 && k > 0 {
        let probes = probe_subspaces(set, k, config.random_search + 1, config.seed ^ 0xA11CE)?;
        for (i, y) in probes.iter().enumerate().skip(1) {
            let trial = (lower * (1.0 + config.bisection_tol)).min(1.0);
            if trial <= lower {
                break;
            }
            let (dir, _) = sampling::ball_point(space, config.seed, i as u64);
            let x = dir.scaled(0.5 * set.cap());
            if let Ok(c) = certify_lower(set, &x, y, trial, config) {
                if c.is_verified() {
                    lower = trial;
                    certificate = c;
                }
            }
        }
    }

    let refuter = applicable_refuter(set);
    let mut estimate = InradiusEstimate {
        lower,
        upper: 1.0,
        lower_rigor: certificate.rigor,
        codim_budget: k,
        refuter,
        upper_vacuous: false,
        bisection_steps: 0,
        certificate,
        witnesses: Vec::new(),
    };
    if lower >= 1.0 {
        // any r > 1 leaves the ball from x = 0
        return Ok(estimate);
    }
    let Some(refuter) = refuter else {
        estimate.upper_vacuous = true;
        return Ok(estimate);
    };
    let probes = probe_subspaces(set, k, config.probes, config.seed)?;
    let attempt = |r: f64| -> Option<Vec<RefutationWitness>> {
        probes.iter().map(|y| refute_with(refuter, set, &zero, y, r).ok()).collect()
    };
    let Some(mut witnesses) = attempt(1.0) else {
        estimate.upper_vacuous = true;
        log::warn!("refuter inconclusive at r = 1; upper bound is vacuous");
        return Ok(estimate);
    };
    let (mut lo, mut hi) = (lower, 1.0);
    while hi - lo > config.bisection_tol * lower {
        let mid = 0.5 * (lo + hi);
        estimate.bisection_steps += 1;
        match attempt(mid) {
            Some(w) => {
                hi = mid;
                witnesses = w;
            }
            None => lo = mid,
        }
    }
    assert!(hi >= lower, "refuted radius {hi} below certified radius {lower}");
    estimate.upper = hi;
    estimate.witnesses = witnesses;
    Ok(estimate)
}

/// Lifts a certificate `(y, Z, r)` for a range set `B_k` to the pulled-back set
/// `A_k = {x : map(x) ∈ B_k}` as `(J y, map⁻¹(Z), r)` and certifies it.
pub fn certify_pullback(
    pulled: &NormCapSet,
    range_certificate: &SectionCertificate,
    config: &InradiusConfig,
) -> Result<SectionCertificate, InradiusError> {
    let CapProjection::Pullback { map, inner } = pulled.projection() else {
        return Err(InradiusError::Unsupported("set is not a pullback"));
    };
    if range_certificate.set.projection() != inner.as_ref() || range_certificate.set.cap() != pulled.cap() {
        return Err(CoverError::SpaceMismatch("certificate belongs to a different range set").into());
    }
    let (x, w) = lift_section(map, &range_certificate.center, &range_certificate.subspace)?;
    certify_lower(pulled, &x, &w, range_certificate.radius, config)
}

/// `(J y, {x : map(x) ∈ Z})`.
pub fn lift_section(map: &ContractiveMap, y: &Element, z: &Subspace) -> Result<(Element, Subspace), InradiusError> {
    let x = map.embed(y)?;
    let functionals = z.functionals().iter().map(|psi| map.pull_functional(psi)).collect();
    Ok((x, Subspace::from_kernel(map.domain(), functionals)?))
}

/// Smallest-radius witness at a given `r` on a fixed `(x, Y)`, whichever refuter applies.
pub fn refute(set: &NormCapSet, x: &Element, y: &Subspace, r: f64) -> Result<RefutationWitness, InradiusError> {
    let refuter = applicable_refuter(set).ok_or(InradiusError::Unsupported("no refuter for this set"))?;
    refute_with(refuter, set, x, y, r)
}
