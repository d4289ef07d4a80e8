//! Convex coverings of the unit ball by norm-cap sets
//! `{f ∈ B_X : ‖L f‖ ≤ c}`, where `L` is a contractive block projection or a
//! projection pulled back through a contractive map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projection::{BlockKind, BlockProjection};
use crate::sampling;
use crate::space::{Element, SpaceError, SpaceSpec};

/// Absolute slack allowed in membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Largest sampled `‖P x‖ - ‖x‖` tolerated before a map is declared non-contractive.
pub const CONTRACTION_TOL: f64 = 1e-9;

const CONTRACTION_SAMPLES: usize = 2048;

/// Violating elements kept verbatim in a [`CoverReport`].
pub const MAX_REPORTED_VIOLATIONS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("cap {0} outside [0, 1]")]
    InvalidCap(f64),
    #[error("both halves of a Hilbert split must be nonempty")]
    EmptyHalf,
    #[error("the two-piece Hilbert cover needs an ℓ_2 ambient space")]
    NotHilbert,
    #[error("map is not contractive: sampled ‖Px‖ - ‖x‖ = {excess:e}")]
    NonContractive { excess: f64 },
    #[error("Bochner vector e must have unit inner norm (got {0})")]
    BadUnitVector(f64),
    #[error("Bochner functional must satisfy φ(e) = 1 and ‖φ‖ = 1: {0}")]
    BadFunctional(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(&'static str),
    #[error("a covering family needs at least one set")]
    EmptyFamily,
}

/// The Bochner pair `J f(ω) = f(ω) e` and `P F(ω) = φ(F(ω)) e`.
#[derive(Debug, Clone, PartialEq)]
pub struct BochnerProjection {
    space: SpaceSpec,
    e: Vec<f64>,
    phi: Vec<f64>,
}

impl BochnerProjection {
    pub fn new(space: &SpaceSpec, e: Vec<f64>, phi: Vec<f64>) -> Result<Self, CoverError> {
        let SpaceSpec::Bochner { inner, .. } = space else {
            return Err(CoverError::SpaceMismatch("Bochner projection on a non-Bochner space"));
        };
        if e.len() != inner.dim || phi.len() != inner.dim {
            return Err(CoverError::BadFunctional(format!("e and φ must have length {}", inner.dim)));
        }
        let inner_space = SpaceSpec::EllP { p: inner.p, dim: inner.dim };
        let e_norm = inner_space.norm(&Element::vector(e.clone()))?;
        if (e_norm - 1.0).abs() > 1e-12 {
            return Err(CoverError::BadUnitVector(e_norm));
        }
        let phi_e: f64 = phi.iter().zip(&e).map(|(a, b)| a * b).sum();
        if (phi_e - 1.0).abs() > 1e-12 {
            return Err(CoverError::BadFunctional(format!("φ(e) = {phi_e}")));
        }
        let dual = dual_norm(inner.p, &phi);
        if (dual - 1.0).abs() > 1e-12 {
            return Err(CoverError::BadFunctional(format!("‖φ‖ = {dual}")));
        }
        Ok(BochnerProjection { space: space.clone(), e, phi })
    }

    /// `e` = first inner basis vector, `φ` = first inner coordinate.
    pub fn canonical(space: &SpaceSpec) -> Result<Self, CoverError> {
        let m = match space {
            SpaceSpec::Bochner { inner, .. } => inner.dim,
            _ => return Err(CoverError::SpaceMismatch("Bochner projection on a non-Bochner space")),
        };
        let mut e = vec![0.0; m];
        e[0] = 1.0;
        Self::new(space, e.clone(), e)
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// The scalar space `L_p(μ)` that `J` embeds.
    pub fn scalar_space(&self) -> SpaceSpec {
        let SpaceSpec::Bochner { p, weights, .. } = &self.space else { unreachable!() };
        if weights.iter().all(|&w| w == 1.0) {
            SpaceSpec::EllP { p: *p, dim: weights.len() }
        } else {
            SpaceSpec::WeightedLp { p: *p, weights: weights.clone() }
        }
    }

    /// `J f`.
    pub fn embed(&self, f: &Element) -> Result<Element, CoverError> {
        self.scalar_space().check(f)?;
        let m = self.e.len();
        let data = f.as_slice().iter().flat_map(|&v| self.e.iter().map(move |&ej| v * ej)).collect();
        Ok(Element::matrix(f.len(), m, data))
    }

    /// `(φ(F(ω)))_ω`, i.e. `J⁻¹ P F`.
    pub fn coefficients(&self, big: &Element) -> Result<Element, CoverError> {
        self.space.check(big)?;
        Ok(self.coefficients_unchecked(big))
    }

    fn coefficients_unchecked(&self, big: &Element) -> Element {
        let m = self.e.len();
        Element::vector(
            big.as_slice()
                .chunks(m)
                .map(|row| row.iter().zip(&self.phi).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `P F`.
    pub fn project(&self, big: &Element) -> Result<Element, CoverError> {
        let c = self.coefficients(big)?;
        self.embed(&c)
    }
}

/// `J f` for the canonical Bochner pair of `space`.
pub fn bochner_embed(projection: &BochnerProjection, f: &Element) -> Result<Element, CoverError> {
    projection.embed(f)
}

/// `P F` for the given Bochner pair.
pub fn bochner_projection(projection: &BochnerProjection, big: &Element) -> Result<Element, CoverError> {
    projection.project(big)
}

fn dual_norm(q: f64, phi: &[f64]) -> f64 {
    if q == 1.0 {
        phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        let conj = q / (q - 1.0);
        SpaceSpec::EllP { p: conj, dim: phi.len() }.norm_unchecked(&Element::vector(phi.to_vec()))
    }
}

/// A contractive linear map from a surrogate space onto (an isometric copy of) a
/// complemented subspace, used to pull coverings back.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractiveMap {
    Identity(SpaceSpec),
    /// `F ↦ J⁻¹ P F`, landing in the scalar space.
    Bochner(BochnerProjection),
}

impl ContractiveMap {
    pub fn domain(&self) -> &SpaceSpec {
        match self {
            ContractiveMap::Identity(s) => s,
            ContractiveMap::Bochner(b) => b.space(),
        }
    }

    pub fn codomain(&self) -> SpaceSpec {
        match self {
            ContractiveMap::Identity(s) => s.clone(),
            ContractiveMap::Bochner(b) => b.scalar_space(),
        }
    }

    pub fn apply(&self, x: &Element) -> Element {
        match self {
            ContractiveMap::Identity(_) => x.clone(),
            ContractiveMap::Bochner(b) => b.coefficients_unchecked(x),
        }
    }

    /// A right inverse: `apply(embed(y)) = y`, isometric.
    pub fn embed(&self, y: &Element) -> Result<Element, CoverError> {
        match self {
            ContractiveMap::Identity(_) => Ok(y.clone()),
            ContractiveMap::Bochner(b) => b.embed(y),
        }
    }

    /// Coefficients of `ψ ∘ map` for a functional `ψ` on the codomain.
    pub fn pull_functional(&self, psi: &[f64]) -> Vec<f64> {
        match self {
            ContractiveMap::Identity(_) => psi.to_vec(),
            ContractiveMap::Bochner(b) => psi.iter().flat_map(|&c| b.phi.iter().map(move |&f| c * f)).collect(),
        }
    }
}

/// The linear map whose norm defines a cap: `f ↦ L f` measured in [`CapProjection::target`].
#[derive(Debug, Clone, PartialEq)]
pub enum CapProjection {
    Block(BlockProjection),
    Pullback { map: ContractiveMap, inner: Box<CapProjection> },
}

impl CapProjection {
    pub fn domain(&self) -> &SpaceSpec {
        match self {
            CapProjection::Block(b) => b.ambient(),
            CapProjection::Pullback { map, .. } => map.domain(),
        }
    }

    /// Space in which the image is normed.
    pub fn target(&self) -> SpaceSpec {
        match self {
            CapProjection::Block(b) => b.ambient().clone(),
            CapProjection::Pullback { inner, .. } => inner.target(),
        }
    }

    pub fn image(&self, f: &Element) -> Element {
        match self {
            CapProjection::Block(b) => b.project_unchecked(f),
            CapProjection::Pullback { map, inner } => inner.image(&map.apply(f)),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CapProjection::Block(b) => b.is_zero(),
            CapProjection::Pullback { inner, .. } => inner.is_zero(),
        }
    }

    /// The block projection, when the cap is not a pullback.
    pub fn as_block(&self) -> Option<&BlockProjection> {
        match self {
            CapProjection::Block(b) => Some(b),
            CapProjection::Pullback { .. } => None,
        }
    }

    /// `max(‖map(f)‖ - 1)` over the maps of nested pullbacks (`-∞` for blocks).
    fn range_excess(&self, f: &Element) -> f64 {
        match self {
            CapProjection::Block(_) => f64::NEG_INFINITY,
            CapProjection::Pullback { map, inner } => {
                let y = map.apply(f);
                (map.codomain().norm_unchecked(&y) - 1.0).max(inner.range_excess(&y))
            }
        }
    }
}

/// `{f : ‖f‖ ≤ 1, ‖L f‖ ≤ c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCapSet {
    ambient: SpaceSpec,
    projection: CapProjection,
    cap: f64,
}

impl NormCapSet {
    pub fn new(projection: CapProjection, cap: f64) -> Result<Self, CoverError> {
        if !(0.0..=1.0).contains(&cap) {
            return Err(CoverError::InvalidCap(cap));
        }
        Ok(NormCapSet { ambient: projection.domain().clone(), projection, cap })
    }

    pub fn block(projection: BlockProjection, cap: f64) -> Result<Self, CoverError> {
        Self::new(CapProjection::Block(projection), cap)
    }

    pub fn ambient(&self) -> &SpaceSpec {
        &self.ambient
    }

    pub fn projection(&self) -> &CapProjection {
        &self.projection
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Same projection, different cap.
    pub fn with_cap(&self, cap: f64) -> Result<Self, CoverError> {
        Self::new(self.projection.clone(), cap)
    }

    /// `‖L f‖`.
    pub fn seminorm(&self, f: &Element) -> Result<f64, CoverError> {
        self.ambient.check(f)?;
        Ok(self.seminorm_unchecked(f))
    }

    pub(crate) fn seminorm_unchecked(&self, f: &Element) -> f64 {
        self.projection.target().norm_unchecked(&self.projection.image(f))
    }

    /// Largest constraint violation: `max(‖f‖-1, ‖Lf‖-c, ...)`. Nonpositive inside the set.
    pub fn excess(&self, f: &Element) -> Result<f64, CoverError> {
        self.ambient.check(f)?;
        Ok(self.excess_unchecked(f))
    }

    pub(crate) fn excess_unchecked(&self, f: &Element) -> f64 {
        let ball = self.ambient.norm_unchecked(f) - 1.0;
        let cap = self.seminorm_unchecked(f) - self.cap;
        ball.max(cap).max(self.projection.range_excess(f))
    }

    pub fn contains(&self, f: &Element) -> Result<bool, CoverError> {
        Ok(self.excess(f)? <= MEMBERSHIP_TOL)
    }
}

/// `f ∈ A` with absolute tolerance [`MEMBERSHIP_TOL`].
pub fn membership(set: &NormCapSet, f: &Element) -> Result<bool, CoverError> {
    set.contains(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Block,
    Hilbert,
    Pullback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringFamily {
    ambient: SpaceSpec,
    sets: Vec<NormCapSet>,
    provenance: Provenance,
}

impl CoveringFamily {
    pub fn new(ambient: &SpaceSpec, sets: Vec<NormCapSet>, provenance: Provenance) -> Result<Self, CoverError> {
        if sets.is_empty() {
            return Err(CoverError::EmptyFamily);
        }
        if sets.iter().any(|s| s.ambient() != ambient) {
            return Err(CoverError::SpaceMismatch("set outside the family's ambient space"));
        }
        Ok(CoveringFamily { ambient: ambient.clone(), sets, provenance })
    }

    pub fn ambient(&self) -> &SpaceSpec {
        &self.ambient
    }

    pub fn sets(&self) -> &[NormCapSet] {
        &self.sets
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Family with every cap multiplied by `factor`.
    pub fn with_scaled_caps(&self, factor: f64) -> Result<Self, CoverError> {
        let sets = self.sets.iter().map(|s| s.with_cap(s.cap() * factor)).collect::<Result<_, _>>()?;
        Self::new(&self.ambient, sets, self.provenance)
    }

    /// `min_k excess_k(f)`: nonpositive iff some set contains `f`.
    pub fn slack(&self, f: &Element) -> Result<f64, CoverError> {
        self.ambient.check(f)?;
        Ok(self.slack_unchecked(f))
    }

    fn slack_unchecked(&self, f: &Element) -> f64 {
        self.sets.iter().map(|s| s.excess_unchecked(f)).fold(f64::INFINITY, f64::min)
    }
}

fn validate_partition(atoms: usize, partition: &[Vec<usize>]) -> Result<(), CoverError> {
    if partition.is_empty() {
        return Err(CoverError::InvalidPartition("no blocks".into()));
    }
    let mut seen = vec![false; atoms];
    for (k, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(CoverError::InvalidPartition(format!("block {k} is empty")));
        }
        for &i in block {
            if i >= atoms {
                return Err(CoverError::InvalidPartition(format!("index {i} out of range 0..{atoms}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(CoverError::InvalidPartition(format!("index {i} appears twice")));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CoverError::InvalidPartition(format!("index {i} is not covered")));
    }
    Ok(())
}

/// Splits `0..atoms` into `n` contiguous blocks whose sizes differ by at most one.
pub fn contiguous_partition(atoms: usize, n: usize) -> Result<Vec<Vec<usize>>, CoverError> {
    if n == 0 || n > atoms {
        return Err(CoverError::InvalidPartition(format!("cannot split {atoms} atoms into {n} blocks")));
    }
    let (q, r) = (atoms / n, atoms % n);
    let mut start = 0;
    Ok((0..n)
        .map(|k| {
            let len = q + usize::from(k < r);
            let block = (start..start + len).collect();
            start += len;
            block
        })
        .collect())
}

/// The pigeonhole covering: one cap `‖P_k f‖ ≤ n^{-1/p}` per block of the partition.
pub fn build_block_covering(space: &SpaceSpec, partition: &[Vec<usize>]) -> Result<CoveringFamily, CoverError> {
    if !space.is_scalar_lp() {
        return Err(CoverError::SpaceMismatch("block coverings need an ℓ_p or weighted L_p space"));
    }
    validate_partition(space.atoms().unwrap(), partition)?;
    let n = partition.len() as f64;
    let cap = n.powf(-1.0 / space.p());
    let sets = partition
        .iter()
        .map(|b| NormCapSet::block(BlockProjection::coordinates(space, b.clone())?, cap))
        .collect::<Result<Vec<_>, _>>()?;
    CoveringFamily::new(space, sets, Provenance::Block)
}

/// Two caps `‖P_j x‖ ≤ 1/√2` for the coordinate halves of an `ℓ_2` space.
pub fn build_hilbert_two_cover(
    space: &SpaceSpec,
    first: Vec<usize>,
    second: Vec<usize>,
) -> Result<CoveringFamily, CoverError> {
    if !matches!(space, SpaceSpec::EllP { p, .. } if *p == 2.0) {
        return Err(CoverError::NotHilbert);
    }
    if first.is_empty() || second.is_empty() {
        return Err(CoverError::EmptyHalf);
    }
    validate_partition(space.dimension(), &[first.clone(), second.clone()])?;
    let cap = std::f64::consts::FRAC_1_SQRT_2;
    let sets = vec![
        NormCapSet::block(BlockProjection::coordinates(space, first)?, cap)?,
        NormCapSet::block(BlockProjection::coordinates(space, second)?, cap)?,
    ];
    CoveringFamily::new(space, sets, Provenance::Hilbert)
}

/// Two-piece Hilbert cover for `H = span(first) ⊕ span(first)^⊥`.
pub fn build_hilbert_two_cover_orthogonal(space: &SpaceSpec, first: Vec<Vec<f64>>) -> Result<CoveringFamily, CoverError> {
    if !matches!(space, SpaceSpec::EllP { p, .. } if *p == 2.0) {
        return Err(CoverError::NotHilbert);
    }
    let second = crate::linalg::kernel_basis(&first, space.dimension());
    if first.is_empty() || second.is_empty() {
        return Err(CoverError::EmptyHalf);
    }
    let cap = std::f64::consts::FRAC_1_SQRT_2;
    let sets = vec![
        NormCapSet::block(BlockProjection::orthogonal(space, first)?, cap)?,
        NormCapSet::block(BlockProjection::orthogonal(space, second)?, cap)?,
    ];
    CoveringFamily::new(space, sets, Provenance::Hilbert)
}

/// Largest sampled `‖map(x)‖ - ‖x‖` over sphere points of the domain.
pub fn contraction_excess(map: &ContractiveMap, seed: u64, count: usize) -> f64 {
    let domain = map.domain().clone();
    let codomain = map.codomain();
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let x = sampling::sphere_point(&domain, seed, i);
            codomain.norm_unchecked(&map.apply(&x)) - domain.norm_unchecked(&x)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// `A_k = {x ∈ B_X : map(x) ∈ B_k}` for each set `B_k` of a family on the codomain.
pub fn pullback_covering(map: &ContractiveMap, family: &CoveringFamily, seed: u64) -> Result<CoveringFamily, CoverError> {
    if &map.codomain() != family.ambient() {
        return Err(CoverError::SpaceMismatch("family does not live on the codomain of the map"));
    }
    let excess = contraction_excess(map, seed, CONTRACTION_SAMPLES);
    if excess > CONTRACTION_TOL {
        return Err(CoverError::NonContractive { excess });
    }
    let sets = family
        .sets()
        .iter()
        .map(|s| {
            NormCapSet::new(
                CapProjection::Pullback { map: map.clone(), inner: Box::new(s.projection().clone()) },
                s.cap(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    CoveringFamily::new(map.domain(), sets, Provenance::Pullback)
}

/// Closed-form check for block and Hilbert families: `Σ_k ‖P_k f‖^p = ‖f‖^p`
/// and `min_k ‖P_k f‖^p ≤ ‖f‖^p / n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticCheck {
    pub identity_max_error: f64,
    pub pigeonhole_failures: usize,
    /// Every cap is at least `n^{-1/p}`, so the pigeonhole bound implies a cover.
    pub caps_sufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// Points checked: `count` sphere points plus the same points at radius `U^{1/d}`.
    pub points_checked: usize,
    pub violation_count: usize,
    /// The first [`MAX_REPORTED_VIOLATIONS`] violators, in sample order.
    pub violations: Vec<Element>,
    /// Largest `min_k excess_k` seen; positive exactly when something is uncovered.
    pub max_slack: f64,
    pub tolerance: f64,
    pub analytic: Option<AnalyticCheck>,
}

impl CoverReport {
    pub fn covered(&self) -> bool {
        self.violation_count == 0
    }
}

struct PointOutcome {
    slack: [f64; 2],
    identity_error: f64,
    pigeonhole_failed: bool,
}

/// Monte-Carlo check that every sampled ball point lies in some set of the family.
pub fn verify_cover(family: &CoveringFamily, seed: u64, count: usize) -> CoverReport {
    let space = family.ambient().clone();
    let blocks: Option<Vec<&BlockProjection>> = match family.provenance() {
        Provenance::Block | Provenance::Hilbert => family.sets().iter().map(|s| s.projection().as_block()).collect(),
        Provenance::Pullback => None,
    };
    let n = family.len() as f64;
    let mass = |f: &Element| -> f64 {
        if space.is_euclidean() {
            f.dot(f)
        } else {
            space.mass(f).unwrap_or(f64::NAN)
        }
    };

    let outcomes: Vec<PointOutcome> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (x, r) = sampling::ball_point(&space, seed, i);
            let inner = x.scaled(r);
            let slack = [family.slack_unchecked(&x), family.slack_unchecked(&inner)];
            let (mut identity_error, mut pigeonhole_failed) = (0.0_f64, false);
            if let Some(blocks) = &blocks {
                for f in [&x, &inner] {
                    let total = mass(f);
                    let parts: Vec<f64> = blocks.iter().map(|b| mass(&b.project_unchecked(f))).collect();
                    let sum: f64 = parts.iter().sum();
                    identity_error = identity_error.max((sum - total).abs());
                    let smallest = parts.iter().copied().fold(f64::INFINITY, f64::min);
                    pigeonhole_failed |= smallest > total / n + MEMBERSHIP_TOL;
                }
            }
            PointOutcome { slack, identity_error, pigeonhole_failed }
        })
        .collect();

    let mut report = CoverReport {
        points_checked: 2 * count,
        violation_count: 0,
        violations: Vec::new(),
        max_slack: f64::NEG_INFINITY,
        tolerance: MEMBERSHIP_TOL,
        analytic: None,
    };
    let mut identity_max_error = 0.0_f64;
    let mut pigeonhole_failures = 0;
    for (i, o) in outcomes.iter().enumerate() {
        identity_max_error = identity_max_error.max(o.identity_error);
        pigeonhole_failures += usize::from(o.pigeonhole_failed);
        for (j, &s) in o.slack.iter().enumerate() {
            report.max_slack = report.max_slack.max(s);
            if s > MEMBERSHIP_TOL {
                report.violation_count += 1;
                if report.violations.len() < MAX_REPORTED_VIOLATIONS {
                    let (x, r) = sampling::ball_point(&space, seed, i as u64);
                    report.violations.push(if j == 0 { x } else { x.scaled(r) });
                }
            }
        }
    }
    if let Some(blocks) = &blocks {
        let threshold = n.powf(-1.0 / space.p());
        let caps_sufficient = family.sets().iter().all(|s| s.cap() >= threshold * (1.0 - 1e-15))
            && blocks_partition_space(&space, blocks);
        report.analytic = Some(AnalyticCheck { identity_max_error, pigeonhole_failures, caps_sufficient });
    }
    report
}

fn blocks_partition_space(space: &SpaceSpec, blocks: &[&BlockProjection]) -> bool {
    match blocks.iter().map(|b| b.flat_indices()).collect::<Option<Vec<_>>>() {
        Some(lists) => {
            let mut seen = vec![0usize; space.dimension()];
            lists.iter().flatten().for_each(|&i| seen[i] += 1);
            seen.iter().all(|&c| c == 1)
        }
        None => {
            let total: usize = blocks
                .iter()
                .map(|b| match b.kind() {
                    BlockKind::Orthogonal(v) => v.len(),
                    BlockKind::Coordinates(_) => 0,
                })
                .sum();
            total == space.dimension()
        }
    }
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProjectionRepr {
    Block { block: Vec<usize> },
    Basis { basis: Vec<Vec<f64>> },
    Pullback { map: MapRepr, inner: Box<ProjectionRepr> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapRepr {
    Identity,
    Bochner { e: Vec<f64>, phi: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct SetRepr {
    #[serde(flatten)]
    projection: ProjectionRepr,
    cap: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRepr {
    ambient: SpaceSpec,
    sets: Vec<SetRepr>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct StandaloneSetRepr {
    ambient: SpaceSpec,
    #[serde(flatten)]
    projection: ProjectionRepr,
    cap: f64,
}

impl From<&CapProjection> for ProjectionRepr {
    fn from(p: &CapProjection) -> Self {
        match p {
            CapProjection::Block(b) => match b.kind() {
                BlockKind::Coordinates(block) => ProjectionRepr::Block { block: block.clone() },
                BlockKind::Orthogonal(basis) => ProjectionRepr::Basis { basis: basis.clone() },
            },
            CapProjection::Pullback { map, inner } => ProjectionRepr::Pullback {
                map: match map {
                    ContractiveMap::Identity(_) => MapRepr::Identity,
                    ContractiveMap::Bochner(b) => MapRepr::Bochner { e: b.e.clone(), phi: b.phi.clone() },
                },
                inner: Box::new(inner.as_ref().into()),
            },
        }
    }
}

impl ProjectionRepr {
    fn build(self, ambient: &SpaceSpec) -> Result<CapProjection, CoverError> {
        Ok(match self {
            ProjectionRepr::Block { block } => CapProjection::Block(BlockProjection::coordinates(ambient, block)?),
            ProjectionRepr::Basis { basis } => CapProjection::Block(BlockProjection::orthogonal(ambient, basis)?),
            ProjectionRepr::Pullback { map, inner } => {
                let map = match map {
                    MapRepr::Identity => ContractiveMap::Identity(ambient.clone()),
                    MapRepr::Bochner { e, phi } => ContractiveMap::Bochner(BochnerProjection::new(ambient, e, phi)?),
                };
                let inner = inner.build(&map.codomain())?;
                CapProjection::Pullback { map, inner: Box::new(inner) }
            }
        })
    }
}

impl Serialize for CoveringFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FamilyRepr {
            ambient: self.ambient.clone(),
            sets: self
                .sets
                .iter()
                .map(|s| SetRepr { projection: s.projection().into(), cap: s.cap })
                .collect(),
            provenance: self.provenance,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoveringFamily {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = FamilyRepr::deserialize(deserializer)?;
        let sets = repr
            .sets
            .into_iter()
            .map(|s| NormCapSet::new(s.projection.build(&repr.ambient)?, s.cap))
            .collect::<Result<Vec<_>, CoverError>>()
            .map_err(serde::de::Error::custom)?;
        CoveringFamily::new(&repr.ambient, sets, repr.provenance).map_err(serde::de::Error::custom)
    }
}

impl Serialize for NormCapSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StandaloneSetRepr { ambient: self.ambient.clone(), projection: (&self.projection).into(), cap: self.cap }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NormCapSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = StandaloneSetRepr::deserialize(deserializer)?;
        repr.projection
            .build(&repr.ambient)
            .and_then(|p| NormCapSet::new(p, repr.cap))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn hilbert_cap() -> NormCapSet {
        let s = SpaceSpec::ell_p(2.0, 4).unwrap();
        NormCapSet::block(BlockProjection::coordinates(&s, vec![0, 1]).unwrap(), FRAC_1_SQRT_2).unwrap()
    }

    #[test]
    fn membership_examples() {
        let a = hilbert_cap();
        assert!(membership(&a, &Element::vector(vec![0.0, 0.0, 1.0, 0.0])).unwrap());
        assert!(!membership(&a, &Element::vector(vec![1.0, 0.0, 0.0, 0.0])).unwrap());
        assert!(membership(&a, &Element::vector(vec![0.0; 4])).unwrap());
        assert!(membership(&a, &Element::vector(vec![1.0; 3])).is_err());
    }

    #[test]
    fn block_caps() {
        let s = SpaceSpec::ell_p(2.0, 4).unwrap();
        let fam = build_block_covering(&s, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(fam.sets().iter().all(|a| a.cap() == 2f64.powf(-0.5)));
        assert!((fam.sets()[0].cap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let s1 = SpaceSpec::ell_p(1.0, 8).unwrap();
        let fam = build_block_covering(&s1, &contiguous_partition(8, 4).unwrap()).unwrap();
        assert!(fam.sets().iter().all(|a| a.cap() == 0.25));

        let fam = build_block_covering(&s, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(fam.sets()[0].cap(), 1.0);
    }

    #[test]
    fn invalid_partitions() {
        let s = SpaceSpec::ell_p(2.0, 4).unwrap();
        for bad in [
            vec![vec![0, 1], vec![1, 2, 3]],
            vec![vec![0, 1], vec![2]],
            vec![vec![0, 1, 2, 3], vec![]],
            vec![vec![0, 1, 2, 3, 4]],
        ] {
            assert!(matches!(build_block_covering(&s, &bad), Err(CoverError::InvalidPartition(_))));
        }
        let schatten = SpaceSpec::schatten(2.0, 2, 2).unwrap();
        assert!(build_block_covering(&schatten, &[vec![0]]).is_err());
    }

    #[test]
    fn hilbert_cover_shape_and_tie() {
        let s = SpaceSpec::ell_p(2.0, 8).unwrap();
        let fam = build_hilbert_two_cover(&s, (0..4).collect(), (4..8).collect()).unwrap();
        assert_eq!(fam.len(), 2);
        assert!(fam.sets().iter().all(|a| a.cap() == FRAC_1_SQRT_2));
        let h = 0.5;
        let tie = Element::vector(vec![h, h, 0.0, 0.0, h, h, 0.0, 0.0]);
        assert!(fam.sets().iter().all(|a| a.contains(&tie).unwrap()));
        assert_eq!(build_hilbert_two_cover(&s, vec![], (0..8).collect()), Err(CoverError::EmptyHalf));
        let l3 = SpaceSpec::ell_p(3.0, 8).unwrap();
        assert_eq!(build_hilbert_two_cover(&l3, vec![0], (1..8).collect()), Err(CoverError::NotHilbert));
    }

    #[test]
    fn block_cover_has_no_violations() {
        let s = SpaceSpec::ell_p(1.5, 12).unwrap();
        let fam = build_block_covering(&s, &contiguous_partition(12, 3).unwrap()).unwrap();
        let report = verify_cover(&fam, 5, 5_000);
        assert!(report.covered());
        let analytic = report.analytic.unwrap();
        assert_eq!(analytic.pigeonhole_failures, 0);
        assert!(analytic.identity_max_error < 1e-10);
        assert!(analytic.caps_sufficient);
    }

    #[test]
    fn halved_caps_miss_balanced_vectors() {
        let s = SpaceSpec::ell_p(2.0, 8).unwrap();
        let fam = build_block_covering(&s, &contiguous_partition(8, 2).unwrap()).unwrap();
        let halved = fam.with_scaled_caps(0.5).unwrap();
        // every block carries mass 1/n, so ‖P_k f‖ = n^{-1/p} for all k
        let balanced = Element::vector(vec![8f64.powf(-0.5); 8]);
        assert!(fam.slack(&balanced).unwrap() <= MEMBERSHIP_TOL);
        assert!(halved.slack(&balanced).unwrap() > 0.0);
        let report = verify_cover(&halved, 1, 2_000);
        assert!(report.violation_count > 0);
        assert!(!report.violations.is_empty());
        assert!(!report.analytic.unwrap().caps_sufficient);
    }

    #[test]
    fn single_piece_is_the_ball() {
        let s = SpaceSpec::ell_p(3.0, 5).unwrap();
        let fam = build_block_covering(&s, &contiguous_partition(5, 1).unwrap()).unwrap();
        assert!(verify_cover(&fam, 0, 2_000).covered());
    }

    #[test]
    fn bochner_pair() {
        let s = SpaceSpec::bochner(2.0, vec![1.0; 4], 3.0, 3).unwrap();
        let bp = BochnerProjection::canonical(&s).unwrap();
        let f = Element::vector(vec![1.0, 0.0, 0.0, 0.0]);
        let jf = bochner_embed(&bp, &f).unwrap();
        assert_eq!(s.norm(&jf).unwrap(), bp.scalar_space().norm(&f).unwrap());
        assert_eq!(bochner_projection(&bp, &jf).unwrap(), jf);
        assert!(BochnerProjection::new(&s, vec![2.0, 0.0, 0.0], vec![0.5, 0.0, 0.0]).is_err());
        assert!(BochnerProjection::new(&s, vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn pullback_through_identity_is_pointwise_equal() {
        let s = SpaceSpec::ell_p(2.0, 6).unwrap();
        let fam = build_hilbert_two_cover(&s, vec![0, 1, 2], vec![3, 4, 5]).unwrap();
        let pulled = pullback_covering(&ContractiveMap::Identity(s.clone()), &fam, 0).unwrap();
        for x in sampling::sample_ball(&s, 9, 500) {
            for (a, b) in fam.sets().iter().zip(pulled.sets()) {
                assert_eq!(a.contains(&x).unwrap(), b.contains(&x).unwrap());
            }
        }
    }

    #[test]
    fn pullback_rejects_wrong_codomain() {
        let s = SpaceSpec::bochner(2.0, vec![1.0; 4], 2.0, 2).unwrap();
        let other = SpaceSpec::ell_p(2.0, 5).unwrap();
        let fam = build_hilbert_two_cover(&other, vec![0, 1], vec![2, 3, 4]).unwrap();
        let map = ContractiveMap::Bochner(BochnerProjection::canonical(&s).unwrap());
        assert!(matches!(pullback_covering(&map, &fam, 0), Err(CoverError::SpaceMismatch(_))));
    }

    #[test]
    fn family_json_round_trip() {
        let s = SpaceSpec::bochner(2.0, vec![1.0; 4], 2.0, 2).unwrap();
        let bp = BochnerProjection::canonical(&s).unwrap();
        let fam = build_hilbert_two_cover(&bp.scalar_space(), vec![0, 1], vec![2, 3]).unwrap();
        let pulled = pullback_covering(&ContractiveMap::Bochner(bp), &fam, 0).unwrap();
        for f in [&fam, &pulled] {
            let text = serde_json::to_string(f).unwrap();
            let back: CoveringFamily = serde_json::from_str(&text).unwrap();
            assert_eq!(&back, f);
        }
        let text = serde_json::to_string(&fam).unwrap();
        assert!(text.starts_with(r#"{"ambient":{"variant":"ell_p","p":2.0,"dim":4},"sets":[{"block":[0,1],"cap":0.7071067811865476}"#));
    }
}
