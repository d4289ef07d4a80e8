//! Seeded sampling on unit spheres and balls.
//!
//! Every sample `i` draws from its own ChaCha stream `(seed, i)`, so a batch is
//! reproducible and independent of how it is split across threads.
//!
//! On `ℓ_p` and weighted `ℓ_p` spheres the sample is the normalized
//! p-generalized Gaussian vector (density `∝ exp(-|x|^p)` per coordinate), which
//! is distributed according to the cone measure of the sphere. Schatten samples
//! are normalized Gaussian matrices and Bochner samples normalize generalized
//! Gaussian rows; neither is uniform with respect to any natural surface measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::space::{Element, SpaceSpec};

/// RNG for sample `index` of the batch identified by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One draw of the p-generalized Gaussian, `sign · G^{1/p}` with `G ~ Gamma(1/p, 1)`.
pub fn generalized_gaussian<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    let gamma = Gamma::new(1.0 / p, 1.0).expect("valid gamma shape");
    let magnitude = if p == 2.0 {
        // Gamma(1/2, 1)^{1/2} is |N(0, 1/2)|.
        let z: f64 = rng.sample(StandardNormal);
        z.abs() * std::f64::consts::FRAC_1_SQRT_2
    } else {
        gamma.sample(rng).powf(1.0 / p)
    };
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Unnormalized draw whose direction is the sphere sample.
fn raw_direction<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> Element {
    let p = space.p();
    match space {
        SpaceSpec::EllP { dim, .. } => {
            Element::vector((0..*dim).map(|_| generalized_gaussian(rng, p)).collect())
        }
        SpaceSpec::WeightedLp { weights, .. } => Element::vector(
            weights.iter().map(|w| generalized_gaussian(rng, p) * w.powf(-1.0 / p)).collect(),
        ),
        SpaceSpec::Schatten { rows, cols, .. } => Element::matrix(*rows, *cols, gaussian_vec(rng, rows * cols)),
        SpaceSpec::Bochner { weights, inner, .. } => {
            let mut data = Vec::with_capacity(weights.len() * inner.dim);
            for w in weights {
                let row: Vec<f64> = (0..inner.dim).map(|_| generalized_gaussian(rng, inner.p)).collect();
                let rn = SpaceSpec::EllP { p: inner.p, dim: inner.dim }.norm_unchecked(&Element::vector(row.clone()));
                let radial = generalized_gaussian(rng, p).abs() * w.powf(-1.0 / p);
                let s = if rn > 0.0 { radial / rn } else { 0.0 };
                data.extend(row.into_iter().map(|v| v * s));
            }
            Element::matrix(weights.len(), inner.dim, data)
        }
    }
}

/// Rescales `f` to unit norm (to within `1e-12`). Returns `None` for zero input.
pub fn normalize(space: &SpaceSpec, f: &Element) -> Option<Element> {
    let mut out = f.clone();
    for _ in 0..3 {
        let n = space.norm_unchecked(&out);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        if (n - 1.0).abs() <= 1e-13 {
            break;
        }
        out = out.scaled(1.0 / n);
    }
    Some(out)
}

/// Sphere sample `index` of batch `seed`.
pub fn sphere_point(space: &SpaceSpec, seed: u64, index: u64) -> Element {
    let mut rng = stream_rng(seed, index);
    loop {
        if let Some(e) = normalize(space, &raw_direction(space, &mut rng)) {
            return e;
        }
    }
}

/// `count` points of the unit sphere, deterministic in `seed`.
pub fn sample_sphere(space: &SpaceSpec, seed: u64, count: usize) -> Vec<Element> {
    (0..count as u64).into_par_iter().map(|i| sphere_point(space, seed, i)).collect()
}

/// Ball sample `index`: a sphere point and a radius `U^{1/d}` with `d` the real dimension.
pub fn ball_point(space: &SpaceSpec, seed: u64, index: u64) -> (Element, f64) {
    let x = sphere_point(space, seed, index);
    // separate stream family for the radius
    let mut rng = stream_rng(seed ^ 0x9E37_79B9_7F4A_7C15, index);
    let u: f64 = rng.random();
    (x, u.powf(1.0 / space.dimension() as f64))
}

/// `count` points of the unit ball under the radial `U^{1/d}` law.
pub fn sample_ball(space: &SpaceSpec, seed: u64, count: usize) -> Vec<Element> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (x, r) = ball_point(space, seed, i);
            x.scaled(r)
        })
        .collect()
}
