use nalgebra::DMatrix;
use proptest::prelude::*;

use theta_core::coverings::{
    build_block_covering, build_hilbert_two_cover, contiguous_partition, pullback_covering, verify_cover,
    BochnerProjection, ContractiveMap, NormCapSet,
};
use theta_core::inradius::{
    certify_lower, estimate_inradius, recheck_certificate, refute, threshold_function, CertificateStatus,
    InradiusConfig, Rigor,
};
use theta_core::moduli::{
    asymptotic_modulus_surrogate, power_type_fit, symmetric_modulus, AsymptoticConfig, CandidateFamily,
    DEFAULT_T_GRID,
};
use theta_core::optimize::AscentConfig;
use theta_core::projection::BlockProjection;
use theta_core::sampling;
use theta_core::{Element, SpaceSpec, Subspace};

fn spaces() -> Vec<SpaceSpec> {
    vec![
        SpaceSpec::ell_p(1.0, 6).unwrap(),
        SpaceSpec::ell_p(2.0, 5).unwrap(),
        SpaceSpec::ell_p(3.7, 7).unwrap(),
        SpaceSpec::weighted_lp(1.5, vec![0.2, 1.0, 3.0, 0.7]).unwrap(),
        SpaceSpec::schatten(1.0, 3, 4).unwrap(),
        SpaceSpec::schatten(3.0, 4, 4).unwrap(),
        SpaceSpec::bochner(2.5, vec![1.0, 0.3, 2.0], 1.2, 3).unwrap(),
    ]
}

fn gaussian_element(space: &SpaceSpec, seed: u64, index: u64) -> Element {
    let mut rng = sampling::stream_rng(seed, index);
    Element::from_flat(space.shape(), sampling::gaussian_vec(&mut rng, space.dimension()))
}

fn random_orthogonal(n: usize, seed: u64, index: u64) -> DMatrix<f64> {
    let mut rng = sampling::stream_rng(seed, index);
    DMatrix::from_vec(n, n, sampling::gaussian_vec(&mut rng, n * n)).qr().q()
}

fn random_kernel(space: &SpaceSpec, codim: usize, seed: u64, index: u64) -> Subspace {
    let mut rng = sampling::stream_rng(seed, index);
    let functionals = (0..codim).map(|_| sampling::gaussian_vec(&mut rng, space.dimension())).collect();
    Subspace::from_kernel(space, functionals).unwrap()
}

/// A member of `set`: a ball sample pulled inside the cap by scaling.
fn member(set: &NormCapSet, seed: u64, index: u64) -> Element {
    let (x, r) = sampling::ball_point(set.ambient(), seed, index);
    let f = x.scaled(r);
    let s = set.seminorm(&f).unwrap();
    if s > set.cap() {
        f.scaled(set.cap() / s * (1.0 - 1e-12))
    } else {
        f
    }
}

#[test]
fn triangle_inequality_ten_thousand_pairs() {
    for s in spaces() {
        for i in 0..10_000u64 {
            let f = gaussian_element(&s, 1, 2 * i);
            let g = gaussian_element(&s, 1, 2 * i + 1);
            let lhs = s.norm(&f.add(&g)).unwrap();
            assert!(lhs <= s.norm(&f).unwrap() + s.norm(&g).unwrap() + 1e-10, "{s:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pigeonhole_identity(p in 1.0f64..5.0, n in 1usize..6, extra in 0usize..10, seed in any::<u64>()) {
        let dim = n + extra;
        let space = SpaceSpec::ell_p(p, dim).unwrap();
        // random assignment of every coordinate to one of n blocks, each nonempty
        let mut rng = sampling::stream_rng(seed, 0);
        let mut parts = vec![Vec::new(); n];
        for i in 0..dim {
            let k = if i < n { i } else { rand::Rng::random_range(&mut rng, 0..n) };
            parts[k].push(i);
        }
        let fam = build_block_covering(&space, &parts).unwrap();
        let f = gaussian_element(&space, seed, 1);
        let sum: f64 = fam.sets().iter().map(|s| s.seminorm(&f).unwrap().powf(p)).sum();
        let total = space.norm(&f).unwrap().powf(p);
        prop_assert!((sum - total).abs() <= 1e-10 * total.max(1.0));
        for s in fam.sets() {
            prop_assert_eq!(s.cap(), (n as f64).powf(-1.0 / p));
        }
    }

    #[test]
    fn schatten_two_is_frobenius(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
        let s = SpaceSpec::schatten(2.0, rows, cols).unwrap();
        let f = gaussian_element(&s, seed, 0);
        prop_assert!((s.norm(&f).unwrap() - f.euclidean_norm()).abs() <= 1e-12 * f.euclidean_norm().max(1.0));
    }

    #[test]
    fn schatten_unitary_invariance(p in 1.0f64..6.0, n in 2usize..7, seed in any::<u64>()) {
        let s = SpaceSpec::schatten(p, n, n).unwrap();
        let f = gaussian_element(&s, seed, 0);
        let u = random_orthogonal(n, seed, 1);
        let v = random_orthogonal(n, seed, 2);
        let g = Element::from_matrix(&(u * f.to_matrix() * v));
        let (a, b) = (s.norm(&f).unwrap(), s.norm(&g).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn bochner_scalar_inner_is_weighted_lp(p in 1.0f64..5.0, q in 1.0f64..5.0, w in prop::collection::vec(0.01f64..10.0, 1..8), seed in any::<u64>()) {
        let b = SpaceSpec::bochner(p, w.clone(), q, 1).unwrap();
        let l = SpaceSpec::weighted_lp(p, w.clone()).unwrap();
        let data = gaussian_element(&l, seed, 0).into_vec();
        let fb = Element::matrix(w.len(), 1, data.clone());
        prop_assert_eq!(b.norm(&fb).unwrap(), l.norm(&Element::vector(data)).unwrap());
    }

    #[test]
    fn bochner_embedding_is_isometric(p in 1.0f64..4.0, q in 1.0f64..4.0, atoms in 1usize..6, m in 1usize..4, seed in any::<u64>()) {
        let s = SpaceSpec::bochner(p, vec![1.0; atoms], q, m).unwrap();
        let proj = BochnerProjection::canonical(&s).unwrap();
        let scalar = proj.scalar_space();
        let f = gaussian_element(&scalar, seed, 0);
        let jf = proj.embed(&f).unwrap();
        prop_assert!((s.norm(&jf).unwrap() - scalar.norm(&f).unwrap()).abs() <= 1e-12 * scalar.norm(&f).unwrap().max(1.0));
        let pjf = proj.project(&jf).unwrap();
        for (a, b) in pjf.as_slice().iter().zip(jf.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_certificates_are_sound(half in 2usize..6, codim in 0usize..3, r in 0.05f64..0.9, seed in any::<u64>()) {
        let dim = 2 * half;
        let space = SpaceSpec::ell_p(2.0, dim).unwrap();
        let fam = build_hilbert_two_cover(&space, (0..half).collect(), (half..dim).collect()).unwrap();
        let set = &fam.sets()[0];
        let x = member(set, seed, 0).scaled(0.3);
        let y = random_kernel(&space, codim, seed, 1);
        let cert = certify_lower(set, &x, &y, r, &InradiusConfig::default()).unwrap();
        prop_assert_eq!(cert.rigor, Rigor::ExactHilbert);
        if cert.status == CertificateStatus::Verified {
            prop_assert_eq!(recheck_certificate(&cert, seed, 2_000).counterexamples, 0);
        } else {
            // a failed exact certificate reports a maximum beyond the constraints
            prop_assert!(cert.max_norm > 1.0 || cert.max_seminorm > set.cap());
        }
    }

    #[test]
    fn witnesses_recheck(p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]), n in 2usize..5, codim in 0usize..4, slack in 1e-3f64..0.3, seed in any::<u64>()) {
        let dim = 6 * n;
        let space = SpaceSpec::ell_p(p, dim).unwrap();
        let fam = build_block_covering(&space, &contiguous_partition(dim, n).unwrap()).unwrap();
        let set = &fam.sets()[(seed % n as u64) as usize];
        let r = (set.cap() * (1.0 + slack)).min(1.0);
        let x = member(set, seed, 0).scaled(0.5);
        let y = random_kernel(&space, codim, seed, 1);
        if let Ok(w) = refute(set, &x, &y, r) {
            prop_assert!(w.recheck().is_ok());
            prop_assert!(!set.contains(&x.axpy(r, &w.direction)).unwrap());
            prop_assert!(w.attained >= w.certified_bound * (1.0 - 1e-12));
        }
    }

    #[test]
    fn threshold_function_at_zero_is_exact(p in 1.0f64..5.0, r in 0.01f64..1.0, seed in any::<u64>()) {
        let space = SpaceSpec::ell_p(p, 6).unwrap();
        let mut v = gaussian_element(&space, seed, 0);
        v.as_mut_slice()[1] = 0.0;
        v.as_mut_slice()[4] = 0.0;
        let (f, a) = threshold_function(&space, &v, &[0, 1, 2, 3, 4, 5], &[1, 4], r);
        prop_assert_eq!(a, 0.0);
        prop_assert_eq!(f, space.mass(&v).unwrap() + r.powf(p));
    }

    #[test]
    fn subspace_dual_representation(n in 2usize..10, codim in 0usize..4, seed in any::<u64>()) {
        let space = SpaceSpec::ell_p(1.5, n).unwrap();
        let y = random_kernel(&space, codim.min(n - 1), seed, 0);
        prop_assert!(y.verify().is_ok());
        prop_assert_eq!(y.dim() + y.codim(), n);
    }
}

#[test]
fn cap_sets_are_convex() {
    let l3 = SpaceSpec::ell_p(3.0, 12).unwrap();
    let l2 = SpaceSpec::ell_p(2.0, 12).unwrap();
    let boch = SpaceSpec::bochner(2.0, vec![1.0; 6], 3.0, 2).unwrap();
    let mut sets: Vec<NormCapSet> = Vec::new();
    sets.extend(build_block_covering(&l3, &contiguous_partition(12, 3).unwrap()).unwrap().sets().iter().cloned());
    let hilbert = build_hilbert_two_cover(&l2, (0..6).collect(), (6..12).collect()).unwrap();
    sets.extend(hilbert.sets().iter().cloned());
    let map = ContractiveMap::Bochner(BochnerProjection::canonical(&boch).unwrap());
    let range = build_hilbert_two_cover(&map.codomain(), (0..3).collect(), (3..6).collect()).unwrap();
    sets.extend(pullback_covering(&map, &range, 1).unwrap().sets().iter().cloned());
    for (k, set) in sets.iter().enumerate() {
        for i in 0..10_000u64 {
            let f = member(set, 10 + k as u64, 2 * i);
            let g = member(set, 10 + k as u64, 2 * i + 1);
            for lambda in [0.25, 0.5, 0.75] {
                let h = f.scaled(lambda).axpy(1.0 - lambda, &g);
                assert!(set.contains(&h).unwrap(), "set {k}, pair {i}, λ={lambda}");
            }
        }
    }
}

#[test]
fn pullback_preserves_covering_across_seeds() {
    let boch = SpaceSpec::bochner(2.0, vec![1.0; 8], 1.5, 3).unwrap();
    let map = ContractiveMap::Bochner(BochnerProjection::canonical(&boch).unwrap());
    let range = build_hilbert_two_cover(&map.codomain(), (0..4).collect(), (4..8).collect()).unwrap();
    let pulled = pullback_covering(&map, &range, 0).unwrap();
    for seed in 0..5 {
        assert!(verify_cover(&range, seed, 5_000).covered());
        assert!(verify_cover(&pulled, seed, 5_000).covered());
    }
}

#[test]
fn lower_bound_monotone_in_cap() {
    let space = SpaceSpec::ell_p(3.0, 12).unwrap();
    let block = BlockProjection::coordinates(&space, (0..4).collect()).unwrap();
    let mut last = 0.0;
    for c in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let set = NormCapSet::block(block.clone(), c).unwrap();
        let est = estimate_inradius(&set, 2, &InradiusConfig::default()).unwrap();
        assert!(est.lower >= last);
        last = est.lower;
    }
}

#[test]
fn block_intervals_do_not_depend_on_dimension() {
    for p in [1.5, 2.0, 3.0] {
        for n in [2usize, 4] {
            let expected = (n as f64).powf(-1.0 / p);
            for dim in [8usize, 16, 32, 64] {
                let space = SpaceSpec::ell_p(p, dim).unwrap();
                let fam = build_block_covering(&space, &contiguous_partition(dim, n).unwrap()).unwrap();
                let est = estimate_inradius(&fam.sets()[0], 1, &InradiusConfig::default()).unwrap();
                assert!(est.lower <= expected && expected <= est.upper, "p={p} n={n} N={dim}: {est:?}");
            }
        }
    }
}

#[test]
fn symmetric_modulus_bounds_and_monotonicity() {
    let cfg = AscentConfig { restarts: 8, max_iter: 300, ..Default::default() };
    for s in [SpaceSpec::ell_p(1.5, 5).unwrap(), SpaceSpec::schatten(3.0, 3, 3).unwrap()] {
        let ts = [0.01, 0.05, 0.1, 0.3, 0.6, 1.0];
        let values: Vec<f64> = ts.iter().map(|&t| symmetric_modulus(&s, t, &cfg).unwrap().value).collect();
        for (t, v) in ts.iter().zip(&values) {
            assert!(*v >= 0.0 && *v <= t + 1e-9);
        }
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{values:?}");
        }
    }
    let l = SpaceSpec::ell_p(4.0, 6).unwrap();
    for t in [0.1, 0.5, 1.0] {
        let a = asymptotic_modulus_surrogate(&l, t, 2, &CandidateFamily::CoordinateTail, &AsymptoticConfig::default())
            .unwrap();
        assert!(a.value >= 0.0 && a.value <= t + 1e-9);
    }
}

#[test]
fn hilbert_moduli_closed_form() {
    let s = SpaceSpec::ell_p(2.0, 8).unwrap();
    for t in [0.1f64, 0.2, 0.5, 1.0] {
        let exact = (1.0 + t * t).sqrt() - 1.0;
        let sym = symmetric_modulus(&s, t, &AscentConfig::default()).unwrap().value;
        let asy = asymptotic_modulus_surrogate(&s, t, 1, &CandidateFamily::CoordinateTail, &AsymptoticConfig::default())
            .unwrap()
            .value;
        assert!((sym - exact).abs() < 1e-3 && (asy - exact).abs() < 1e-3, "t={t}: {sym} {asy} {exact}");
    }
}

#[test]
fn commutative_power_types() {
    let cfg = AscentConfig { restarts: 8, ..Default::default() };
    for p in [1.5, 2.0, 3.0, 4.0] {
        let s = SpaceSpec::ell_p(p, 8).unwrap();
        let sym: Vec<(f64, f64)> =
            DEFAULT_T_GRID.iter().map(|&t| (t, symmetric_modulus(&s, t, &cfg).unwrap().value)).collect();
        let asy: Vec<(f64, f64)> = DEFAULT_T_GRID
            .iter()
            .map(|&t| {
                let m = asymptotic_modulus_surrogate(&s, t, 1, &CandidateFamily::CoordinateTail, &AsymptoticConfig::default());
                (t, m.unwrap().value)
            })
            .collect();
        let rs = power_type_fit(&sym).unwrap().r;
        let ra = power_type_fit(&asy).unwrap().r;
        assert!((rs - p.min(2.0)).abs() < 0.05, "p={p}: symmetric r={rs}");
        assert!((ra - p).abs() < 0.05, "p={p}: asymptotic r={ra}");
    }
}
