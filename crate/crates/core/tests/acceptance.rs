//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use theta_core::coverings::{
    build_block_covering, build_hilbert_two_cover, contiguous_partition, pullback_covering, verify_cover,
    BochnerProjection, ContractiveMap, CoveringFamily, NormCapSet,
};
use theta_core::inradius::{
    certify_lower, certify_pullback, estimate_inradius, recheck_certificate, refute_hilbert, refute_lp,
    CertificateStatus, InradiusConfig, RefutationWitness, Rigor, SectionCertificate,
};
use theta_core::moduli::{
    asymptotic_modulus_surrogate, clarkson_check, power_type_fit, symmetric_modulus, AsymptoticConfig,
    CandidateFamily, DEFAULT_T_GRID,
};
use theta_core::optimize::AscentConfig;
use theta_core::sampling;
use theta_core::{Element, SpaceSpec, Subspace};

/// Everything criterion 6 re-checks after the others ran.
#[derive(Default)]
struct Ledger {
    witnesses: Vec<RefutationWitness>,
    certificates: Vec<SectionCertificate>,
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn finish(failures: Vec<String>, summary: String, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    let mut failures = failures;
    if let Some(b) = budget {
        if elapsed > b {
            failures.push(format!("runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), b.as_secs_f64()));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{summary} [{:.1}s]", elapsed.as_secs_f64())
    } else {
        let shown: Vec<_> = failures.iter().take(5).cloned().collect();
        format!("{summary} [{:.1}s]; {} failure(s): {}", elapsed.as_secs_f64(), failures.len(), shown.join("; "))
    };
    Outcome { pass, detail }
}

fn random_kernel(space: &SpaceSpec, codim: usize, seed: u64, index: u64) -> Subspace {
    let mut rng = sampling::stream_rng(seed, index);
    let functionals = (0..codim).map(|_| sampling::gaussian_vec(&mut rng, space.dimension())).collect();
    Subspace::from_kernel(space, functionals).unwrap()
}

fn random_point(space: &SpaceSpec, seed: u64, index: u64, scale: f64) -> Element {
    let (x, r) = sampling::ball_point(space, seed, index);
    x.scaled(r * scale)
}

fn hilbert_family(n: usize) -> CoveringFamily {
    let s = SpaceSpec::ell_p(2.0, n).unwrap();
    build_hilbert_two_cover(&s, (0..n / 2).collect(), (n / 2..n).collect()).unwrap()
}

fn criterion_1(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let cfg = InradiusConfig::default();
    let mut failures = Vec::new();
    let mut intervals = Vec::new();
    for n in [16usize, 64] {
        let fam = hilbert_family(n);
        let space = fam.ambient().clone();
        let report = verify_cover(&fam, 1, 50_000);
        check(
            &mut failures,
            report.points_checked == 100_000 && report.covered(),
            format!("N={n}: {} violations over {} points", report.violation_count, report.points_checked),
        );
        let full = Subspace::full(&space).unwrap();
        for (j, set) in fam.sets().iter().enumerate() {
            let cert = certify_lower(set, &space.zeros(), &full, FRAC_1_SQRT_2, &cfg).unwrap();
            check(
                &mut failures,
                cert.rigor == Rigor::Analytic && cert.is_verified(),
                format!("N={n} A_{j}: 1/√2 not analytically verified"),
            );
            ledger.certificates.push(cert);

            let radii = [FRAC_1_SQRT_2 + 1e-3, 0.72, 0.8, 0.93];
            for (ri, &r) in radii.iter().enumerate() {
                let mut cases: Vec<(Element, Subspace)> =
                    vec![(space.zeros(), full.clone()), (space.zeros(), random_kernel(&space, 3, 10 + ri as u64, j as u64))];
                for i in 0..20u64 {
                    let codim = 1 + (i % 3) as usize;
                    let idx = 1000 * ri as u64 + i;
                    cases.push((random_point(&space, 7, idx, 1.0), random_kernel(&space, codim, 8, idx)));
                }
                for (x, y) in cases {
                    match refute_hilbert(set, &x, &y, r) {
                        Ok(w) => ledger.witnesses.push(w),
                        Err(e) => failures.push(format!("N={n} A_{j} r={r}: {e}")),
                    }
                }
            }

            let est = estimate_inradius(set, 3, &cfg).unwrap();
            let width = est.upper - est.lower;
            check(
                &mut failures,
                width <= 2e-4 && est.lower <= FRAC_1_SQRT_2 && FRAC_1_SQRT_2 <= est.upper && !est.upper_vacuous,
                format!("N={n} A_{j}: interval [{}, {}]", est.lower, est.upper),
            );
            intervals.push(format!("N={n} A_{j}: [{:.6}, {:.6}]", est.lower, est.upper));
            ledger.witnesses.extend(est.witnesses);
        }
    }
    let summary = format!("Hilbert two-cover, intervals {}", intervals.join(", "));
    finish(failures, summary, start.elapsed(), Some(Duration::from_secs(30)))
}

fn criterion_2(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let cfg = InradiusConfig::default();
    let mut failures = Vec::new();
    let (mut random_tries, mut random_inconclusive) = (0usize, 0usize);
    let mut identity_error = 0.0_f64;
    for p in [1.0, 1.5, 2.0, 3.0] {
        for n in 2..=8usize {
            let dim = 8 * n;
            let space = SpaceSpec::ell_p(p, dim).unwrap();
            let fam = build_block_covering(&space, &contiguous_partition(dim, n).unwrap()).unwrap();
            let threshold = (n as f64).powf(-1.0 / p);

            for f in sampling::sample_ball(&space, 100 + n as u64, 10_000) {
                // oracle: direct coordinate sums
                let total: f64 = f.as_slice().iter().map(|v| v.abs().powf(p)).sum();
                let parts: f64 =
                    fam.sets().iter().map(|s| s.seminorm(&f).unwrap().powf(p)).sum();
                identity_error = identity_error.max((parts - total).abs());
            }

            let full = Subspace::full(&space).unwrap();
            for (k, set) in fam.sets().iter().enumerate() {
                let cert = certify_lower(set, &space.zeros(), &full, threshold, &cfg).unwrap();
                check(
                    &mut failures,
                    cert.rigor == Rigor::Analytic && cert.is_verified() && set.cap() == threshold,
                    format!("p={p} n={n} A_{k}: n^(-1/p) not certified"),
                );
                if k == 0 {
                    let est = estimate_inradius(set, 3, &cfg).unwrap();
                    check(
                        &mut failures,
                        est.lower == threshold && est.upper >= threshold && !est.upper_vacuous,
                        format!("p={p} n={n}: interval [{}, {}] vs {threshold}", est.lower, est.upper),
                    );
                    ledger.certificates.push(est.certificate.clone());
                    ledger.witnesses.extend(est.witnesses);
                }

                let r = threshold * (1.0 + 1e-3);
                for m in 0..=3usize {
                    let y = if m == 0 { full.clone() } else { random_kernel(&space, m, 20 + m as u64, k as u64) };
                    match refute_lp(set, &space.zeros(), &y, r, n) {
                        Ok(w) => ledger.witnesses.push(w),
                        Err(e) => failures.push(format!("p={p} n={n} A_{k} m={m} at x=0: {e}")),
                    }
                }
                for i in 0..20u64 {
                    let idx = 100 * k as u64 + i;
                    let m = 1 + (i % 3) as usize;
                    let x = random_point(&space, 30, idx, threshold);
                    let y = random_kernel(&space, m, 31, idx);
                    random_tries += 1;
                    match refute_lp(set, &x, &y, r, n) {
                        Ok(w) => ledger.witnesses.push(w),
                        Err(_) => random_inconclusive += 1,
                    }
                }
            }
        }
    }
    check(&mut failures, identity_error <= 1e-10, format!("pigeonhole identity error {identity_error:e}"));
    let summary = format!(
        "L_p block covers, identity error {identity_error:.1e}, random (x, Y) inconclusive {random_inconclusive}/{random_tries} ({:.1}%)",
        100.0 * random_inconclusive as f64 / random_tries as f64
    );
    finish(failures, summary, start.elapsed(), Some(Duration::from_secs(120)))
}

fn criterion_3(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let cfg = InradiusConfig::default();
    let mut failures = Vec::new();
    let mut lifted = 0usize;
    for q in [3.0, 2.0] {
        let space = SpaceSpec::bochner(2.0, vec![1.0; 16], q, 3).unwrap();
        let map = ContractiveMap::Bochner(BochnerProjection::canonical(&space).unwrap());
        let range = hilbert_family(16);
        let pulled = pullback_covering(&map, &range, 5).unwrap();
        let report = verify_cover(&pulled, 6, 50_000);
        check(
            &mut failures,
            report.points_checked == 100_000 && report.covered(),
            format!("q={q}: {} violations over {} points", report.violation_count, report.points_checked),
        );
        let rspace = range.ambient().clone();
        for (j, (b, a)) in range.sets().iter().zip(pulled.sets()).enumerate() {
            let mut range_certs =
                vec![certify_lower(b, &rspace.zeros(), &Subspace::full(&rspace).unwrap(), FRAC_1_SQRT_2, &cfg).unwrap()];
            if q == 2.0 {
                // a nontrivial exact certificate: x in the other half, Z of codimension 2
                let mut x = rspace.zeros();
                x.as_mut_slice()[if j == 0 { 12 } else { 3 }] = 0.2;
                let z = random_kernel(&rspace, 2, 40, j as u64);
                range_certs.push(certify_lower(b, &x, &z, 0.5, &cfg).unwrap());
            }
            for rc in range_certs {
                check(&mut failures, rc.is_verified(), format!("q={q} B_{j}: range certificate not verified"));
                let lc = certify_pullback(a, &rc, &cfg).unwrap();
                check(
                    &mut failures,
                    lc.is_verified() && lc.radius == rc.radius && lc.rigor != Rigor::Heuristic,
                    format!("q={q} A_{j}: lift of r={} is {:?}/{:?}", rc.radius, lc.rigor, lc.status),
                );
                lifted += 1;
                ledger.certificates.push(lc);
            }
        }
    }
    let summary = format!("Bochner pullback of the Hilbert two-cover, {lifted} lifted certificates");
    finish(failures, summary, start.elapsed(), None)
}

/// Symmetric modulus of ℓ₂ from the angle between `x` and `y`, maximized on a grid.
fn hilbert_grid_oracle(t: f64) -> f64 {
    let steps = 200_000;
    (0..=steps)
        .map(|i| {
            let c = (std::f64::consts::PI * i as f64 / steps as f64).cos();
            0.5 * (1.0 + t * t + 2.0 * t * c).sqrt() + 0.5 * (1.0 + t * t - 2.0 * t * c).sqrt() - 1.0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exhaustive coordinate-tail oracle at `x = e_i` in `ℓ_p^N`, `k = 1`: the kernel of
/// `e_i` gives disjoint supports and the exact value `(1+t^p)^{1/p} - 1`; every
/// other kernel contains `e_i` itself, so its supremum is at least `t`.
fn tail_oracle(p: f64, dim: usize, t: f64) -> f64 {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if j == i { (1.0 + t.powf(p)).powf(1.0 / p) - 1.0 } else { t })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    let l2 = SpaceSpec::ell_p(2.0, 16).unwrap();
    for t in [0.1, 0.2, 0.5, 1.0] {
        let m = symmetric_modulus(&l2, t, &AscentConfig::default()).unwrap();
        let oracle = hilbert_grid_oracle(t);
        worst = worst.max((m.value - oracle).abs());
        check(&mut failures, (m.value - oracle).abs() <= 1e-3, format!("ℓ₂ t={t}: {} vs {oracle}", m.value));
        check(
            &mut failures,
            (oracle - ((1.0 + t * t).sqrt() - 1.0)).abs() <= 1e-6,
            format!("grid oracle disagrees with √(1+t²)−1 at t={t}"),
        );
    }
    for p in [1.5, 2.0, 3.0, 4.0] {
        let space = SpaceSpec::ell_p(p, 16).unwrap();
        for t in [0.1, 0.2, 0.5, 1.0] {
            let m = asymptotic_modulus_surrogate(&space, t, 1, &CandidateFamily::CoordinateTail, &AsymptoticConfig::default())
                .unwrap();
            let oracle = tail_oracle(p, 16, t);
            worst = worst.max((m.value - oracle).abs());
            check(&mut failures, (m.value - oracle).abs() <= 1e-3, format!("ℓ_{p}^16 t={t}: {} vs {oracle}", m.value));
        }
    }
    finish(failures, format!("modulus closed forms, max deviation {worst:.1e}"), start.elapsed(), None)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut fits = Vec::new();
    for p in [1.5, 2.0, 3.0, 4.0] {
        let space = SpaceSpec::schatten(p, 8, 8).unwrap();
        let samples: Vec<(f64, f64)> = DEFAULT_T_GRID
            .iter()
            .map(|&t| (t, symmetric_modulus(&space, t, &AscentConfig::default()).unwrap().value))
            .collect();
        let fit = power_type_fit(&samples).unwrap();
        let expected = p.min(2.0);
        check(&mut failures, (fit.r - expected).abs() < 0.05, format!("S_{p}: r = {} vs {expected}", fit.r));
        fits.push(format!("p={p}: r={:.4}", fit.r));

        let mut violations = 0;
        let mut parallelogram = 0.0_f64;
        for i in 0..10_000u64 {
            let x = random_point(&space, 50, 2 * i, 1.0);
            let y = random_point(&space, 50, 2 * i + 1, 1.0);
            let rep = clarkson_check(&space, &x, &y).unwrap();
            violations += usize::from(!rep.holds);
            if p == 2.0 {
                parallelogram = parallelogram.max((rep.lhs - rep.rhs).abs());
            }
        }
        check(&mut failures, violations == 0, format!("S_{p}: {violations} Clarkson violations"));
        if p == 2.0 {
            check(&mut failures, parallelogram <= 1e-10, format!("parallelogram error {parallelogram:e}"));
        }
    }
    finish(failures, format!("Schatten 8x8 power types {}", fits.join(", ")), start.elapsed(), None)
}

fn criterion_6(ledger: &Ledger) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let bad_witnesses: Vec<String> =
        ledger.witnesses.iter().filter_map(|w| w.recheck().err()).collect();
    check(&mut failures, bad_witnesses.is_empty(), format!("{} witnesses fail recheck", bad_witnesses.len()));

    let mut rechecked = 0;
    for (i, cert) in ledger.certificates.iter().enumerate() {
        if cert.status != CertificateStatus::Verified {
            continue;
        }
        let r = recheck_certificate(cert, 60 + i as u64, 10_000);
        rechecked += 1;
        check(
            &mut failures,
            r.counterexamples == 0,
            format!("certificate {i} ({:?}): {} counterexamples", cert.rigor, r.counterexamples),
        );
    }

    // determinism per seed
    let cfg = InradiusConfig::default();
    let fam = hilbert_family(16);
    let set: &NormCapSet = &fam.sets()[1];
    let json = |v: &dyn erased::Json| v.to_json();
    let a = json(&estimate_inradius(set, 2, &cfg).unwrap());
    let b = json(&estimate_inradius(set, 2, &cfg).unwrap());
    check(&mut failures, a == b, "estimate_inradius differs between identical runs");
    check(&mut failures, json(&verify_cover(&fam, 3, 5_000)) == json(&verify_cover(&fam, 3, 5_000)), "verify_cover not deterministic");
    let s = SpaceSpec::schatten(3.0, 4, 4).unwrap();
    let m1 = symmetric_modulus(&s, 0.05, &AscentConfig { seed: 4, ..Default::default() }).unwrap();
    let m2 = symmetric_modulus(&s, 0.05, &AscentConfig { seed: 4, ..Default::default() }).unwrap();
    check(&mut failures, json(&m1) == json(&m2), "symmetric_modulus not deterministic");

    let summary = format!(
        "soundness: {} witnesses and {rechecked} certificates re-checked, runs deterministic; reference only: 0.931 endpoint, constant c, true Θ_X(n)",
        ledger.witnesses.len()
    );
    finish(failures, summary, start.elapsed(), None)
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }
    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string(self).unwrap()
        }
    }
}

fn main() {
    let mut ledger = Ledger::default();
    let results = [
        ("1", criterion_1(&mut ledger)),
        ("2", criterion_2(&mut ledger)),
        ("3", criterion_3(&mut ledger)),
        ("4", criterion_4()),
        ("5", criterion_5()),
        ("6", criterion_6(&ledger)),
    ];
    let mut all = true;
    for (id, o) in &results {
        println!("{} criterion {id}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if !all {
        std::process::exit(1);
    }
}
