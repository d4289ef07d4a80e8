use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde_json::json;
use theta_core::coverings::{
    build_block_covering, build_hilbert_two_cover, contiguous_partition, pullback_covering, verify_cover,
    BochnerProjection, ContractiveMap, CoverReport, CoveringFamily, NormCapSet,
};
use theta_core::inradius::{
    estimate_inradius, recheck_certificate, InradiusConfig, InradiusEstimate, Rigor, CONTAINMENT_TOL, WITNESS_TOL,
};
use theta_core::moduli::{
    asymptotic_modulus_surrogate, clarkson_check, power_type_fit, symmetric_sweep, AsymptoticConfig,
    CandidateFamily, ModulusSample,
};
use theta_core::optimize::AscentConfig;
use theta_core::{sampling, SpaceSpec};

use crate::{ConfigError, Experiment, ExperimentConfig, Outcome, Table};

/// Interval recorded in the literature for the two-piece covering index of `ℓ₂`.
const HILBERT_REFERENCE: [f64; 2] = [0.707, 0.931];
/// Cap on certificate re-check draws per certificate.
const RECHECK_DRAWS: usize = 10_000;
/// Deviation of a fitted exponent from its expectation that triggers a warning.
const FIT_WARN: f64 = 0.05;

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    match cfg.experiment {
        Experiment::Hilbert2 => hilbert2(cfg),
        Experiment::LpSweep => lp_sweep(cfg),
        Experiment::CoverVerify => cover_verify(cfg),
        Experiment::Inradius => inradius(cfg),
        Experiment::Modulus => modulus(cfg),
        Experiment::Clarkson => clarkson(cfg),
        Experiment::CompareRaja => compare_raja(cfg),
    }
}

fn ascent(cfg: &ExperimentConfig) -> AscentConfig {
    AscentConfig { restarts: cfg.restarts, max_iter: cfg.max_iter, seed: cfg.seed, ..Default::default() }
}

fn inradius_config(cfg: &ExperimentConfig) -> InradiusConfig {
    InradiusConfig { bisection_tol: cfg.bisection_tol, ascent: ascent(cfg), seed: cfg.seed, ..Default::default() }
}

fn single_n(cfg: &ExperimentConfig) -> Result<usize, ConfigError> {
    match cfg.n.values().as_slice() {
        [n] => Ok(*n),
        _ => Err(ConfigError::new(format!("{} takes a single piece count, got {}", cfg.experiment.name(), cfg.n))),
    }
}

fn hilbert_family(space: &SpaceSpec) -> Result<CoveringFamily, ConfigError> {
    let dim = space.dimension();
    if dim < 4 {
        return Err(ConfigError::new("the Hilbert two-cover needs dimension at least 4"));
    }
    build_hilbert_two_cover(space, (0..dim / 2).collect(), (dim / 2..dim).collect()).map_err(ConfigError::new)
}

/// Block covering with `n` pieces (or the explicit partition); pulled back
/// through the canonical Bochner projection for Bochner spaces.
fn block_family(cfg: &ExperimentConfig, n: usize, use_partition: bool) -> Result<CoveringFamily, ConfigError> {
    let err = ConfigError::new;
    let partition = |atoms: usize| -> Result<Vec<Vec<usize>>, ConfigError> {
        match (&cfg.partition, use_partition) {
            (Some(p), true) => Ok(p.clone()),
            _ => contiguous_partition(atoms, n).map_err(err),
        }
    };
    match &cfg.space {
        SpaceSpec::EllP { .. } | SpaceSpec::WeightedLp { .. } => {
            let atoms = cfg.space.dimension();
            build_block_covering(&cfg.space, &partition(atoms)?).map_err(err)
        }
        SpaceSpec::Bochner { .. } => {
            let map = ContractiveMap::Bochner(BochnerProjection::canonical(&cfg.space).map_err(err)?);
            let scalar = map.codomain();
            let range = build_block_covering(&scalar, &partition(scalar.dimension())?).map_err(err)?;
            pullback_covering(&map, &range, cfg.seed).map_err(err)
        }
        SpaceSpec::Schatten { .. } => Err(ConfigError::new("coverings are built on ℓ_p, weighted L_p and Bochner spaces")),
    }
}

fn point_count(cfg: &ExperimentConfig) -> usize {
    // each draw contributes a sphere point and a scaled ball point
    cfg.samples.div_ceil(2)
}

fn record_cover(out: &mut Outcome, name: &str, report: &CoverReport) {
    out.soundness.check(report.covered(), || {
        format!("{name}: {} of {} sampled points uncovered", report.violation_count, report.points_checked)
    });
    out.claim(format!("{name}.max_slack"), report.max_slack, Rigor::Heuristic, report.tolerance);
    if let Some(a) = &report.analytic {
        out.soundness.check(a.identity_max_error <= 1e-10, || {
            format!("{name}: pigeonhole identity error {:e}", a.identity_max_error)
        });
        out.soundness.check(a.pigeonhole_failures == 0, || {
            format!("{name}: {} pigeonhole failures", a.pigeonhole_failures)
        });
        out.soundness.check(a.caps_sufficient, || format!("{name}: caps below the pigeonhole threshold"));
    }
}

/// Re-checks and records an inradius interval; returns its JSON summary.
fn record_estimate(out: &mut Outcome, name: &str, est: &InradiusEstimate, cfg: &ExperimentConfig) -> serde_json::Value {
    let lower_tol = if est.lower_rigor == Rigor::Analytic { 0.0 } else { CONTAINMENT_TOL };
    out.claim(format!("{name}.lower"), est.lower, est.lower_rigor, lower_tol);
    out.claim(format!("{name}.upper"), est.upper, Rigor::Analytic, WITNESS_TOL);
    if est.upper_vacuous {
        out.warn(format!("{name}: refutation inconclusive, upper bound is the trivial 1"));
    }
    out.soundness.check(est.lower <= est.upper, || format!("{name}: lower {} above upper {}", est.lower, est.upper));
    if est.certificate.is_verified() {
        let r = recheck_certificate(&est.certificate, cfg.seed, cfg.samples.min(RECHECK_DRAWS));
        out.soundness.check(r.counterexamples == 0, || {
            format!("{name}: certificate re-check found {} counterexamples", r.counterexamples)
        });
    }
    for (i, w) in est.witnesses.iter().enumerate() {
        let res = w.recheck();
        out.soundness.check(res.is_ok(), || format!("{name}: witness {i}: {}", res.clone().unwrap_err()));
    }
    json!({
        "lower": est.lower,
        "upper": est.upper,
        "width": est.upper - est.lower,
        "lower_rigor": est.lower_rigor,
        "refuter": est.refuter,
        "upper_vacuous": est.upper_vacuous,
        "codim_budget": est.codim_budget,
        "bisection_steps": est.bisection_steps,
        "witnesses": est.witnesses.len(),
    })
}

fn estimate_all(sets: &[NormCapSet], cfg: &ExperimentConfig) -> Result<Vec<InradiusEstimate>, ConfigError> {
    let icfg = inradius_config(cfg);
    sets.par_iter()
        .map(|s| estimate_inradius(s, cfg.codim_budget, &icfg).map_err(ConfigError::new))
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn hilbert2(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    if !matches!(cfg.space, SpaceSpec::EllP { p, .. } if p == 2.0) {
        return Err(ConfigError::new("hilbert2 runs on ell_p with p = 2"));
    }
    let fam = hilbert_family(&cfg.space)?;
    let mut out = Outcome { table: Table::new(&["set", "cap", "lower", "upper", "width"]), ..Default::default() };
    let cover = verify_cover(&fam, cfg.seed, point_count(cfg));
    record_cover(&mut out, "cover", &cover);
    let estimates = estimate_all(fam.sets(), cfg)?;
    let mut sets = Vec::new();
    for (j, (set, est)) in fam.sets().iter().zip(&estimates).enumerate() {
        let summary = record_estimate(&mut out, &format!("set{j}"), est, cfg);
        if !(est.lower <= FRAC_1_SQRT_2 && FRAC_1_SQRT_2 <= est.upper) {
            out.warn(format!("set{j}: interval [{}, {}] misses 1/√2", est.lower, est.upper));
        }
        out.table.push(vec![j.to_string(), fmt(set.cap()), fmt(est.lower), fmt(est.upper), fmt(est.upper - est.lower)]);
        sets.push(summary);
    }
    out.results = json!({
        "dimension": cfg.space.dimension(),
        "cover": { "points_checked": cover.points_checked, "violations": cover.violation_count, "max_slack": cover.max_slack },
        "sets": sets,
        "expected": FRAC_1_SQRT_2,
    });
    Ok(out)
}

/// Per-`n` interval for `max_k ϱ(A_k)` over a block family: `[max lower, max upper]`.
fn sweep_point(out: &mut Outcome, cfg: &ExperimentConfig, n: usize) -> Result<(f64, f64, serde_json::Value), ConfigError> {
    let fam = block_family(cfg, n, false)?;
    let estimates = estimate_all(fam.sets(), cfg)?;
    let mut sets = Vec::new();
    for (k, est) in estimates.iter().enumerate() {
        sets.push(record_estimate(out, &format!("n{n}.set{k}"), est, cfg));
    }
    let lower = estimates.iter().map(|e| e.lower).fold(f64::NEG_INFINITY, f64::max);
    let upper = estimates.iter().map(|e| e.upper).fold(f64::NEG_INFINITY, f64::max);
    Ok((lower, upper, json!({ "n": n, "lower": lower, "upper": upper, "sets": sets })))
}

fn require_scalar_lp(cfg: &ExperimentConfig) -> Result<f64, ConfigError> {
    if cfg.space.is_scalar_lp() {
        Ok(cfg.space.p())
    } else {
        Err(ConfigError::new(format!("{} runs on ell_p or weighted L_p spaces", cfg.experiment.name())))
    }
}

fn lp_sweep(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let p = require_scalar_lp(cfg)?;
    let mut out = Outcome { table: Table::new(&["n", "lower", "upper", "reference"]), ..Default::default() };
    let mut points = Vec::new();
    for n in cfg.n.values() {
        let reference = (n as f64).powf(-1.0 / p);
        let (lower, upper, summary) = sweep_point(&mut out, cfg, n)?;
        if !(lower <= reference && reference <= upper) {
            out.warn(format!("n = {n}: interval [{lower}, {upper}] does not straddle n^(-1/p) = {reference}"));
        }
        out.table.push(vec![n.to_string(), fmt(lower), fmt(upper), fmt(reference)]);
        points.push(summary);
    }
    out.results = json!({ "p": p, "dimension": cfg.space.dimension(), "sweep": points });
    Ok(out)
}

fn cover_verify(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let n = single_n(cfg)?;
    let fam = block_family(cfg, n, true)?;
    let report = verify_cover(&fam, cfg.seed, point_count(cfg));
    let mut out = Outcome { table: Table::new(&["metric", "value"]), ..Default::default() };
    record_cover(&mut out, "cover", &report);
    out.table.push(vec!["pieces".into(), fam.len().to_string()]);
    out.table.push(vec!["points_checked".into(), report.points_checked.to_string()]);
    out.table.push(vec!["violations".into(), report.violation_count.to_string()]);
    out.table.push(vec!["max_slack".into(), fmt(report.max_slack)]);
    out.results = json!({
        "pieces": fam.len(),
        "provenance": fam.provenance(),
        "caps": fam.sets().iter().map(|s| s.cap()).collect::<Vec<_>>(),
        "report": report,
    });
    Ok(out)
}

fn inradius(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let n = single_n(cfg)?;
    let fam = block_family(cfg, n, true)?;
    let estimates = estimate_all(fam.sets(), cfg)?;
    let mut out = Outcome { table: Table::new(&["set", "cap", "lower", "upper"]), ..Default::default() };
    let mut sets = Vec::new();
    for (k, (set, est)) in fam.sets().iter().zip(&estimates).enumerate() {
        sets.push(record_estimate(&mut out, &format!("set{k}"), est, cfg));
        out.table.push(vec![k.to_string(), fmt(set.cap()), fmt(est.lower), fmt(est.upper)]);
    }
    out.results = json!({ "pieces": fam.len(), "sets": sets });
    Ok(out)
}

fn record_sweep(out: &mut Outcome, label: &str, samples: &[ModulusSample], expected: Option<f64>, restarts: usize) -> serde_json::Value {
    for s in samples {
        out.soundness.check(s.value >= 0.0 && s.value <= s.t + 1e-9, || {
            format!("{label}: value {} at t = {} violates 0 ≤ ρ ≤ t", s.value, s.t)
        });
        out.claim(format!("{label}.t={}", s.t), s.value, Rigor::Heuristic, 1e-9);
        let row = s.row(restarts);
        out.table.push(vec![
            row.space,
            label.to_string(),
            fmt(row.t),
            fmt(row.value),
            row.codim_budget.map(|k| k.to_string()).unwrap_or_default(),
            row.restarts.to_string(),
            row.seed.to_string(),
        ]);
    }
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.value)).collect();
    let values: Vec<_> = pairs.iter().map(|&(t, v)| json!({ "t": t, "value": v })).collect();
    match power_type_fit(&pairs) {
        Ok(fit) => {
            out.claim(format!("{label}.r"), fit.r, Rigor::Heuristic, fit.residual);
            for w in &fit.warnings {
                out.warn(format!("{label}: {w}"));
            }
            if let Some(e) = expected {
                if (fit.r - e).abs() >= FIT_WARN {
                    out.warn(format!("{label}: fitted r = {} differs from {e} by at least {FIT_WARN}", fit.r));
                }
            }
            json!({ "samples": values, "fit": fit, "expected_r": expected })
        }
        Err(e) => {
            out.warn(format!("{label}: no power-type fit ({e})"));
            json!({ "samples": values, "fit": null, "expected_r": expected })
        }
    }
}

fn modulus(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let space = &cfg.space;
    let p = space.p();
    let mut out = Outcome {
        table: Table::new(&["space", "kind", "t", "value", "codim_budget", "restarts", "seed"]),
        ..Default::default()
    };
    let symmetric = symmetric_sweep(space, &cfg.t_grid, &ascent(cfg)).map_err(ConfigError::new)?;
    let commutative_or_schatten = !matches!(space, SpaceSpec::Bochner { .. });
    let sym = record_sweep(&mut out, "symmetric", &symmetric, commutative_or_schatten.then_some(p.min(2.0)), cfg.restarts);

    let asymptotic = if matches!(space, SpaceSpec::Schatten { .. }) {
        out.warn("asymptotic surrogate skipped: kernel subspaces need a coordinate space");
        serde_json::Value::Null
    } else {
        let acfg = AsymptoticConfig {
            inner: AscentConfig { seed: cfg.seed, ..AsymptoticConfig::default().inner },
            ..Default::default()
        };
        let samples = cfg
            .t_grid
            .par_iter()
            .map(|&t| asymptotic_modulus_surrogate(space, t, cfg.codim_budget, &CandidateFamily::CoordinateTail, &acfg))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ConfigError::new)?;
        let expected = space.is_scalar_lp().then_some(p);
        record_sweep(&mut out, "asymptotic_surrogate", &samples, expected, acfg.inner.restarts)
    };
    out.results = json!({ "symmetric": sym, "asymptotic_surrogate": asymptotic });
    Ok(out)
}

fn clarkson(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let space = &cfg.space;
    let reports = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let (x, rx) = sampling::ball_point(space, cfg.seed, 2 * i);
            let (y, ry) = sampling::ball_point(space, cfg.seed, 2 * i + 1);
            clarkson_check(space, &x.scaled(rx), &y.scaled(ry))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(ConfigError::new)?;
    let violations = reports.iter().filter(|r| !r.holds).count();
    let max_ratio = reports.iter().map(|r| r.lhs / r.rhs).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Outcome {
        table: Table::new(&["p", "form", "pairs", "violations", "max_ratio"]),
        ..Default::default()
    };
    out.soundness.check(violations == 0, || format!("{violations} Clarkson violations"));
    out.claim("max_ratio", max_ratio, Rigor::Heuristic, theta_core::moduli::CLARKSON_RTOL);
    let form = reports[0].form;
    let mut results = json!({
        "p": space.p(),
        "form": form,
        "pairs": reports.len(),
        "violations": violations,
        "max_ratio": max_ratio,
    });
    if space.p() == 2.0 {
        let err = reports.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
        out.soundness.check(err <= 1e-10, || format!("parallelogram law off by {err:e}"));
        results["parallelogram_max_error"] = json!(err);
    }
    out.table.push(vec![
        fmt(space.p()),
        serde_json::to_value(form).unwrap().as_str().unwrap_or_default().to_string(),
        reports.len().to_string(),
        violations.to_string(),
        fmt(max_ratio),
    ]);
    out.results = results;
    Ok(out)
}

fn compare_raja(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let p = require_scalar_lp(cfg)?;
    let r = p.min(2.0);
    let mut out = Outcome {
        table: Table::new(&["n", "lower", "upper", "n^(-1/p)", "n^(-1/r)"]),
        ..Default::default()
    };

    let hilbert_space = SpaceSpec::ell_p(2.0, cfg.space.dimension()).map_err(ConfigError::new)?;
    let fam = hilbert_family(&hilbert_space)?;
    let estimates = estimate_all(fam.sets(), cfg)?;
    let lower = estimates.iter().map(|e| e.lower).fold(f64::NEG_INFINITY, f64::max);
    let upper = estimates.iter().map(|e| e.upper).fold(f64::NEG_INFINITY, f64::max);
    for (j, est) in estimates.iter().enumerate() {
        record_estimate(&mut out, &format!("hilbert.set{j}"), est, cfg);
    }

    let mut sweep = Vec::new();
    for n in cfg.n.values() {
        let (lo, hi, _) = sweep_point(&mut out, cfg, n)?;
        let (ref_p, ref_r) = ((n as f64).powf(-1.0 / p), (n as f64).powf(-1.0 / r));
        out.table.push(vec![n.to_string(), fmt(lo), fmt(hi), fmt(ref_p), fmt(ref_r)]);
        sweep.push(json!({ "n": n, "lower": lo, "upper": hi, "n_pow_minus_1_over_p": ref_p, "n_pow_minus_1_over_r": ref_r }));
    }
    out.results = json!({
        "hilbert_two_pieces": {
            "measured": [lower, upper],
            "reference_interval": HILBERT_REFERENCE,
            "note": "the reference upper endpoint and the constant in the lower power law are not reproducible at this scale",
        },
        "p": p,
        "r": r,
        "sweep": sweep,
    });
    Ok(out)
}
