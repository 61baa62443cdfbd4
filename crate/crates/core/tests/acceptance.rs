//! Acceptance suite: one PASS/FAIL line per criterion, with wall time
//! checked against its budget. Exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use abp_core::crn::{bilinear_from_rhs, minimal_siphons, parse_reactions};
use abp_core::equilibrium::{self, determinant_law, dfe, endemic_rank_one, endemic_spectral, feedback_analysis};
use abp_core::linalg::{self, from_rows};
use abp_core::lyapunov::{verify_decrease, Kind, VerifyConfig};
use abp_core::model::{classify_rank, RankTag};
use abp_core::ngm;
use abp_core::random::{self, ModelSpec, Shape};
use abp_core::spectral::kirchhoff_perron;
use abp_core::{BilinearModel, Mat, Tolerances, Vector};
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn shape(i: usize) -> Shape {
    [Shape::General, Shape::CaseP, Shape::CaseB][i % 3]
}

fn sir_closed_form() -> Outcome {
    let model = sir(2.0);
    let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
    let report = endemic_rank_one(&model, &rank, &tol()).map_err(|e| e.to_string())?;
    let p = report.endemic_points.first().ok_or("no endemic point")?;
    check(report.r0 == 2.0, || format!("R0 = {}", report.r0))?;
    check((p.s_bar[0] - 0.5).abs() < 1e-12 && (p.i_bar[0] - 0.5).abs() < 1e-12, || format!("S̄ = {}, Ī = {}", p.s_bar[0], p.i_bar[0]))?;
    check((p.k - 0.5).abs() < 1e-12, || format!("k = {}", p.k))?;
    check(p.residual_inf_norm <= 1e-10, || format!("residual {}", p.residual_inf_norm))?;
    Ok(format!("R0 = 2, S̄ = Ī = k = 0.5, residual {:.1e}", p.residual_inf_norm))
}

fn spectral_identity() -> Outcome {
    let mut rng = rng(100);
    let mut worst: f64 = 0.0;
    for idx in 0..100 {
        let model = random_model(&mut rng, 6, shape(idx), None);
        let s0 = dfe(&model).map_err(|e| e.to_string())?;
        let bundle = ngm::ngm_at(&model, &s0).map_err(|e| e.to_string())?;
        let gap = (rho(&bundle.k) - rho(&bundle.k_tilde)).abs();
        worst = worst.max(gap);
        check(gap <= 1e-10 * bundle.r0.max(1.0), || format!("model {idx}: |ρ(K) − ρ(K̃)| = {gap:e}"))?;
        let s = Vector::from_fn(model.m, |_, _| rng.random_range(0.1..3.0));
        let t = 2f64.powi(rng.random_range(-4..5));
        let base = ngm::ngm_at(&model, &s).map_err(|e| e.to_string())?.k_tilde;
        let scaled = ngm::ngm_at(&model, &(&s * t)).map_err(|e| e.to_string())?.k_tilde;
        check(scaled == base * t, || format!("model {idx}: K̃(tS) ≠ t·K̃(S) for t = {t}"))?;
    }
    Ok(format!("100 models, max |ρ(K) − ρ(K̃)| = {worst:.1e}"))
}

fn strong_threshold() -> Outcome {
    let mut rng = rng(200);
    let (mut above, mut cross) = (0, 0);
    for idx in 0..100 {
        let target = if idx % 2 == 0 { rng.random_range(0.2..0.95) } else { rng.random_range(1.05..4.0) };
        let model = random_model(&mut rng, 5, shape(idx), Some(target));
        let report = endemic_spectral(&model, &tol()).map_err(|e| e.to_string())?;
        let exists = !report.endemic_points.is_empty();
        check(exists == (report.r0 > 1.0 + tol().threshold), || format!("model {idx}: R0 = {}, {} endemic points", report.r0, report.endemic_points.len()))?;
        for p in &report.endemic_points {
            above += 1;
            let k_tilde = ngm::ngm_at(&model, &p.s_bar).map_err(|e| e.to_string())?.k_tilde;
            let r = rho(&k_tilde);
            check((r - 1.0).abs() <= 1e-8, || format!("model {idx}: ρ(K̃(S̄)) = {r}"))?;
            let res = equilibrium::residual(&model, &p.s_bar, &p.i_bar);
            check(res <= 1e-8, || format!("model {idx}: residual {res:e}"))?;
        }
        let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
        if rank.is_rank_one() {
            let other = endemic_rank_one(&model, &rank, &tol()).map_err(|e| e.to_string())?;
            check(other.endemic_points.len() == report.endemic_points.len(), || format!("model {idx}: solvers disagree on existence"))?;
            for (a, b) in other.endemic_points.iter().zip(&report.endemic_points) {
                let scale = a.s_bar.amax().max(a.i_bar.amax()).max(1.0);
                let gap = (&a.s_bar - &b.s_bar).amax().max((&a.i_bar - &b.i_bar).amax());
                check(gap <= 1e-7 * scale, || format!("model {idx}: rank-one vs spectral gap {gap:e}"))?;
                cross += 1;
            }
        }
    }
    Ok(format!("100 models, {above} endemic points, {cross} rank-one cross-checks"))
}

fn determinant_law_suite() -> Outcome {
    let mut rng = rng(300);
    let mut worst: f64 = 0.0;
    for idx in 0..100 {
        let n = rng.random_range(1..=6);
        let target = rng.random_range(1.05..5.0);
        let spec = ModelSpec { m: 1, n, shape: Shape::CaseP, r0: Some(target), diagonal_as: true };
        let model = random::model(&mut rng, &spec);
        let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
        let report = endemic_rank_one(&model, &rank, &tol()).map_err(|e| e.to_string())?;
        let law = determinant_law(&model, &rank, &report).map_err(|e| e.to_string())?;
        // Closed forms from scratch: det J_EE = −det J_DFE = μ·det(A)·(1 − R₀).
        let mu = -model.a_s[(0, 0)];
        let closed = mu * model.a.determinant() * (1.0 - report.r0);
        let scale = closed.abs();
        let sum = (law.det_ee + law.det_dfe).abs() / scale;
        worst = worst.max(sum);
        check(sum <= 1e-8, || format!("model {idx}: relative |det J_EE + det J_DFE| = {sum:e}"))?;
        check((law.det_ee - closed).abs() <= 1e-8 * scale, || format!("model {idx}: det J_EE {} vs {closed}", law.det_ee))?;
        check((law.det_dfe + closed).abs() <= 1e-8 * scale, || format!("model {idx}: det J_DFE {} vs {}", law.det_dfe, -closed))?;
    }
    Ok(format!("100 models, max relative sum {worst:.1e}"))
}

fn lyapunov_suites() -> Outcome {
    let mut rng = rng(400);
    let config = VerifyConfig { trajectories: 20, ..VerifyConfig::default() };
    let (mut worst, mut mismatch): (f64, f64) = (0.0, 0.0);
    for idx in 0..20 {
        let below = idx % 2 == 0;
        let (m, n) = (if below { rng.random_range(1..=4) } else { 1 }, rng.random_range(1..=4));
        let target = if below { rng.random_range(0.2..0.8) } else { rng.random_range(1.5..4.0) };
        let spec = ModelSpec { m, n, shape: Shape::CaseP, r0: Some(target), diagonal_as: true };
        let model = random::model(&mut rng, &spec);
        let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
        let report = endemic_rank_one(&model, &rank, &tol()).map_err(|e| e.to_string())?;
        let kind = if below { Kind::Dfe } else { Kind::Ee };
        let cert = verify_decrease(&model, &rank, &report, kind, &config).map_err(|e| format!("model {idx}: {e}"))?;
        worst = worst.max(cert.worst_violation);
        mismatch = mismatch.max(cert.chain_mismatch);
        check(cert.verdict, || format!("model {idx} ({kind:?}): V̇ reached {:e}", cert.worst_violation))?;
        check(cert.chain_mismatch <= 1e-8, || format!("model {idx}: chain-rule mismatch {:e}", cert.chain_mismatch))?;
        check(cert.converged_fraction == 1.0, || format!("model {idx}: converged fraction {}", cert.converged_fraction))?;
    }
    Ok(format!("20 models × 20 trajectories, max V̇ {worst:.1e}, chain mismatch {mismatch:.1e}"))
}

fn kirchhoff_perron_suite() -> Outcome {
    let mut rng = rng(500);
    let (mut spread_max, mut markov_max): (f64, f64) = (0.0, 0.0);
    for idx in 0..200 {
        let k = rng.random_range(2..=8);
        let j = random::irreducible_metzler(&mut rng, k);
        let kp = kirchhoff_perron(&j).map_err(|e| e.to_string())?;
        let shifted = Mat::identity(k, k) * abscissa(&j) - &j;
        let (w, pi) = (null_vector(&shifted), null_vector(&shifted.transpose()));
        let ratios: Vec<f64> = (0..k).map(|i| kp.cofactors[i] / (w[i] * pi[i])).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = (hi - lo) / hi.abs();
        spread_max = spread_max.max(spread);
        check(lo > 0.0 && spread <= 1e-6, || format!("matrix {idx}: cofactor ratio spread {spread:e}"))?;

        let g = random::conservative_generator(&mut rng, k);
        let kp = kirchhoff_perron(&g).map_err(|e| e.to_string())?;
        let gap = linalg::inf_norm(&(linalg::normalize_sum(&kp.cofactors) - stationary(&g)));
        markov_max = markov_max.max(gap);
        check(gap <= 1e-9, || format!("generator {idx}: stationary gap {gap:e}"))?;
    }
    Ok(format!("200 matrices, spread {spread_max:.1e}, Markov gap {markov_max:.1e}"))
}

fn siphon_oracle() -> Outcome {
    let mut rng = rng(600);
    for idx in 0..50 {
        let species = rng.random_range(1..=12);
        let reactions = rng.random_range(0..=2 * species);
        let net = random::network(&mut rng, species, reactions);
        let mut got: Vec<Vec<usize>> = minimal_siphons(&net).map_err(|e| e.to_string())?.into_iter().map(|s| s.members).collect();
        got.sort();
        let want = brute_force_minimal_siphons(&net);
        check(got == want, || format!("network {idx}: {got:?} vs {want:?}"))?;
    }
    let sirs = parse_reactions("s + i -> 2 i : 2\ni -> r : 1\nr -> s : 1\n").map_err(|e| e.to_string())?;
    let list = minimal_siphons(&sirs).map_err(|e| e.to_string())?;
    let names: Vec<Vec<&str>> = list.iter().map(|s| s.members.iter().map(|&k| sirs.species[k].as_str()).collect()).collect();
    check(names == vec![vec!["i"]], || format!("SIRS siphons {names:?}"))?;
    Ok("50 networks match the power-set filter; SIRS gives {i}".into())
}

fn two_by_two(p: Mat, b: Mat) -> BilinearModel {
    let a = -Mat::identity(2, 2);
    BilinearModel::new(a.clone(), a, b, p, Vector::from_element(2, 1.0), None).unwrap()
}

fn rank_classification() -> Outcome {
    let third = 1.0 / 3.0;
    let ex_p = two_by_two(from_rows(&[vec![third, third], vec![2.0 * third, 2.0 * third]]), from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
    let ex_b = two_by_two(Mat::identity(2, 2), from_rows(&[vec![1.0, 3.0], vec![2.0, 6.0]]));
    let tag_p = classify_rank(&ex_p, 1e-8).map_err(|e| e.to_string())?.tag;
    let tag_b = classify_rank(&ex_b, 1e-8).map_err(|e| e.to_string())?.tag;
    check(tag_p == RankTag::CaseP, || format!("P-example classified {tag_p:?}"))?;
    check(tag_b == RankTag::CaseB, || format!("B-example classified {tag_b:?}"))?;

    let mut rng = rng(700);
    let mut worst: f64 = 0.0;
    for idx in 0..100 {
        let model = random_model(&mut rng, 6, if idx % 2 == 0 { Shape::CaseP } else { Shape::CaseB }, None);
        let s_idx: Vec<usize> = (0..model.m).collect();
        let i_idx: Vec<usize> = (model.m..model.m + model.n).collect();
        let back = bilinear_from_rhs(&|x| model.rhs_stacked(x), &s_idx, &i_idx).map_err(|e| e.to_string())?;
        let gap = (linalg::max_abs(&(&back.p - &model.p))).max(linalg::max_abs(&(&back.b - &model.b)) / linalg::max_abs(&model.b));
        worst = worst.max(gap);
        check(gap <= 1e-10, || format!("model {idx}: factor recovery gap {gap:e}"))?;
        let tag = classify_rank(&back, 1e-8).map_err(|e| e.to_string())?.tag;
        let want = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?.tag;
        check(tag == want, || format!("model {idx}: recovered class {tag:?} vs {want:?}"))?;
    }
    Ok(format!("examples CaseP / CaseB, 100 recoveries, max gap {worst:.1e}"))
}

fn backward_model(c00: f64) -> BilinearModel {
    BilinearModel::new(
        from_rows(&[vec![-1.0]]),
        -Mat::identity(2, 2),
        from_rows(&[vec![10.0], vec![0.1]]),
        from_rows(&[vec![1.0, 1.0]]),
        Vector::from_vec(vec![0.01, 5.0]),
        Some(from_rows(&[vec![c00], vec![0.0]])),
    )
    .unwrap()
}

fn feedback_scan() -> Outcome {
    let mut points = Vec::new();
    for step in 0..10 {
        let c00 = 0.9 * step as f64 / 9.0;
        let model = backward_model(c00);
        let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
        let fb = feedback_analysis(&model, &rank, &tol()).map_err(|e| e.to_string())?;
        let (want, _) = FeedbackOracle::new(&model).count_roots(1e-8, fb.law.k_max, 1_000_000);
        let got = fb.law.num_roots();
        check(got == want, || format!("C[0,0] = {c00}: scan {got} roots, oracle {want}"))?;
        points.push(got);
    }
    check(!fb_satisfies_bound(0.9)? && points.iter().any(|&n| n >= 2), || "constructed model never shows multiple roots".into())?;

    let mut rng = rng(900);
    let (mut checked, mut skipped) = (0, 0);
    while checked < 50 {
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let target = rng.random_range(1.1..4.0);
        let spec = ModelSpec { m, n, shape: Shape::CaseP, r0: Some(target), diagonal_as: rng.random_bool(0.5) };
        let mut model = random::model(&mut rng, &spec);
        let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
        model.c = random::positive_matrix(&mut rng, m, n);
        let fb = feedback_analysis(&model, &rank, &tol()).map_err(|e| e.to_string())?;
        if !(fb.uniqueness_bound > 0.0) {
            continue;
        }
        model.c *= rng.random_range(0.05..0.95) * fb.uniqueness_bound / fb.cdw_norm;
        let fb = feedback_analysis(&model, &rank, &tol()).map_err(|e| e.to_string())?;
        // Recovery feedback returns at most the infected outflow.
        if !fb.feedback_conservative {
            skipped += 1;
            continue;
        }
        check(fb.uniqueness_condition, || "scaled model misses the bound".into())?;
        check(fb.law.num_roots() == 1, || format!("bound holds, R0 = {}, but {} roots", fb.report.r0, fb.law.num_roots()))?;
        checked += 1;
    }
    Ok(format!("sweep roots {points:?} match the 10⁶-point oracle; 50 bounded models ({skipped} non-conservative draws skipped) have one root"))
}

fn fb_satisfies_bound(c00: f64) -> Result<bool, String> {
    let model = backward_model(c00);
    let rank = classify_rank(&model, 1e-8).map_err(|e| e.to_string())?;
    Ok(feedback_analysis(&model, &rank, &tol()).map_err(|e| e.to_string())?.uniqueness_condition)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("sir-closed-form", sir_closed_form, Duration::from_secs(1)),
        ("spectral-identity", spectral_identity, Duration::from_secs(10)),
        ("strong-threshold", strong_threshold, Duration::from_secs(60)),
        ("determinant-law", determinant_law_suite, Duration::from_secs(10)),
        ("lyapunov-suites", lyapunov_suites, Duration::from_secs(300)),
        ("kirchhoff-perron", kirchhoff_perron_suite, Duration::from_secs(30)),
        ("siphon-oracle", siphon_oracle, Duration::from_secs(30)),
        ("rank-classification", rank_classification, Duration::from_secs(5)),
        ("feedback-scan", feedback_scan, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.2?}) {detail}", elapsed),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({:.2?}) {detail}", elapsed);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
