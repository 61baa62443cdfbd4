use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use abp_core::crn::{self, ReactionNetwork};
use abp_core::equilibrium::{self, EquilibriumReport, ThresholdStatus};
use abp_core::lyapunov::{self, Candidate, DfeFunction, EeFunction, TransversalFunction, VerifyConfig};
use abp_core::model::{classify_rank, validate_accessibility, validate_model};
use abp_core::sim::{self, IntegratorConfig, Method};
use abp_core::{ngm, BilinearModel, Error, Mat, RankClass, Tolerances, Vector};
use rand::Rng;
use serde_json::{json, Value};

use crate::{CertificateKind, Failure, Global, InputKind};

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("({})", parts.join(", "))
}

fn vec_json(v: &Vector) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn mat_json(m: &Mat) -> Value {
    json!(abp_core::linalg::to_rows(m))
}

fn write(g: &Global, name: &str, contents: &str) -> Result<(), Failure> {
    fs::write(g.out.join(name), contents)?;
    Ok(())
}

fn write_json(g: &Global, name: &str, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write(g, name, &text)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_network(g: &Global, path: &Path) -> Result<ReactionNetwork, Failure> {
    if g.input_kind(path) != InputKind::Reactions {
        return Err(Failure::Io(format!("{} is not a reaction file", path.display())));
    }
    Ok(crn::parse_reactions(&read(path)?)?)
}

fn load_model(g: &Global, path: &Path) -> Result<BilinearModel, Failure> {
    let text = read(path)?;
    match g.input_kind(path) {
        InputKind::Model => Ok(BilinearModel::from_json_str(&text)?),
        InputKind::Reactions => {
            let net = crn::parse_reactions(&text)?;
            Ok(crn::network_to_bilinear(&net, None)?)
        }
    }
}

/// Validation section of a report; `Err` carries the failure summary.
fn validation_section(model: &BilinearModel, tol: &Tolerances, text: &mut String) -> (Value, Result<(), Failure>) {
    let report = validate_model(model, tol);
    let access = validate_accessibility(model);
    let _ = writeln!(text, "== validation ==");
    for c in &report.checks {
        let detail = c.detail.as_deref().map(|d| format!(" — {d}")).unwrap_or_default();
        let _ = writeln!(text, "{:<22} {:?}{detail}", c.name, c.status);
    }
    let _ = writeln!(text, "accessible: {}", access.accessible());
    let value = json!({ "passed": report.passes(), "checks": report.checks, "accessibility": access });
    let outcome = if report.passes() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::Validation(format!("model failed validation: {}", names.join(", "))))
    };
    (value, outcome)
}

fn rank_section(rank: &RankClass, model: &BilinearModel, text: &mut String) -> Value {
    let case_b = rank.is_case_b();
    let _ = writeln!(text, "\n== rank ==");
    let _ = writeln!(text, "class: {:?}", rank.tag);
    let _ = writeln!(text, "P columns equal (Case P): {}", if rank.is_case_p() { "yes" } else { "no" });
    let _ = writeln!(text, "B rank one (Case B): {}", if case_b { "yes" } else { "no" });
    if let Some(a) = &rank.alpha_n {
        let _ = writeln!(text, "alpha_n = {}", fmt_vec(a));
    }
    if let (Some(a), Some(b)) = (&rank.alpha_m, &rank.beta) {
        let _ = writeln!(text, "alpha_m = {}", fmt_vec(a));
        let _ = writeln!(text, "beta = {}", fmt_vec(b));
    }
    json!({ "class": rank, "case_p": rank.is_case_p(), "case_b": case_b, "m": model.m, "n": model.n })
}

/// Equilibria by the procedure that applies to the model.
fn equilibria(model: &BilinearModel, rank: &RankClass, tol: &Tolerances) -> Result<(EquilibriumReport, Option<Value>), Failure> {
    if !model.has_feedback() {
        let report = if rank.is_rank_one() {
            equilibrium::endemic_rank_one(model, rank, tol)?
        } else {
            equilibrium::endemic_spectral(model, tol)?
        };
        return Ok((report, None));
    }
    if !rank.is_case_p() {
        return Err(Failure::Hypothesis(
            "models with feedback are only analyzed in Case (P)".into(),
        ));
    }
    let fb = equilibrium::feedback_analysis(model, rank, tol)?;
    let value = json!({
        "roots": fb.law.roots,
        "double_roots": fb.law.double_roots,
        "saddle_nodes": fb.law.saddle_nodes,
        "k_max": fb.law.k_max,
        "grid_exhausted": fb.law.grid_exhausted,
        "cdw_norm": fb.cdw_norm,
        "uniqueness_bound": fb.uniqueness_bound,
        "uniqueness_condition": fb.uniqueness_condition,
        "feedback_conservative": fb.feedback_conservative,
        "backward_bifurcation": fb.backward_bifurcation,
    });
    Ok((fb.report, Some(value)))
}

pub fn analyze(g: &Global, input: &Path) -> Result<(), Failure> {
    let tol = g.tolerances();
    let model = load_model(g, input)?;
    let mut text = String::new();
    let _ = writeln!(text, "input: {}", input.display());
    let _ = writeln!(text, "m = {}, n = {}\n", model.m, model.n);
    let (validation, outcome) = validation_section(&model, &tol, &mut text);
    let mut report = json!({
        "input": input.display().to_string(),
        "seed": g.seed,
        "tolerances": tol,
        "model": serde_json::from_str::<Value>(&model.to_json_string()).unwrap_or(Value::Null),
        "validation": validation,
    });
    if let Err(failure) = outcome {
        write(g, "analysis.txt", &text)?;
        write_json(g, "analysis.json", &report)?;
        print!("{text}");
        return Err(failure);
    }
    let result = analyze_valid(&model, &tol, &mut text, &mut report);
    if let Err(f) = &result {
        let _ = writeln!(text, "\nerror: {}", f.message());
        report["error"] = json!(f.message());
    }
    write(g, "analysis.txt", &text)?;
    write_json(g, "analysis.json", &report)?;
    print!("{text}");
    result
}

fn analyze_valid(model: &BilinearModel, tol: &Tolerances, text: &mut String, report: &mut Value) -> Result<(), Failure> {
    let rank = classify_rank(model, tol.rank)?;
    report["rank"] = rank_section(&rank, model, text);

    let s0 = equilibrium::dfe(model)?;
    let bundle = ngm::ngm_at(model, &s0)?;
    let _ = writeln!(text, "\n== disease-free equilibrium ==");
    let _ = writeln!(text, "S0 = {}", fmt_vec(&s0));
    let _ = writeln!(text, "R0 = {:.10}", bundle.r0);
    report["dfe"] = json!({ "s0": vec_json(&s0), "r0": bundle.r0, "K": mat_json(&bundle.k), "K_tilde": mat_json(&bundle.k_tilde) });

    if rank.is_rank_one() {
        let table = ngm::eig_table(model, &rank)?;
        let _ = writeln!(text, "\n== Perron data ==");
        let _ = writeln!(text, "w_K  = {}", fmt_vec(&table.w_k));
        let _ = writeln!(text, "pi_K = {}", fmt_vec(&table.pi_k));
        let _ = writeln!(text, "w_K~  = {}", fmt_vec(&table.w_ktilde));
        let _ = writeln!(text, "pi_K~ = {}", fmt_vec(&table.pi_ktilde));
        let _ = writeln!(text, "eigen residual = {:.3e}, transform residual = {:.3e}", table.eigen_residual, table.transform_residual);
        report["eig_table"] = json!(table);
        let r = ngm::replacement_vector(model, &rank)?;
        let _ = writeln!(text, "replacement vector R = {}", fmt_vec(&r));
        report["replacement_vector"] = vec_json(&r);
    }

    let (eq, feedback) = equilibria(model, &rank, tol)?;
    let _ = writeln!(text, "\n== equilibria ==");
    let _ = write!(text, "{eq}");
    report["equilibrium"] = json!(eq);
    if rank.is_rank_one() && !model.has_feedback() {
        let spectral = equilibrium::endemic_spectral(model, tol)?;
        let _ = writeln!(text, "\n== spectral solver ==");
        let _ = write!(text, "{spectral}");
        report["spectral"] = json!(spectral);
    }
    if let Some(fb) = feedback {
        let _ = writeln!(text, "\n== feedback ==");
        let _ = writeln!(text, "roots of H_C(k) = 1: {}", fb["roots"]);
        let _ = writeln!(text, "uniqueness condition holds: {}", fb["uniqueness_condition"]);
        let _ = writeln!(text, "backward bifurcation: {}", fb["backward_bifurcation"]);
        report["feedback"] = fb;
    }

    if model.m == 1 && !model.has_feedback() && rank.is_rank_one() && eq.status == ThresholdStatus::Above {
        let law = equilibrium::determinant_law(model, &rank, &eq)?;
        let _ = writeln!(text, "\n== determinant law ==");
        let _ = writeln!(text, "det J_DFE = {:.10} (closed form {:.10})", law.det_dfe, law.closed_dfe);
        let _ = writeln!(text, "det J_EE  = {:.10} (closed form {:.10})", law.det_ee, law.closed_ee);
        let _ = writeln!(text, "det J_EE + det J_DFE = 0: {}", law.law_holds);
        report["determinant_law"] = json!(law);
    }
    Ok(())
}

pub fn lyapunov(g: &Global, input: &Path, kind: CertificateKind, trajectories: usize, horizon: f64) -> Result<(), Failure> {
    let tol = g.tolerances();
    let model = load_model(g, input)?;
    let mut text = String::new();
    let (_, outcome) = validation_section(&model, &tol, &mut text);
    outcome?;
    let rank = classify_rank(&model, tol.rank)?;
    let candidate = match kind {
        CertificateKind::Dfe => Candidate::Dfe(DfeFunction::new(&model, &rank)?),
        CertificateKind::Ee => {
            let (eq, _) = equilibria(&model, &rank, &tol)?;
            Candidate::Ee(EeFunction::new(&model, &eq)?)
        }
        CertificateKind::Transversal => {
            if model.has_feedback() {
                return Err(Failure::Hypothesis("the transversal check needs C = 0".into()));
            }
            Candidate::Transversal(TransversalFunction::new(&model)?)
        }
    };
    let config = VerifyConfig { trajectories, horizon, seed: g.seed, violation_tol: tol.lyapunov, ..Default::default() };
    let cert = lyapunov::verify_candidate(&model, candidate, &config)?;

    let _ = writeln!(text, "\n== certificate ==");
    let _ = writeln!(text, "kind: {:?}", cert.kind);
    let _ = writeln!(text, "weights = {}", fmt_vec(&cert.weights));
    let _ = writeln!(text, "trajectories: {trajectories}, horizon: {horizon}, seed: {}", g.seed);
    let _ = writeln!(text, "worst positive V_dot = {:.3e}", cert.worst_violation);
    let _ = writeln!(text, "max |V_dot| = {:.3e}", cert.max_abs_v_dot);
    let _ = writeln!(text, "closed form vs chain rule = {:.3e}", cert.chain_mismatch);
    let _ = writeln!(text, "max |feedback term| = {:.3e}", cert.max_extra);
    let _ = writeln!(text, "converged fraction = {}", cert.converged_fraction);
    let _ = writeln!(text, "verdict: {}", if cert.verdict { "non-increasing" } else { "VIOLATED" });
    let summary = json!({
        "input": input.display().to_string(),
        "seed": g.seed,
        "kind": cert.kind,
        "weights": vec_json(&cert.weights),
        "candidate": cert.candidate,
        "trajectories": trajectories,
        "horizon": horizon,
        "verdict": cert.verdict,
        "worst_violation": cert.worst_violation,
        "max_abs_v_dot": cert.max_abs_v_dot,
        "chain_mismatch": cert.chain_mismatch,
        "max_extra": cert.max_extra,
        "converged_fraction": cert.converged_fraction,
    });
    write(g, "certificate.txt", &text)?;
    write_json(g, "certificate.json", &summary)?;
    for idx in 0..cert.traces.len() {
        write(g, &format!("trace_{idx:03}.csv"), &cert.trace_csv(idx))?;
    }
    print!("{text}");
    if cert.verdict {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("V_dot reached {:.3e}", cert.worst_violation)))
    }
}

/// `NAME[i,j]` or `NAME[i]`.
fn parse_param(spec: &str) -> Result<(String, usize, usize), Failure> {
    let bad = || Failure::Io(format!("bad parameter '{spec}'; expected e.g. B[0,1] or Lambda[0]"));
    let (name, rest) = spec.split_once('[').ok_or_else(bad)?;
    let inner = rest.strip_suffix(']').ok_or_else(bad)?;
    let idx: Vec<usize> = inner.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    match (name.trim(), idx.as_slice()) {
        ("Lambda", [i]) => Ok(("Lambda".into(), *i, 0)),
        (n @ ("A" | "A_S" | "B" | "P" | "C"), [i, j]) => Ok((n.into(), *i, *j)),
        _ => Err(bad()),
    }
}

fn set_param(model: &mut BilinearModel, name: &str, i: usize, j: usize, value: f64) -> Result<(), Failure> {
    let target = match name {
        "Lambda" => {
            let slot = model.lambda.get_mut(i).ok_or_else(|| Failure::Io(format!("Lambda[{i}] is out of range")))?;
            *slot = value;
            return Ok(());
        }
        "A" => &mut model.a,
        "A_S" => &mut model.a_s,
        "B" => &mut model.b,
        "P" => &mut model.p,
        _ => &mut model.c,
    };
    let slot = target.get_mut((i, j)).ok_or_else(|| Failure::Io(format!("{name}[{i},{j}] is out of range")))?;
    *slot = value;
    Ok(())
}

pub fn scan(g: &Global, input: &Path, param: &str, from: f64, to: f64, steps: usize) -> Result<(), Failure> {
    let tol = g.tolerances();
    let base = load_model(g, input)?;
    let (name, i, j) = parse_param(param)?;
    // Bounds check before any work.
    set_param(&mut base.clone(), &name, i, j, from)?;
    if !classify_rank(&base, tol.rank)?.is_case_p() {
        return Err(Error::NotCaseP.into());
    }
    let grid: Vec<f64> = match steps {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..steps).map(|s| from + (to - from) * s as f64 / (steps - 1) as f64).collect(),
    };

    let mut rows = Vec::with_capacity(grid.len());
    for &value in &grid {
        let mut model = base.clone();
        set_param(&mut model, &name, i, j, value)?;
        let rank = classify_rank(&model, tol.rank)?;
        let fb = equilibrium::feedback_analysis(&model, &rank, &tol)?;
        let mut roots = fb.law.roots.clone();
        roots.extend(&fb.law.double_roots);
        roots.sort_by(f64::total_cmp);
        rows.push(json!({
            "param": value,
            "r0": fb.report.r0,
            "num_roots": fb.law.num_roots(),
            "k_roots": roots,
            "saddle_nodes": fb.law.saddle_nodes,
            "grid_exhausted": fb.law.grid_exhausted,
            "backward_bifurcation": fb.report.r0 < 1.0 && fb.law.num_roots() >= 1,
        }));
    }

    let width = rows.iter().map(|r| r["k_roots"].as_array().map_or(0, Vec::len)).max().unwrap_or(0).max(1);
    let mut csv = String::from("param,R0,num_roots");
    for w in 1..=width {
        let _ = write!(csv, ",k_{w}");
    }
    csv.push('\n');
    for r in &rows {
        let _ = write!(csv, "{},{},{}", r["param"], r["r0"], r["num_roots"]);
        let ks = r["k_roots"].as_array().cloned().unwrap_or_default();
        for w in 0..width {
            csv.push(',');
            if let Some(k) = ks.get(w) {
                let _ = write!(csv, "{k}");
            }
        }
        csv.push('\n');
    }
    let backward = rows.iter().filter(|r| r["backward_bifurcation"] == json!(true)).count();
    let summary = json!({
        "input": input.display().to_string(),
        "param": param,
        "points": rows,
        "backward_bifurcation_points": backward,
    });
    write(g, "scan.csv", &csv)?;
    write_json(g, "scan.json", &summary)?;
    println!("{} grid points, backward bifurcation at {backward}", grid.len());
    Ok(())
}

fn names(net: &ReactionNetwork, set: &[usize]) -> Vec<String> {
    set.iter().map(|&i| net.species[i].clone()).collect()
}

pub fn siphons(g: &Global, input: &Path) -> Result<(), Failure> {
    let net = load_network(g, input)?;
    let list = crn::minimal_siphons(&net)?;
    let total = crn::total_siphon(&list);
    let closure = crn::dfe_closure(&net, &total);
    let invariants = crn::semipositive_invariants(&net)?;

    let mut text = String::new();
    let _ = writeln!(text, "species: {}", net.species.join(", "));
    let _ = writeln!(text, "reactions: {}", net.reactions.len());
    let _ = writeln!(text, "\nminimal siphons:");
    let mut entries = Vec::new();
    for s in &list {
        let members = names(&net, &s.members);
        let _ = writeln!(text, "  {{{}}}{}", members.join(", "), if s.critical { "  critical" } else { "" });
        let face = match crn::face_equilibrium(&net, &s.members) {
            None => json!({ "equilibrium": null }),
            Some(x) => match crn::face_block_jacobian(&|y| net.rhs(y), &s.members, &x) {
                Ok(b) => {
                    let _ = writeln!(text, "    face equilibrium {}", fmt_vec(&x));
                    let _ = writeln!(text, "    J_perp = {:?}, off-diagonal block zero: {}", abp_core::linalg::to_rows(&b.j_perp), b.offdiag_zero);
                    json!({ "equilibrium": vec_json(&x), "blocks": b })
                }
                Err(e) => json!({ "equilibrium": vec_json(&x), "error": e.to_string() }),
            },
        };
        entries.push(json!({ "members": members, "critical": s.critical, "face": face }));
    }
    let _ = writeln!(text, "\ntotal siphon: {{{}}}", names(&net, &total).join(", "));
    let _ = writeln!(text, "DFE closure: {{{}}}", names(&net, &closure).join(", "));
    let _ = writeln!(text, "conservation laws: {}", invariants.len());
    let bilinear = match crn::network_to_bilinear(&net, None) {
        Ok(m) => {
            let _ = writeln!(text, "balanced bilinear: m = {}, n = {}", m.m, m.n);
            serde_json::from_str::<Value>(&m.to_json_string()).unwrap_or(Value::Null)
        }
        Err(e) => {
            let _ = writeln!(text, "balanced bilinear: no ({e})");
            json!({ "error": e.to_string() })
        }
    };
    let report = json!({
        "input": input.display().to_string(),
        "species": net.species,
        "minimal_siphons": entries,
        "total_siphon": names(&net, &total),
        "dfe_closure": names(&net, &closure),
        "conservation_laws": invariants,
        "bilinear": bilinear,
    });
    write(g, "siphons.txt", &text)?;
    write_json(g, "siphons.json", &report)?;
    print!("{text}");
    Ok(())
}

fn parse_state(text: &str, dim: usize) -> Result<Vector, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::Io(format!("bad number '{s}' in --x0"))))
        .collect::<Result<_, _>>()?;
    if values.len() != dim || values.iter().any(|&v| v < 0.0) {
        return Err(Failure::Io(format!("--x0 needs {dim} nonnegative values")));
    }
    Ok(Vector::from_vec(values))
}

pub fn simulate(g: &Global, input: &Path, horizon: f64, h: f64, stride: usize, x0: Option<&str>) -> Result<(), Failure> {
    let config = IntegratorConfig { method: Method::Rk4 { h }, stride: stride.max(1) };
    let (traj, labels) = match g.input_kind(input) {
        InputKind::Reactions => {
            let net = load_network(g, input)?;
            let k = net.n_species();
            let start = match x0 {
                Some(t) => parse_state(t, k)?,
                None => {
                    let mut rng = sim::rng(g.seed);
                    Vector::from_fn(k, |_, _| rng.random_range(0.1..2.0))
                }
            };
            (sim::integrate(|x| net.rhs(x), &start, horizon, &config)?, net.species.clone())
        }
        InputKind::Model => {
            let model = load_model(g, input)?;
            let start = match x0 {
                Some(t) => parse_state(t, model.m + model.n)?,
                None => {
                    let scale = abp_core::linalg::inf_norm(&equilibrium::dfe(&model)?).max(1.0);
                    sim::random_starts(&model, 1, scale, g.seed).remove(0)
                }
            };
            (sim::integrate_model(&model, &start, horizon, &config)?, model.labels())
        }
    };
    write(g, "trajectory.csv", &traj.to_csv(&labels))?;
    let last = traj.last();
    println!("t = {}: {}", traj.times.last().copied().unwrap_or(0.0), fmt_vec(last));
    Ok(())
}
