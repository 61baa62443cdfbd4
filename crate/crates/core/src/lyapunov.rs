//! Lyapunov functions for the disease-free and endemic equilibria, the
//! transversal linear function built from the left Perron vector, and a
//! trajectory-sampling verifier.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{dfe, EquilibriumReport, ThresholdStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{BilinearModel, RankClass};
use crate::ngm::{self, force_of_infection};
use crate::sim::{self, IntegratorConfig, Method};
use crate::spectral::{self, m_inverse};

/// Default bound on positive `V̇` samples.
pub const VIOLATION_TOL: f64 = 1e-7;

/// `G(θ) = θ − 1 − ln θ`.
pub fn goh(theta: f64) -> f64 {
    theta - 1.0 - theta.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kind {
    Dfe,
    Ee,
    Transversal,
}

/// One evaluation of a candidate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovValue {
    pub v: f64,
    /// Closed-form derivative.
    pub v_dot: f64,
    /// `∇V·RHS` with the exact gradient.
    pub v_dot_chain: f64,
    /// Feedback contribution contained in `v_dot` (zero when `C = 0`).
    pub extra: f64,
    /// Scale of the terms summed in `v_dot_chain`, for relative comparisons.
    pub scale: f64,
}

fn require_positive(v: &Vector, what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveState(what.into()));
    }
    Ok(())
}

fn chain(grad_s: &Vector, grad_i: &Vector, ds: &Vector, di: &Vector) -> (f64, f64) {
    let value = grad_s.dot(ds) + grad_i.dot(di);
    let scale = grad_s.iter().zip(ds).chain(grad_i.iter().zip(di)).map(|(g, d)| (g * d).abs()).sum::<f64>();
    (value, scale.max(1.0))
}

/// `V_DF = R₀(1ᵀS − S₀·ln S) + S₀B(−A)⁻¹I` for Case (P) with diagonal `A_S`.
#[derive(Debug, Clone, Serialize)]
pub struct DfeFunction {
    pub r0: f64,
    #[serde(with = "linalg::serde_vec")]
    pub s0: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub mu: Vector,
    /// `S₀B(−A)⁻¹`, a left Perron vector of `K(S₀)`.
    #[serde(with = "linalg::serde_vec")]
    pub weights: Vector,
}

impl DfeFunction {
    pub fn new(model: &BilinearModel, rank: &RankClass) -> Result<Self> {
        if !rank.is_case_p() {
            return Err(Error::NotCaseP);
        }
        if !linalg::is_diagonal(&model.a_s) || model.a_s.diagonal().iter().any(|&d| d >= 0.0) {
            return Err(Error::NonDiagonalAS);
        }
        let s0 = dfe(model)?;
        require_positive(&s0, "S0 has a zero entry")?;
        let r0 = ngm::r0(model)?;
        let inv = m_inverse(&model.a)?;
        let weights = linalg::left_mul(&s0, &(&model.b * inv));
        Ok(Self { r0, s0, mu: -model.a_s.diagonal(), weights })
    }

    pub fn value(&self, s: &Vector, i: &Vector) -> f64 {
        let h: f64 = s.iter().zip(&self.s0).map(|(x, x0)| x - x0 * x.ln()).sum();
        self.r0 * h + self.weights.dot(i)
    }

    pub fn eval(&self, model: &BilinearModel, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
        require_positive(s, "S must be positive")?;
        let bi = &model.b * i;
        let tangential: f64 = (0..model.m).map(|j| self.mu[j] * (s[j] - self.s0[j]).powi(2) / s[j]).sum();
        let ci = &model.c * i;
        let extra: f64 = self.r0 * (0..model.m).map(|j| (1.0 - self.s0[j] / s[j]) * ci[j]).sum::<f64>();
        let v_dot = -self.r0 * tangential + (self.r0 - 1.0) * self.s0.dot(&bi) + extra;

        let (ds, di) = model.rhs(s, i);
        let grad_s = Vector::from_fn(model.m, |j, _| self.r0 * (1.0 - self.s0[j] / s[j]));
        let (v_dot_chain, scale) = chain(&grad_s, &self.weights, &ds, &di);
        Ok(LyapunovValue { v: self.value(s, i), v_dot, v_dot_chain, extra, scale })
    }
}

pub fn v_dfe(model: &BilinearModel, rank: &RankClass, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
    DfeFunction::new(model, rank)?.eval(model, s, i)
}

/// Goh–Volterra function `S̄G(S/S̄) + Σ a_k Ī_k G(I_k/Ī_k)` for one
/// susceptible class.
#[derive(Debug, Clone, Serialize)]
pub struct EeFunction {
    pub s_bar: f64,
    #[serde(with = "linalg::serde_vec")]
    pub i_bar: Vector,
    /// `a = S̄β(−A)⁻¹`.
    #[serde(with = "linalg::serde_vec")]
    pub a: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub alpha: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub beta: Vector,
    pub mu: f64,
    /// `Λ + CĪ`, the recruitment seen by the equilibrium balance.
    pub lambda_eff: f64,
    /// `‖aA + S̄β‖∞`.
    pub weight_residual: f64,
    /// `|aα − 1|`.
    pub alpha_residual: f64,
}

impl EeFunction {
    pub fn new(model: &BilinearModel, report: &EquilibriumReport) -> Result<Self> {
        if model.m != 1 {
            return Err(Error::NotApplicable("the endemic Lyapunov function needs one susceptible class".into()));
        }
        let point = match (report.status, report.endemic_points.first()) {
            (ThresholdStatus::Above, Some(p)) => p,
            _ => return Err(Error::BelowThreshold(report.r0)),
        };
        let s_bar = point.s_bar[0];
        require_positive(&point.i_bar, "endemic infection levels")?;
        let beta = model.b.row(0).transpose();
        let alpha = model.p.column(0).into_owned();
        let inv = m_inverse(&model.a)?;
        let a = linalg::left_mul(&(&beta * s_bar), &inv);
        let weight_residual = linalg::inf_norm(&(linalg::left_mul(&a, &model.a) + &beta * s_bar));
        let alpha_residual = (a.dot(&alpha) - 1.0).abs();
        let lambda_eff = model.lambda[0] + (&model.c * &point.i_bar)[0];
        Ok(Self {
            s_bar,
            i_bar: point.i_bar.clone(),
            a,
            alpha,
            beta,
            mu: -model.a_s[(0, 0)],
            lambda_eff,
            weight_residual,
            alpha_residual,
        })
    }

    pub fn value(&self, s: &Vector, i: &Vector) -> f64 {
        let tail: f64 = (0..i.len()).map(|k| self.a[k] * self.i_bar[k] * goh(i[k] / self.i_bar[k])).sum();
        self.s_bar * goh(s[0] / self.s_bar) + tail
    }

    /// Coefficients `(c_ij, d_ij)` of the `G`-sum form of `V̇`.
    pub fn coefficients(&self, model: &BilinearModel) -> (Mat, Mat) {
        let n = model.n;
        let c = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { self.a[i] * model.a[(i, j)] * self.i_bar[j] });
        let d = Mat::from_fn(n, n, |i, j| self.a[i] * self.alpha[i] * self.s_bar * self.beta[j] * self.i_bar[j]);
        (c, d)
    }

    /// `−Λ_eff G(1/s) − μS̄G(s) − Σc_ij G(y_j/y_i) − Σd_ij G(y_j s/y_i)`.
    pub fn g_sum(&self, model: &BilinearModel, s: &Vector, i: &Vector) -> f64 {
        let x = s[0] / self.s_bar;
        let y = Vector::from_fn(model.n, |k, _| i[k] / self.i_bar[k]);
        let (c, d) = self.coefficients(model);
        let mut total = -self.lambda_eff * goh(1.0 / x) - self.mu * self.s_bar * goh(x);
        for r in 0..model.n {
            for q in 0..model.n {
                if c[(r, q)] != 0.0 {
                    total -= c[(r, q)] * goh(y[q] / y[r]);
                }
                if d[(r, q)] != 0.0 {
                    total -= d[(r, q)] * goh(y[q] * x / y[r]);
                }
            }
        }
        total
    }

    pub fn eval(&self, model: &BilinearModel, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
        require_positive(s, "S must be positive")?;
        require_positive(i, "I must be positive")?;
        let extra = (1.0 - self.s_bar / s[0]) * (&model.c * (i - &self.i_bar))[0];
        let v_dot = self.g_sum(model, s, i) + extra;
        let (ds, di) = model.rhs(s, i);
        let grad_s = Vector::from_element(1, 1.0 - self.s_bar / s[0]);
        let grad_i = Vector::from_fn(model.n, |k, _| self.a[k] * (1.0 - self.i_bar[k] / i[k]));
        let (v_dot_chain, scale) = chain(&grad_s, &grad_i, &ds, &di);
        Ok(LyapunovValue { v: self.value(s, i), v_dot, v_dot_chain, extra, scale })
    }
}

pub fn v_ee(model: &BilinearModel, report: &EquilibriumReport, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
    EeFunction::new(model, report)?.eval(model, s, i)
}

/// Linear function `Q = π·I` along the left Perron vector `π` of `K = FV⁻¹`.
#[derive(Debug, Clone, Serialize)]
pub struct TransversalFunction {
    pub r0: f64,
    #[serde(with = "linalg::serde_vec")]
    pub pi: Vector,
    /// `πV`, the left Perron vector of `K̃ = V⁻¹F`.
    #[serde(with = "linalg::serde_vec")]
    pub q: Vector,
    #[serde(with = "linalg::serde_mat")]
    pub f: Mat,
    #[serde(with = "linalg::serde_mat")]
    pub v: Mat,
    #[serde(with = "linalg::serde_vec")]
    pub s0: Vector,
}

/// Checks that `V⁻¹ ≥ 0` and returns it.
fn regular_inverse(v: &Mat) -> Result<Mat> {
    let inv = v.clone().try_inverse().ok_or_else(|| Error::SingularMatrix("V".into()))?;
    let worst = inv.iter().copied().fold(0.0, f64::min);
    if worst < -1e-12 * linalg::max_abs(&inv).max(1.0) {
        return Err(Error::NotRegularSplitting(worst));
    }
    Ok(inv)
}

impl TransversalFunction {
    /// Built from the splitting `J = F − V` with arbitrary `F ≥ 0`.
    pub fn from_splitting(f: Mat, v: Mat, s0: Vector) -> Result<Self> {
        let inv = regular_inverse(&v)?;
        let data = spectral::perron(&(&f * inv))?;
        let pi = data.pi_left;
        let q = linalg::left_mul(&pi, &v);
        Ok(Self { r0: data.rho, pi, q, f, v, s0 })
    }

    /// Natural splitting of a bilinear model at the DFE: `F(S₀)` and `−A`.
    pub fn new(model: &BilinearModel) -> Result<Self> {
        let s0 = dfe(model)?;
        Self::from_splitting(force_of_infection(model, &s0), -&model.a, s0)
    }

    /// `(Q, Q̇)` for `I' = (F − V)I − f`.
    pub fn q_and_rate(&self, i: &Vector, f: &Vector) -> (f64, f64) {
        (self.pi.dot(i), (self.r0 - 1.0) * self.q.dot(i) - self.pi.dot(f))
    }

    pub fn eval(&self, model: &BilinearModel, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
        let f = (&self.f - force_of_infection(model, s)) * i;
        let (v, v_dot) = self.q_and_rate(i, &f);
        let (ds, di) = model.rhs(s, i);
        let (v_dot_chain, scale) = chain(&Vector::zeros(model.m), &self.pi, &ds, &di);
        Ok(LyapunovValue { v, v_dot, v_dot_chain, extra: 0.0, scale })
    }
}

pub fn v_transversal(f: &Mat, v: &Mat, pi: &Vector, i: &Vector, f_nonneg: &Vector) -> Result<(f64, f64)> {
    let inv = regular_inverse(v)?;
    let r0 = spectral::spectral_radius(&(f * inv));
    let q = linalg::left_mul(pi, v);
    Ok((pi.dot(i), (r0 - 1.0) * q.dot(i) - pi.dot(f_nonneg)))
}

#[derive(Debug, Clone, Serialize)]
pub enum Candidate {
    Dfe(DfeFunction),
    Ee(EeFunction),
    Transversal(TransversalFunction),
}

impl Candidate {
    pub fn build(model: &BilinearModel, rank: &RankClass, report: &EquilibriumReport, kind: Kind) -> Result<Self> {
        Ok(match kind {
            Kind::Dfe => Self::Dfe(DfeFunction::new(model, rank)?),
            Kind::Ee => Self::Ee(EeFunction::new(model, report)?),
            Kind::Transversal => {
                if model.has_feedback() {
                    return Err(Error::Hypothesis(
                        "the transversal check needs C = 0 so that S ≤ S0 stays invariant".into(),
                    ));
                }
                Self::Transversal(TransversalFunction::new(model)?)
            }
        })
    }

    pub fn kind(&self) -> Kind {
        match self {
            Self::Dfe(_) => Kind::Dfe,
            Self::Ee(_) => Kind::Ee,
            Self::Transversal(_) => Kind::Transversal,
        }
    }

    pub fn weights(&self) -> Vector {
        match self {
            Self::Dfe(f) => f.weights.clone(),
            Self::Ee(f) => f.a.clone(),
            Self::Transversal(f) => f.pi.clone(),
        }
    }

    pub fn value(&self, s: &Vector, i: &Vector) -> f64 {
        match self {
            Self::Dfe(f) => f.value(s, i),
            Self::Ee(f) => f.value(s, i),
            Self::Transversal(f) => f.pi.dot(i),
        }
    }

    pub fn eval(&self, model: &BilinearModel, s: &Vector, i: &Vector) -> Result<LyapunovValue> {
        match self {
            Self::Dfe(f) => f.eval(model, s, i),
            Self::Ee(f) => f.eval(model, s, i),
            Self::Transversal(f) => f.eval(model, s, i),
        }
    }

    /// Equilibrium the trajectories should approach.
    pub fn target(&self, model: &BilinearModel) -> Vector {
        match self {
            Self::Dfe(f) => model.stack(&f.s0, &Vector::zeros(model.n)),
            Self::Ee(f) => model.stack(&Vector::from_element(1, f.s_bar), &f.i_bar),
            Self::Transversal(f) => model.stack(&f.s0, &Vector::zeros(model.n)),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyConfig {
    pub trajectories: usize,
    pub horizon: f64,
    pub seed: u64,
    pub h: f64,
    /// Keep every `trace_stride`-th sample in the stored traces; every
    /// sample is still checked.
    pub trace_stride: usize,
    /// Positive `V̇` samples above this are violations.
    pub violation_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trajectories: 20, horizon: 100.0, seed: 0, h: 0.01, trace_stride: 10, violation_tol: VIOLATION_TOL }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub v: f64,
    pub v_dot: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovCertificate {
    pub kind: Kind,
    pub candidate: Candidate,
    #[serde(with = "linalg::serde_vec")]
    pub weights: Vector,
    pub seed: u64,
    pub traces: Vec<Vec<TracePoint>>,
    /// No sample has `V̇` above the violation tolerance.
    pub verdict: bool,
    /// Largest positive `V̇` observed (zero if none).
    pub worst_violation: f64,
    pub max_abs_v_dot: f64,
    /// Largest `|V̇ − ∇V·RHS|` relative to the size of the summed terms.
    pub chain_mismatch: f64,
    /// Largest `|extra|` (feedback term) observed.
    pub max_extra: f64,
    /// Fraction of trajectories ending within `1e−3` (relative) of the
    /// target equilibrium.
    pub converged_fraction: f64,
}

impl LyapunovCertificate {
    /// CSV `t,V,V_dot` for one trajectory.
    pub fn trace_csv(&self, idx: usize) -> String {
        let mut out = String::from("t,V,V_dot\n");
        for p in &self.traces[idx] {
            out.push_str(&format!("{},{},{}\n", p.t, p.v, p.v_dot));
        }
        out
    }
}

/// Starting states for the check; transversal runs start below `S₀` so that
/// the remainder `f = (F(S₀) − F(S))I` stays nonnegative.
fn starts(model: &BilinearModel, candidate: &Candidate, config: &VerifyConfig) -> Vec<Vector> {
    let target = candidate.target(model);
    let scale = linalg::inf_norm(&target).max(1.0);
    let mut list = sim::random_starts(model, config.trajectories, scale, config.seed);
    if let Candidate::Transversal(f) = candidate {
        for x in &mut list {
            for j in 0..model.m {
                x[j] = f.s0[j] * (x[j] / (10.0 * scale)).min(1.0);
            }
        }
    }
    list
}

struct RunSummary {
    trace: Vec<TracePoint>,
    worst: f64,
    max_abs: f64,
    mismatch: f64,
    extra: f64,
    distance: f64,
}

fn run_one(model: &BilinearModel, candidate: &Candidate, x0: &Vector, config: &VerifyConfig, target: &Vector) -> Result<RunSummary> {
    let cfg = IntegratorConfig { method: Method::Rk4 { h: config.h }, stride: 1 };
    let traj = sim::integrate_model(model, x0, config.horizon, &cfg)?;
    let stride = config.trace_stride.max(1);
    let mut summary =
        RunSummary { trace: Vec::new(), worst: 0.0, max_abs: 0.0, mismatch: 0.0, extra: 0.0, distance: 0.0 };
    for (idx, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let (s, i) = model.split(x);
        let val = candidate.eval(model, &s, &i)?;
        summary.worst = summary.worst.max(val.v_dot);
        summary.max_abs = summary.max_abs.max(val.v_dot.abs());
        summary.mismatch = summary.mismatch.max((val.v_dot - val.v_dot_chain).abs() / val.scale);
        summary.extra = summary.extra.max(val.extra.abs());
        if idx % stride == 0 || idx + 1 == traj.times.len() {
            summary.trace.push(TracePoint { t: *t, v: val.v, v_dot: val.v_dot });
        }
    }
    summary.distance = linalg::inf_norm(&(traj.last() - target)) / linalg::inf_norm(target).max(1.0);
    Ok(summary)
}

/// Samples `V` and `V̇` along trajectories from seeded random positive starts.
pub fn verify_decrease(
    model: &BilinearModel,
    rank: &RankClass,
    report: &EquilibriumReport,
    kind: Kind,
    config: &VerifyConfig,
) -> Result<LyapunovCertificate> {
    let candidate = Candidate::build(model, rank, report, kind)?;
    verify_candidate(model, candidate, config)
}

pub fn verify_candidate(model: &BilinearModel, candidate: Candidate, config: &VerifyConfig) -> Result<LyapunovCertificate> {
    let target = candidate.target(model);
    let runs: Vec<RunSummary> = starts(model, &candidate, config)
        .par_iter()
        .map(|x0| run_one(model, &candidate, x0, config, &target))
        .collect::<Result<_>>()?;
    let worst = runs.iter().map(|r| r.worst).fold(0.0, f64::max);
    let converged = runs.iter().filter(|r| r.distance <= 1e-3).count();
    Ok(LyapunovCertificate {
        kind: candidate.kind(),
        weights: candidate.weights(),
        seed: config.seed,
        verdict: worst <= config.violation_tol,
        worst_violation: worst,
        max_abs_v_dot: runs.iter().map(|r| r.max_abs).fold(0.0, f64::max),
        chain_mismatch: runs.iter().map(|r| r.mismatch).fold(0.0, f64::max),
        max_extra: runs.iter().map(|r| r.extra).fold(0.0, f64::max),
        converged_fraction: if runs.is_empty() { 1.0 } else { converged as f64 / runs.len() as f64 },
        traces: runs.into_iter().map(|r| r.trace).collect(),
        candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::endemic_rank_one;
    use crate::linalg::from_rows;
    use crate::model::{classify_rank, Tolerances};

    fn sir(beta: f64) -> BilinearModel {
        BilinearModel::new(
            from_rows(&[vec![-1.0]]),
            from_rows(&[vec![-1.0]]),
            from_rows(&[vec![beta]]),
            from_rows(&[vec![1.0]]),
            Vector::from_vec(vec![1.0]),
            None,
        )
        .unwrap()
    }

    fn v1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    fn report(model: &BilinearModel) -> EquilibriumReport {
        let rank = classify_rank(model, 1e-8).unwrap();
        endemic_rank_one(model, &rank, &Tolerances::default()).unwrap()
    }

    #[test]
    fn dfe_value_at_sample_state() {
        let model = sir(0.5);
        let rank = classify_rank(&model, 1e-8).unwrap();
        let val = v_dfe(&model, &rank, &v1(0.8), &v1(0.1)).unwrap();
        // S' = 0.16, I' = −0.06, ∇V = (0.5(1 − 1/0.8), 0.5).
        assert!((val.v_dot_chain - (-0.05)).abs() < 1e-14);
        assert!((val.v_dot - (-0.05)).abs() < 1e-14);
        let at_dfe = v_dfe(&model, &rank, &v1(1.0), &v1(0.0)).unwrap();
        assert_eq!(at_dfe.v_dot, 0.0);
    }

    #[test]
    fn dfe_rejects_coupled_as() {
        let model = sir(0.5);
        let two = BilinearModel::new(
            from_rows(&[vec![-1.0]]),
            from_rows(&[vec![-1.0, 0.2], vec![0.1, -1.0]]),
            from_rows(&[vec![0.3], vec![0.2]]),
            from_rows(&[vec![1.0, 1.0]]),
            Vector::from_vec(vec![1.0, 1.0]),
            None,
        )
        .unwrap();
        let rank = classify_rank(&two, 1e-8).unwrap();
        assert_eq!(DfeFunction::new(&two, &rank).unwrap_err(), Error::NonDiagonalAS);
        let rank = classify_rank(&model, 1e-8).unwrap();
        assert!(matches!(v_dfe(&model, &rank, &v1(0.0), &v1(0.1)), Err(Error::NonPositiveState(_))));
    }

    #[test]
    fn ee_value_and_weights() {
        let model = sir(2.0);
        let rep = report(&model);
        let f = EeFunction::new(&model, &rep).unwrap();
        assert!((f.a[0] - 1.0).abs() < 1e-12);
        assert!(f.weight_residual < 1e-12 && f.alpha_residual < 1e-12);
        let val = f.eval(&model, &v1(1.0), &v1(1.0)).unwrap();
        assert!((val.v - (2.0 - 1.0 - 2f64.ln())).abs() < 1e-12);
        let at = f.eval(&model, &v1(0.5), &v1(0.5)).unwrap();
        assert!(at.v.abs() < 1e-14 && at.v_dot.abs() < 1e-14);
        let dfe_weights = DfeFunction::new(&model, &classify_rank(&model, 1e-8).unwrap()).unwrap().weights;
        assert!((f.a[0] - dfe_weights[0] / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ee_requires_endemic_point() {
        let model = sir(0.5);
        assert_eq!(EeFunction::new(&model, &report(&model)).unwrap_err(), Error::BelowThreshold(0.5));
    }

    #[test]
    fn transversal_scalar() {
        let (q, rate) = v_transversal(&from_rows(&[vec![2.0]]), &from_rows(&[vec![1.0]]), &v1(1.0), &v1(0.3), &v1(0.0)).unwrap();
        assert!((q - 0.3).abs() < 1e-15 && (rate - 0.3).abs() < 1e-15);
        let (q, rate) = v_transversal(&from_rows(&[vec![0.5]]), &from_rows(&[vec![1.0]]), &v1(1.0), &v1(0.0), &v1(0.0)).unwrap();
        assert_eq!((q, rate), (0.0, 0.0));
        let bad = from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            v_transversal(&Mat::identity(2, 2), &bad, &Vector::from_element(2, 0.5), &Vector::zeros(2), &Vector::zeros(2)),
            Err(Error::NotRegularSplitting(_))
        ));
    }

    #[test]
    fn verify_sir() {
        let model = sir(0.5);
        let rank = classify_rank(&model, 1e-8).unwrap();
        let config = VerifyConfig { horizon: 50.0, ..Default::default() };
        let cert = verify_decrease(&model, &rank, &report(&model), Kind::Dfe, &config).unwrap();
        assert!(cert.verdict, "worst {}", cert.worst_violation);
        assert!(cert.chain_mismatch < 1e-8);
        assert_eq!(cert.converged_fraction, 1.0);
        assert!(cert.trace_csv(0).starts_with("t,V,V_dot\n0,"));

        let model = sir(2.0);
        let config = VerifyConfig { horizon: 200.0, ..Default::default() };
        let cert = verify_decrease(&model, &rank, &report(&model), Kind::Ee, &config).unwrap();
        assert!(cert.verdict && cert.chain_mismatch < 1e-8);
        assert_eq!(cert.converged_fraction, 1.0);
    }

    #[test]
    fn transversal_along_trajectories() {
        let model = sir(0.5);
        let rank = classify_rank(&model, 1e-8).unwrap();
        let cert = verify_decrease(&model, &rank, &report(&model), Kind::Transversal, &VerifyConfig::default()).unwrap();
        assert!(cert.verdict && cert.chain_mismatch < 1e-12);
    }
}
