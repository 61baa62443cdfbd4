//! Disease-free and endemic equilibria.
//!
//! Rank-one models reduce to the scalar law `H(k) = 1`; general models are
//! solved by the two-step spectral procedure (find `S` with `ρ(K̃(S)) = 1`,
//! then the amplitude `k`) followed by a Newton polish on the full system.
//! With feedback `C ≠ 0` the scalar law `H_C` may have several roots, which
//! are found by a grid scan.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{classify_rank, BilinearModel, RankClass, RankTag, Tolerances};
use crate::ngm::{self, dwell_times, replacement_vector};
use crate::spectral::{self, m_inverse};

const DOUBLINGS: usize = 60;
const SCAN_POINTS: usize = 2000;
const SCAN_K_MIN: f64 = 1e-8;
const DOUBLE_ROOT_GAP: f64 = 1e-8;
const DOUBLE_ROOT_SLOPE: f64 = 1e-6;
const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_MAX_ITER: usize = 500;
const NEWTON_MAX_ITER: usize = 50;

/// `S₀ = (−A_S)⁻¹Λ`.
pub fn dfe(model: &BilinearModel) -> Result<Vector> {
    Ok(m_inverse(&model.a_s)? * &model.lambda)
}

/// Analytic Jacobian of the model right-hand side at `(S, I)`.
pub fn jacobian(model: &BilinearModel, s: &Vector, i: &Vector) -> Mat {
    let (m, n) = (model.m, model.n);
    let bi = &model.b * i;
    let mut j = Mat::zeros(m + n, m + n);
    j.view_mut((0, 0), (m, m))
        .copy_from(&(&model.a_s - linalg::diag(&bi)));
    j.view_mut((0, m), (m, n))
        .copy_from(&(&model.c - linalg::diag(s) * &model.b));
    j.view_mut((m, 0), (n, m))
        .copy_from(&(&model.p * linalg::diag(&bi)));
    j.view_mut((m, m), (n, n))
        .copy_from(&(ngm::force_of_infection(model, s) + &model.a));
    j
}

/// Magnitude against which equilibrium residuals are judged.
pub fn residual_scale(model: &BilinearModel, s: &Vector, i: &Vector) -> f64 {
    let terms = [
        linalg::inf_norm(&model.lambda),
        linalg::inf_norm(&(&model.a_s * s)),
        linalg::inf_norm(&(&model.a * i)),
        linalg::inf_norm(&s.component_mul(&(&model.b * i))),
    ];
    terms.into_iter().fold(1.0, f64::max)
}

pub fn residual(model: &BilinearModel, s: &Vector, i: &Vector) -> f64 {
    let (ds, di) = model.rhs(s, i);
    linalg::inf_norm(&ds).max(linalg::inf_norm(&di))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThresholdStatus {
    Above,
    /// `|R₀ − 1|` inside the threshold band.
    Threshold,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Forward,
    BackwardCapable,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndemicPoint {
    #[serde(with = "linalg::serde_vec")]
    pub s_bar: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub i_bar: Vector,
    /// Amplitude: `Ī = k·D_w` (rank one) or `B·Ī = k·v` (spectral).
    pub k: f64,
    pub residual_inf_norm: f64,
    /// `ρ(K̃(S̄))`, equal to one at any endemic point.
    pub rho_at_s_bar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub method: String,
    #[serde(with = "linalg::serde_vec")]
    pub s0: Vector,
    pub r0: f64,
    pub status: ThresholdStatus,
    pub endemic_points: Vec<EndemicPoint>,
    pub det_j_dfe: Option<f64>,
    pub det_j_ee: Option<f64>,
    pub branch: Branch,
    /// Largest disagreement with the rank-one solver, when it applies.
    pub cross_check: Option<f64>,
}

impl EquilibriumReport {
    fn new(method: &str, model: &BilinearModel, s0: Vector, r0: f64, tol: &Tolerances) -> Self {
        let status = classify_threshold(r0, tol.threshold);
        let det_j_dfe = Some(jacobian(model, &s0, &Vector::zeros(model.n)).determinant());
        Self {
            method: method.into(),
            s0,
            r0,
            status,
            endemic_points: Vec::new(),
            det_j_dfe,
            det_j_ee: None,
            branch: if model.has_feedback() { Branch::BackwardCapable } else { Branch::Forward },
            cross_check: None,
        }
    }

    fn push_point(&mut self, model: &BilinearModel, s_bar: Vector, i_bar: Vector, k: f64) -> Result<()> {
        let residual_inf_norm = residual(model, &s_bar, &i_bar);
        let rho_at_s_bar = ngm::ngm_at(model, &s_bar)?.r0;
        if self.det_j_ee.is_none() {
            self.det_j_ee = Some(jacobian(model, &s_bar, &i_bar).determinant());
        }
        self.endemic_points.push(EndemicPoint { s_bar, i_bar, k, residual_inf_norm, rho_at_s_bar });
        Ok(())
    }
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for EquilibriumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "S0 = {}", fmt_vec(&self.s0))?;
        writeln!(f, "R0 = {:.10}", self.r0)?;
        writeln!(f, "status: {:?}", self.status)?;
        writeln!(f, "branch: {:?}", self.branch)?;
        if let Some(d) = self.det_j_dfe {
            writeln!(f, "det J_DFE = {d:.10}")?;
        }
        if let Some(d) = self.det_j_ee {
            writeln!(f, "det J_EE = {d:.10}")?;
        }
        writeln!(f, "endemic points: {}", self.endemic_points.len())?;
        for (idx, p) in self.endemic_points.iter().enumerate() {
            writeln!(f, "  [{idx}] k = {:.10}", p.k)?;
            writeln!(f, "      S_bar = {}", fmt_vec(&p.s_bar))?;
            writeln!(f, "      I_bar = {}", fmt_vec(&p.i_bar))?;
            writeln!(f, "      residual = {:.3e}, rho(K~(S_bar)) = {:.12}", p.residual_inf_norm, p.rho_at_s_bar)?;
        }
        if let Some(c) = self.cross_check {
            writeln!(f, "rank-one cross-check deviation = {c:.3e}")?;
        }
        Ok(())
    }
}

pub fn classify_threshold(r0: f64, band: f64) -> ThresholdStatus {
    if (r0 - 1.0).abs() <= band {
        ThresholdStatus::Threshold
    } else if r0 > 1.0 {
        ThresholdStatus::Above
    } else {
        ThresholdStatus::Below
    }
}

/// The scalar normalization law `H(k) = R·(k·Diag[a] − A_S)⁻¹(Λ + k·c)`,
/// with `c = C·D_w` under feedback and `c = 0` otherwise.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarLaw {
    #[serde(with = "linalg::serde_vec")]
    pub r: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub a: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub c: Vector,
    #[serde(with = "linalg::serde_vec")]
    lambda: Vector,
    #[serde(with = "linalg::serde_mat")]
    a_s: Mat,
    pub roots: Vec<f64>,
    /// `H'(k)` at each root.
    pub derivatives: Vec<f64>,
    /// Roots where `H − 1` touches zero without changing sign.
    pub double_roots: Vec<f64>,
    /// Roots (simple or double) with `|H'| < 1e−6`.
    pub saddle_nodes: Vec<f64>,
    /// Probe points where `k·Diag[a] − A_S` was singular.
    pub poles: Vec<f64>,
    pub k_max: f64,
    /// `H(k_max) ≥ 1`: roots beyond the scanned horizon may exist.
    pub grid_exhausted: bool,
}

impl ScalarLaw {
    pub fn new(model: &BilinearModel, r: Vector, a: Vector, c: Vector) -> Self {
        Self {
            r,
            a,
            c,
            lambda: model.lambda.clone(),
            a_s: model.a_s.clone(),
            roots: Vec::new(),
            derivatives: Vec::new(),
            double_roots: Vec::new(),
            saddle_nodes: Vec::new(),
            poles: Vec::new(),
            k_max: 0.0,
            grid_exhausted: false,
        }
    }

    fn resolvent(&self, k: f64) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let mut mat = -&self.a_s;
        for i in 0..mat.nrows() {
            mat[(i, i)] += k * self.a[i];
        }
        let scale = linalg::max_abs(&mat).max(1e-300);
        let dim = mat.nrows() as i32;
        let lu = mat.lu();
        let det = lu.determinant();
        (det.is_finite() && det.abs() > 1e-14 * scale.powi(dim)).then_some(lu)
    }

    /// `H(k)`, or `None` when the resolvent is singular.
    pub fn eval(&self, k: f64) -> Option<f64> {
        let lu = self.resolvent(k)?;
        let y = lu.solve(&(&self.lambda + &self.c * k))?;
        Some(self.r.dot(&y))
    }

    /// `H'(k) = −R·M·D·M·(Λ + k·c) + R·M·c` with `M = (k·D − A_S)⁻¹`.
    pub fn derivative(&self, k: f64) -> Option<f64> {
        let lu = self.resolvent(k)?;
        let y = lu.solve(&(&self.lambda + &self.c * k))?;
        let dy = lu.solve(&self.a.component_mul(&y))?;
        let mc = lu.solve(&self.c)?;
        Some(-self.r.dot(&dy) + self.r.dot(&mc))
    }

    /// `S̄(k) = (k·Diag[a] − A_S)⁻¹(Λ + k·c)`.
    pub fn s_bar(&self, k: f64) -> Option<Vector> {
        self.resolvent(k)?.solve(&(&self.lambda + &self.c * k))
    }

    /// Limit of `H(k)` as `k → ∞`: `Σ c_i` over classes with `a_i > 0`.
    pub fn limit_at_infinity(&self) -> f64 {
        (0..self.r.len())
            .filter(|&i| self.a[i] > 0.0)
            .map(|i| self.r[i] * self.c[i] / self.a[i])
            .sum()
    }

    fn g(&self, k: f64) -> Option<f64> {
        self.eval(k).map(|h| h - 1.0)
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut g_lo = self.g(lo).unwrap_or(f64::NAN);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * hi.max(1e-300) || mid <= lo || mid >= hi {
                break;
            }
            match self.g(mid) {
                Some(g_mid) if g_mid == 0.0 => return mid,
                Some(g_mid) if (g_mid > 0.0) == (g_lo > 0.0) => {
                    lo = mid;
                    g_lo = g_mid;
                }
                _ => hi = mid,
            }
        }
        0.5 * (lo + hi)
    }

    /// Unique root for a decreasing law with `H(0) > 1`.
    pub fn solve_monotone(&mut self) -> Result<f64> {
        let mut hi = 1.0;
        let mut found = false;
        for _ in 0..DOUBLINGS {
            match self.eval(hi) {
                Some(h) if h < 1.0 => {
                    found = true;
                    break;
                }
                Some(_) => hi *= 2.0,
                None => {
                    self.poles.push(hi);
                    hi *= 2.0;
                }
            }
        }
        if !found {
            return Err(Error::NoBracket(format!("H(k) >= 1 up to k = {hi:.3e}")));
        }
        self.k_max = hi;
        let root = self.bisect(0.0, hi);
        self.record_root(root);
        Ok(root)
    }

    fn record_root(&mut self, k: f64) {
        let d = self.derivative(k).unwrap_or(f64::NAN);
        if d.abs() < DOUBLE_ROOT_SLOPE {
            self.saddle_nodes.push(k);
        }
        self.roots.push(k);
        self.derivatives.push(d);
    }

    /// Horizon for the root scan: beyond the natural scale of the law and
    /// past the last point where `H ≥ 1`, if such a point exists.
    fn horizon(&self) -> (f64, bool) {
        let min_a = self.a.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        let natural = (linalg::mat_inf_norm(&self.a_s) + linalg::inf_norm(&self.lambda)).max(1.0)
            / min_a.min(1.0).max(1e-300);
        let mut k = 1.0;
        for _ in 0..DOUBLINGS {
            if k >= 100.0 * natural && self.eval(k).is_some_and(|h| h < 1.0) {
                return (k, false);
            }
            k *= 2.0;
        }
        (k, true)
    }

    /// Finds all positive roots of `H(k) = 1` on a log grid over
    /// `[1e−8, k_max]` with bisection refinement and double-root detection.
    pub fn scan(&mut self) {
        let (k_max, exhausted) = self.horizon();
        self.k_max = k_max;
        self.grid_exhausted = exhausted;
        let ratio = (k_max / SCAN_K_MIN).ln() / (SCAN_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| SCAN_K_MIN * (ratio * i as f64).exp()).collect();
        let values: Vec<Option<f64>> = grid.par_iter().map(|&k| self.g(k)).collect();

        for (k, v) in grid.iter().zip(&values) {
            if v.is_none() {
                self.poles.push(*k);
            }
        }
        for idx in 0..SCAN_POINTS - 1 {
            let (Some(g0), Some(g1)) = (values[idx], values[idx + 1]) else { continue };
            if g0 == 0.0 {
                self.record_root(grid[idx]);
            } else if (g0 > 0.0) != (g1 > 0.0) && g1 != 0.0 {
                let root = self.bisect(grid[idx], grid[idx + 1]);
                self.record_root(root);
            }
        }
        if let Some(g_last) = values[SCAN_POINTS - 1] {
            if g_last == 0.0 {
                self.record_root(grid[SCAN_POINTS - 1]);
            }
        }
        for idx in 1..SCAN_POINTS - 1 {
            let (Some(a), Some(b), Some(c)) = (values[idx - 1], values[idx], values[idx + 1]) else {
                continue;
            };
            let same_sign = (a > 0.0) == (b > 0.0) && (b > 0.0) == (c > 0.0);
            if same_sign && b.abs() <= a.abs() && b.abs() <= c.abs() {
                if let Some(k) = self.tangency(grid[idx - 1], grid[idx + 1]) {
                    self.double_roots.push(k);
                    self.saddle_nodes.push(k);
                }
            }
        }
        let mut order: Vec<usize> = (0..self.roots.len()).collect();
        order.sort_by(|&i, &j| self.roots[i].total_cmp(&self.roots[j]));
        self.roots = order.iter().map(|&i| self.roots[i]).collect();
        self.derivatives = order.iter().map(|&i| self.derivatives[i]).collect();
    }

    /// Golden-section minimization of `|H − 1|` on `[lo, hi]`; returns the
    /// minimizer when it is a numerical tangency.
    fn tangency(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let f = |k: f64| self.g(k).map_or(f64::INFINITY, f64::abs);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..200 {
            if hi - lo <= 1e-14 * hi {
                break;
            }
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = f(x2);
            }
        }
        let k = 0.5 * (lo + hi);
        let slope = self.derivative(k)?;
        (f(k) < DOUBLE_ROOT_GAP && slope.abs() < DOUBLE_ROOT_SLOPE).then_some(k)
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len() + self.double_roots.len()
    }
}

fn require_no_feedback(model: &BilinearModel) -> Result<()> {
    if model.has_feedback() {
        return Err(Error::NotApplicable("model has feedback C != 0; use the feedback analysis".into()));
    }
    Ok(())
}

/// Scalar law of a rank-one model without feedback.
pub fn scalar_law(model: &BilinearModel, rank: &RankClass) -> Result<ScalarLaw> {
    let r = replacement_vector(model, rank)?;
    let a = match rank.tag {
        RankTag::CaseP | RankTag::Both => r.clone(),
        RankTag::CaseB => rank.alpha_m.clone().ok_or(Error::NotRankOne)?,
        RankTag::General => return Err(Error::NotRankOne),
    };
    Ok(ScalarLaw::new(model, r, a, Vector::zeros(model.m)))
}

/// Endemic equilibrium of a rank-one model by `H(k) = 1`.
pub fn endemic_rank_one(model: &BilinearModel, rank: &RankClass, tol: &Tolerances) -> Result<EquilibriumReport> {
    require_no_feedback(model)?;
    let mut law = scalar_law(model, rank)?;
    let s0 = dfe(model)?;
    let r0 = ngm::ngm_at(model, &s0)?.r0;
    let mut report = EquilibriumReport::new("rank-one scalar law", model, s0, r0, tol);
    if report.status != ThresholdStatus::Above {
        return Ok(report);
    }
    let k = law.solve_monotone()?;
    let s_bar = law.s_bar(k).ok_or_else(|| Error::SingularMatrix("k Diag[a] - A_S at the root".into()))?;
    let i_bar = dwell_times(model, rank, Some(&s_bar))? * k;
    check_point(model, &s_bar, &i_bar, tol)?;
    report.push_point(model, s_bar, i_bar, k)?;
    Ok(report)
}

fn check_point(model: &BilinearModel, s: &Vector, i: &Vector, tol: &Tolerances) -> Result<()> {
    let res = residual(model, s, i);
    if res > tol.residual * residual_scale(model, s, i) {
        return Err(Error::NoConvergence(format!("equilibrium residual {res:.3e}")));
    }
    if s.iter().chain(i.iter()).any(|&x| x <= 0.0) {
        return Err(Error::NoConvergence("endemic point has a non-positive coordinate".into()));
    }
    Ok(())
}

/// Newton's method on the full `(m+n)`-dimensional equilibrium system.
pub fn newton_polish(model: &BilinearModel, s: &Vector, i: &Vector) -> Result<(Vector, Vector)> {
    let mut x = model.stack(s, i);
    let mut best = linalg::inf_norm(&model.rhs_stacked(&x));
    for _ in 0..NEWTON_MAX_ITER {
        let (sv, iv) = model.split(&x);
        let g = model.rhs_stacked(&x);
        let step = jacobian(model, &sv, &iv)
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| Error::SingularMatrix("equilibrium Jacobian".into()))?;
        let next = &x + &step;
        let res = linalg::inf_norm(&model.rhs_stacked(&next));
        if !(res < best) {
            break;
        }
        x = next;
        best = res;
        if step.amax() <= 1e-15 * x.amax().max(1.0) {
            break;
        }
    }
    Ok(model.split(&x))
}

/// `S(z) = (Diag(z) − A_S)⁻¹Λ`.
fn s_of(model: &BilinearModel, z: &Vector) -> Option<Vector> {
    (linalg::diag(z) - &model.a_s).lu().solve(&model.lambda)
}

/// Endemic equilibrium of a general model (no feedback) by the two-step
/// spectral procedure, cross-checked against the scalar law at rank one.
pub fn endemic_spectral(model: &BilinearModel, tol: &Tolerances) -> Result<EquilibriumReport> {
    require_no_feedback(model)?;
    let inv_a = m_inverse(&model.a)?;
    let s0 = dfe(model)?;
    let r0 = ngm::ngm_at(model, &s0)?.r0;
    let mut report = EquilibriumReport::new("two-step spectral", model, s0.clone(), r0, tol);
    if report.status != ThresholdStatus::Above {
        return Ok(report);
    }

    let g = &model.b * &inv_a * &model.p;
    let loop_at = |s: &Vector| &g * linalg::diag(s);
    let rho_at = |v: &Vector, k: f64| s_of(model, &(v * k)).map(|s| spectral::spectral_radius(&loop_at(&s)));
    let amplitude = |v: &Vector| -> Result<f64> {
        let mut hi = 1.0;
        let mut bracketed = false;
        for _ in 0..DOUBLINGS {
            if rho_at(v, hi).is_some_and(|r| r < 1.0) {
                bracketed = true;
                break;
            }
            hi *= 2.0;
        }
        if !bracketed {
            return Err(Error::NoConvergence("rho(K~(S)) stays above 1 along the ray".into()));
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-13 * hi || mid <= lo || mid >= hi {
                break;
            }
            if rho_at(v, mid).is_some_and(|r| r < 1.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let mut v = spectral::perron(&loop_at(&s0))?.w_right;
    let mut k = amplitude(&v)?;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let s = s_of(model, &(&v * k)).ok_or_else(|| Error::SingularMatrix("Diag(BI) - A_S".into()))?;
        let fresh = spectral::perron(&loop_at(&s))?.w_right;
        let change = linalg::inf_norm(&(&fresh - &v));
        v = linalg::normalize_sum(&(&v * (1.0 - FIXED_POINT_DAMPING) + fresh * FIXED_POINT_DAMPING));
        k = amplitude(&v)?;
        if change < 1e-12 {
            break;
        }
    }
    let s = s_of(model, &(&v * k)).ok_or_else(|| Error::SingularMatrix("Diag(BI) - A_S".into()))?;
    let i = &inv_a * (&model.p * s.component_mul(&v)) * k;
    let (s_bar, i_bar) = newton_polish(model, &s, &i)?;
    check_point(model, &s_bar, &i_bar, tol)?;

    let rho = ngm::ngm_at(model, &s_bar)?.r0;
    if (rho - 1.0).abs() > 1e-8 {
        return Err(Error::NoConvergence(format!("rho(K~(S_bar)) = {rho}")));
    }

    let rank = classify_rank(model, tol.rank)?;
    if rank.is_rank_one() {
        let scalar = endemic_rank_one(model, &rank, tol)?;
        if let Some(p) = scalar.endemic_points.first() {
            let scale = 1.0 + linalg::inf_norm(&p.s_bar).max(linalg::inf_norm(&p.i_bar));
            let dev = linalg::inf_norm(&(&p.s_bar - &s_bar)).max(linalg::inf_norm(&(&p.i_bar - &i_bar))) / scale;
            report.cross_check = Some(dev);
            if dev > 1e-7 {
                return Err(Error::NoConvergence(format!(
                    "spectral and scalar-law endemic points differ by {dev:.3e}"
                )));
            }
        }
    }
    let k_out = (&model.b * &i_bar).sum();
    report.push_point(model, s_bar, i_bar, k_out)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeterminantLaw {
    pub det_dfe: f64,
    pub det_ee: f64,
    /// `−μ·det(A)·(1 − R₀)`.
    pub closed_dfe: f64,
    /// `μ·det(A)·(1 − R₀)`.
    pub closed_ee: f64,
    pub law_holds: bool,
}

/// Determinant law for one susceptible class: `det J_EE = −det J_DFE`.
pub fn determinant_law(model: &BilinearModel, rank: &RankClass, report: &EquilibriumReport) -> Result<DeterminantLaw> {
    if model.m != 1 {
        return Err(Error::NotApplicable("determinant law needs a single susceptible class".into()));
    }
    require_no_feedback(model)?;
    if !rank.is_rank_one() {
        return Err(Error::NotRankOne);
    }
    let zero = Vector::zeros(model.n);
    let j_dfe = jacobian(model, &report.s0, &zero);
    let det_dfe = j_dfe.determinant();
    let det_ee = match (report.status, report.endemic_points.first()) {
        (ThresholdStatus::Above, Some(p)) => jacobian(model, &p.s_bar, &p.i_bar).determinant(),
        (ThresholdStatus::Threshold, _) => det_dfe,
        _ => return Err(Error::BelowThreshold(report.r0)),
    };
    let mu = -model.a_s[(0, 0)];
    let det_a = model.a.determinant();
    let closed_dfe = -mu * det_a * (1.0 - report.r0);
    let closed_ee = -closed_dfe;
    let scale = (mu * det_a).abs() * report.r0.max(1.0);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * scale;
    let law_holds = close(det_dfe, closed_dfe) && close(det_ee, closed_ee) && close(det_ee, -det_dfe);
    Ok(DeterminantLaw { det_dfe, det_ee, closed_dfe, closed_ee, law_holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackReport {
    pub law: ScalarLaw,
    pub report: EquilibriumReport,
    #[serde(with = "linalg::serde_vec")]
    pub dwell: Vector,
    /// `‖C·D_w‖_∞`.
    pub cdw_norm: f64,
    /// `min μ / max R`; the root is unique when `cdw_norm` is below it.
    pub uniqueness_bound: f64,
    pub uniqueness_condition: bool,
    /// `1ᵀ(A + C) ≤ 0`: feedback does not create individuals.
    pub feedback_conservative: bool,
    /// Endemic points exist although `R₀ < 1`.
    pub backward_bifurcation: bool,
}

/// Root structure of `H_C(k) = 1` for Case (P) models with feedback.
pub fn feedback_analysis(model: &BilinearModel, rank: &RankClass, tol: &Tolerances) -> Result<FeedbackReport> {
    if !rank.is_case_p() {
        return Err(Error::NotCaseP);
    }
    let r = replacement_vector(model, rank)?;
    let dwell = dwell_times(model, rank, None)?;
    let cdw = &model.c * &dwell;
    let mut law = ScalarLaw::new(model, r.clone(), r.clone(), cdw.clone());
    law.scan();

    let s0 = dfe(model)?;
    let r0 = ngm::ngm_at(model, &s0)?.r0;
    let mut report = EquilibriumReport::new("feedback scalar law", model, s0, r0, tol);
    report.branch = Branch::Forward;
    let mut ks = law.roots.clone();
    ks.extend(&law.double_roots);
    ks.sort_by(f64::total_cmp);
    for k in ks {
        let i_bar = &dwell * k;
        let Some(s_bar) = law.s_bar(k) else { continue };
        report.push_point(model, s_bar, i_bar, k)?;
    }

    let mu_min = (0..model.m)
        .map(|j| -model.a_s.column(j).sum())
        .fold(f64::INFINITY, f64::min);
    let r_max = r.iter().copied().fold(0.0, f64::max);
    let uniqueness_bound = mu_min / r_max;
    let cdw_norm = linalg::inf_norm(&cdw);
    let uniqueness_condition = cdw_norm < uniqueness_bound;
    if !uniqueness_condition {
        report.branch = Branch::BackwardCapable;
    }
    let feedback_conservative = (0..model.n)
        .all(|j| model.c.column(j).sum() + model.a.column(j).sum() <= 1e-12);
    let backward_bifurcation = r0 < 1.0 && !report.endemic_points.is_empty();
    Ok(FeedbackReport {
        law,
        report,
        dwell,
        cdw_norm,
        uniqueness_bound,
        uniqueness_condition,
        feedback_conservative,
        backward_bifurcation,
    })
}
