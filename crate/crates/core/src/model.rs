//! Balanced bilinear model data, structural validation and the matrix-bundle
//! file format.
//!
//! A model is the bundle `(A, A_S, B, P, Λ, C)` describing
//!
//! ```text
//! S' = Λ + A_S S − Diag(S) B I + C I
//! I' = P Diag(S) B I + A I
//! ```
//!
//! with `m` susceptible-like and `n` infection compartments.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, from_rows, to_rows, Mat, Vector};
use crate::spectral;

/// Default numerical thresholds. Every field is overridable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Spectral abscissa must be below `-hurwitz`; `|s| <= hurwitz` is marginal.
    pub hurwitz: f64,
    /// Absolute tolerance on `|colsum(P) - 1|`.
    pub stochastic: f64,
    /// Relative singular-value ratio for rank-one detection.
    pub rank: f64,
    /// Band around `R0 = 1` treated as the threshold itself.
    pub threshold: f64,
    /// Scaled equilibrium residual bound.
    pub residual: f64,
    /// Largest admissible positive `V̇` sample.
    pub lyapunov: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hurwitz: 1e-9,
            stochastic: 1e-9,
            rank: 1e-8,
            threshold: 1e-9,
            residual: 1e-8,
            lyapunov: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearModel {
    pub m: usize,
    pub n: usize,
    /// n×n intra-infection flows.
    pub a: Mat,
    /// m×m intra-susceptible flows.
    pub a_s: Mat,
    /// m×n contact/infectivity (WAIFW) matrix.
    pub b: Mat,
    /// n×m column-stochastic infection distribution.
    pub p: Mat,
    /// Recruitment into the susceptible compartments.
    pub lambda: Vector,
    /// m×n feedback from infection to susceptible compartments.
    pub c: Mat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    m: usize,
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "A_S")]
    a_s: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Lambda")]
    lambda: Vec<f64>,
}

fn check_shape(name: &str, rows: &[Vec<f64>], r: usize, c: usize) -> Result<()> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::DimensionMismatch(format!("{name} must be {r}x{c}")));
    }
    Ok(())
}

impl BilinearModel {
    /// Builds a model and checks that all shapes agree. `c` defaults to zero.
    pub fn new(a: Mat, a_s: Mat, b: Mat, p: Mat, lambda: Vector, c: Option<Mat>) -> Result<Self> {
        let n = a.nrows();
        let m = a_s.nrows();
        let c = c.unwrap_or_else(|| Mat::zeros(m, n));
        let shape_ok = [
            ("A", a.shape(), (n, n)),
            ("A_S", a_s.shape(), (m, m)),
            ("B", b.shape(), (m, n)),
            ("P", p.shape(), (n, m)),
            ("C", c.shape(), (m, n)),
        ];
        for (name, got, want) in shape_ok {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        if lambda.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "Lambda has length {}, expected {m}",
                lambda.len()
            )));
        }
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch("m and n must be positive".into()));
        }
        Ok(Self { m, n, a, a_s, b, p, lambda, c })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let (m, n) = (file.m, file.n);
        check_shape("A", &file.a, n, n)?;
        check_shape("A_S", &file.a_s, m, m)?;
        check_shape("B", &file.b, m, n)?;
        check_shape("P", &file.p, n, m)?;
        if let Some(c) = &file.c {
            check_shape("C", c, m, n)?;
        }
        let c = file.c.as_deref().map(from_rows);
        Self::new(
            from_rows(&file.a),
            from_rows(&file.a_s),
            from_rows(&file.b),
            from_rows(&file.p),
            Vector::from_vec(file.lambda),
            c,
        )
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            m: self.m,
            n: self.n,
            a: to_rows(&self.a),
            a_s: to_rows(&self.a_s),
            b: to_rows(&self.b),
            p: to_rows(&self.p),
            c: Some(to_rows(&self.c)),
            lambda: self.lambda.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn has_feedback(&self) -> bool {
        self.c.iter().any(|&x| x != 0.0)
    }

    /// Right-hand side of the model ODE at `(S, I)`.
    pub fn rhs(&self, s: &Vector, i: &Vector) -> (Vector, Vector) {
        let bi = &self.b * i;
        let ds = &self.lambda + &self.a_s * s - s.component_mul(&bi) + &self.c * i;
        let di = &self.p * s.component_mul(&bi) + &self.a * i;
        (ds, di)
    }

    /// RHS over the stacked state `x = (S, I)`.
    pub fn rhs_stacked(&self, x: &Vector) -> Vector {
        let (s, i) = self.split(x);
        let (ds, di) = self.rhs(&s, &i);
        self.stack(&ds, &di)
    }

    pub fn split(&self, x: &Vector) -> (Vector, Vector) {
        (x.rows(0, self.m).into_owned(), x.rows(self.m, self.n).into_owned())
    }

    pub fn stack(&self, s: &Vector, i: &Vector) -> Vector {
        Vector::from_iterator(self.m + self.n, s.iter().chain(i.iter()).copied())
    }

    /// Default compartment labels `S1..Sm, I1..In`.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.m)
            .map(|k| format!("S{k}"))
            .chain((1..=self.n).map(|k| format!("I{k}")))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Marginal,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: Option<String>,
}

impl Check {
    fn pass(name: &str) -> Self {
        Self { name: name.into(), status: CheckStatus::Pass, detail: None }
    }

    fn fail(name: &str, detail: String) -> Self {
        Self { name: name.into(), status: CheckStatus::Fail, detail: Some(detail) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status != CheckStatus::Pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn metzler_check(name: &str, m: &Mat) -> Check {
    match linalg::metzler_violation(m) {
        None => Check::pass(name),
        Some((i, j, v)) => Check::fail(name, format!("entry ({i},{j}) = {v}")),
    }
}

fn hurwitz_check(name: &str, m: &Mat, tol: f64) -> Check {
    let s = spectral::spectral_abscissa(m);
    if s < -tol {
        Check::pass(name)
    } else if s <= tol {
        Check {
            name: name.into(),
            status: CheckStatus::Marginal,
            detail: Some(format!("spectral abscissa {s:.3e} is within {tol:.0e} of 0")),
        }
    } else {
        Check::fail(name, format!("spectral abscissa = {s:.6}"))
    }
}

fn nonneg_check(name: &str, values: impl Iterator<Item = (usize, usize, f64)>) -> Check {
    for (i, j, v) in values {
        if v < 0.0 || !v.is_finite() {
            return Check::fail(name, format!("entry ({i},{j}) = {v}"));
        }
    }
    Check::pass(name)
}

fn entries(m: &Mat) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])))
}

/// Checks every structural invariant of a balanced bilinear model. Failures
/// are reported, not raised.
pub fn validate_model(model: &BilinearModel, tol: &Tolerances) -> ValidationReport {
    let mut checks = vec![
        metzler_check("A Metzler", &model.a),
        hurwitz_check("A Hurwitz", &model.a, tol.hurwitz),
        metzler_check("A_S Metzler", &model.a_s),
        hurwitz_check("A_S Hurwitz", &model.a_s, tol.hurwitz),
    ];
    let bad_col = (0..model.m)
        .map(|j| (j, model.p.column(j).sum()))
        .find(|(_, s)| (s - 1.0).abs() > tol.stochastic);
    checks.push(match bad_col {
        None => Check::pass("P column-stochastic"),
        Some((j, s)) => Check::fail("P column-stochastic", format!("column {j} sums to {s}")),
    });
    checks.push(nonneg_check("B nonnegative", entries(&model.b)));
    checks.push(nonneg_check("P nonnegative", entries(&model.p)));
    checks.push(nonneg_check(
        "Lambda nonnegative",
        model.lambda.iter().enumerate().map(|(i, &v)| (i, 0, v)),
    ));
    checks.push(nonneg_check("C nonnegative", entries(&model.c)));
    ValidationReport { checks }
}

#[derive(Debug, Clone, Serialize)]
pub struct AccessReport {
    /// Per susceptible compartment: reachable from a recruiting compartment.
    pub susceptible_reachable: Vec<bool>,
    /// Per infection compartment: reachable from an infection entry point.
    pub infection_reachable: Vec<bool>,
}

impl AccessReport {
    pub fn accessible(&self) -> bool {
        self.susceptible_reachable.iter().all(|&b| b) && self.infection_reachable.iter().all(|&b| b)
    }
}

/// Breadth-first reachability over the flow graph of a Metzler matrix, where
/// `M(i, j) > 0` (i ≠ j) is a flow `j → i`.
fn flow_reachable(flows: &Mat, sources: &[bool]) -> Vec<bool> {
    let k = flows.nrows();
    let mut seen = sources.to_vec();
    let mut queue: VecDeque<usize> = (0..k).filter(|&i| sources[i]).collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..k {
            if i != j && flows[(i, j)] > 0.0 && !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Accessibility hypothesis: every susceptible compartment is reached from
/// recruitment, every infection compartment from an entry point of `P`.
pub fn validate_accessibility(model: &BilinearModel) -> AccessReport {
    let recruiting: Vec<bool> = model.lambda.iter().map(|&l| l > 0.0).collect();
    let entry: Vec<bool> = (0..model.n)
        .map(|i| model.p.row(i).iter().any(|&x| x > 0.0))
        .collect();
    AccessReport {
        susceptible_reachable: flow_reachable(&model.a_s, &recruiting),
        infection_reachable: flow_reachable(&model.a, &entry),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankTag {
    CaseP,
    CaseB,
    Both,
    General,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankClass {
    pub tag: RankTag,
    /// Common column of `P` (Case P).
    #[serde(with = "linalg::serde_opt_vec")]
    pub alpha_n: Option<Vector>,
    /// Unit-sum column factor of `B` (Case B).
    #[serde(with = "linalg::serde_opt_vec")]
    pub alpha_m: Option<Vector>,
    /// Row factor of `B` (Case B).
    #[serde(with = "linalg::serde_opt_vec")]
    pub beta: Option<Vector>,
}

impl RankClass {
    pub fn is_case_p(&self) -> bool {
        matches!(self.tag, RankTag::CaseP | RankTag::Both)
    }

    pub fn is_case_b(&self) -> bool {
        matches!(self.tag, RankTag::CaseB | RankTag::Both)
    }

    pub fn is_rank_one(&self) -> bool {
        self.tag != RankTag::General
    }
}

/// Splits `B = α_m·β` with `1ᵀα_m = 1`: `β` is the column sum of `B` and
/// `α_m` the normalized row sums.
pub fn factor_rank_one_b(b: &Mat) -> (Vector, Vector) {
    let row_sums = Vector::from_iterator(b.nrows(), b.row_iter().map(|r| r.sum()));
    let alpha_m = linalg::normalize_sum(&row_sums);
    let beta = Vector::from_iterator(b.ncols(), b.column_iter().map(|c| c.sum()));
    (alpha_m, beta)
}

pub fn classify_rank(model: &BilinearModel, tol: f64) -> Result<RankClass> {
    let b = &model.b;
    let b_scale = linalg::max_abs(b);
    if b_scale == 0.0 {
        return Err(Error::DegenerateB);
    }

    let alpha_n = Vector::from_iterator(
        model.n,
        (0..model.n).map(|i| model.p.row(i).mean()),
    );
    let p_scale = linalg::max_abs(&model.p).max(1.0);
    let case_p = (0..model.m).all(|j| {
        (0..model.n).all(|i| (model.p[(i, j)] - alpha_n[i]).abs() <= tol * p_scale)
    });

    let mut sv: Vec<f64> = b.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let ratio = sv.get(1).copied().unwrap_or(0.0) / sv[0];
    let (alpha_m, beta) = factor_rank_one_b(b);
    let case_b = ratio < tol && {
        let rebuilt = linalg::outer(&alpha_m, &beta);
        linalg::max_abs(&(rebuilt - b)) <= tol * b_scale
    };

    let tag = match (case_p, case_b) {
        (true, true) => RankTag::Both,
        (true, false) => RankTag::CaseP,
        (false, true) => RankTag::CaseB,
        (false, false) => RankTag::General,
    };
    Ok(RankClass {
        tag,
        alpha_n: case_p.then_some(alpha_n),
        alpha_m: case_b.then(|| alpha_m.clone()),
        beta: case_b.then_some(beta),
    })
}

/// Recovers the column-stochastic pair `(P, B)` from the values of an
/// infection operator `S ↦ P·Diag(S)·B` at the basis points `e_i`. Rows of
/// `B` that vanish leave the matching column of `P` undetermined; it is set
/// to the uniform distribution.
pub fn recover_factors(operator: impl Fn(&Vector) -> Mat, m: usize, n: usize) -> (Mat, Mat) {
    let mut p = Mat::zeros(n, m);
    let mut b = Mat::zeros(m, n);
    for i in 0..m {
        let mut e = Vector::zeros(m);
        e[i] = 1.0;
        let f = operator(&e);
        let col = Vector::from_iterator(n, f.row_iter().map(|r| r.sum()));
        let total = col.sum();
        if total > 0.0 {
            p.set_column(i, &(col / total));
            for j in 0..n {
                b[(i, j)] = f.column(j).sum();
            }
        } else {
            p.set_column(i, &Vector::from_element(n, 1.0 / n as f64));
        }
    }
    (p, b)
}
