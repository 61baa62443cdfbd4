//! Spectral kernel for nonnegative and Metzler matrices.
//!
//! Perron roots and vectors are computed by power iteration on a shifted,
//! entrywise nonnegative matrix. When the iteration stalls (slow spectral gap
//! or a reducible input) the dense eigen-decomposition takes over for
//! matrices up to [`DENSE_LIMIT`].

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, principal_minor, Mat, Vector};

/// Largest size handled by the dense fallback.
pub const DENSE_LIMIT: usize = 64;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const ADJ_EXPLICIT_LIMIT: usize = 10;
const RANK_ONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    /// Spectral radius (largest eigenvalue modulus).
    pub rho: f64,
    /// Spectral abscissa; the Perron root for Metzler input.
    pub s_abs: f64,
    /// Right Perron vector, `1ᵀw = 1`.
    #[serde(with = "linalg::serde_vec")]
    pub w_right: Vector,
    /// Left Perron vector, `π·w = 1`.
    #[serde(with = "linalg::serde_vec")]
    pub pi_left: Vector,
    pub irreducible: bool,
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest eigenvalue modulus from the dense spectrum.
pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest real part from the dense spectrum.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn reachable(m: &Mat, start: usize, transpose: bool) -> Vec<bool> {
    let k = m.nrows();
    let mut seen = vec![false; k];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..k {
            let e = if transpose { m[(j, i)] } else { m[(i, j)] };
            if j != i && e != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// True iff the digraph with an edge `i → j` for every nonzero off-diagonal
/// `M(i, j)` is strongly connected. A 1x1 matrix is irreducible.
pub fn is_irreducible(m: &Mat) -> bool {
    let k = m.nrows();
    if k <= 1 {
        return true;
    }
    reachable(m, 0, false).iter().all(|&b| b) && reachable(m, 0, true).iter().all(|&b| b)
}

fn power_iterate(m: &Mat) -> Option<Vector> {
    let k = m.nrows();
    let mut x = Vector::from_element(k, 1.0 / k as f64);
    for _ in 0..POWER_MAX_ITER {
        let y = m * &x;
        let s = y.sum();
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        let y = y / s;
        let scale = linalg::inf_norm(&y);
        let change = linalg::inf_norm(&(&y - &x)) / scale;
        x = y;
        if change < POWER_TOL {
            return Some(x);
        }
    }
    None
}

/// Unit-sum null vector of `m` from the smallest singular triple, with the
/// sign chosen so the entries sum positively.
fn null_vector(m: &Mat) -> Vector {
    let k = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut v = Vector::from_fn(k, |j, _| v_t[(idx, j)]);
    if v.sum() < 0.0 {
        v = -v;
    }
    let top = linalg::inf_norm(&v);
    v.apply(|x| {
        if *x < 0.0 && *x > -1e-12 * top {
            *x = 0.0
        }
    });
    linalg::normalize_sum(&v)
}

/// Perron data of a nonnegative or Metzler matrix.
pub fn perron(m: &Mat) -> Result<SpectralData> {
    let k = m.nrows();
    if k == 0 || m.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "perron needs a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let irreducible = is_irreducible(m);
    let nonnegative = linalg::is_nonnegative(m);
    let min_diag = (0..k).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
    let shift = (-min_diag).max(0.0) + 1.0;
    let shifted = m + Mat::identity(k, k) * shift;
    let scale = max_abs(m).max(1e-300);

    let iterated = power_iterate(&shifted)
        .zip(power_iterate(&shifted.transpose()))
        .and_then(|(w, pi)| {
            let denom = pi.dot(&w);
            if denom <= 0.0 {
                return None;
            }
            let lambda = pi.dot(&(m * &w)) / denom;
            let res_r = linalg::inf_norm(&(m * &w - &w * lambda)) / linalg::inf_norm(&w);
            let res_l = linalg::inf_norm(&(m.tr_mul(&pi) - &pi * lambda)) / linalg::inf_norm(&pi);
            let tol = 1e-11 * scale.max(lambda.abs());
            (res_r <= tol && res_l <= tol).then_some((lambda, w, pi / denom))
        });

    let (s_abs, w, pi) = match iterated {
        Some(found) => found,
        None if k <= DENSE_LIMIT => {
            let lambda = spectral_abscissa(m);
            let shifted = m - Mat::identity(k, k) * lambda;
            let w = null_vector(&shifted);
            let pi = null_vector(&shifted.transpose());
            let denom = pi.dot(&w);
            let pi = if denom > 1e-300 { pi / denom } else { pi };
            (lambda, w, pi)
        }
        None => {
            return Err(Error::NoConvergence(format!(
                "power iteration failed on a {k}x{k} matrix above the dense limit"
            )))
        }
    };

    let rho = if nonnegative {
        s_abs
    } else if k <= DENSE_LIMIT {
        spectral_radius(m)
    } else {
        return Err(Error::NoConvergence(
            "spectral radius of a large non-nonnegative matrix".into(),
        ));
    };

    Ok(SpectralData {
        rho,
        s_abs,
        w_right: w,
        pi_left: pi,
        irreducible,
    })
}

/// Perron data recovered from the adjugate of `J - λ_P·Id`.
#[derive(Debug, Clone, Serialize)]
pub struct KirchhoffPerron {
    pub lambda_p: f64,
    /// Column of the adjugate, normalized to unit sum.
    #[serde(with = "linalg::serde_vec")]
    pub w: Vector,
    /// Row of the adjugate, normalized so `π·w = 1`.
    #[serde(with = "linalg::serde_vec")]
    pub pi: Vector,
    /// Diagonal cofactors `C_kk(λ_P·Id - J)`.
    #[serde(with = "linalg::serde_vec")]
    pub cofactors: Vector,
    /// The constant `c` in `adj(J - λ_P·Id) = c·w·π`.
    pub c: f64,
    #[serde(with = "linalg::serde_mat")]
    pub adjugate: Mat,
    /// Perron data from iteration, for comparison.
    pub perron: SpectralData,
}

fn adjugate_explicit(m: &Mat) -> Mat {
    let k = m.nrows();
    if k == 1 {
        return Mat::from_element(1, 1, 1.0);
    }
    Mat::from_fn(k, k, |i, j| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * linalg::minor(m, j, i)
    })
}

/// Rank-one adjugate of a singular matrix with a simple zero eigenvalue,
/// built from the SVD null vectors and scaled against one explicit cofactor.
fn adjugate_from_null_space(m: &Mat) -> Mat {
    let w = null_vector(m);
    let pi = null_vector(&m.transpose());
    let k = (0..m.nrows())
        .max_by(|&a, &b| (w[a] * pi[a]).total_cmp(&(w[b] * pi[b])))
        .unwrap_or(0);
    let c = principal_minor(m, k) / (w[k] * pi[k]);
    linalg::outer(&w, &pi) * c
}

pub fn kirchhoff_perron(j: &Mat) -> Result<KirchhoffPerron> {
    let k = j.nrows();
    if !linalg::is_metzler(j) {
        return Err(Error::Hypothesis("Kirchhoff-Perron needs a Metzler matrix".into()));
    }
    if !is_irreducible(j) {
        return Err(Error::Hypothesis("Kirchhoff-Perron needs an irreducible matrix".into()));
    }
    let perron = perron(j)?;
    let lambda_p = perron.s_abs;
    let shifted = j - Mat::identity(k, k) * lambda_p;
    let adjugate = if k <= ADJ_EXPLICIT_LIMIT {
        adjugate_explicit(&shifted)
    } else {
        adjugate_from_null_space(&shifted)
    };

    let top = max_abs(&adjugate);
    if !(top > 0.0) {
        return Err(Error::RankTestFailure(f64::INFINITY));
    }
    let (p, q) = (0..k)
        .flat_map(|r| (0..k).map(move |c| (r, c)))
        .max_by(|a, b| adjugate[*a].abs().total_cmp(&adjugate[*b].abs()))
        .unwrap_or((0, 0));
    let col = adjugate.column(q).into_owned();
    let row = adjugate.row(p).transpose();
    let rank_one = linalg::outer(&col, &row) / adjugate[(p, q)];
    let deviation = max_abs(&(&adjugate - rank_one)) / top;
    if deviation > RANK_ONE_TOL {
        return Err(Error::RankTestFailure(deviation));
    }

    let w = linalg::normalize_sum(&col);
    let pi = &row / row.dot(&w);
    let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let cofactors = Vector::from_fn(k, |i, _| sign * principal_minor(&shifted, i));
    let c = (0..k)
        .flat_map(|r| (0..k).map(move |s| (r, s)))
        .map(|(r, s)| adjugate[(r, s)] * w[r] * pi[s])
        .sum::<f64>()
        / (w.norm_squared() * pi.norm_squared());

    Ok(KirchhoffPerron {
        lambda_p,
        w,
        pi,
        cofactors,
        c,
        adjugate,
        perron,
    })
}

/// `(-A)^{-1}` for a Metzler-Hurwitz `A`; entrywise nonnegative.
pub fn m_inverse(a: &Mat) -> Result<Mat> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "m_inverse needs a square matrix, got {}x{}",
            k,
            a.ncols()
        )));
    }
    if k == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let neg = -a;
    let scale = max_abs(a);
    let det = neg.determinant();
    if !(scale > 0.0) || !(det.abs() > 1e-12 * scale.powi(k as i32)) {
        return Err(Error::SingularMatrix(format!("|det| = {:.3e}", det.abs())));
    }
    let mut inv = neg
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("LU inversion failed".into()))?;
    let id = Mat::identity(k, k);
    let correction = &inv * (&id - &neg * &inv);
    inv += correction;

    let top = max_abs(&inv);
    for x in inv.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-10 * top {
                return Err(Error::Hypothesis(format!(
                    "(-A)^-1 has a negative entry {x:.3e}; A is not Metzler-Hurwitz"
                )));
            }
            *x = 0.0;
        }
    }
    let residual = max_abs(&(&neg * &inv - &id));
    if residual > 1e-10 {
        return Err(Error::SingularMatrix(format!(
            "inverse residual {residual:.3e} exceeds 1e-10"
        )));
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use approx::assert_relative_eq;

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(&from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])));
        assert!(!is_irreducible(&from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]])));
        assert!(is_irreducible(&from_rows(&[vec![5.0]])));
    }

    #[test]
    fn perron_of_swap_matrix() {
        let sd = perron(&from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert_relative_eq!(sd.rho, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sd.w_right[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sd.w_right[1], 0.5, epsilon = 1e-12);
        assert!(sd.irreducible);
    }

    #[test]
    fn perron_of_scalar() {
        let sd = perron(&from_rows(&[vec![2.0]])).unwrap();
        assert_eq!(sd.rho, 2.0);
        assert_eq!(sd.s_abs, 2.0);
        assert_eq!(sd.w_right[0], 1.0);
    }

    #[test]
    fn perron_of_metzler() {
        let sd = perron(&from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]])).unwrap();
        assert_relative_eq!(sd.s_abs, -1.0, epsilon = 1e-12);
        assert_relative_eq!(sd.rho, 3.0, epsilon = 1e-12);
        assert_relative_eq!(sd.w_right[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sd.pi_left.dot(&sd.w_right), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perron_of_reducible_matrix_keeps_spectrum() {
        let m = from_rows(&[vec![1.0, 1.0], vec![0.0, 3.0]]);
        let sd = perron(&m).unwrap();
        assert!(!sd.irreducible);
        assert_relative_eq!(sd.rho, 3.0, epsilon = 1e-10);
        assert_relative_eq!(sd.s_abs, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn perron_of_zero_matrix() {
        let sd = perron(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(sd.rho, 0.0);
    }

    #[test]
    fn kirchhoff_conservative_generator() {
        // pi Q = 0 with pi = (2, 1)/3 solved by hand
        let q = from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]);
        let kp = kirchhoff_perron(&q).unwrap();
        assert_relative_eq!(kp.lambda_p, 0.0, epsilon = 1e-12);
        assert_relative_eq!(kp.cofactors[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(kp.cofactors[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(kp.pi[0] / kp.pi[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn kirchhoff_symmetric_example() {
        let j = from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]);
        let kp = kirchhoff_perron(&j).unwrap();
        assert_relative_eq!(kp.lambda_p, -1.0, epsilon = 1e-12);
        for x in kp.adjugate.iter() {
            assert_relative_eq!(*x, -1.0, epsilon = 1e-10);
        }
        assert_relative_eq!(kp.w[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(kp.pi[0], kp.pi[1], epsilon = 1e-12);
    }

    #[test]
    fn kirchhoff_scalar() {
        let kp = kirchhoff_perron(&from_rows(&[vec![-3.0]])).unwrap();
        assert_eq!(kp.lambda_p, -3.0);
        assert_eq!(kp.cofactors[0], 1.0);
        assert_eq!(kp.w[0], 1.0);
        assert_eq!(kp.pi[0], 1.0);
    }

    #[test]
    fn kirchhoff_rejects_reducible() {
        let j = from_rows(&[vec![-1.0, 1.0], vec![0.0, -2.0]]);
        assert!(matches!(kirchhoff_perron(&j), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn m_inverse_examples() {
        assert_eq!(m_inverse(&from_rows(&[vec![-1.0]])).unwrap()[(0, 0)], 1.0);
        let inv = m_inverse(&from_rows(&[vec![-1.0, 0.0], vec![1.0, -2.0]])).unwrap();
        let expect = from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]);
        assert!(max_abs(&(inv - expect)) < 1e-14);
        let inv = m_inverse(&from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]])).unwrap();
        let expect = from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]) / 3.0;
        assert!(max_abs(&(inv - expect)) < 1e-14);
    }

    #[test]
    fn m_inverse_singular() {
        let a = from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert!(matches!(m_inverse(&a), Err(Error::SingularMatrix(_))));
    }
}
