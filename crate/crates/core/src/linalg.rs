//! Small dense helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Row-sum (induced infinity) norm.
pub fn mat_inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_metzler(m: &Mat) -> bool {
    metzler_violation(m).is_none()
}

/// First off-diagonal entry that is negative, if any.
pub fn metzler_violation(m: &Mat) -> Option<(usize, usize, f64)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] < 0.0 {
                return Some((i, j, m[(i, j)]));
            }
        }
    }
    None
}

pub fn is_nonnegative(m: &Mat) -> bool {
    m.iter().all(|&x| x >= 0.0)
}

pub fn outer(col: &Vector, row: &Vector) -> Mat {
    col * row.transpose()
}

/// Row vector times matrix, with the row vector stored as a column.
pub fn left_mul(row: &Vector, m: &Mat) -> Vector {
    m.tr_mul(row)
}

pub fn diag(v: &Vector) -> Mat {
    Mat::from_diagonal(v)
}

pub fn normalize_sum(v: &Vector) -> Vector {
    let s = v.sum();
    if s == 0.0 {
        v.clone()
    } else {
        v / s
    }
}

pub fn is_diagonal(m: &Mat) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Determinant of the matrix with row and column `k` removed. The empty
/// minor of a 1x1 matrix has determinant 1.
pub fn principal_minor(m: &Mat, k: usize) -> f64 {
    minor(m, k, k)
}

pub fn minor(m: &Mat, row: usize, col: usize) -> f64 {
    if m.nrows() == 1 {
        return 1.0;
    }
    m.clone().remove_row(row).remove_column(col).determinant()
}

pub(crate) mod serde_vec {
    use super::Vector;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }
}

pub(crate) mod serde_opt_vec {
    use super::Vector;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_seq(v.iter()),
            None => s.serialize_none(),
        }
    }
}

pub(crate) mod serde_mat {
    use super::{to_rows, Mat};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(to_rows(m))
    }
}
