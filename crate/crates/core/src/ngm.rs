//! Force of infection, next-generation matrices and the rank-one Perron
//! eigenvector table.

use serde::Serialize;

use crate::equilibrium::dfe;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{BilinearModel, RankClass, RankTag};
use crate::spectral::{self, m_inverse};

/// `F(S) = P·Diag(S)·B`.
pub fn force_of_infection(model: &BilinearModel, s: &Vector) -> Mat {
    let mut scaled_b = model.b.clone();
    for (i, mut row) in scaled_b.row_iter_mut().enumerate() {
        row *= s[i];
    }
    &model.p * scaled_b
}

#[derive(Debug, Clone, Serialize)]
pub struct NgmBundle {
    #[serde(with = "linalg::serde_mat")]
    pub f: Mat,
    /// `F(S)·(−A)⁻¹`.
    #[serde(with = "linalg::serde_mat")]
    pub k: Mat,
    /// `(−A)⁻¹·F(S)`.
    #[serde(with = "linalg::serde_mat")]
    pub k_tilde: Mat,
    pub r0: f64,
    #[serde(with = "linalg::serde_vec")]
    pub at_state: Vector,
}

pub fn ngm_at(model: &BilinearModel, s: &Vector) -> Result<NgmBundle> {
    let inv = m_inverse(&model.a)?;
    let f = force_of_infection(model, s);
    let k = &f * &inv;
    let k_tilde = &inv * &f;
    let rho = spectral::perron(&k)?.rho;
    let rho_tilde = spectral::perron(&k_tilde)?.rho;
    if (rho - rho_tilde).abs() > 1e-10 * rho.max(1.0) {
        return Err(Error::NoConvergence(format!(
            "rho(K) = {rho} and rho(K~) = {rho_tilde} disagree"
        )));
    }
    Ok(NgmBundle { f, k, k_tilde, r0: rho, at_state: s.clone() })
}

/// Basic reproduction number `ρ(K(S₀))`.
pub fn r0(model: &BilinearModel) -> Result<f64> {
    Ok(ngm_at(model, &dfe(model)?)?.r0)
}

/// The m×m loop operator `B(−A)⁻¹P·Diag(S)`; it shares its nonzero spectrum
/// with `K(S)` and `K̃(S)`.
pub fn loop_operator(model: &BilinearModel, inv_a: &Mat, s: &Vector) -> Mat {
    let g = &model.b * inv_a * &model.p;
    g * linalg::diag(s)
}

/// Expected infections generated per susceptible individual of each class.
pub fn replacement_vector(model: &BilinearModel, rank: &RankClass) -> Result<Vector> {
    let inv = m_inverse(&model.a)?;
    match rank.tag {
        RankTag::CaseP | RankTag::Both => {
            let alpha = rank.alpha_n.as_ref().ok_or(Error::NotRankOne)?;
            Ok(&model.b * (&inv * alpha))
        }
        RankTag::CaseB => {
            let alpha_m = rank.alpha_m.as_ref().ok_or(Error::NotRankOne)?;
            let beta = rank.beta.as_ref().ok_or(Error::NotRankOne)?;
            let row = linalg::left_mul(beta, &inv) ;
            let per_class = linalg::left_mul(&row, &model.p);
            Ok(alpha_m.component_mul(&per_class))
        }
        RankTag::General => Err(Error::NotRankOne),
    }
}

/// `D_w = (−A)⁻¹·α_eff`, the direction of the endemic infection vector.
pub fn dwell_times(model: &BilinearModel, rank: &RankClass, s_bar: Option<&Vector>) -> Result<Vector> {
    let inv = m_inverse(&model.a)?;
    match rank.tag {
        RankTag::CaseP | RankTag::Both => {
            let alpha = rank.alpha_n.as_ref().ok_or(Error::NotRankOne)?;
            Ok(&inv * alpha)
        }
        RankTag::CaseB => {
            let alpha_m = rank.alpha_m.as_ref().ok_or(Error::NotRankOne)?;
            let s = s_bar.ok_or(Error::MissingState)?;
            Ok(&inv * (&model.p * s.component_mul(alpha_m)))
        }
        RankTag::General => Err(Error::NotRankOne),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigTable {
    pub case: RankTag,
    pub r0: f64,
    #[serde(with = "linalg::serde_vec")]
    pub w_k: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub pi_k: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub w_ktilde: Vector,
    #[serde(with = "linalg::serde_vec")]
    pub pi_ktilde: Vector,
    /// Largest eigen-equation residual over the four vectors.
    pub eigen_residual: f64,
    /// Largest deviation in the two transformation identities.
    pub transform_residual: f64,
}

/// Closed-form Perron vectors of `K(S₀)` and `K̃(S₀)` for rank-one models.
///
/// `w_K` has unit sum and `π_K·w_K = R₀`; the tilde vectors are defined via
/// `w_K = (−A)·w_K̃` and `π_K̃ = π_K·(−A)`, so `w_K̃` is not unit-sum.
pub fn eig_table(model: &BilinearModel, rank: &RankClass) -> Result<EigTable> {
    let inv = m_inverse(&model.a)?;
    let neg_a = -&model.a;
    let s0 = dfe(model)?;
    let (w_k, pi_ktilde) = match rank.tag {
        RankTag::CaseP | RankTag::Both => {
            let alpha = rank.alpha_n.clone().ok_or(Error::NotRankOne)?;
            (alpha, linalg::left_mul(&s0, &model.b))
        }
        RankTag::CaseB => {
            let alpha_m = rank.alpha_m.as_ref().ok_or(Error::NotRankOne)?;
            let beta = rank.beta.as_ref().ok_or(Error::NotRankOne)?;
            let raw = &model.p * s0.component_mul(alpha_m);
            let scale = raw.sum();
            if scale <= 0.0 {
                return Err(Error::Hypothesis("P·Diag(S0)·alpha_m vanishes".into()));
            }
            (raw / scale, beta * scale)
        }
        RankTag::General => return Err(Error::NotRankOne),
    };
    let w_ktilde = &inv * &w_k;
    let pi_k = linalg::left_mul(&pi_ktilde, &inv);
    let r0 = pi_k.dot(&w_k);

    let bundle = ngm_at(model, &s0)?;
    let scale = r0.max(1.0);
    let res = |v: Vector| linalg::inf_norm(&v) / scale;
    let eigen_residual = [
        res(&bundle.k * &w_k - &w_k * r0),
        res(linalg::left_mul(&pi_k, &bundle.k) - &pi_k * r0),
        res(&bundle.k_tilde * &w_ktilde - &w_ktilde * r0),
        res(linalg::left_mul(&pi_ktilde, &bundle.k_tilde) - &pi_ktilde * r0),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let transform_residual = linalg::inf_norm(&(&neg_a * &w_ktilde - &w_k))
        .max(linalg::inf_norm(&(linalg::left_mul(&pi_k, &neg_a) - &pi_ktilde)) / scale);

    if eigen_residual > 1e-9 || (r0 - bundle.r0).abs() > 1e-9 * scale {
        return Err(Error::Hypothesis(format!(
            "closed-form Perron table does not match K(S0) (residual {eigen_residual:.3e})"
        )));
    }
    Ok(EigTable {
        case: rank.tag,
        r0,
        w_k,
        pi_k,
        w_ktilde,
        pi_ktilde,
        eigen_residual,
        transform_residual,
    })
}
