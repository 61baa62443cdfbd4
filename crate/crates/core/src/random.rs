//! Seeded generators for valid models, matrices and reaction networks.

use rand::Rng;

use crate::crn::{Reaction, ReactionNetwork};
use crate::linalg::{self, Mat, Vector};
use crate::model::BilinearModel;
use crate::ngm;

pub use crate::sim::rng;

/// Metzler matrix with column-diagonal dominance, hence Hurwitz. Off-diagonal
/// entries are positive with probability `density`.
pub fn metzler_hurwitz<R: Rng>(rng: &mut R, k: usize, density: f64) -> Mat {
    let mut m = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j && rng.random_bool(density) {
                m[(i, j)] = rng.random_range(0.05..1.0);
            }
        }
    }
    for j in 0..k {
        let off: f64 = m.column(j).sum();
        m[(j, j)] = -(off + rng.random_range(0.2..1.5));
    }
    m
}

/// Negative diagonal matrix `−Diag(μ)`.
pub fn negative_diagonal<R: Rng>(rng: &mut R, k: usize) -> Mat {
    Mat::from_diagonal(&Vector::from_fn(k, |_, _| -rng.random_range(0.2..1.5)))
}

/// Irreducible Metzler matrix: a random Hamiltonian cycle plus random extra
/// edges, arbitrary diagonal.
pub fn irreducible_metzler<R: Rng>(rng: &mut R, k: usize) -> Mat {
    let mut m = Mat::zeros(k, k);
    let mut order: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for w in 0..k {
        let (from, to) = (order[w], order[(w + 1) % k]);
        if from != to {
            m[(to, from)] = rng.random_range(0.1..2.0);
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && rng.random_bool(0.3) {
                m[(i, j)] = rng.random_range(0.1..2.0);
            }
        }
        m[(i, i)] = rng.random_range(-3.0..3.0);
    }
    m
}

/// Conservative irreducible generator: `J·1 = 0`.
pub fn conservative_generator<R: Rng>(rng: &mut R, k: usize) -> Mat {
    let mut m = irreducible_metzler(rng, k);
    for i in 0..k {
        m[(i, i)] = 0.0;
        let row: f64 = m.row(i).sum();
        m[(i, i)] = -row;
    }
    m
}

pub fn positive_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(0.1..2.0))
}

pub fn stochastic_vector<R: Rng>(rng: &mut R, k: usize) -> Vector {
    linalg::normalize_sum(&Vector::from_fn(k, |_, _| rng.random_range(0.05..1.0)))
}

/// `n×m` column-stochastic matrix with positive entries.
pub fn column_stochastic<R: Rng>(rng: &mut R, n: usize, m: usize) -> Mat {
    let mut p = Mat::zeros(n, m);
    for j in 0..m {
        p.set_column(j, &stochastic_vector(rng, n));
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    General,
    CaseP,
    CaseB,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelSpec {
    pub m: usize,
    pub n: usize,
    pub shape: Shape,
    /// Rescale `B` so that `R₀` hits this value.
    pub r0: Option<f64>,
    /// Use `A_S = −Diag(μ)`.
    pub diagonal_as: bool,
}

/// Random valid model with strictly positive `B`, `P` and `Λ`.
pub fn model<R: Rng>(rng: &mut R, spec: &ModelSpec) -> BilinearModel {
    let (m, n) = (spec.m, spec.n);
    let a = metzler_hurwitz(rng, n, 0.5);
    let a_s = if spec.diagonal_as { negative_diagonal(rng, m) } else { metzler_hurwitz(rng, m, 0.5) };
    let (b, p) = match spec.shape {
        Shape::General => (positive_matrix(rng, m, n), column_stochastic(rng, n, m)),
        Shape::CaseP => {
            let alpha = stochastic_vector(rng, n);
            (positive_matrix(rng, m, n), linalg::outer(&alpha, &Vector::from_element(m, 1.0)))
        }
        Shape::CaseB => {
            let alpha_m = stochastic_vector(rng, m);
            let beta = Vector::from_fn(n, |_, _| rng.random_range(0.1..2.0));
            (linalg::outer(&alpha_m, &beta), column_stochastic(rng, n, m))
        }
    };
    let lambda = Vector::from_fn(m, |_, _| rng.random_range(0.2..2.0));
    let mut model = BilinearModel::new(a, a_s, b, p, lambda, None).expect("shapes agree");
    if let Some(target) = spec.r0 {
        rescale_r0(&mut model, target);
    }
    model
}

/// Scales `B` (and therefore `R₀`, which is linear in `B`) to `target`.
pub fn rescale_r0(model: &mut BilinearModel, target: f64) {
    let current = ngm::r0(model).expect("valid model");
    model.b *= target / current;
}

/// Random mass-action network: each reaction has up to two source and two
/// output species with multiplicities 1–2; some reactions are in- or
/// outflows.
pub fn network<R: Rng>(rng: &mut R, species: usize, reactions: usize) -> ReactionNetwork {
    let names: Vec<String> = (0..species).map(|i| format!("x{i}")).collect();
    let side = |rng: &mut R, allow_empty: bool| -> Vec<(usize, u32)> {
        let count = if allow_empty && rng.random_bool(0.15) { 0 } else { rng.random_range(1..=2) };
        let mut terms: Vec<(usize, u32)> = Vec::new();
        for _ in 0..count {
            let s = rng.random_range(0..species);
            let mult = rng.random_range(1..=2);
            match terms.iter_mut().find(|(x, _)| *x == s) {
                Some(t) => t.1 += mult,
                None => terms.push((s, mult)),
            }
        }
        terms
    };
    let list = (0..reactions)
        .map(|_| {
            let source = side(rng, true);
            let output = side(rng, true);
            Reaction { source, output, rate: rng.random_range(0.1..2.0) }
        })
        .collect();
    ReactionNetwork::new(names, list)
}
