//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver paths it is used to check.

#![allow(dead_code)]

use abp_core::crn::ReactionNetwork;
use abp_core::random::{self, ModelSpec, Shape};
use abp_core::{BilinearModel, Mat, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sir(beta: f64) -> BilinearModel {
    let m = |x: f64| Mat::from_element(1, 1, x);
    BilinearModel::new(m(-1.0), m(-1.0), m(beta), m(1.0), Vector::from_element(1, 1.0), None).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    random::rng(seed)
}

/// Random valid model without feedback.
pub fn random_model(rng: &mut ChaCha8Rng, max_dim: usize, shape: Shape, r0: Option<f64>) -> BilinearModel {
    let spec = ModelSpec {
        m: rng.random_range(1..=max_dim),
        n: rng.random_range(1..=max_dim),
        shape,
        r0,
        diagonal_as: false,
    };
    random::model(rng, &spec)
}

/// `(−A)⁻¹` by Gauss–Jordan elimination with partial pivoting.
pub fn neg_inverse(a: &Mat) -> Mat {
    let k = a.nrows();
    let mut aug = Mat::zeros(k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            aug[(i, j)] = -a[(i, j)];
        }
        aug[(i, k + i)] = 1.0;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| aug[(x, col)].abs().total_cmp(&aug[(y, col)].abs())).unwrap();
        aug.swap_rows(col, piv);
        let p = aug[(col, col)];
        for j in 0..2 * k {
            aug[(col, j)] /= p;
        }
        for r in 0..k {
            if r != col {
                let f = aug[(r, col)];
                for j in 0..2 * k {
                    aug[(r, j)] -= f * aug[(col, j)];
                }
            }
        }
    }
    aug.columns(k, k).into_owned()
}

/// Spectral radius as the largest eigenvalue modulus from nalgebra's Schur form.
pub fn rho(m: &Mat) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest real part of the spectrum.
pub fn abscissa(m: &Mat) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Unit-norm null vector from the smallest singular value.
pub fn null_vector(m: &Mat) -> Vector {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.unwrap();
    let idx = svd.singular_values.imin();
    let v = v_t.row(idx).transpose();
    if v.sum() < 0.0 { -v } else { v }
}

/// Stationary distribution of a conservative generator (`J·1 = 0`): solves
/// `πJ = 0`, `Σπ = 1` directly.
pub fn stationary(j: &Mat) -> Vector {
    let k = j.nrows();
    let mut sys = j.transpose();
    let mut rhs = Vector::zeros(k);
    for c in 0..k {
        sys[(k - 1, c)] = 1.0;
    }
    rhs[k - 1] = 1.0;
    sys.lu().solve(&rhs).unwrap()
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut down = x.clone();
        let step = h * (1.0 + x[i].abs());
        up[i] += step;
        down[i] -= step;
        (f(&up) - f(&down)) / (2.0 * step)
    })
}

/// Central-difference Jacobian of the stacked model field.
pub fn fd_jacobian(model: &BilinearModel, x: &Vector, h: f64) -> Mat {
    let k = x.len();
    let mut j = Mat::zeros(k, k);
    for c in 0..k {
        let mut up = x.clone();
        let mut down = x.clone();
        up[c] += h;
        down[c] -= h;
        j.set_column(c, &((model.rhs_stacked(&up) - model.rhs_stacked(&down)) / (2.0 * h)));
    }
    j
}

/// Damped Newton (backtracking on the residual norm, iterates kept
/// nonnegative) from many starts; returns the distinct equilibria with every
/// infected component strictly positive.
pub fn multistart_newton(model: &BilinearModel, starts: &[Vector]) -> Vec<Vector> {
    let mut found: Vec<Vector> = Vec::new();
    for x0 in starts {
        let mut x = x0.clone();
        let mut f = model.rhs_stacked(&x);
        let mut ok = false;
        for _ in 0..400 {
            if f.amax() < 1e-12 * (1.0 + x.amax()) {
                ok = true;
                break;
            }
            let Some(dx) = fd_jacobian(model, &x, 1e-5 * (1.0 + x.amax())).lu().solve(&f) else { break };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-8 {
                let trial = (&x - &dx * t).map(|v| v.max(0.0));
                let ft = model.rhs_stacked(&trial);
                if ft.norm() < (1.0 - 1e-4 * t) * f.norm() {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let positive = x.iter().skip(model.m).all(|&v| v > 1e-6 * (1.0 + x.amax()));
        if ok && positive && !found.iter().any(|y| (y - &x).amax() < 1e-6 * x.amax().max(1.0)) {
            found.push(x);
        }
    }
    found
}

/// Log-uniform starting points over `[1e−2, 1e2]` in every coordinate.
pub fn log_starts(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = rng(seed);
    (0..count).map(|_| Vector::from_fn(dim, |_, _| 10f64.powf(rng.random_range(-2.0..2.0)))).collect()
}

fn is_siphon_direct(net: &ReactionNetwork, set: &[usize]) -> bool {
    net.reactions.iter().enumerate().all(|(r, reaction)| {
        let produces = set.iter().any(|&s| net.gamma[s][r] > 0);
        let consumes = reaction.source.iter().any(|(s, c)| *c > 0 && set.contains(s));
        !produces || consumes
    })
}

/// Every nonempty subset filtered by the siphon predicate, then by
/// minimality.
pub fn brute_force_minimal_siphons(net: &ReactionNetwork) -> Vec<Vec<usize>> {
    let n = net.species.len();
    let siphons: Vec<Vec<usize>> = (1u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|set| is_siphon_direct(net, set))
        .collect();
    let mut minimal: Vec<Vec<usize>> = siphons
        .iter()
        .filter(|s| !siphons.iter().any(|t| t.len() < s.len() && t.iter().all(|x| s.contains(x))))
        .cloned()
        .collect();
    minimal.sort();
    minimal
}

/// `H(k) = R·(k·Diag[R] − A_S)⁻¹(Λ + k·C·D_w)` for Case (P), with
/// `R = B(−A)⁻¹α` and `D_w = (−A)⁻¹α` computed from scratch.
pub struct FeedbackOracle {
    r: Vector,
    cdw: Vector,
    lambda: Vector,
    a_s: Mat,
}

impl FeedbackOracle {
    pub fn new(model: &BilinearModel) -> Self {
        let alpha = model.p.column(0).into_owned();
        let dw = neg_inverse(&model.a) * &alpha;
        Self { r: &model.b * &dw, cdw: &model.c * &dw, lambda: model.lambda.clone(), a_s: model.a_s.clone() }
    }

    pub fn h(&self, k: f64) -> f64 {
        let mut m = -&self.a_s;
        for i in 0..m.nrows() {
            m[(i, i)] += k * self.r[i];
        }
        let s = m.lu().solve(&(&self.lambda + &self.cdw * k)).unwrap();
        self.r.dot(&s)
    }

    /// Sign changes of `H − 1` on a log-spaced grid over `[k_min, k_max]`.
    pub fn count_roots(&self, k_min: f64, k_max: f64, points: usize) -> (usize, Vec<f64>) {
        let (lo, hi) = (k_min.ln(), k_max.ln());
        let mut roots = Vec::new();
        let mut prev_k = k_min;
        let mut prev = self.h(k_min) - 1.0;
        for idx in 1..points {
            let k = (lo + (hi - lo) * idx as f64 / (points - 1) as f64).exp();
            let v = self.h(k) - 1.0;
            if (prev < 0.0) != (v < 0.0) {
                roots.push(0.5 * (prev_k + k));
            }
            prev = v;
            prev_k = k;
        }
        (roots.len(), roots)
    }
}
