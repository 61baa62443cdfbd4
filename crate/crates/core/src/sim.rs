//! Explicit ODE integration with positivity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::model::BilinearModel;

/// Negative excursions up to this size (relative to the state scale) are
/// clamped to zero; anything larger aborts the integration.
const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    /// Classic fourth-order Runge–Kutta with a fixed step.
    Rk4 { h: f64 },
    /// Dormand–Prince 5(4) with step control.
    Adaptive { rtol: f64, atol: f64, h_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Keep every `stride`-th step (the final state is always kept).
    pub stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::Rk4 { h: 0.01 }, stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(serialize_with = "ser_states")]
    pub states: Vec<Vector>,
}

fn ser_states<S: serde::Serializer>(states: &[Vector], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(states.iter().map(|v| v.iter().copied().collect::<Vec<f64>>()))
}

impl Trajectory {
    pub fn last(&self) -> &Vector {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// CSV with header `t,<labels...>`.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("t");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in x.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn enforce_positivity(x: &mut Vector, t: f64) -> Result<()> {
    let scale = linalg::inf_norm(x).max(1.0);
    for (index, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= -CLAMP_TOL * scale {
                *v = 0.0;
            } else {
                return Err(Error::PositivityViolation { t, index, value: *v });
            }
        }
    }
    Ok(())
}

fn rk4_step<F: Fn(&Vector) -> Vector>(f: &F, x: &Vector, h: f64) -> Vector {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (h / 2.0)));
    let k3 = f(&(x + &k2 * (h / 2.0)));
    let k4 = f(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

// Dormand–Prince tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step: fifth-order solution and error estimate.
fn dopri_step<F: Fn(&Vector) -> Vector>(f: &F, x: &Vector, h: f64) -> (Vector, Vector) {
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut y = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if A[stage][j] != 0.0 {
                y += kj * (h * A[stage][j]);
            }
        }
        k.push(f(&y));
    }
    let mut high = x.clone();
    let mut err = Vector::zeros(x.len());
    for s in 0..7 {
        high += &k[s] * (h * B5[s]);
        err += &k[s] * (h * (B5[s] - B4[s]));
    }
    (high, err)
}

/// Integrates `x' = f(x)` on `[0, horizon]`.
pub fn integrate<F>(f: F, x0: &Vector, horizon: f64, config: &IntegratorConfig) -> Result<Trajectory>
where
    F: Fn(&Vector) -> Vector,
{
    if !(horizon > 0.0) {
        return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
    }
    let mut x = x0.clone();
    enforce_positivity(&mut x, 0.0)?;
    let stride = config.stride.max(1);
    let mut traj = Trajectory { times: vec![0.0], states: vec![x.clone()] };
    let mut t = 0.0;
    let mut step = 0usize;
    match config.method {
        Method::Rk4 { h } => {
            let steps = (horizon / h).round().max(1.0) as usize;
            let h = horizon / steps as f64;
            for s in 1..=steps {
                x = rk4_step(&f, &x, h);
                t = s as f64 * h;
                enforce_positivity(&mut x, t)?;
                if s % stride == 0 || s == steps {
                    traj.times.push(t);
                    traj.states.push(x.clone());
                }
            }
        }
        Method::Adaptive { rtol, atol, h_min } => {
            let mut h = (horizon * 1e-3).min(0.01);
            while t < horizon {
                h = h.min(horizon - t);
                let (next, err) = dopri_step(&f, &x, h);
                let norm = err
                    .iter()
                    .zip(x.iter().zip(next.iter()))
                    .map(|(e, (a, b))| (e / (atol + rtol * a.abs().max(b.abs()))).abs())
                    .fold(0.0, f64::max);
                if norm <= 1.0 {
                    t += h;
                    x = next;
                    enforce_positivity(&mut x, t)?;
                    step += 1;
                    if step % stride == 0 || t >= horizon {
                        traj.times.push(t);
                        traj.states.push(x.clone());
                    }
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
                if h < h_min && t < horizon {
                    return Err(Error::StepUnderflow(t));
                }
            }
        }
    }
    Ok(traj)
}

pub fn integrate_model(model: &BilinearModel, x0: &Vector, horizon: f64, config: &IntegratorConfig) -> Result<Trajectory> {
    integrate(|x| model.rhs_stacked(x), x0, horizon, config)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random positive starting states, log-uniform in `[1e−3, 10]·scale` per
/// coordinate, with infection coordinates floored at `1e−3`.
pub fn random_starts(model: &BilinearModel, count: usize, scale: f64, seed: u64) -> Vec<Vector> {
    let mut rng = rng(seed);
    let (lo, hi) = ((1e-3f64).ln(), 10f64.ln());
    (0..count)
        .map(|_| {
            Vector::from_iterator(
                model.m + model.n,
                (0..model.m + model.n).map(|idx| {
                    let x = rng.random_range(lo..hi).exp() * scale;
                    if idx >= model.m { x.max(1e-3) } else { x }
                }),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GasResult {
    pub fraction: f64,
    pub converged: Vec<bool>,
    pub final_distance: Vec<f64>,
}

/// Fraction of the given starts whose endpoint lies within `1e−3`
/// (relative) of `target`.
pub fn empirical_gas_from(
    model: &BilinearModel,
    target: &Vector,
    starts: &[Vector],
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<GasResult> {
    let scale = linalg::inf_norm(target).max(1.0);
    let distances: Vec<f64> = starts
        .par_iter()
        .map(|x0| {
            let traj = integrate_model(model, x0, horizon, config)?;
            Ok(linalg::inf_norm(&(traj.last() - target)) / scale)
        })
        .collect::<Result<_>>()?;
    let converged: Vec<bool> = distances.iter().map(|&d| d <= 1e-3).collect();
    let fraction = if starts.is_empty() {
        1.0
    } else {
        converged.iter().filter(|&&c| c).count() as f64 / starts.len() as f64
    };
    Ok(GasResult { fraction, converged, final_distance: distances })
}

pub fn empirical_gas(
    model: &BilinearModel,
    target: &Vector,
    n_starts: usize,
    horizon: f64,
    seed: u64,
) -> Result<GasResult> {
    let scale = linalg::inf_norm(target).max(1.0);
    let starts = random_starts(model, n_starts, scale, seed);
    empirical_gas_from(model, target, &starts, horizon, &IntegratorConfig::default())
}
