//! Mass-action reaction networks: parsing, stoichiometry, siphons and the
//! recognition of balanced bilinear structure.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{recover_factors, BilinearModel};
use crate::sim::{self, IntegratorConfig, Method};

/// Largest species count accepted by the exact siphon enumerator.
pub const SIPHON_SPECIES_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reaction {
    /// `(species, multiplicity)` pairs consumed.
    pub source: Vec<(usize, u32)>,
    /// `(species, multiplicity)` pairs produced.
    pub output: Vec<(usize, u32)>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionNetwork {
    pub species: Vec<String>,
    pub reactions: Vec<Reaction>,
    /// `n_sp × n_R`, column `ρ` is `O(ρ) − S(ρ)`.
    pub gamma: Vec<Vec<i64>>,
}

fn count_of(terms: &[(usize, u32)], s: usize) -> i64 {
    terms.iter().filter(|(x, _)| *x == s).map(|(_, c)| i64::from(*c)).sum()
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Self {
        let gamma = (0..species.len())
            .map(|s| {
                reactions
                    .iter()
                    .map(|r| count_of(&r.output, s) - count_of(&r.source, s))
                    .collect()
            })
            .collect();
        Self { species, reactions, gamma }
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn gamma_matrix(&self) -> Mat {
        Mat::from_fn(self.n_species(), self.reactions.len(), |i, j| self.gamma[i][j] as f64)
    }

    /// Mass-action rates `κ_ρ·x^{S(ρ)}`.
    pub fn rates(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            self.reactions.len(),
            self.reactions.iter().map(|r| {
                r.source
                    .iter()
                    .fold(r.rate, |acc, &(s, c)| acc * x[s].powi(c as i32))
            }),
        )
    }

    pub fn rhs(&self, x: &Vector) -> Vector {
        let rates = self.rates(x);
        Vector::from_iterator(
            self.n_species(),
            self.gamma.iter().map(|row| row.iter().zip(rates.iter()).map(|(&g, r)| g as f64 * r).sum()),
        )
    }

    fn source_mask(&self, r: usize) -> u64 {
        self.reactions[r].source.iter().fold(0, |m, &(s, _)| m | 1 << s)
    }

    fn produce_mask(&self, r: usize) -> u64 {
        (0..self.n_species()).filter(|&s| self.gamma[s][r] > 0).fold(0, |m, s| m | 1 << s)
    }

    fn masks(&self) -> Vec<(u64, u64)> {
        (0..self.reactions.len()).map(|r| (self.produce_mask(r), self.source_mask(r))).collect()
    }

    /// Every reaction producing a member of `set` consumes a member of `set`.
    pub fn is_siphon(&self, set: &[usize]) -> bool {
        let mask = to_mask(set);
        self.masks().iter().all(|&(p, s)| p & mask == 0 || s & mask != 0)
    }
}

fn to_mask(set: &[usize]) -> u64 {
    set.iter().fold(0, |m, &s| m | 1 << s)
}

fn from_mask(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

fn parse_side(
    text: &str,
    line: usize,
    names: &mut Vec<String>,
    index: &mut HashMap<String, usize>,
    declared: bool,
) -> Result<Vec<(usize, u32)>> {
    let mut terms: Vec<(usize, u32)> = Vec::new();
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "0" || trimmed == "∅" {
        return Ok(terms);
    }
    for raw in trimmed.split('+') {
        let term = raw.trim();
        let digits = term.chars().take_while(|c| c.is_ascii_digit()).count();
        let (coef, rest) = term.split_at(digits);
        let name = rest.trim().trim_start_matches('*').trim();
        let coef: u32 = if coef.is_empty() {
            1
        } else {
            coef.parse().map_err(|_| Error::Parse { line, msg: format!("bad coefficient in '{term}'") })?
        };
        let valid = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'');
        if !valid {
            return Err(Error::Parse { line, msg: format!("bad species term '{term}'") });
        }
        if coef == 0 {
            continue;
        }
        let idx = match index.get(name) {
            Some(&i) => i,
            None if declared => return Err(Error::UnknownSpecies { line, name: name.into() }),
            None => {
                names.push(name.into());
                index.insert(name.into(), names.len() - 1);
                names.len() - 1
            }
        };
        match terms.iter_mut().find(|(s, _)| *s == idx) {
            Some(t) => t.1 += coef,
            None => terms.push((idx, coef)),
        }
    }
    Ok(terms)
}

/// Parses one reaction per line: `lhs -> rhs : rate`, `#` comments, and an
/// optional `species: a, b, c` declaration fixing order and names.
pub fn parse_reactions(text: &str) -> Result<ReactionNetwork> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut declared = false;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    for &(line, l) in &lines {
        if let Some(list) = l.strip_prefix("species:") {
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !index.contains_key(name) {
                    names.push(name.into());
                    index.insert(name.into(), names.len() - 1);
                }
            }
            declared = true;
            let _ = line;
        }
    }

    let mut reactions = Vec::new();
    for &(line, l) in &lines {
        if l.starts_with("species:") {
            continue;
        }
        let (body, rate) = l
            .rsplit_once(':')
            .ok_or_else(|| Error::Parse { line, msg: "missing ': rate'".into() })?;
        let rate: f64 = rate
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("rate '{}' is not a number", rate.trim()) })?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NegativeRate(line));
        }
        let (lhs, rhs) = body
            .split_once("->")
            .or_else(|| body.split_once('→'))
            .ok_or_else(|| Error::Parse { line, msg: "missing '->'".into() })?;
        let source = parse_side(lhs, line, &mut names, &mut index, declared)?;
        let output = parse_side(rhs, line, &mut names, &mut index, declared)?;
        reactions.push(Reaction { source, output, rate });
    }
    Ok(ReactionNetwork::new(names, reactions))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiphonSet {
    pub members: Vec<usize>,
    pub minimal: bool,
    /// Contains the support of no semipositive conservation law.
    pub critical: bool,
}

fn check_cap(net: &ReactionNetwork) -> Result<()> {
    if net.n_species() > SIPHON_SPECIES_CAP {
        return Err(Error::TooManySpecies(net.n_species(), SIPHON_SPECIES_CAP));
    }
    Ok(())
}

/// All masks with `k` bits set among the low `n` bits (Gosper's hack).
fn masks_with_popcount(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let limit = 1u64 << n;
    let mut v: u64 = (1u64 << k) - 1;
    while v < limit {
        out.push(v);
        let t = v | (v - 1);
        v = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
    }
    out
}

/// All minimal siphons, by increasing size, each flagged for criticality.
pub fn minimal_siphons(net: &ReactionNetwork) -> Result<Vec<SiphonSet>> {
    check_cap(net)?;
    let n = net.n_species();
    let masks = net.masks();
    let invariants = semipositive_invariants(net)?;
    let inv_masks: Vec<u64> = invariants
        .iter()
        .map(|y| y.iter().enumerate().filter(|(_, &v)| v > 0).fold(0, |m, (i, _)| m | 1 << i))
        .collect();

    let mut found: Vec<u64> = Vec::new();
    for k in 1..=n {
        let level: Vec<u64> = masks_with_popcount(n, k)
            .into_par_iter()
            .filter(|&set| found.iter().all(|&f| f & set != f))
            .filter(|&set| masks.iter().all(|&(p, s)| p & set == 0 || s & set != 0))
            .collect();
        found.extend(level);
    }
    Ok(found
        .into_iter()
        .map(|mask| SiphonSet {
            members: from_mask(mask),
            minimal: true,
            critical: inv_masks.iter().all(|&inv| inv & mask != inv),
        })
        .collect())
}

/// Union of all minimal siphons.
pub fn total_siphon(siphons: &[SiphonSet]) -> Vec<usize> {
    from_mask(siphons.iter().fold(0, |m, s| m | to_mask(&s.members)))
}

/// Closure of `seed` under: add every species all of whose producing
/// reactions consume a species already in the set.
pub fn dfe_closure(net: &ReactionNetwork, seed: &[usize]) -> Vec<usize> {
    let masks = net.masks();
    let mut set = to_mask(seed);
    loop {
        let mut grown = set;
        for s in 0..net.n_species() {
            let bit = 1u64 << s;
            if grown & bit == 0 && masks.iter().all(|&(p, src)| p & bit == 0 || src & set != 0) {
                grown |= bit;
            }
        }
        if grown == set {
            return from_mask(set);
        }
        set = grown;
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn overflow() -> Error {
    Error::NotApplicable("integer overflow while enumerating conservation laws".into())
}

/// Minimal-support semipositive conservation laws `y ≥ 0, yΓ = 0` (Farkas
/// algorithm in exact integer arithmetic).
pub fn semipositive_invariants(net: &ReactionNetwork) -> Result<Vec<Vec<i128>>> {
    let n = net.n_species();
    let n_r = net.reactions.len();
    // Row = (Γ-part, identity-part).
    let mut rows: Vec<(Vec<i128>, Vec<i128>)> = (0..n)
        .map(|i| {
            let mut e = vec![0; n];
            e[i] = 1;
            (net.gamma[i].iter().map(|&g| i128::from(g)).collect(), e)
        })
        .collect();
    for col in 0..n_r {
        let mut next: Vec<(Vec<i128>, Vec<i128>)> = rows.iter().filter(|r| r.0[col] == 0).cloned().collect();
        let pos: Vec<&(Vec<i128>, Vec<i128>)> = rows.iter().filter(|r| r.0[col] > 0).collect();
        let neg: Vec<&(Vec<i128>, Vec<i128>)> = rows.iter().filter(|r| r.0[col] < 0).collect();
        for p in &pos {
            for q in &neg {
                let (a, b) = (-q.0[col], p.0[col]);
                let combine = |x: &[i128], y: &[i128]| -> Result<Vec<i128>> {
                    x.iter()
                        .zip(y)
                        .map(|(&u, &v)| {
                            let l = u.checked_mul(a).ok_or_else(overflow)?;
                            let r = v.checked_mul(b).ok_or_else(overflow)?;
                            l.checked_add(r).ok_or_else(overflow)
                        })
                        .collect()
                };
                let mut g_part = combine(&p.0, &q.0)?;
                let mut e_part = combine(&p.1, &q.1)?;
                let d = g_part.iter().chain(&e_part).fold(0, |acc, &v| gcd(acc, v));
                if d > 1 {
                    g_part.iter_mut().chain(e_part.iter_mut()).for_each(|v| *v /= d);
                }
                next.push((g_part, e_part));
            }
        }
        // Keep only rows of minimal support.
        let supports: Vec<u64> = next
            .iter()
            .map(|r| r.1.iter().enumerate().filter(|(_, &v)| v != 0).fold(0, |m, (i, _)| m | 1 << i))
            .collect();
        let mut keep = vec![true; next.len()];
        for i in 0..next.len() {
            for j in 0..next.len() {
                if i != j && keep[j] && supports[j] & supports[i] == supports[j] {
                    if supports[j] != supports[i] || j < i {
                        keep[i] = false;
                        break;
                    }
                }
            }
        }
        rows = next.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect();
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct FaceBlocks {
    /// `D_{x_σ} f_{x_σ}` (transversal block).
    #[serde(with = "linalg::serde_mat")]
    pub j_perp: Mat,
    /// `D_{y_σ} f_{y_σ}` (tangent block).
    #[serde(with = "linalg::serde_mat")]
    pub j_tan: Mat,
    /// Largest entry of `D_{y_σ} f_{x_σ}`.
    pub offdiag_max: f64,
    pub offdiag_zero: bool,
}

/// Central-difference Jacobian with step `1e−6·(1 + |x_i|)`.
pub fn numeric_jacobian(f: &dyn Fn(&Vector) -> Vector, x: &Vector) -> Mat {
    let k = x.len();
    let rows = f(x).len();
    let mut j = Mat::zeros(rows, k);
    for c in 0..k {
        let h = 1e-6 * (1.0 + x[c].abs());
        let mut up = x.clone();
        let mut down = x.clone();
        up[c] += h;
        down[c] -= h;
        j.set_column(c, &((f(&up) - f(&down)) / (2.0 * h)));
    }
    j
}

/// Block-triangular structure of the Jacobian at an equilibrium on the
/// invariant face `{x_σ = 0}`.
pub fn face_block_jacobian(f: &dyn Fn(&Vector) -> Vector, sigma: &[usize], state: &Vector) -> Result<FaceBlocks> {
    let k = state.len();
    let tangent: Vec<usize> = (0..k).filter(|i| !sigma.contains(i)).collect();
    let scale = linalg::inf_norm(state).max(1.0);

    let mut rng = sim::rng(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut x = Vector::zeros(k);
        for &t in &tangent {
            x[t] = rng.random_range(0.0..2.0) * scale;
        }
        let fx = f(&x);
        let mag = linalg::inf_norm(&fx).max(1.0);
        for &s in sigma {
            worst = worst.max(fx[s].abs() / mag);
        }
    }
    if worst > 1e-9 {
        return Err(Error::NotInvariantFace(worst));
    }

    let off_face = sigma.iter().map(|&s| state[s].abs()).fold(0.0, f64::max);
    let res = linalg::inf_norm(&f(state)).max(off_face);
    if res > 1e-9 * scale {
        return Err(Error::NotEquilibrium(res));
    }

    let j = numeric_jacobian(f, state);
    let j_perp = Mat::from_fn(sigma.len(), sigma.len(), |a, b| j[(sigma[a], sigma[b])]);
    let j_tan = Mat::from_fn(tangent.len(), tangent.len(), |a, b| j[(tangent[a], tangent[b])]);
    let offdiag_max = sigma
        .iter()
        .flat_map(|&r| tangent.iter().map(move |&c| (r, c)))
        .map(|(r, c)| j[(r, c)].abs())
        .fold(0.0, f64::max);
    Ok(FaceBlocks { j_perp, j_tan, offdiag_max, offdiag_zero: offdiag_max <= 1e-7 })
}

/// Looks for an equilibrium on the face `{x_σ = 0}` by integrating the face
/// dynamics from the all-ones tangent state.
pub fn face_equilibrium(net: &ReactionNetwork, sigma: &[usize]) -> Option<Vector> {
    let k = net.n_species();
    let mut x0 = Vector::from_element(k, 1.0);
    for &s in sigma {
        x0[s] = 0.0;
    }
    let config = IntegratorConfig {
        method: Method::Adaptive { rtol: 1e-10, atol: 1e-13, h_min: 1e-12 },
        stride: usize::MAX,
    };
    let traj = sim::integrate(|x| net.rhs(x), &x0, 2000.0, &config).ok()?;
    let x = traj.last().clone();
    let scale = linalg::inf_norm(&x).max(1.0);
    (x.iter().all(|v| v.is_finite()) && linalg::inf_norm(&net.rhs(&x)) <= 1e-9 * scale).then_some(x)
}

/// Extracts `(A, A_S, B, P, Λ, C)` from a right-hand side that is balanced
/// bilinear in the given S/I coordinates, and verifies the round trip.
pub fn bilinear_from_rhs(
    f: &dyn Fn(&Vector) -> Vector,
    s_idx: &[usize],
    i_idx: &[usize],
) -> Result<BilinearModel> {
    let (m, n) = (s_idx.len(), i_idx.len());
    let dim = m + n;
    let embed = |s: &Vector, i: &Vector| {
        let mut x = Vector::zeros(dim);
        for (a, &ix) in s_idx.iter().enumerate() {
            x[ix] = s[a];
        }
        for (a, &ix) in i_idx.iter().enumerate() {
            x[ix] = i[a];
        }
        x
    };
    let eval = |s: &Vector, i: &Vector| {
        let fx = f(&embed(s, i));
        (
            Vector::from_iterator(m, s_idx.iter().map(|&ix| fx[ix])),
            Vector::from_iterator(n, i_idx.iter().map(|&ix| fx[ix])),
        )
    };
    let unit = |k: usize, j: usize| {
        let mut e = Vector::zeros(k);
        e[j] = 1.0;
        e
    };
    let (zs, zi) = (Vector::zeros(m), Vector::zeros(n));
    let (lambda, i_at_zero) = eval(&zs, &zi);

    let mut a_s = Mat::zeros(m, m);
    let mut i_of_s: Vec<Vector> = Vec::with_capacity(m);
    for j in 0..m {
        let (ds, di) = eval(&unit(m, j), &zi);
        a_s.set_column(j, &(ds - &lambda));
        i_of_s.push(di);
    }
    let mut a = Mat::zeros(n, n);
    let mut c = Mat::zeros(m, n);
    let mut i_of_i: Vec<Vector> = Vec::with_capacity(n);
    for k in 0..n {
        let (ds, di) = eval(&zs, &unit(n, k));
        c.set_column(k, &(ds - &lambda));
        a.set_column(k, &(&di - &i_at_zero));
        i_of_i.push(di);
    }
    let operator = |s: &Vector| {
        let j = (0..m).position(|idx| s[idx] != 0.0).unwrap_or(0);
        let mut fm = Mat::zeros(n, n);
        for k in 0..n {
            let (_, di) = eval(&unit(m, j), &unit(n, k));
            fm.set_column(k, &(di - &i_of_s[j] - &i_of_i[k] + &i_at_zero));
        }
        fm
    };
    let (p, b) = recover_factors(operator, m, n);
    let model = BilinearModel::new(a, a_s, b, p, lambda, Some(c))?;

    let mut rng = sim::rng(0xb111);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = Vector::from_fn(m, |_, _| rng.random_range(0.0..2.0));
        let i = Vector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
        let (ds, di) = eval(&s, &i);
        let (ms, mi) = model.rhs(&s, &i);
        let scale = linalg::inf_norm(&ds).max(linalg::inf_norm(&di)).max(1.0);
        worst = worst.max(linalg::inf_norm(&(ds - ms)).max(linalg::inf_norm(&(di - mi))) / scale);
    }
    if worst > 1e-9 {
        return Err(Error::NotBalancedBilinear(worst));
    }
    Ok(model)
}

/// Balanced bilinear model of a network. Infection species default to the
/// total siphon; the remaining species are susceptible-like.
pub fn network_to_bilinear(net: &ReactionNetwork, infection: Option<&[usize]>) -> Result<BilinearModel> {
    let i_idx: Vec<usize> = match infection {
        Some(list) => list.to_vec(),
        None => total_siphon(&minimal_siphons(net)?),
    };
    let s_idx: Vec<usize> = (0..net.n_species()).filter(|s| !i_idx.contains(s)).collect();
    if s_idx.is_empty() || i_idx.is_empty() {
        return Err(Error::InvalidModel("need at least one S and one I species".into()));
    }
    bilinear_from_rhs(&|x| net.rhs(x), &s_idx, &i_idx)
}
