//! Truncated Lévy–Itô sampling of symmetric stable paths.
//!
//! Jumps larger than `eps` form a compound Poisson process. They are generated as a LePage
//! series: with Γ = Λ·r^{-α}/α (Λ the total Lévy weight), the points (t, Γ) are a unit-rate
//! Poisson process on [0,T]×[0,∞), so arrivals in Γ are exponential with rate T and the jump
//! radius is r = (αΓ/Λ)^{-1/α}. Truncating at Γ(eps) keeps exactly the jumps above eps, and a
//! smaller eps only appends jumps: paths with a common seed are nested across cutoffs.
//!
//! The small-jump part has zero compensator by symmetry; it is either dropped or replaced by a
//! Gaussian with the covariance Σ λ_i ξ_iξ_iᵀ eps^{2-α}/(2-α) per unit time.

use crate::error::{Error, Result};
use crate::seed::rng;
use crate::stable_model::StableSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

const JUMP_STREAM: u64 = 0;
const GAUSS_STREAM: u64 = 1;
/// Refuse paths whose expected jump count exceeds this.
const MAX_EXPECTED_JUMPS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SmallJumpPolicy {
    Drop,
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jump {
    pub time: f64,
    pub size: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    pub spec: StableSpec,
    pub horizon: f64,
    pub dt: f64,
    pub eps: f64,
    pub policy: SmallJumpPolicy,
    pub seed: u64,
    steps: usize,
    /// Small-jump surrogate per step, step-major.
    increments: Vec<f64>,
    /// Sorted by time, strictly increasing, all in (0, T].
    jumps: Vec<Jump>,
}

/// Expected number of jumps above `eps` on [0, T].
pub fn expected_jump_count(spec: &StableSpec, horizon: f64, eps: f64) -> f64 {
    horizon * spec.total_levy_weight() * eps.powf(-spec.alpha) / spec.alpha
}

/// Covariance per unit time of the Gaussian small-jump surrogate.
pub fn small_jump_covariance(spec: &StableSpec, eps: f64) -> Vec<f64> {
    let d = spec.dim;
    let a = spec.alpha;
    let f = eps.powf(2.0 - a) / (2.0 - a);
    let mut c = vec![0.0; d * d];
    for (atom, l) in spec.measure.atoms().iter().zip(spec.levy_weights()) {
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] += l * f * atom.direction[i] * atom.direction[j];
            }
        }
    }
    c
}

/// Number of grid steps when `dt` divides `horizon` up to rounding.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite() && dt > 0.0 && dt <= horizon) {
        return Err(Error::invalid(format!("need 0 < dt <= T, got dt={dt}, T={horizon}")));
    }
    let n = (horizon / dt).round();
    if ((n * dt) - horizon).abs() > 1e-9 * horizon {
        return Err(Error::invalid(format!("dt={dt} does not divide T={horizon}")));
    }
    Ok(n as usize)
}

pub fn sample_levy_path(
    spec: &StableSpec,
    horizon: f64,
    dt: f64,
    eps: f64,
    seed: u64,
    policy: SmallJumpPolicy,
) -> Result<LevyPath> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let steps = step_count(horizon, dt)?;
    let expected = expected_jump_count(spec, horizon, eps);
    if expected > MAX_EXPECTED_JUMPS {
        return Err(Error::invalid(format!("{expected:.3e} expected jumps; raise eps")));
    }
    let d = spec.dim;
    let a = spec.alpha;
    let weights = spec.levy_weights();
    let total: f64 = weights.iter().sum();
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |s, w| {
            *s += w / total;
            Some(*s)
        })
        .collect();
    let atoms = spec.measure.atoms();

    let mut r: ChaCha8Rng = rng(seed);
    r.set_stream(JUMP_STREAM);
    let gamma_cut = total * eps.powf(-a) / a;
    let mut gamma = 0.0;
    let mut jumps = Vec::new();
    loop {
        let e: f64 = r.sample(Exp1);
        gamma += e / horizon;
        if gamma >= gamma_cut {
            break;
        }
        let u: f64 = r.sample(Open01);
        let time = horizon * u;
        let pick: f64 = r.random();
        let i = cum.iter().position(|&c| pick < c).unwrap_or(atoms.len() - 1);
        let radius = (a * gamma / total).powf(-1.0 / a);
        let size = atoms[i].direction.iter().map(|c| radius * c).collect();
        jumps.push(Jump { time, size });
    }
    jumps.sort_by(|x, y| x.time.total_cmp(&y.time));
    jumps.dedup_by(|later, earlier| later.time == earlier.time);

    let mut increments = vec![0.0; steps * d];
    if policy == SmallJumpPolicy::Gaussian {
        r.set_stream(GAUSS_STREAM);
        r.set_word_pos(0);
        let f = eps.powf(2.0 - a) / (2.0 - a);
        // One scalar Gaussian per ± pair of atoms reproduces the covariance exactly.
        let pairs = spec.measure.pair_representatives();
        let sd: Vec<f64> = pairs.iter().map(|&i| (2.0 * weights[i] * f * dt).sqrt()).collect();
        for step in increments.chunks_mut(d) {
            for (&i, s) in pairs.iter().zip(&sd) {
                let z: f64 = r.sample(StandardNormal);
                for (o, c) in step.iter_mut().zip(&atoms[i].direction) {
                    *o += s * z * c;
                }
            }
        }
    }
    Ok(LevyPath { spec: spec.clone(), horizon, dt, eps, policy, seed, steps, increments, jumps })
}

impl LevyPath {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Grid time k·dt, with the last node pinned to T.
    pub fn grid_time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.increments[k * d..(k + 1) * d]
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Range of jump indices with time in (t_k, t_{k+1}].
    pub fn jumps_in_step(&self, k: usize) -> std::ops::Range<usize> {
        let (a, b) = (self.grid_time(k), self.grid_time(k + 1));
        let lo = self.jumps.partition_point(|j| j.time <= a);
        let hi = self.jumps.partition_point(|j| j.time <= b);
        lo..hi
    }

    /// L_t as the surrogate increments of all completed steps plus all jumps up to t, summed
    /// in event order. This is the order used by the integrators.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for k in 0..self.steps {
            if self.grid_time(k) >= t {
                break;
            }
            for j in self.jumps_in_step(k) {
                if self.jumps[j].time > t {
                    break;
                }
                add(&mut out, &self.jumps[j].size);
            }
            if self.grid_time(k + 1) <= t {
                add(&mut out, self.increment(k));
            }
        }
        out
    }

    /// L_T = Σ increments + Σ jumps.
    pub fn terminal(&self) -> Vec<f64> {
        let (mut inc, jmp) = self.parts();
        add(&mut inc, &jmp);
        inc
    }

    /// Sum of all surrogate increments and, separately, of all jumps.
    pub fn parts(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut inc = vec![0.0; d];
        for k in 0..self.steps {
            add(&mut inc, self.increment(k));
        }
        let mut jmp = vec![0.0; d];
        for j in &self.jumps {
            add(&mut jmp, &j.size);
        }
        (inc, jmp)
    }

    /// The same noise on a grid of step `factor·dt`: increments are summed in blocks, jumps kept.
    pub fn coarsen(&self, factor: usize) -> Result<LevyPath> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::invalid(format!("factor {factor} does not divide {} steps", self.steps)));
        }
        let d = self.dim();
        let steps = self.steps / factor;
        let mut increments = vec![0.0; steps * d];
        for (k, out) in increments.chunks_mut(d).enumerate() {
            for j in 0..factor {
                add(out, self.increment(k * factor + j));
            }
        }
        Ok(LevyPath { dt: self.dt * factor as f64, steps, increments, ..self.clone() })
    }
}

#[inline]
pub(crate) fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
