//! Discrete Hölder seminorms, the interpolation ratio and the shift-difference bound.
//!
//! Ladder conventions: [f]_0 = ‖f‖_0, [f]_1 = ‖Df‖_0 and [f]_β = [Df]_{β-1} for 1 < β < 2.

use super::grid::{Extension, GridFunction};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Lattices up to this many points are scanned over all pairs.
pub const EXACT_PAIR_LIMIT: usize = 4096;
const SUBSAMPLE_SEED: u64 = 0x5eed_4011_de75;
const RANDOM_PARTNERS: usize = 16;

/// [f]_β on the lattice for β ∈ [0, 2).
pub fn hoelder_seminorm(f: &GridFunction, beta: f64) -> f64 {
    assert!((0.0..2.0).contains(&beta), "exponent must lie in [0, 2)");
    if beta == 0.0 {
        return f.sup_norm();
    }
    if beta == 1.0 {
        return gradient_field(f).sup_norm();
    }
    if beta > 1.0 {
        return pair_quotient(&gradient_field(f), beta - 1.0);
    }
    pair_quotient(f, beta)
}

/// Lattice gradient by central differences, as a grid function of arity `arity·d`.
pub fn gradient_field(f: &GridFunction) -> GridFunction {
    let d = f.dim();
    let m = f.arity();
    let n = f.lattice().len();
    let mut vals = vec![0.0; n * m * d];
    let mut g = vec![0.0; d];
    for k in 0..n {
        for c in 0..m {
            f.node_gradient(k, c, &mut g);
            vals[(k * m + c) * d..(k * m + c + 1) * d].copy_from_slice(&g);
        }
    }
    let ext = match f.extension() {
        Extension::Periodic => Extension::Periodic,
        _ => Extension::Constant,
    };
    GridFunction::from_values(f.lattice().clone(), m * d, vals, ext).expect("finite gradient")
}

fn diff_norm(f: &GridFunction, i: usize, j: usize) -> f64 {
    let m = f.arity();
    let mut s = 0.0;
    for c in 0..m {
        let d = f.node(i, c) - f.node(j, c);
        s += d * d;
    }
    s.sqrt()
}

fn pair_quotient(f: &GridFunction, beta: f64) -> f64 {
    let lat = f.lattice();
    let n = lat.len();
    if n < 2 {
        return 0.0;
    }
    let h = lat.spacing;
    if lat.dim() == 1 {
        // Distances depend only on the index gap.
        let pow: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { (k as f64 * h).powf(beta) }).collect();
        if n <= EXACT_PAIR_LIMIT {
            let mut best = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max(diff_norm(f, i, j) / pow[j - i]);
                }
            }
            return best;
        }
    }
    if n <= EXACT_PAIR_LIMIT {
        let pts = lat.points();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let dist = dist(&pts[i], &pts[j]);
                best = best.max(diff_norm(f, i, j) / dist.powf(beta));
            }
        }
        return best;
    }
    subsampled_quotient(f, beta)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Every point is an anchor; partners sit at all dyadic index offsets along each axis and
/// the main diagonal, plus a fixed number of seed-deterministic random partners.
fn subsampled_quotient(f: &GridFunction, beta: f64) -> f64 {
    let lat = f.lattice();
    let d = lat.dim();
    let n = lat.len();
    let counts = lat.counts().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
    let mut best = 0.0f64;
    let mut dirs: Vec<Vec<isize>> = Vec::new();
    for a in 0..d {
        let mut e = vec![0isize; d];
        e[a] = 1;
        dirs.push(e);
    }
    if d > 1 {
        dirs.push(vec![1isize; d]);
    }
    let max_count = *counts.iter().max().unwrap();
    for k in 0..n {
        let idx = lat.multi_index(k);
        let xk = lat.point(k);
        let mut step = 1usize;
        while step < max_count {
            for e in &dirs {
                let mut j = idx.clone();
                let mut ok = true;
                for a in 0..d {
                    let v = idx[a] as isize + e[a] * step as isize;
                    if v < 0 || v >= counts[a] as isize {
                        ok = false;
                        break;
                    }
                    j[a] = v as usize;
                }
                if ok {
                    let jf = lat.flat_index(&j);
                    let dd = dist(&xk, &lat.point(jf));
                    best = best.max(diff_norm(f, k, jf) / dd.powf(beta));
                }
            }
            step *= 2;
        }
        for _ in 0..RANDOM_PARTNERS {
            let jf = rng.random_range(0..n);
            if jf != k {
                let dd = dist(&xk, &lat.point(jf));
                best = best.max(diff_norm(f, k, jf) / dd.powf(beta));
            }
        }
    }
    best
}

/// Sup norm, gradient sup norm and a set of seminorms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoelderReport {
    pub sup_norm: f64,
    pub grad_sup_norm: Option<f64>,
    /// (β, [f]_β) in increasing β.
    pub seminorms: Vec<(f64, f64)>,
}

pub fn hoelder_report(f: &GridFunction, betas: &[f64]) -> HoelderReport {
    let mut b = betas.to_vec();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let grad = if f.lattice().len() >= 2 { Some(hoelder_seminorm(f, 1.0)) } else { None };
    HoelderReport {
        sup_norm: f.sup_norm(),
        grad_sup_norm: grad,
        seminorms: b.iter().map(|&x| (x, hoelder_seminorm(f, x))).collect(),
    }
}

/// [f]_{s+t} / ([f]_{r+t}^{s/r} [f]_t^{1-s/r}): an empirical lower bound on the constant of
/// the interpolation inequality.
pub fn interpolation_diagnostic(f: &GridFunction, s: f64, t: f64, r: f64) -> Result<f64> {
    if !(0.0 <= s && s <= r && r > 0.0 && r <= 1.0 && (0.0..1.0).contains(&t)) {
        return Err(Error::invalid(format!("need 0 <= s <= r <= 1, r > 0, 0 <= t < 1; got s={s}, t={t}, r={r}")));
    }
    let num = hoelder_seminorm(f, s + t);
    let top = hoelder_seminorm(f, r + t);
    let bottom = hoelder_seminorm(f, t);
    let q = s / r;
    let den = top.powf(q) * bottom.powf(1.0 - q);
    if !(den > 0.0) {
        return Err(Error::NotApplicable("denominator seminorms vanish".into()));
    }
    Ok(num / den)
}

/// ‖f‖_{1+γ} = ‖f‖_0 + ‖Df‖_0 + [Df]_γ under the ladder conventions.
pub fn norm_one_plus(f: &GridFunction, gamma: f64) -> f64 {
    let g = gradient_field(f);
    let top = if gamma >= 1.0 { gradient_field(&g).sup_norm() } else { hoelder_seminorm(&g, gamma) };
    f.sup_norm() + g.sup_norm() + top
}

/// Result of the shift-difference check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftDifferenceReport {
    pub gamma: f64,
    pub c_gamma: f64,
    pub norm: f64,
    pub samples: usize,
    pub max_ratio: f64,
    /// Samples with ratio above 1 + 1e-9.
    pub violations: usize,
}

impl ShiftDifferenceReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// `c_γ = 3^{1-γ} 2^γ`.
pub fn shift_constant(gamma: f64) -> f64 {
    3f64.powf(1.0 - gamma) * 2f64.powf(gamma)
}

/// Samples (u, v, x) with |x| ≤ 1 and all four points inside the box, and reports
/// max |f(u+x) - f(u) - f(v+x) + f(v)| / (c_γ ‖f‖_{1+γ} |u-v| |x|^γ).
pub fn shift_difference_check(f: &GridFunction, gamma: f64, samples: usize, seed: u64) -> Result<ShiftDifferenceReport> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1]"));
    }
    if f.arity() != 1 {
        return Err(Error::invalid("shift_difference_check expects a scalar function"));
    }
    let lat = f.lattice();
    let d = lat.dim();
    let c = shift_constant(gamma);
    let norm = norm_one_plus(f, gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = (0..d).map(|a| lat.half_widths[a]).fold(f64::INFINITY, f64::min);
    let shift_max = 1.0f64.min(reach) / (d as f64).sqrt();
    let mut max_ratio = 0.0f64;
    let mut violations = 0;
    let mut u = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut ux = vec![0.0; d];
    let mut vx = vec![0.0; d];
    for _ in 0..samples {
        for a in 0..d {
            x[a] = rng.random_range(-shift_max..=shift_max);
            // Keep u, u+x, v, v+x inside the box.
            let lo = lat.lower(a) + x[a].min(0.0).abs();
            let hi = lat.upper(a) - x[a].max(0.0);
            u[a] = rng.random_range(lo..=hi);
            v[a] = rng.random_range(lo..=hi);
            ux[a] = u[a] + x[a];
            vx[a] = v[a] + x[a];
        }
        let lhs = (f.eval_scalar(&ux) - f.eval_scalar(&u) - f.eval_scalar(&vx) + f.eval_scalar(&v)).abs();
        let uv = dist(&u, &v);
        let xn = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let den = c * norm * uv * xn.powf(gamma);
        if den <= 0.0 {
            continue;
        }
        let ratio = lhs / den;
        if ratio > 1.0 + 1e-9 {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    Ok(ShiftDifferenceReport { gamma, c_gamma: c, norm, samples, max_ratio, violations })
}
