//! Frequency-domain quadrature for the inversion formula.

use crate::error::{Error, Result};
use crate::quadrature::{geometric_edges, gl8};
use crate::stable_model::StableSpec;

/// Tail level for the cutoff: e^{-t C R^α} is below this.
pub const TAIL_LEVEL: f64 = 1e-16;
const MAX_NODES_PER_AXIS: usize = 400_000;

/// Nodes and weights on [0, R] for integrands like cos(xz)·e^{-c z^α}.
///
/// `zeta` is the natural frequency scale (c^{-1/α}); panels are geometric below `zeta`,
/// then no wider than `osc_width` (oscillation) and a fraction of the local decay scale.
pub fn half_line_nodes(alpha: f64, zeta: f64, cutoff: f64, osc_width: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = gl8();
    let mut z = Vec::new();
    let mut w = Vec::new();
    let first = (1e-9 * zeta).min(cutoff);
    rule.push_mapped(0.0, first, &mut z, &mut w);
    let knee = zeta.min(cutoff);
    if knee > first {
        for e in geometric_edges(first, knee, 2.0).windows(2) {
            let hi = e[1];
            let mut lo = e[0];
            // Respect the oscillation limit inside geometric panels too.
            while hi - lo > osc_width {
                rule.push_mapped(lo, lo + osc_width, &mut z, &mut w);
                lo += osc_width;
            }
            rule.push_mapped(lo, hi, &mut z, &mut w);
        }
    }
    let mut lo = knee;
    while lo < cutoff {
        let decay = 0.25 * zeta * (lo / zeta).powf(1.0 - alpha).max(1.0);
        let width = decay.min(osc_width).min(cutoff - lo);
        let hi = if cutoff - (lo + width) < 1e-12 * cutoff { cutoff } else { lo + width };
        rule.push_mapped(lo, hi, &mut z, &mut w);
        lo = hi;
        if z.len() > MAX_NODES_PER_AXIS {
            return Err(Error::CutoffTooSmall(format!(
                "frequency grid needs more than {MAX_NODES_PER_AXIS} nodes per axis"
            )));
        }
    }
    Ok((z, w))
}

/// Tensor-product frequency grid on the half space z_1 ≥ 0 (the integrands are even),
/// with weights already multiplied by e^{-tψ(z)} and the factor 2.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub dim: usize,
    pub cutoff: f64,
    /// Smallest panel width used away from the origin.
    pub step: f64,
    /// Per-axis nodes; axis 0 covers [0, R], the others [-R, R].
    pub axes: Vec<Vec<f64>>,
    /// Flattened tensor weights (axis 0 slowest).
    pub weights: Vec<f64>,
}

impl FrequencyGrid {
    /// Grid for time `t` resolving spatial points with |x_j| ≤ `x_max`.
    pub fn new(spec: &StableSpec, t: f64, c_min: f64, x_max: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("time must be positive, got {t}")));
        }
        let a = spec.alpha;
        let zeta = (t * c_min).powf(-1.0 / a);
        let cutoff = zeta * (-TAIL_LEVEL.ln()).powf(1.0 / a);
        let d = spec.dim;
        let osc = if d == 1 { 1.5 } else { 1.2 };
        let osc_width = osc / x_max.max(1e-3);
        let (z0, w0) = half_line_nodes(a, zeta, cutoff, osc_width)?;
        let step = osc_width.min(0.25 * zeta);
        let mut axes = vec![z0.clone()];
        let mut axis_w = vec![w0.iter().map(|w| 2.0 * w).collect::<Vec<_>>()];
        for _ in 1..d {
            let mut z = Vec::with_capacity(2 * z0.len());
            let mut w = Vec::with_capacity(2 * z0.len());
            for (zi, wi) in z0.iter().zip(&w0).rev() {
                z.push(-zi);
                w.push(*wi);
            }
            z.extend_from_slice(&z0);
            w.extend_from_slice(&w0);
            axes.push(z);
            axis_w.push(w);
        }
        let total: usize = axes.iter().map(|a| a.len()).product();
        if total > 40_000_000 {
            return Err(Error::CutoffTooSmall(format!("{total} frequency nodes exceed the budget")));
        }
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        let mut z = vec![0.0; d];
        for _ in 0..total {
            let mut wt = 1.0;
            for k in 0..d {
                z[k] = axes[k][idx[k]];
                wt *= axis_w[k][idx[k]];
            }
            weights.push(wt * (-t * spec.characteristic_exponent(&z)).exp());
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(FrequencyGrid { dim: d, cutoff, step, axes, weights })
    }

    /// Raw inversion integral (2π)^{-d}∫cos⟨x,z⟩ e^{-tψ} dz and, if requested, the gradient
    /// -(2π)^{-d}∫ z sin⟨x,z⟩ e^{-tψ} dz.
    pub fn invert(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let norm = (2.0 * std::f64::consts::PI).powi(self.dim as i32);
        match self.dim {
            1 => {
                let mut s = 0.0;
                let mut g = 0.0;
                let want = grad.is_some();
                for (z, w) in self.axes[0].iter().zip(&self.weights) {
                    let (sn, cs) = (x[0] * z).sin_cos();
                    s += w * cs;
                    if want {
                        g -= w * z * sn;
                    }
                }
                if let Some(out) = grad {
                    out[0] = g / norm;
                }
                s / norm
            }
            2 => {
                let (a0, a1) = (&self.axes[0], &self.axes[1]);
                let c1: Vec<(f64, f64)> = a1.iter().map(|z| (x[1] * z).sin_cos()).collect();
                let n1 = a1.len();
                let mut s = 0.0;
                let (mut g0, mut g1) = (0.0, 0.0);
                let want = grad.is_some();
                for (i, z0) in a0.iter().enumerate() {
                    let (s0, c0) = (x[0] * z0).sin_cos();
                    let row = &self.weights[i * n1..(i + 1) * n1];
                    let (mut wc, mut ws, mut wzc, mut wzs) = (0.0, 0.0, 0.0, 0.0);
                    for ((w, (sn, cs)), z1) in row.iter().zip(&c1).zip(a1) {
                        wc += w * cs;
                        ws += w * sn;
                        if want {
                            wzc += w * z1 * cs;
                            wzs += w * z1 * sn;
                        }
                    }
                    // cos(a+b) = c0 c1 - s0 s1, sin(a+b) = s0 c1 + c0 s1.
                    s += c0 * wc - s0 * ws;
                    if want {
                        g0 -= z0 * (s0 * wc + c0 * ws);
                        g1 -= s0 * wzc + c0 * wzs;
                    }
                }
                if let Some(out) = grad {
                    out[0] = g0 / norm;
                    out[1] = g1 / norm;
                }
                s / norm
            }
            d => {
                let mut idx = vec![0usize; d];
                let mut s = 0.0;
                let mut g = vec![0.0; d];
                let want = grad.is_some();
                for w in &self.weights {
                    let mut ph = 0.0;
                    for k in 0..d {
                        ph += x[k] * self.axes[k][idx[k]];
                    }
                    let (sn, cs) = ph.sin_cos();
                    s += w * cs;
                    if want {
                        for k in 0..d {
                            g[k] -= w * self.axes[k][idx[k]] * sn;
                        }
                    }
                    for k in (0..d).rev() {
                        idx[k] += 1;
                        if idx[k] < self.axes[k].len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
                if let Some(out) = grad {
                    for k in 0..d {
                        out[k] = g[k] / norm;
                    }
                }
                s / norm
            }
        }
    }
}
