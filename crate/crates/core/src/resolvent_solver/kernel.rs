//! Time-integrated resolvent kernel on a one-dimensional lattice.
//!
//! The source is represented by its piecewise-linear interpolant. Writing it as a sum of
//! cell ramps, u(x_i) = Σ_m (g_m - g_{m+1}) A_G[m-i] + g_right·E, where
//! A_G[q] = ∫ e^{-λt} h^{-1}∫_{qh}^{(q+1)h} F_t(z - kt) dz dt is a time-integrated cell average
//! of the distribution function F_t of the noise at time t. Differentiating in x replaces the
//! cell average by the CDF difference at the cell ends, so Du needs only
//! A_F[q] = ∫ e^{-λt} F_t(qh - kt) dt. Both tables are Toeplitz in the lattice index.

use crate::density_engine::StableLaw1d;
use crate::error::{Error, Result};
use crate::quadrature::gl8;
use rayon::prelude::*;
use std::sync::Arc;

const MAX_TABLE_WORK: usize = 400_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Layout {
    /// Nodes 0..n with the source held constant beyond both ends.
    Clamped { n: usize },
    /// `n` distinct nodes of one period; `images` periods on either side enter the sum.
    Periodic { n: usize, images: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct ResolventKernel {
    pub layout: Layout,
    pub h: f64,
    q_lo: i64,
    ag: Vec<f64>,
    af: Vec<f64>,
    /// ∫_{t_min}^{t_max} e^{-λt} dt.
    e_total: f64,
    /// (1 - e^{-λ t_min})/λ, the part of the time integral treated as a delta.
    sub: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub time_nodes: usize,
}

pub(crate) struct KernelParams {
    pub alpha: f64,
    /// Scale σ with ψ(u) = (σ|u|)^α.
    pub sigma: f64,
    pub lambda: f64,
    pub drift: f64,
    pub h: f64,
    pub layout: Layout,
    /// Panel width in ln t.
    pub panel_width: f64,
    /// t_min is where σ t^{1/α} = `t_min_factor`·h.
    pub t_min_factor: f64,
}

impl ResolventKernel {
    pub fn build(law: Arc<StableLaw1d>, p: &KernelParams) -> Result<Self> {
        let (q_lo, q_hi) = match p.layout {
            Layout::Clamped { n } => (-(n as i64 - 1), n as i64 - 1),
            Layout::Periodic { n, images } => {
                let (m_lo, m_hi) = periodic_range(n, images);
                (m_lo - (n as i64 - 1), m_hi + 1)
            }
        };
        let t_max = 45.0 / p.lambda;
        let t_min = (p.t_min_factor * p.h / p.sigma).powf(p.alpha).min(1e-3 * t_max);
        let (s0, s1) = (t_min.ln(), t_max.ln());
        let panels = ((s1 - s0) / p.panel_width).ceil().max(1.0) as usize;
        let rule = gl8();
        let mut ts = Vec::with_capacity(panels * rule.nodes.len());
        let mut ws = Vec::with_capacity(panels * rule.nodes.len());
        let width = (s1 - s0) / panels as f64;
        for k in 0..panels {
            let a = s0 + k as f64 * width;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = a + 0.5 * width * (x + 1.0);
                let t = s.exp();
                ts.push(t);
                ws.push(0.5 * width * w * t * (-p.lambda * t).exp());
            }
        }
        let nq = (q_hi - q_lo + 1) as usize;
        if nq.saturating_mul(ts.len()) > MAX_TABLE_WORK {
            return Err(Error::QuadratureBudgetExceeded(format!(
                "{} kernel offsets × {} time nodes exceeds the budget",
                nq,
                ts.len()
            )));
        }
        let scales: Vec<(f64, f64)> = ts.iter().map(|&t| (p.sigma * t.powf(1.0 / p.alpha), p.drift * t)).collect();
        let h = p.h;
        let pairs: Vec<(f64, f64)> = (0..nq)
            .into_par_iter()
            .map(|k| {
                let q = (q_lo + k as i64) as f64;
                let (mut g, mut f) = (0.0, 0.0);
                for (&(sig, shift), w) in scales.iter().zip(&ws) {
                    let a = (q * h - shift) / sig;
                    let b = ((q + 1.0) * h - shift) / sig;
                    f += w * law.cdf(a);
                    g += w * (sig / h) * (law.cdf_integral(b) - law.cdf_integral(a));
                }
                (g, f)
            })
            .collect();
        let (ag, af) = pairs.into_iter().unzip();
        let e_total = ((-p.lambda * t_min).exp() - (-p.lambda * t_max).exp()) / p.lambda;
        let sub = -(-p.lambda * t_min).exp_m1() / p.lambda;
        Ok(ResolventKernel { layout: p.layout, h, q_lo, ag, af, e_total, sub, t_min, t_max, time_nodes: ts.len() })
    }

    #[inline]
    fn ag(&self, q: i64) -> f64 {
        self.ag[(q - self.q_lo) as usize]
    }

    #[inline]
    fn af(&self, q: i64) -> f64 {
        self.af[(q - self.q_lo) as usize]
    }

    /// Total weight Σ of the kernel, (1 - e^{-λ t_max})/λ.
    pub fn mass(&self) -> f64 {
        self.sub + self.e_total
    }

    /// u and Du at the lattice nodes for nodal source values `g` (length of the lattice).
    pub fn apply(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.layout {
            Layout::Clamped { n } => {
                assert_eq!(g.len(), n);
                let delta: Vec<f64> = g.windows(2).map(|w| w[0] - w[1]).collect();
                let right = g[n - 1];
                let h = self.h;
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let ii = i as i64;
                        let mut u = self.sub * g[i] + self.e_total * right;
                        let mut du = 0.0;
                        for (m, d) in delta.iter().enumerate() {
                            if *d == 0.0 {
                                continue;
                            }
                            let q = m as i64 - ii;
                            u += d * self.ag(q);
                            du -= d * (self.af(q + 1) - self.af(q));
                        }
                        let gl = if i == 0 { g[0] } else { g[i - 1] };
                        let gr = if i + 1 == n { g[n - 1] } else { g[i + 1] };
                        du = du / h + self.sub * (gr - gl) / (2.0 * h);
                        (u, du)
                    })
                    .unzip()
            }
            Layout::Periodic { n, images } => {
                // n distinct nodes plus the repeated last node.
                assert_eq!(g.len(), n + 1);
                let period = &g[..n];
                let mean = period.iter().sum::<f64>() / n as f64;
                let (m_lo, m_hi) = periodic_range(n, images);
                let value = |m: i64| -> f64 {
                    if m <= m_lo || m > m_hi {
                        0.0
                    } else {
                        period[m.rem_euclid(n as i64) as usize] - mean
                    }
                };
                let delta: Vec<f64> = (m_lo..=m_hi).map(|m| value(m) - value(m + 1)).collect();
                let h = self.h;
                let (mut u, mut du): (Vec<f64>, Vec<f64>) = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let ii = i as i64;
                        let mut u = mean * self.mass() + self.sub * (period[i] - mean);
                        let mut du = 0.0;
                        for (k, d) in delta.iter().enumerate() {
                            if *d == 0.0 {
                                continue;
                            }
                            let q = m_lo + k as i64 - ii;
                            u += d * self.ag(q);
                            du -= d * (self.af(q + 1) - self.af(q));
                        }
                        let gl = period[(i + n - 1) % n];
                        let gr = period[(i + 1) % n];
                        du = du / h + self.sub * (gr - gl) / (2.0 * h);
                        (u, du)
                    })
                    .unzip();
                u.push(u[0]);
                du.push(du[0]);
                (u, du)
            }
        }
    }

    /// Dense matrix of the map g ↦ Du on the distinct nodes (row i, column j).
    pub fn gradient_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = match self.layout {
            Layout::Clamped { n } | Layout::Periodic { n, .. } => n,
        };
        let len = match self.layout {
            Layout::Clamped { n } => n,
            Layout::Periodic { n, .. } => n + 1,
        };
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; len];
                e[j] = 1.0;
                if let Layout::Periodic { n, .. } = self.layout {
                    if j == 0 {
                        e[n] = 1.0;
                    }
                }
                let (_, du) = self.apply(&e);
                du[..n].to_vec()
            })
            .collect();
        nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }
}

/// Index range [m_lo, m_hi] of cells entering the periodic sum.
fn periodic_range(n: usize, images: usize) -> (i64, i64) {
    let n = n as i64;
    let k = images as i64;
    (-k * n - 1, (k + 1) * n)
}
