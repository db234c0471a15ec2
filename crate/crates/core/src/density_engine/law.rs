//! Tabulated one-dimensional standard symmetric stable law, e^{-|u|^α} in frequency.
//!
//! Values, derivatives and survival function come from Fourier inversion at the nodes of
//! [0, W]; density is interpolated with cubic Hermite polynomials and the survival function
//! between nodes subtracts the exact integral of that interpolant. Beyond W the classical power series in w^{-α} takes over (convergent for
//! α ≤ 1, asymptotic above), and W is chosen so that series is accurate to round-off.

use super::fourier::half_line_nodes;
use crate::error::Result;
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

const TABLE_STEP: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct StableLaw1d {
    alpha: f64,
    w_max: f64,
    pdf: Vec<f64>,
    dpdf: Vec<f64>,
    /// Survival function S(w) = P(W > w) at table nodes.
    sf: Vec<f64>,
    /// T(w) = ∫_0^w S at table nodes.
    sf_int: Vec<f64>,
    /// Series coefficients: p(w) ≈ Σ pc[n] w^{-nα-1}, S ≈ Σ sc[n] w^{-nα}, p' ≈ Σ dc[n] w^{-nα-2}.
    pc: Vec<f64>,
    sc: Vec<f64>,
    dc: Vec<f64>,
}

impl StableLaw1d {
    pub fn new(alpha: f64) -> Result<Self> {
        let (pc, sc, dc, w_max) = series_and_switch(alpha);
        let zeta = 1.0;
        let cutoff = (-super::fourier::TAIL_LEVEL.ln()).powf(1.0 / alpha);
        let (z, w) = half_line_nodes(alpha, zeta, cutoff, 1.5 / w_max)?;
        let ew: Vec<f64> = z.iter().zip(&w).map(|(z, w)| w * (-z.powf(alpha)).exp() / PI).collect();
        let n = (w_max / TABLE_STEP).round() as usize + 1;
        let mut pdf = Vec::with_capacity(n);
        let mut dpdf = Vec::with_capacity(n);
        for k in 0..n {
            let x = k as f64 * TABLE_STEP;
            let (mut p, mut d) = (0.0, 0.0);
            for (zz, e) in z.iter().zip(&ew) {
                let (sn, cs) = (x * zz).sin_cos();
                p += e * cs;
                d -= e * zz * sn;
            }
            pdf.push(p);
            dpdf.push(d);
        }
        // S(x) = 1/2 - (1/π)∫ e^{-z^α} sin(xz)/z dz at the nodes.
        let sf = (0..n)
            .map(|k| {
                let x = k as f64 * TABLE_STEP;
                0.5 - z.iter().zip(&ew).map(|(zz, e)| e * (x * zz).sin() / zz).sum::<f64>()
            })
            .collect();
        let mut law = StableLaw1d { alpha, w_max, pdf, dpdf, sf, sf_int: Vec::new(), pc, sc, dc };
        let mut acc = vec![0.0; n];
        for k in 1..n {
            acc[k] = acc[k - 1] + law.cell_sf_integral(k - 1, 1.0);
        }
        law.sf_int = acc;
        Ok(law)
    }

    /// Process-wide cache keyed by α; tables are expensive to build and immutable.
    pub fn shared(alpha: f64) -> Result<Arc<StableLaw1d>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<StableLaw1d>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(l) = cache.lock().unwrap().get(&alpha.to_bits()) {
            return Ok(l.clone());
        }
        let law = Arc::new(StableLaw1d::new(alpha)?);
        cache.lock().unwrap().insert(alpha.to_bits(), law.clone());
        Ok(law)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Switch point between table and series.
    pub fn series_threshold(&self) -> f64 {
        self.w_max
    }

    #[inline]
    fn locate(&self, w: f64) -> (usize, f64) {
        let s = w / TABLE_STEP;
        let mut i = s as usize;
        if i >= self.pdf.len() - 1 {
            i = self.pdf.len() - 2;
        }
        (i, s - i as f64)
    }

    fn series(coef: &[f64], w: f64, alpha: f64, extra: f64) -> f64 {
        let q = w.powf(-alpha);
        let mut pw = q;
        let mut s = 0.0;
        for c in coef {
            s += c * pw;
            pw *= q;
        }
        s * w.powf(-extra)
    }

    /// Density p(w).
    #[inline]
    pub fn pdf(&self, w: f64) -> f64 {
        let a = w.abs();
        if a >= self.w_max {
            return Self::series(&self.pc, a, self.alpha, 1.0);
        }
        let (i, t) = self.locate(a);
        let h = TABLE_STEP;
        let (f0, f1, m0, m1) = (self.pdf[i], self.pdf[i + 1], self.dpdf[i], self.dpdf[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * h * m1
    }

    /// Derivative p'(w).
    pub fn dpdf(&self, w: f64) -> f64 {
        let a = w.abs();
        let sgn = if w < 0.0 { -1.0 } else { 1.0 };
        if a >= self.w_max {
            return sgn * Self::series(&self.dc, a, self.alpha, 2.0);
        }
        let (i, t) = self.locate(a);
        let h = TABLE_STEP;
        let (f0, f1, m0, m1) = (self.pdf[i], self.pdf[i + 1], self.dpdf[i], self.dpdf[i + 1]);
        let t2 = t * t;
        let d = (6.0 * t2 - 6.0 * t) * (f0 - f1) / h + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1;
        sgn * d
    }

    /// Survival function P(W > w).
    pub fn sf(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 1.0 - self.sf(-w);
        }
        if w >= self.w_max {
            return Self::series(&self.sc, w, self.alpha, 0.0);
        }
        let (i, t) = self.locate(w);
        let h = TABLE_STEP;
        let (f0, f1, m0, m1) = (self.pdf[i], self.pdf[i + 1], self.dpdf[i], self.dpdf[i + 1]);
        // Exact integral of the Hermite cubic over [0, t·h].
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let int = h
            * ((t4 / 2.0 - t3 + t) * f0
                + (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * h * m0
                + (-t4 / 2.0 + t3) * f1
                + (t4 / 4.0 - t3 / 3.0) * h * m1);
        self.sf[i] - int
    }

    /// Distribution function P(W ≤ w).
    pub fn cdf(&self, w: f64) -> f64 {
        self.sf(-w)
    }

    /// ∫_0^{τh} S over table cell `i`, with S the node value minus the Hermite integral.
    fn cell_sf_integral(&self, i: usize, t: f64) -> f64 {
        let h = TABLE_STEP;
        let (f0, f1, m0, m1) = (self.pdf[i], self.pdf[i + 1], self.dpdf[i], self.dpdf[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let q = (t5 / 10.0 - t4 / 4.0 + t2 / 2.0) * f0
            + (t5 / 20.0 - t4 / 6.0 + t3 / 6.0) * h * m0
            + (-t5 / 10.0 + t4 / 4.0) * f1
            + (t5 / 20.0 - t4 / 12.0) * h * m1;
        h * (self.sf[i] * t - h * q)
    }

    /// T(w) = ∫_0^w S(v) dv for w ≥ 0.
    pub fn sf_integral(&self, w: f64) -> f64 {
        debug_assert!(w >= 0.0);
        if w >= self.w_max {
            let a = self.alpha;
            let mut s = *self.sf_int.last().unwrap();
            for (n, c) in self.sc.iter().enumerate() {
                let e = 1.0 - (n + 1) as f64 * a;
                s += if e.abs() < 1e-12 {
                    c * (w / self.w_max).ln()
                } else {
                    c * (w.powf(e) - self.w_max.powf(e)) / e
                };
            }
            return s;
        }
        let (i, t) = self.locate(w);
        self.sf_int[i] + self.cell_sf_integral(i, t)
    }

    /// ∫_0^s F(v) dv for any real s (negative when s < 0).
    pub fn cdf_integral(&self, s: f64) -> f64 {
        if s >= 0.0 {
            s - self.sf_integral(s)
        } else {
            // F(-v) = S(v)
            -self.sf_integral(-s)
        }
    }
}

/// Series coefficients for p, S and p' and the smallest switch point (from a fixed ladder)
/// where the series reaches relative accuracy 1e-15 before its terms start to grow.
#[allow(clippy::type_complexity)]
fn series_and_switch(alpha: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let terms = |n: usize, shift: f64| -> f64 {
        // (-1)^{n+1}/n! Γ(nα + shift) sin(nπα/2) / π
        let nf = n as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let lg = ln_gamma(nf * alpha + shift) - ln_gamma(nf + 1.0);
        sign * lg.exp() * (nf * PI * alpha / 2.0).sin() / PI
    };
    for &w in &[4.0f64, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0] {
        let q = w.powf(-alpha);
        let mut best = f64::INFINITY;
        let mut first = 0.0;
        let mut n_used = 0;
        for n in 1..400 {
            let mag = (terms(n, 1.0) * q.powi(n as i32)).abs();
            let mag_bound = (ln_gamma(n as f64 * alpha + 2.0) - ln_gamma(n as f64 + 1.0)).exp() * q.powi(n as i32);
            if n == 1 {
                first = mag.max(1e-300);
            }
            if mag_bound > best * 1.0001 && n > 3 {
                break;
            }
            best = best.min(mag_bound);
            n_used = n;
            if mag_bound < 1e-16 * first {
                break;
            }
        }
        if best < 1e-15 * first || w == 48.0 {
            let pc = (1..=n_used).map(|n| terms(n, 1.0)).collect();
            let sc = (1..=n_used).map(|n| terms(n, 0.0)).collect();
            let dc = (1..=n_used).map(|n| -terms(n, 2.0)).collect();
            return (pc, sc, dc, w);
        }
    }
    unreachable!()
}
