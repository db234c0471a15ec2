//! Transition densities p_t by Fourier inversion, their gradients, tables and the
//! constant c₀ = ‖Dp₁‖_{L¹}.

mod fourier;
mod law;

pub use fourier::FrequencyGrid;
pub use law::StableLaw1d;

use crate::error::{Error, Result};
use crate::nonlocal_calculus::Lattice;
use crate::stable_model::StableSpec;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Default quadrature tolerance, used for the non-negativity invariant of tables.
pub const QUAD_TOL: f64 = 1e-8;

fn angular_directions(d: usize) -> usize {
    match d {
        1 => 2,
        2 => 720,
        _ => 2000,
    }
}

/// Effective constant c of a one-dimensional spec: ψ(u) = c|u|^α.
fn one_dim_constant(spec: &StableSpec) -> f64 {
    spec.characteristic_exponent(&[1.0])
}

/// Density and the unclamped value, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityValue {
    pub value: f64,
    pub raw: f64,
}

/// p_t(x) with its raw (possibly slightly negative) quadrature value.
pub fn density_with_raw(spec: &StableSpec, t: f64, x: &[f64]) -> Result<DensityValue> {
    check_point(spec, x)?;
    let c = spec.nondegeneracy_constant(angular_directions(spec.dim))?;
    let xm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grid = FrequencyGrid::new(spec, t, c, xm)?;
    let raw = grid.invert(x, None);
    Ok(DensityValue { value: raw.max(0.0), raw })
}

/// p_t(x) = (2π)^{-d} ∫ cos⟨x,z⟩ e^{-tψ(z)} dz, clamped at zero.
pub fn density(spec: &StableSpec, t: f64, x: &[f64]) -> Result<f64> {
    Ok(density_with_raw(spec, t, x)?.value)
}

/// Dp_t(x) = -(2π)^{-d} ∫ z sin⟨x,z⟩ e^{-tψ(z)} dz.
pub fn density_gradient(spec: &StableSpec, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_point(spec, x)?;
    let c = spec.nondegeneracy_constant(angular_directions(spec.dim))?;
    let xm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grid = FrequencyGrid::new(spec, t, c, xm)?;
    let mut g = vec![0.0; spec.dim];
    grid.invert(x, Some(&mut g));
    Ok(g)
}

fn check_point(spec: &StableSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("evaluation point must be finite"));
    }
    Ok(())
}

/// Memoizing evaluator: one inversion setup at t = 1, every other time by the scaling law
/// p_t(x) = t^{-d/α} p_1(t^{-1/α} x).
#[derive(Debug, Clone)]
pub struct DensityEngine {
    spec: StableSpec,
    c_min: f64,
    law: Option<(Arc<StableLaw1d>, f64)>,
}

impl DensityEngine {
    pub fn new(spec: &StableSpec) -> Result<Self> {
        let c_min = spec.nondegeneracy_constant(angular_directions(spec.dim))?;
        let law = if spec.dim == 1 {
            let sigma = one_dim_constant(spec).powf(1.0 / spec.alpha);
            Some((StableLaw1d::shared(spec.alpha)?, sigma))
        } else {
            None
        };
        Ok(DensityEngine { spec: spec.clone(), c_min, law })
    }

    pub fn spec(&self) -> &StableSpec {
        &self.spec
    }

    /// The standardized law and its scale σ (d = 1 only): p_t(x) = p_std(x/(σt^{1/α}))/(σt^{1/α}).
    pub fn law(&self) -> Option<(&StableLaw1d, f64)> {
        self.law.as_ref().map(|(l, s)| (l.as_ref(), *s))
    }

    /// Values and gradients of p_t at the given points.
    pub fn evaluate(&self, t: f64, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Option<FrequencyGrid>)> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("time must be positive, got {t}")));
        }
        let d = self.spec.dim;
        let a = self.spec.alpha;
        let tau = t.powf(1.0 / a);
        if let Some((law, sigma)) = &self.law {
            let s = sigma * tau;
            let vals = points.iter().map(|x| law.pdf(x[0] / s) / s).collect();
            let grads = points.iter().map(|x| law.dpdf(x[0] / s) / (s * s)).collect();
            return Ok((vals, grads, None));
        }
        let xm = points
            .iter()
            .flat_map(|x| x.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / tau;
        let grid = FrequencyGrid::new(&self.spec, 1.0, self.c_min, xm)?;
        let factor = tau.powi(-(d as i32));
        let res: Vec<(f64, Vec<f64>)> = points
            .par_iter()
            .map(|x| {
                let y: Vec<f64> = x.iter().map(|v| v / tau).collect();
                let mut g = vec![0.0; d];
                let v = grid.invert(&y, Some(&mut g));
                g.iter_mut().for_each(|c| *c *= factor / tau);
                (v * factor, g)
            })
            .collect();
        let mut vals = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len() * d);
        for (v, g) in res {
            vals.push(v);
            grads.extend(g);
        }
        Ok((vals, grads, Some(grid)))
    }

    /// Density table on `lattice` at time `t`.
    pub fn tabulate(&self, t: f64, lattice: &Lattice) -> Result<DensityTable> {
        if lattice.dim() != self.spec.dim {
            return Err(Error::DimensionMismatch { expected: self.spec.dim, got: lattice.dim() });
        }
        let points = lattice.points();
        let (raw, gradient, grid) = self.evaluate(t, &points)?;
        let min_raw = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let values: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
        let (cutoff, step, method) = match &grid {
            Some(g) => (g.cutoff, g.step, "fourier inversion at t=1, rescaled".to_string()),
            None => (
                (-fourier::TAIL_LEVEL.ln()).powf(1.0 / self.spec.alpha),
                1.5 / self.law.as_ref().unwrap().0.series_threshold(),
                "standardized 1d law (inversion table + tail series), rescaled".to_string(),
            ),
        };
        let p0 = self.evaluate(t, &[vec![0.0; self.spec.dim]])?.0[0];
        let boundary = boundary_max(lattice, &values);
        Ok(DensityTable {
            t,
            lattice: lattice.clone(),
            values,
            gradient,
            quad: QuadInfo { cutoff, step },
            scaled_from_unit_time: true,
            method,
            min_raw,
            boundary_ratio: boundary / p0,
            captured_mass: self.captured_mass(t, lattice),
        })
    }

    /// Mass of the box under p_t (d = 1 only, from the survival function).
    fn captured_mass(&self, t: f64, lattice: &Lattice) -> Option<f64> {
        let (law, sigma) = self.law.as_ref()?;
        let s = sigma * t.powf(1.0 / self.spec.alpha);
        let (lo, hi) = (lattice.lower(0), lattice.upper(0));
        Some(law.cdf(hi / s) - law.cdf(lo / s))
    }

    /// Half-width of a centred box whose boundary density is below `ratio`·p_t(0), doubling
    /// from `start` up to `cap`. Returns the half-width and the ratio actually reached.
    pub fn auto_box(&self, t: f64, start: f64, cap: f64, ratio: f64) -> Result<(f64, f64)> {
        let d = self.spec.dim;
        let p0 = self.evaluate(t, &[vec![0.0; d]])?.0[0];
        let mut x = start;
        loop {
            // Probe the axes and the diagonal of the boundary.
            let mut probes = Vec::new();
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = x;
                probes.push(e);
            }
            probes.push(vec![x; d]);
            let vals = self.evaluate(t, &probes)?.0;
            let r = vals.iter().cloned().fold(0.0f64, f64::max) / p0;
            if r < ratio || x * 2.0 > cap {
                return Ok((x, r));
            }
            x *= 2.0;
        }
    }
}

fn boundary_max(lattice: &Lattice, values: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for k in 0..lattice.len() {
        let idx = lattice.multi_index(k);
        let on_edge = idx.iter().zip(lattice.counts()).any(|(&i, &n)| i == 0 || i == n - 1);
        if on_edge {
            m = m.max(values[k]);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadInfo {
    /// Frequency cutoff R at unit time.
    pub cutoff: f64,
    /// Frequency panel width away from the origin.
    pub step: f64,
}

/// p_t and Dp_t sampled on a lattice.
#[derive(Debug, Clone, Serialize)]
pub struct DensityTable {
    pub t: f64,
    pub lattice: Lattice,
    pub values: Vec<f64>,
    /// Point-major gradient components.
    pub gradient: Vec<f64>,
    pub quad: QuadInfo,
    pub scaled_from_unit_time: bool,
    pub method: String,
    /// Most negative raw quadrature value before clamping.
    pub min_raw: f64,
    /// max boundary density / p_t(0).
    pub boundary_ratio: f64,
    /// Exact box mass when available (d = 1).
    pub captured_mass: Option<f64>,
}

impl DensityTable {
    pub fn riemann_mass(&self) -> f64 {
        let hd = self.lattice.spacing.powi(self.lattice.dim() as i32);
        self.values.iter().sum::<f64>() * hd
    }

    /// Largest |p(x) - p(-x)| over the lattice (the box must be centred).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|k| (self.values[k] - self.values[n - 1 - k]).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.lattice.dim();
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("p".into());
        header.extend((1..=d).map(|k| format!("dp{k}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.values.len() {
            let mut row: Vec<String> = self.lattice.point(k).iter().map(|v| format!("{v:.12e}")).collect();
            row.push(format!("{:.15e}", self.values[k]));
            row.extend(self.gradient[k * d..(k + 1) * d].iter().map(|v| format!("{v:.15e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }
}

/// Tabulate p_t on a lattice (memoized through the unit-time inversion).
pub fn tabulate(spec: &StableSpec, t: f64, lattice: &Lattice) -> Result<DensityTable> {
    DensityEngine::new(spec)?.tabulate(t, lattice)
}

/// Breakdown of the c₀ estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradL1Estimate {
    pub value: f64,
    pub lattice_sum: f64,
    /// Analytic tail beyond the box (d = 1: 2p₁(X) by monotone tails), zero otherwise.
    pub tail: f64,
    pub half_width: f64,
    pub spacing: f64,
    /// Boundary density over p₁(0) at the chosen box.
    pub boundary_ratio: f64,
}

/// c₀ = ‖Dp₁‖_{L¹} as a lattice Riemann sum.
pub fn grad_l1_norm(spec: &StableSpec) -> Result<f64> {
    Ok(grad_l1_estimate(spec, None)?.value)
}

/// c₀ with an explicit lattice spacing (defaults scale with the law's width).
pub fn grad_l1_estimate(spec: &StableSpec, spacing: Option<f64>) -> Result<GradL1Estimate> {
    let eng = DensityEngine::new(spec)?;
    let d = spec.dim;
    if d == 1 {
        let (law, sigma) = eng.law().unwrap();
        let h = spacing.unwrap_or(0.01 * sigma);
        let (half, ratio) = eng.auto_box(1.0, 8.0 * sigma, 4000.0 * sigma, 1e-10)?;
        let n = (half / h).round() as usize;
        let half = n as f64 * h;
        let mut sum = 0.0;
        for k in 1..=n {
            sum += law.dpdf(k as f64 * h / sigma).abs();
        }
        let lattice_sum = 2.0 * sum * h / (sigma * sigma);
        let tail = 2.0 * law.pdf(half / sigma) / sigma;
        return Ok(GradL1Estimate {
            value: lattice_sum + tail,
            lattice_sum,
            tail,
            half_width: half,
            spacing: h,
            boundary_ratio: ratio,
        });
    }
    let scale = eng.c_min.powf(-1.0 / spec.alpha);
    let h = spacing.unwrap_or(0.25 * scale);
    let (half, ratio) = eng.auto_box(1.0, 2.0 * scale, 6.0 * scale, 1e-6)?;
    let half = (half / h).round() * h;
    let lattice = Lattice::cube(d, half, h)?;
    let (_, grads, _) = eng.evaluate(1.0, &lattice.points())?;
    let lattice_sum = grads
        .chunks(d)
        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        * h.powi(d as i32);
    if !(lattice_sum > 0.0) {
        return Err(Error::CutoffTooSmall("gradient vanished on the lattice".into()));
    }
    Ok(GradL1Estimate { value: lattice_sum, lattice_sum, tail: 0.0, half_width: half, spacing: h, boundary_ratio: ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_model::SpectralMeasure;
    use std::f64::consts::PI;

    fn cauchy() -> StableSpec {
        StableSpec::one_dimensional(1.0, 1.0).unwrap()
    }

    #[test]
    fn cauchy_examples() {
        let s = cauchy();
        assert!((density(&s, 1.0, &[0.0]).unwrap() - 1.0 / PI).abs() < 1e-10);
        assert!((density(&s, 2.0, &[0.0]).unwrap() - 0.5 / PI).abs() < 1e-10);
        let g = density_gradient(&s, 1.0, &[1.0]).unwrap();
        assert!((g[0] + 1.0 / (2.0 * PI)).abs() < 1e-10, "{g:?}");
        assert_eq!(density_gradient(&s, 1.0, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn cauchy_sup_error_on_interval() {
        let s = cauchy();
        let mut worst: f64 = 0.0;
        for k in 0..=200 {
            let x = -10.0 + 0.1 * k as f64;
            let p = density(&s, 1.0, &[x]).unwrap();
            worst = worst.max((p - 1.0 / (PI * (1.0 + x * x))).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = StableSpec::one_dimensional(1.5, 0.8).unwrap();
        let axes = StableSpec::new(1.2, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap();
        let pts1: Vec<f64> = (0..20).map(|k| -4.0 + 0.41 * k as f64).collect();
        for x in pts1 {
            let h = 1e-4;
            let fd = (density(&spec, 1.0, &[x + h]).unwrap() - density(&spec, 1.0, &[x - h]).unwrap()) / (2.0 * h);
            let g = density_gradient(&spec, 1.0, &[x]).unwrap()[0];
            assert!((fd - g).abs() < 1e-5, "x={x}: {fd} vs {g}");
        }
        for k in 0..4 {
            let x = [-1.0 + 0.7 * k as f64, 0.3 * k as f64 - 0.2];
            let h = 1e-4;
            let g = density_gradient(&axes, 1.0, &x).unwrap();
            for a in 0..2 {
                let mut p = x;
                let mut m = x;
                p[a] += h;
                m[a] -= h;
                let fd = (density(&axes, 1.0, &p).unwrap() - density(&axes, 1.0, &m).unwrap()) / (2.0 * h);
                assert!((fd - g[a]).abs() < 1e-5, "{fd} vs {}", g[a]);
            }
        }
    }

    #[test]
    fn density_is_even() {
        let spec = StableSpec::new(0.8, SpectralMeasure::isotropic(2, 8).unwrap(), 1.0).unwrap();
        let a = density(&spec, 1.0, &[0.4, -1.1]).unwrap();
        let b = density(&spec, 1.0, &[-0.4, 1.1]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn grad_l1_norm_cauchy() {
        let e = grad_l1_estimate(&cauchy(), None).unwrap();
        assert!((e.value - 2.0 / PI).abs() < 1e-4, "{e:?}");
        let e2 = grad_l1_estimate(&cauchy(), Some(0.005)).unwrap();
        assert!(((e2.value - e.value) / e.value).abs() < 1e-3);
    }

    #[test]
    fn grad_l1_norm_is_positive_in_two_dimensions() {
        let axes = StableSpec::new(1.2, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap();
        let c = grad_l1_estimate(&axes, Some(0.5)).unwrap();
        assert!(c.value > 0.0);
    }

    #[test]
    fn table_invariants_one_dimension() {
        let spec = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        let eng = DensityEngine::new(&spec).unwrap();
        let lat = Lattice::cube(1, 400.0, 0.05).unwrap();
        let tab = eng.tabulate(1.0, &lat).unwrap();
        assert!(tab.min_raw >= -QUAD_TOL);
        assert!(tab.symmetry_defect() < 1e-8);
        let captured = tab.captured_mass.unwrap();
        assert!(captured >= 0.9999, "{captured}");
        assert!((tab.riemann_mass() - 1.0).abs() < 1e-4, "{}", tab.riemann_mass());
    }

    #[test]
    fn scaling_law_against_direct_inversion() {
        let specs = vec![
            StableSpec::one_dimensional(1.0, 1.0).unwrap(),
            StableSpec::one_dimensional(1.5, 0.7).unwrap(),
            StableSpec::one_dimensional(0.7, 1.3).unwrap(),
            StableSpec::new(1.2, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap(),
        ];
        for spec in &specs {
            let d = spec.dim;
            let eng = DensityEngine::new(spec).unwrap();
            let lat = if d == 1 { Lattice::cube(1, 6.0, 0.5).unwrap() } else { Lattice::cube(2, 2.0, 1.0).unwrap() };
            for &t in &[0.5, 1.0, 2.0] {
                let tab = eng.tabulate(t, &lat).unwrap();
                for (k, x) in lat.points().iter().enumerate() {
                    let direct = density(spec, t, x).unwrap();
                    assert!((tab.values[k] - direct).abs() < 1e-6, "alpha={} t={t} x={x:?}", spec.alpha);
                }
            }
        }
    }
}
