//! Compensated radial quadrature for the generator 𝓛.
//!
//! Atoms come in ± pairs, so for each pair the compensator cancels and
//! `𝓛f(x) = Σ_pairs λ ∫_0^∞ [f(x+rξ) + f(x-rξ) - 2f(x)] r^{-1-α} dr`.

use super::grid::{Extension, GridFunction};
use crate::error::{Error, Result};
use crate::quadrature::{geometric_edges, gl4, gl8, GaussLegendre};
use crate::stable_model::StableSpec;

/// Radial quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    /// Smallest radius handled by quadrature; below it a power-law remainder is used.
    pub r_min: f64,
    /// Gauss nodes on the logarithmic section (rounded up to whole 8-point panels).
    pub n_log_points: usize,
    /// Panel width on the uniform section; `None` uses the lattice spacing (sampled
    /// functions) or 0.1 (callbacks).
    pub panel_max: Option<f64>,
    /// Truncation radius for callbacks and non-axis periodic rays.
    pub r_out: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid { r_min: 1e-6, n_log_points: 96, panel_max: None, r_out: 2000.0 }
    }
}

impl RadialGrid {
    pub fn new(r_min: f64, n_log_points: usize) -> Self {
        RadialGrid { r_min, n_log_points, ..Default::default() }
    }
}

/// 𝓛f(x) for a scalar grid function.
pub fn apply_generator(spec: &StableSpec, f: &GridFunction, x: &[f64], grid: &RadialGrid) -> Result<f64> {
    if f.arity() != 1 {
        return Err(Error::invalid("apply_generator expects a scalar function; use apply_generator_component"));
    }
    apply_generator_component(spec, f, 0, x, grid)
}

/// 𝓛 applied to component `c` of `f` at `x`.
pub fn apply_generator_component(
    spec: &StableSpec,
    f: &GridFunction,
    c: usize,
    x: &[f64],
    grid: &RadialGrid,
) -> Result<f64> {
    if x.len() != spec.dim || f.dim() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: f.dim() });
    }
    let lw = spec.levy_weights();
    let atoms = spec.measure.atoms();
    let mut total = 0.0;
    for i in spec.measure.pair_representatives() {
        let part = pair_integral(spec.alpha, f, c, x, &atoms[i].direction, grid)?;
        total += lw[i] * part;
    }
    Ok(total)
}

struct Ray<'a> {
    f: &'a GridFunction,
    c: usize,
    x: &'a [f64],
    xi: &'a [f64],
    fx: f64,
    buf: Vec<f64>,
    tmp: Vec<f64>,
}

impl Ray<'_> {
    #[inline]
    fn value(&mut self, r: f64) -> f64 {
        let d = self.x.len();
        for k in 0..d {
            self.buf[k] = self.x[k] + r * self.xi[k];
        }
        if self.f.arity() == 1 && self.c == 0 {
            return self.f.eval_scalar(&self.buf);
        }
        self.f.eval(&self.buf, &mut self.tmp);
        self.tmp[self.c]
    }

    /// Symmetric second difference f(x+rξ) + f(x-rξ) - 2f(x).
    #[inline]
    fn second_difference(&mut self, r: f64) -> f64 {
        self.value(r) + self.value(-r) - 2.0 * self.fx
    }
}

fn pair_integral(alpha: f64, f: &GridFunction, c: usize, x: &[f64], xi: &[f64], grid: &RadialGrid) -> Result<f64> {
    let d = x.len();
    let mut ray = Ray { f, c, x, xi, fx: 0.0, buf: vec![0.0; d], tmp: vec![0.0; f.arity()] };
    ray.fx = ray.value(0.0);
    let kernel = |r: f64| r.powf(-1.0 - alpha);

    let callback = f.is_callback();
    let h = f.lattice().spacing;
    let panel = grid.panel_max.unwrap_or(if callback { 0.1 } else { h });
    let r_switch = panel.min(1.0);

    // Small radii: find where the second difference rises above round-off, fit a power law
    // there and integrate it analytically down to zero.
    let noise = 1e-15 * ray.fx.abs().max(f.sup_norm()).max(1e-300);
    let r_cap = (0.05 * r_switch).max(grid.r_min);
    let mut r_lo = grid.r_min;
    let mut remainder = 0.0;
    let mut found = false;
    let mut r = grid.r_min;
    let mut prev: Option<(f64, f64)> = None;
    while r <= r_cap * (1.0 + 1e-12) {
        let dv = ray.second_difference(r);
        if dv.abs() >= 1e6 * noise {
            if let Some((r0, d0)) = prev {
                if d0.signum() == dv.signum() {
                    let mut s = (dv / d0).abs().ln() / (r / r0).ln();
                    if (s - 2.0).abs() < 0.02 {
                        s = 2.0;
                    }
                    if s <= alpha + 0.02 {
                        return Err(Error::NonIntegrableAtOrigin(format!(
                            "second difference decays like r^{s:.3} at x={x:?}, not faster than r^alpha (alpha={alpha})"
                        )));
                    }
                    remainder = d0 * r0.powf(-alpha) / (s - alpha);
                    r_lo = r0;
                    found = true;
                    break;
                }
            }
            prev = Some((r, dv));
        } else {
            prev = None;
        }
        r *= 4.0;
    }
    if !found {
        // Too small to fit reliably: treat as smooth, D(r) ≈ D(r_cap)(r/r_cap)^2.
        r_lo = r_cap;
        remainder = ray.second_difference(r_cap) * r_cap.powf(-alpha) / (2.0 - alpha);
    }
    if !remainder.is_finite() {
        return Err(Error::NonIntegrableAtOrigin(format!("remainder {remainder} is not finite")));
    }

    let mut total = remainder;
    let r8 = gl8();

    // Logarithmic section [r_lo, r_switch].
    if r_switch > r_lo {
        let panels = grid.n_log_points.div_ceil(8).max(1);
        let ratio = (r_switch / r_lo).powf(1.0 / panels as f64).max(1.0 + 1e-9);
        for e in geometric_edges(r_lo, r_switch, ratio).windows(2) {
            total += r8.integrate(e[0], e[1], |r| ray.second_difference(r) * kernel(r));
        }
    }

    // Outer section with the extension-specific tail.
    let rule: &GaussLegendre = if callback { r8 } else { gl4() };
    let lat = f.lattice();
    match f.extension() {
        Extension::Constant => {
            let r_const = constant_radius(lat, x, xi).max(r_switch);
            total += uniform(rule, r_switch, r_const, panel, |r| ray.second_difference(r) * kernel(r));
            let beyond = ray.value(r_const * 2.0 + 1.0) + ray.value(-(r_const * 2.0 + 1.0)) - 2.0 * ray.fx;
            total += beyond * r_const.powf(-alpha) / alpha;
        }
        Extension::Periodic => {
            let axis = xi.iter().filter(|v| v.abs() > 1e-14).count() == 1;
            let two_fx = 2.0 * ray.fx;
            if axis {
                let k = xi.iter().position(|v| v.abs() > 1e-14).unwrap();
                let period = 2.0 * lat.half_widths[k];
                let r_tail = (4.0 * period).max(r_switch).max(8.0);
                total += uniform(rule, r_switch, r_tail, panel, |r| ray.second_difference(r) * kernel(r));
                // -2f(x) part exactly; the periodic part by Euler-Maclaurin over periods.
                total -= two_fx * r_tail.powf(-alpha) / alpha;
                let a1 = 1.0 + alpha;
                let tail_weight = |y: f64| {
                    y.powf(-alpha) / (alpha * period) + 0.5 * y.powf(-a1) + period / 12.0 * a1 * y.powf(-a1 - 1.0)
                        - period.powi(3) / 720.0 * a1 * (a1 + 1.0) * (a1 + 2.0) * y.powf(-a1 - 3.0)
                };
                total += uniform(rule, r_tail, r_tail + period, panel, |r| {
                    (ray.value(r) + ray.value(-r)) * tail_weight(r)
                });
            } else {
                total += uniform(rule, r_switch, grid.r_out, panel, |r| ray.second_difference(r) * kernel(r));
                total -= two_fx * grid.r_out.powf(-alpha) / alpha;
            }
        }
        Extension::Callback(_) => {
            let r_out = grid.r_out.max(r_switch);
            total += uniform(rule, r_switch, r_out, panel, |r| ray.second_difference(r) * kernel(r));
            total -= 2.0 * ray.fx * r_out.powf(-alpha) / alpha;
        }
    }
    Ok(total)
}

fn uniform<F: FnMut(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, width: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = ((b - a) / width).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    let mut s = 0.0;
    for j in 0..n {
        let lo = a + j as f64 * w;
        s += rule.integrate(lo, lo + w, &mut f);
    }
    s
}

/// Radius beyond which both x ± rξ clamp to fixed box points.
fn constant_radius(lat: &super::grid::Lattice, x: &[f64], xi: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for k in 0..x.len() {
        if xi[k].abs() > 1e-14 {
            let a = (lat.upper(k) - x[k]) / xi[k].abs();
            let b = (x[k] - lat.lower(k)) / xi[k].abs();
            r = r.max(a.max(b));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocal_calculus::Lattice;
    use crate::stable_model::{SpectralMeasure, StableSpec};

    fn cos_callback(d: usize, u: Vec<f64>, x0: Vec<f64>) -> GridFunction {
        let lat = Lattice::cube(d, 1.0, 0.5).unwrap();
        GridFunction::from_callback(lat, move |x| {
            let p: f64 = x.iter().zip(&u).zip(&x0).map(|((a, b), c)| (a - c) * b).sum();
            p.cos()
        })
        .unwrap()
    }

    #[test]
    fn constant_function_gives_zero() {
        let spec = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        let lat = Lattice::cube(1, 5.0, 0.1).unwrap();
        let f = GridFunction::sample(lat, |_| 3.0, Extension::Constant).unwrap();
        let v = apply_generator(&spec, &f, &[0.3], &RadialGrid::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn symbol_identity_for_cosines() {
        let specs = [
            StableSpec::one_dimensional(1.0, 1.0).unwrap(),
            StableSpec::one_dimensional(1.5, 0.6).unwrap(),
            StableSpec::one_dimensional(0.6, 1.0).unwrap(),
            StableSpec::new(1.2, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap(),
            StableSpec::new(1.7, SpectralMeasure::isotropic(2, 6).unwrap(), 1.0).unwrap(),
        ];
        for spec in &specs {
            let d = spec.dim;
            let u: Vec<f64> = (0..d).map(|k| 1.3 - 0.9 * k as f64).collect();
            let x0: Vec<f64> = (0..d).map(|k| 0.2 + k as f64).collect();
            let f = cos_callback(d, u.clone(), x0.clone());
            let got = apply_generator(spec, &f, &x0, &RadialGrid::default()).unwrap();
            let expect = -spec.characteristic_exponent(&u);
            assert!(((got - expect) / expect).abs() < 1e-5, "alpha={}: {got} vs {expect}", spec.alpha);
        }
    }

    #[test]
    fn sampled_periodic_cosine() {
        let spec = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        let p = std::f64::consts::PI;
        let lat = Lattice::new(vec![0.0], vec![p], 2.0 * p / 400.0).unwrap();
        let f = GridFunction::sample(lat, |x| x[0].cos(), Extension::Periodic).unwrap();
        for &x in &[0.0, 0.7, 2.0] {
            let got = apply_generator(&spec, &f, &[x], &RadialGrid::default()).unwrap();
            assert!((got + x.cos()).abs() < 1e-4, "x={x}: {got}");
        }
    }

    #[test]
    fn cusp_is_rejected() {
        let spec = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        let lat = Lattice::cube(1, 1.0, 0.1).unwrap();
        let f = GridFunction::from_callback(lat, |x| x[0].abs().powf(0.3)).unwrap();
        let r = apply_generator(&spec, &f, &[0.0], &RadialGrid::default());
        assert!(matches!(r, Err(Error::NonIntegrableAtOrigin(_))), "{r:?}");
    }

    #[test]
    fn linearity_and_translation() {
        let spec = StableSpec::one_dimensional(1.3, 1.0).unwrap();
        let lat = Lattice::cube(1, 6.0, 0.05).unwrap();
        let f = GridFunction::sample(lat.clone(), |x| (-x[0] * x[0]).exp(), Extension::Constant).unwrap();
        let g = GridFunction::sample(lat.clone(), |x| x[0].atan(), Extension::Constant).unwrap();
        let grid = RadialGrid::default();
        let x = [0.35];
        let lf = apply_generator(&spec, &f, &x, &grid).unwrap();
        let lg = apply_generator(&spec, &g, &x, &grid).unwrap();
        let comb = f.linear_combination(2.0, &g, -0.5).unwrap();
        let lc = apply_generator(&spec, &comb, &x, &grid).unwrap();
        assert!((lc - (2.0 * lf - 0.5 * lg)).abs() < 1e-9, "{lc} vs {}", 2.0 * lf - 0.5 * lg);
        let shifted = f.shifted(&[1.5]);
        let ls = apply_generator(&spec, &shifted, &[x[0] + 1.5], &grid).unwrap();
        assert!((ls - lf).abs() < 1e-9);
    }
}
