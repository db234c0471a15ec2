//! Axis-aligned lattices and sampled functions with an explicit extension policy.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Uniform lattice `center ± half_widths` with spacing `h` (endpoints included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub spacing: f64,
    counts: Vec<usize>,
}

impl Lattice {
    pub fn new(center: Vec<f64>, half_widths: Vec<f64>, spacing: f64) -> Result<Self> {
        if center.is_empty() || center.len() != half_widths.len() {
            return Err(Error::invalid("lattice center and half-widths must have equal, nonzero length"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("lattice spacing must be positive, got {spacing}")));
        }
        let mut counts = Vec::with_capacity(center.len());
        for &hw in &half_widths {
            if !(hw > 0.0) {
                return Err(Error::invalid("lattice half-widths must be positive"));
            }
            let cells = 2.0 * hw / spacing;
            let n = cells.round();
            if (cells - n).abs() > 1e-6 * cells.max(1.0) {
                return Err(Error::invalid(format!(
                    "spacing {spacing} does not divide the box width {}",
                    2.0 * hw
                )));
            }
            counts.push(n as usize + 1);
        }
        Ok(Lattice { center, half_widths, spacing, counts })
    }

    /// Cube `[-half, half]^d` centred at the origin.
    pub fn cube(dim: usize, half: f64, spacing: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![half; dim], spacing)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_widths[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_widths[axis]
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower(axis) + i as f64 * self.spacing
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in idx.iter().enumerate() {
            f = f * self.counts[a] + i;
        }
        f
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(a, &c)| c >= self.lower(a) - 1e-12 && c <= self.upper(a) + 1e-12)
    }

    /// Distance from `x` to the box boundary along the coordinate axes (negative outside).
    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(a, &c)| (c - self.lower(a)).min(self.upper(a) - c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.half_widths.iter().map(|h| h * h).sum::<f64>().sqrt()
    }
}

pub type Callback = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// How a [`GridFunction`] is continued outside its box.
#[derive(Clone)]
pub enum Extension {
    /// Value at the nearest box point.
    Constant,
    /// Periodic with period `2·half_width` on every axis; the last node repeats the first.
    Periodic,
    /// Exact function, used everywhere (lattice values are its samples).
    Callback(Callback),
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::Constant => write!(f, "Constant"),
            Extension::Periodic => write!(f, "Periodic"),
            Extension::Callback(_) => write!(f, "Callback"),
        }
    }
}

/// Scalar or vector samples on a lattice. Values are stored point-major.
///
/// Off-lattice evaluation uses a tensor cubic Hermite interpolant with fourth-order
/// finite-difference slopes, or exact nodal slopes when attached (one-dimensional lattices
/// only).
/// Both are C¹, which keeps compensated generator integrals finite for α ≥ 1.
#[derive(Clone, Debug)]
pub struct GridFunction {
    lattice: Lattice,
    arity: usize,
    values: Vec<f64>,
    extension: Extension,
    slopes: Option<Vec<f64>>,
}

impl GridFunction {
    pub fn from_values(lattice: Lattice, arity: usize, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if arity == 0 {
            return Err(Error::invalid("arity must be at least 1"));
        }
        if values.len() != lattice.len() * arity {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                lattice.len() * arity,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("value {i} is not finite")));
        }
        Ok(GridFunction { lattice, arity, values, extension, slopes: None })
    }

    /// Sample a scalar function; the result uses the given extension.
    pub fn sample<F: Fn(&[f64]) -> f64>(lattice: Lattice, f: F, extension: Extension) -> Result<Self> {
        let values = lattice.points().iter().map(|x| f(x)).collect();
        Self::from_values(lattice, 1, values, extension)
    }

    /// Sample an `arity`-valued function.
    pub fn sample_vector<F: Fn(&[f64], &mut [f64])>(
        lattice: Lattice,
        arity: usize,
        f: F,
        extension: Extension,
    ) -> Result<Self> {
        let mut values = vec![0.0; lattice.len() * arity];
        for k in 0..lattice.len() {
            f(&lattice.point(k), &mut values[k * arity..(k + 1) * arity]);
        }
        Self::from_values(lattice, arity, values, extension)
    }

    /// Exact scalar function backed by lattice samples.
    pub fn from_callback<F>(lattice: Lattice, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let cb: Callback = Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = f(x));
        let values: Vec<f64> = lattice
            .points()
            .iter()
            .map(|x| {
                let mut o = [0.0];
                cb(x, &mut o);
                o[0]
            })
            .collect();
        Self::from_values(lattice, 1, values, Extension::Callback(cb))
    }

    /// Attach nodal derivatives (d = 1), switching interpolation to cubic Hermite.
    pub fn with_slopes(mut self, slopes: Vec<f64>) -> Result<Self> {
        if self.lattice.dim() != 1 {
            return Err(Error::UnsupportedDimension(self.lattice.dim()));
        }
        if slopes.len() != self.values.len() {
            return Err(Error::invalid("slopes must match values"));
        }
        self.slopes = Some(slopes);
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> Option<&[f64]> {
        self.slopes.as_deref()
    }

    pub fn extension(&self) -> &Extension {
        &self.extension
    }

    pub fn is_callback(&self) -> bool {
        matches!(self.extension, Extension::Callback(_))
    }

    #[inline]
    pub fn node(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.arity + c]
    }

    pub fn component(&self, c: usize) -> GridFunction {
        let values = (0..self.lattice.len()).map(|k| self.node(k, c)).collect();
        let slopes = self
            .slopes
            .as_ref()
            .map(|s| (0..self.lattice.len()).map(|k| s[k * self.arity + c]).collect());
        let extension = match &self.extension {
            Extension::Callback(cb) => {
                let cb = cb.clone();
                let m = self.arity;
                Extension::Callback(Arc::new(move |x: &[f64], out: &mut [f64]| {
                    let mut tmp = vec![0.0; m];
                    cb(x, &mut tmp);
                    out[0] = tmp[c];
                }))
            }
            e => e.clone(),
        };
        GridFunction { lattice: self.lattice.clone(), arity: 1, values, extension, slopes }
    }

    /// `a·self + b·other` on the same lattice (callbacks combine exactly).
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        if self.lattice != other.lattice || self.arity != other.arity {
            return Err(Error::invalid("grid functions live on different lattices"));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let extension = match (&self.extension, &other.extension) {
            (Extension::Callback(f), Extension::Callback(g)) => {
                let (f, g) = (f.clone(), g.clone());
                let m = self.arity;
                Extension::Callback(Arc::new(move |x: &[f64], out: &mut [f64]| {
                    let mut t = vec![0.0; m];
                    f(x, out);
                    g(x, &mut t);
                    for (o, v) in out.iter_mut().zip(&t) {
                        *o = a * *o + b * v;
                    }
                }))
            }
            (Extension::Callback(_), _) | (_, Extension::Callback(_)) => {
                return Err(Error::invalid("cannot combine a callback with a sampled function"))
            }
            (Extension::Periodic, Extension::Periodic) => Extension::Periodic,
            _ => Extension::Constant,
        };
        let slopes = match (&self.slopes, &other.slopes) {
            (Some(s), Some(t)) => Some(s.iter().zip(t).map(|(x, y)| a * x + b * y).collect()),
            _ => None,
        };
        Ok(GridFunction { lattice: self.lattice.clone(), arity: self.arity, values, extension, slopes })
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        self.linear_combination(a, self, 0.0).expect("same lattice")
    }

    /// Translate: the result g satisfies g(x) = self(x - shift) on the shifted lattice.
    pub fn shifted(&self, shift: &[f64]) -> GridFunction {
        let mut lat = self.lattice.clone();
        for (c, s) in lat.center.iter_mut().zip(shift) {
            *c += s;
        }
        let extension = match &self.extension {
            Extension::Callback(cb) => {
                let cb = cb.clone();
                let s = shift.to_vec();
                Extension::Callback(Arc::new(move |x: &[f64], out: &mut [f64]| {
                    let y: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a - b).collect();
                    cb(&y, out)
                }))
            }
            e => e.clone(),
        };
        GridFunction {
            lattice: lat,
            arity: self.arity,
            values: self.values.clone(),
            extension,
            slopes: self.slopes.clone(),
        }
    }

    /// Sup norm over lattice nodes (Euclidean norm for vector values).
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.arity)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Evaluate all components at `x`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        if let Extension::Callback(cb) = &self.extension {
            cb(x, out);
            return;
        }
        for (c, o) in out.iter_mut().enumerate().take(self.arity) {
            *o = self.interp(x, c).0;
        }
    }

    /// Scalar evaluation (component 0).
    #[inline]
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        if let Extension::Callback(cb) = &self.extension {
            let mut o = vec![0.0; self.arity];
            cb(x, &mut o);
            return o[0];
        }
        self.interp(x, 0).0
    }

    /// Value, first and second derivative of component `c` of a d=1 function.
    pub fn eval_1d(&self, x: f64, c: usize) -> (f64, f64, f64) {
        debug_assert_eq!(self.dim(), 1);
        if let Extension::Callback(cb) = &self.extension {
            let m = self.arity;
            let f = |y: f64| {
                let mut o = vec![0.0; m];
                cb(&[y], &mut o);
                o[c]
            };
            let d = 1e-3 * x.abs().max(1.0);
            let (fm2, fm1, f0, fp1, fp2) = (f(x - 2.0 * d), f(x - d), f(x), f(x + d), f(x + 2.0 * d));
            let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * d);
            let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * d * d);
            return (f0, d1, d2);
        }
        self.interp_1d_full(x, c)
    }

    /// Gradient of component `c` at `x`: exact derivative of the interpolant in d=1, a
    /// narrow central difference of the interpolant otherwise, and a fourth-order
    /// difference for callbacks.
    pub fn gradient(&self, x: &[f64], c: usize, out: &mut [f64]) {
        let d = self.dim();
        if d == 1 {
            out[0] = self.eval_1d(x[0], c).1;
            return;
        }
        let callback = self.is_callback();
        let delta = if callback { 1e-3 } else { 1e-5 * self.lattice.spacing };
        let mut y = x.to_vec();
        let mut tmp = vec![0.0; self.arity];
        let mut f = |y: &[f64]| -> f64 {
            if callback {
                self.eval(y, &mut tmp);
                tmp[c]
            } else {
                self.interp(y, c).0
            }
        };
        for a in 0..d {
            let x0 = x[a];
            if callback {
                let mut v = [0.0; 4];
                for (j, s) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                    y[a] = x0 + s * delta;
                    v[j] = f(&y);
                }
                out[a] = (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * delta);
            } else {
                y[a] = x0 + delta;
                let p = f(&y);
                y[a] = x0 - delta;
                let m = f(&y);
                out[a] = (p - m) / (2.0 * delta);
            }
            y[a] = x0;
        }
    }

    /// Central-difference gradient of component `c` at lattice node `k` (one-sided at the edges).
    pub fn node_gradient(&self, k: usize, c: usize, out: &mut [f64]) {
        let idx = self.lattice.multi_index(k);
        let h = self.lattice.spacing;
        let periodic = matches!(self.extension, Extension::Periodic);
        for a in 0..self.dim() {
            let n = self.lattice.counts()[a];
            let mut lo = idx.clone();
            let mut hi = idx.clone();
            let mut width = 2.0 * h;
            if idx[a] == 0 {
                if periodic {
                    lo[a] = n - 2;
                } else {
                    width = h;
                }
            } else {
                lo[a] -= 1;
            }
            if idx[a] == n - 1 {
                if periodic {
                    hi[a] = 1;
                } else {
                    width -= h;
                }
            } else {
                hi[a] += 1;
            }
            out[a] = if width > 0.0 {
                (self.node(self.lattice.flat_index(&hi), c) - self.node(self.lattice.flat_index(&lo), c)) / width
            } else {
                0.0
            };
        }
    }

    fn wrap_or_clamp(&self, axis: usize, x: f64) -> (usize, f64) {
        let lat = &self.lattice;
        let n = lat.counts()[axis];
        let h = lat.spacing;
        let lo = lat.lower(axis);
        let mut s = (x - lo) / h;
        match self.extension {
            Extension::Periodic => {
                let p = (n - 1) as f64;
                s = s.rem_euclid(p);
            }
            _ => {
                s = s.clamp(0.0, (n - 1) as f64);
            }
        }
        let mut i = s.floor() as usize;
        if i >= n - 1 {
            i = n.saturating_sub(2);
        }
        (i, s - i as f64)
    }

    fn neighbour(&self, axis: usize, i: isize) -> Option<usize> {
        let n = self.lattice.counts()[axis] as isize;
        match self.extension {
            Extension::Periodic => Some(i.rem_euclid(n - 1) as usize),
            _ => {
                if i < 0 || i >= n {
                    None
                } else {
                    Some(i as usize)
                }
            }
        }
    }

    fn interp_1d_full(&self, x: f64, c: usize) -> (f64, f64, f64) {
        let n = self.lattice.counts()[0];
        let h = self.lattice.spacing;
        if n == 1 {
            return (self.node(0, c), 0.0, 0.0);
        }
        let outside = !matches!(self.extension, Extension::Periodic)
            && (x < self.lattice.lower(0) || x > self.lattice.upper(0));
        let (i, t) = self.wrap_or_clamp(0, x);
        let f0 = self.node(i, c);
        let f1 = self.node(i + 1, c);
        let (m0, m1) = match &self.slopes {
            Some(s) => (s[i * self.arity + c], s[(i + 1) * self.arity + c]),
            None => {
                let mut vals = [None; 6];
                for (j, off) in (-2isize..=3).enumerate() {
                    vals[j] = self.neighbour(0, i as isize + off).map(|k| self.node(k, c));
                }
                stencil_slopes(&vals, h)
            }
        };
        let (v, d1, d2) = hermite(t, h, f0, f1, m0, m1);
        if outside {
            (v, 0.0, 0.0)
        } else {
            (v, d1, d2)
        }
    }

    /// Interpolated value of component `c`; the second entry is the axis-0 derivative in d=1.
    fn interp(&self, x: &[f64], c: usize) -> (f64, f64) {
        if self.dim() == 1 {
            let (v, d, _) = self.interp_1d_full(x[0], c);
            return (v, d);
        }
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let (i, t) = self.wrap_or_clamp(a, x[a]);
            base[a] = i;
            frac[a] = t;
        }
        let mut idx = vec![0usize; d];
        (self.interp_rec(0, &base, &frac, &mut idx, c), 0.0)
    }

    fn interp_rec(&self, axis: usize, base: &[usize], frac: &[f64], idx: &mut Vec<usize>, c: usize) -> f64 {
        let d = self.dim();
        let i = base[axis] as isize;
        let mut vals: [Option<f64>; 6] = [None; 6];
        for (j, off) in (-2isize..=3).enumerate() {
            if let Some(k) = self.neighbour(axis, i + off) {
                idx[axis] = k;
                vals[j] = Some(if axis + 1 == d {
                    self.node(self.lattice.flat_index(idx), c)
                } else {
                    self.interp_rec(axis + 1, base, frac, idx, c)
                });
            }
        }
        let f0 = vals[2].expect("interval start exists");
        let f1 = match vals[3] {
            Some(v) => v,
            None => return f0,
        };
        let h = self.lattice.spacing;
        let (m0, m1) = stencil_slopes(&vals, h);
        hermite(frac[axis], h, f0, f1, m0, m1).0
    }
}

/// Slopes at both ends of the interval [v2, v3] from the values at offsets -2..=3:
/// fourth-order centred differences where the stencil fits, second-order (centred or
/// one-sided) near the edge. Linear in the data, so interpolation commutes with linear
/// combinations.
fn stencil_slopes(v: &[Option<f64>; 6], h: f64) -> (f64, f64) {
    let slope = |j: usize| -> f64 {
        let at = |o: isize| v.get((j as isize + o) as usize).copied().flatten();
        let f = at(0).expect("interval node");
        match (at(-2), at(-1), at(1), at(2)) {
            (Some(a), Some(b), Some(c), Some(d)) => (a - 8.0 * b + 8.0 * c - d) / (12.0 * h),
            (_, Some(b), Some(c), _) => (c - b) / (2.0 * h),
            (_, None, Some(c), Some(d)) => (-3.0 * f + 4.0 * c - d) / (2.0 * h),
            (_, Some(b), None, _) => match at(-2) {
                Some(a) => (3.0 * f - 4.0 * b + a) / (2.0 * h),
                None => (f - b) / h,
            },
            (_, None, Some(c), None) => (c - f) / h,
            _ => 0.0,
        }
    };
    (slope(2), slope(3))
}

#[inline]
fn hermite(t: f64, h: f64, f0: f64, f1: f64, m0: f64, m1: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * h * m1;
    let d = ((6.0 * t2 - 6.0 * t) * (f0 - f1)) / h + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1;
    let dd = ((12.0 * t - 6.0) * (f0 - f1)) / (h * h) + ((6.0 * t - 4.0) * m0 + (6.0 * t - 2.0) * m1) / h;
    (v, d, dd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_indexing_roundtrip() {
        let l = Lattice::new(vec![0.0, 1.0], vec![1.0, 0.5], 0.25).unwrap();
        assert_eq!(l.counts(), &[9, 5]);
        for k in 0..l.len() {
            assert_eq!(l.flat_index(&l.multi_index(k)), k);
        }
        assert_eq!(l.point(0), vec![-1.0, 0.5]);
        assert_eq!(l.point(l.len() - 1), vec![1.0, 1.5]);
        assert!(Lattice::new(vec![0.0], vec![1.0], 0.3).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_is_accurate() {
        let l = Lattice::cube(1, 3.0, 0.05).unwrap();
        let f = GridFunction::sample(l, |x| x[0].sin(), Extension::Constant).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..600 {
            let x = -2.9 + k as f64 * 0.0097;
            worst = worst.max((f.eval_scalar(&[x]) - x.sin()).abs());
        }
        assert!(worst < 2e-5, "{worst}");
        assert_eq!(f.eval_scalar(&[0.5]), 0.5f64.sin());
    }

    #[test]
    fn hermite_with_slopes_is_fourth_order() {
        let l = Lattice::cube(1, 3.0, 0.1).unwrap();
        let f = GridFunction::sample(l.clone(), |x| x[0].sin(), Extension::Constant)
            .unwrap()
            .with_slopes(l.points().iter().map(|x| x[0].cos()).collect())
            .unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..500 {
            let x = -2.9 + k as f64 * 0.0117;
            let (v, d, _) = f.eval_1d(x, 0);
            worst = worst.max((v - x.sin()).abs()).max((d - x.cos()).abs() * 0.01);
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn constant_extension_clamps() {
        let l = Lattice::cube(1, 1.0, 0.5).unwrap();
        let f = GridFunction::sample(l, |x| x[0], Extension::Constant).unwrap();
        assert_eq!(f.eval_scalar(&[5.0]), 1.0);
        assert_eq!(f.eval_scalar(&[-5.0]), -1.0);
    }

    #[test]
    fn periodic_extension_wraps() {
        let p = std::f64::consts::PI;
        let l = Lattice::new(vec![0.0], vec![p], 2.0 * p / 200.0).unwrap();
        let f = GridFunction::sample(l, |x| x[0].cos(), Extension::Periodic).unwrap();
        for &x in &[7.0, -11.3, 40.0] {
            assert!((f.eval_scalar(&[x]) - f64::cos(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn two_dimensional_interpolation() {
        let l = Lattice::cube(2, 2.0, 0.05).unwrap();
        let f = GridFunction::sample(l, |x| (x[0] + 2.0 * x[1]).cos(), Extension::Constant).unwrap();
        let x = [0.123, -0.77];
        assert!((f.eval_scalar(&x) - (x[0] + 2.0 * x[1]).cos()).abs() < 1e-4);
        let mut g = [0.0; 2];
        f.gradient(&x, 0, &mut g);
        let s = -(x[0] + 2.0 * x[1]).sin();
        assert!((g[0] - s).abs() < 5e-3 && (g[1] - 2.0 * s).abs() < 5e-3, "{g:?}");
    }

    #[test]
    fn callback_is_exact() {
        let l = Lattice::cube(1, 1.0, 0.1).unwrap();
        let f = GridFunction::from_callback(l, |x| (3.0 * x[0]).sin()).unwrap();
        assert_eq!(f.eval_scalar(&[0.37]), (3.0f64 * 0.37).sin());
        let (_, d, dd) = f.eval_1d(0.37, 0);
        assert!((d - 3.0 * (1.11f64).cos()).abs() < 1e-9);
        assert!((dd + 9.0 * (1.11f64).sin()).abs() < 1e-5);
        for (k, x) in f.lattice().points().iter().enumerate() {
            assert!((f.node(k, 0) - (3.0 * x[0]).sin()).abs() <= 1e-12);
        }
    }
}
