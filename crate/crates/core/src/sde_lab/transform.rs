//! Drift-removing change of variables ψ(x) = x + u(x) built from the resolvent solution with
//! source g = b, and the Euler scheme for the transformed process Y = ψ(X).
//!
//! Itô's formula for u(X) gives dY = λu(ψ^{-1}(Y)) dt + jumps g(Y_-, z) compensated on the
//! small ones, where g(y,z) = u(ψ^{-1}(y)+z) + z - u(ψ^{-1}(y)). With the path truncated at
//! eps, every jump above eps is applied as g and the drift becomes
//! b̃_eps(y) = λu(x) - ∫_{|z|>eps} [u(x+z) - u(x)] ν(dz), x = ψ^{-1}(y).
//! This equals b̃ for the radius r minus the compensator of the jumps in (eps, r]; the z part
//! of that compensator vanishes by symmetry of ν, the u part is kept. The Gaussian
//! surrogate G of the jumps below eps enters linearly, as Dψ(x)G.
//!
//! Only d = 1 is supported, matching the resolvent solver.

use super::drift::Drift;
use super::euler::{euler_integrate, Trajectory};
use super::path::LevyPath;
use crate::error::{Error, Result};
use crate::nonlocal_calculus::{Extension, GridFunction, Lattice};
use crate::quadrature::gl8;
use crate::resolvent_solver::{DriftTerm, ResolventProblem, ResolventSolution};
use crate::stable_model::StableSpec;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub const INVERSE_TOL: f64 = 1e-10;
pub const MAX_INVERSE_ITERATIONS: usize = 60;

#[derive(Debug)]
pub struct TanakaTransform {
    pub lambda: f64,
    pub r: f64,
    /// ‖Du‖₀ over the lattice nodes.
    pub c_lambda: f64,
    pub spec: StableSpec,
    /// u with its exact nodal slopes attached.
    u: GridFunction,
    lo: f64,
    hi: f64,
    periodic: bool,
    /// ν weight of each of the two directions ±1.
    nu: f64,
    tables: Mutex<HashMap<u64, Arc<GridFunction>>>,
}

pub fn build_transform(problem: &ResolventProblem, solution: &ResolventSolution, r: f64) -> Result<TanakaTransform> {
    let spec = &problem.spec;
    if spec.dim != 1 {
        return Err(Error::UnsupportedDimension(spec.dim));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("r must lie in (0, 1), got {r}")));
    }
    match &problem.drift {
        DriftTerm::Field(b) if b.values() == problem.source.values() => {}
        _ => return Err(Error::invalid("the transform needs the solution of the problem with g = b")),
    }
    let c = solution.du.sup_norm();
    if c >= 1.0 / 3.0 {
        return Err(Error::ContractionViolated(format!(
            "||Du||_0 = {c:.4} >= 1/3; raise lambda (see gradient_decay_scan)"
        )));
    }
    let u = solution.u.clone();
    if u.slopes().is_none() {
        return Err(Error::invalid("solution must carry nodal slopes"));
    }
    let lat = u.lattice();
    let n = lat.len();
    // ψ is increasing on the lattice (d = 1), hence injective.
    let psi_nodes: Vec<f64> = (0..n).map(|k| lat.coord(0, k) + u.node(k, 0)).collect();
    if let Some(k) = psi_nodes.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NotInvertible(format!("psi is not increasing between nodes {k} and {}", k + 1)));
    }
    let weights = spec.levy_weights();
    Ok(TanakaTransform {
        lambda: problem.lambda,
        r,
        c_lambda: c,
        spec: spec.clone(),
        lo: lat.lower(0),
        hi: lat.upper(0),
        periodic: matches!(u.extension(), Extension::Periodic),
        nu: weights.iter().sum::<f64>() / 2.0,
        u,
        tables: Mutex::new(HashMap::new()),
    })
}

impl TanakaTransform {
    /// (u, u', u'') at x.
    #[inline]
    fn u3(&self, x: f64) -> (f64, f64, f64) {
        self.u.eval_1d(x, 0)
    }

    pub fn u(&self) -> &GridFunction {
        &self.u
    }

    pub fn psi(&self, x: f64) -> f64 {
        x + self.u3(x).0
    }

    pub fn in_box(&self, x: f64) -> bool {
        self.periodic || (x >= self.lo - 1e-12 && x <= self.hi + 1e-12)
    }

    fn check_box(&self, x: f64) -> Result<()> {
        if self.in_box(x) {
            Ok(())
        } else {
            Err(Error::BoxExceeded(format!("x = {x} outside [{}, {}]", self.lo, self.hi)))
        }
    }

    /// ψ^{-1}(y) by x_{n+1} = y - u(x_n), with the iteration count.
    pub fn psi_inverse_counted(&self, y: f64) -> Result<(f64, usize)> {
        let mut x = y - self.u3(y).0;
        for it in 1..=MAX_INVERSE_ITERATIONS {
            let next = y - self.u3(x).0;
            if (next - x).abs() <= INVERSE_TOL * x.abs().max(1.0) {
                return Ok((next, it));
            }
            x = next;
        }
        Err(Error::NotInvertible(format!("fixed point for y = {y} did not converge")))
    }

    pub fn psi_inverse(&self, y: f64) -> Result<f64> {
        self.psi_inverse_counted(y).map(|p| p.0)
    }

    /// Dψ^{-1}(y) = [1 + Du(ψ^{-1}(y))]^{-1}.
    pub fn dpsi_inverse(&self, y: f64) -> Result<f64> {
        let x = self.psi_inverse(y)?;
        Ok(1.0 / (1.0 + self.u3(x).1))
    }

    /// max over the nodes of |Dψ^{-1}|, to compare with 1/(1 - c_λ).
    pub fn inverse_jacobian_bound(&self) -> f64 {
        let s = self.u.slopes().expect("slopes attached");
        s.iter().map(|d| 1.0 / (1.0 + d)).fold(0.0, f64::max)
    }

    /// g(y, z) = u(ψ^{-1}(y)+z) + z - u(ψ^{-1}(y)).
    pub fn jump_map(&self, y: f64, z: f64) -> Result<f64> {
        let x = self.psi_inverse(y)?;
        Ok(self.u3(x + z).0 + z - self.u3(x).0)
    }

    /// b̃(y) = λu(x) - ∫_{|z|>r} [u(x+z) - u(x)] ν(dz) with x = ψ^{-1}(y).
    pub fn drift_tilde(&self, y: f64) -> Result<f64> {
        let x = self.psi_inverse(y)?;
        Ok(self.lambda * self.u3(x).0 - self.tail_integral(x, self.r).0)
    }

    /// ∫_{|z|>ρ0} [u(x+z) - u(x)] ν(dz) and its x-derivative, by Gauss-Legendre on panels
    /// that start at width 2h and grow geometrically, split where x ± ρ leaves the box, with
    /// the closed-form tail beyond the box where u is constant.
    fn tail_integral(&self, x: f64, rho0: f64) -> (f64, f64) {
        let a = self.spec.alpha;
        let h = self.u.lattice().spacing;
        let (u0, du0, _) = self.u3(x);
        let (rho_max, outer) = if self.periodic {
            let period = self.hi - self.lo;
            let r_max = (40.0 * period).max(40.0);
            let mean = self.u.values().iter().sum::<f64>() / self.u.values().len() as f64;
            (r_max, (2.0 * mean, 0.0))
        } else {
            let r_max = (self.hi - x).max(x - self.lo);
            (r_max, (self.u3(self.hi).0 + self.u3(self.lo).0, 0.0))
        };
        let mut breaks = vec![rho0];
        if !self.periodic {
            for b in [self.hi - x, x - self.lo] {
                if b > rho0 {
                    breaks.push(b);
                }
            }
        }
        breaks.push(rho_max.max(rho0));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = gl8();
        let (mut v, mut dv) = (0.0, 0.0);
        for w in breaks.windows(2) {
            let (mut s, end) = (w[0], w[1]);
            while s < end {
                let e = (s + (2.0 * h).max(0.15 * s)).min(end);
                let half = 0.5 * (e - s);
                let mid = 0.5 * (e + s);
                for (node, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let rho = mid + half * node;
                    let (up, dup, _) = self.u3(x + rho);
                    let (um, dum, _) = self.u3(x - rho);
                    let k = wt * half * rho.powf(-1.0 - a);
                    v += k * (up + um - 2.0 * u0);
                    dv += k * (dup + dum - 2.0 * du0);
                }
                s = e;
            }
        }
        let tail = rho_max.max(rho0).powf(-a) / a;
        v += (outer.0 - 2.0 * u0) * tail;
        dv += (outer.1 - 2.0 * du0) * tail;
        (self.nu * v, self.nu * dv)
    }

    /// b̃_eps and its derivative in y at a point y = ψ(x).
    fn drift_eps_at(&self, x: f64, eps: f64) -> (f64, f64) {
        let (u0, du0, _) = self.u3(x);
        let (i, di) = self.tail_integral(x, eps);
        let val = self.lambda * u0 - i;
        (val, (self.lambda * du0 - di) / (1.0 + du0))
    }

    /// b̃_eps tabulated with exact slopes on a y-lattice of the lattice spacing covering ψ(box).
    pub fn drift_table(&self, eps: f64) -> Result<Arc<GridFunction>> {
        let key = eps.to_bits();
        if let Some(t) = self.tables.lock().expect("table cache").get(&key) {
            return Ok(t.clone());
        }
        let h = self.u.lattice().spacing;
        let (y_lo, y_hi) = (self.psi(self.lo), self.psi(self.hi));
        let cells = ((y_hi - y_lo) / h).ceil().max(2.0);
        let spacing = (y_hi - y_lo) / cells;
        let lat = Lattice::new(vec![0.5 * (y_lo + y_hi)], vec![0.5 * (y_hi - y_lo)], spacing)?;
        let ys: Vec<f64> = (0..lat.len()).map(|k| lat.coord(0, k)).collect();
        let pairs: Vec<Result<(f64, f64)>> = ys
            .par_iter()
            .map(|&y| self.psi_inverse(y).map(|x| self.drift_eps_at(x, eps)))
            .collect();
        let mut vals = Vec::with_capacity(ys.len());
        let mut slopes = Vec::with_capacity(ys.len());
        for p in pairs {
            let (v, s) = p?;
            vals.push(v);
            slopes.push(s);
        }
        let ext = if self.periodic { Extension::Periodic } else { Extension::Constant };
        let table = Arc::new(GridFunction::from_values(lat, 1, vals, ext)?.with_slopes(slopes)?);
        self.tables.lock().expect("table cache").insert(key, table.clone());
        Ok(table)
    }
}

/// Y on the path's event grid, with x = ψ^{-1}(Y) and optionally the derivative flow H = ∂Y/∂y.
#[derive(Debug, Clone)]
pub struct TransformedTrajectory {
    pub y: Trajectory,
    pub x: Vec<f64>,
    pub h: Option<Vec<f64>>,
}

pub fn integrate_transformed(transform: &TanakaTransform, y0: f64, path: &LevyPath) -> Result<TransformedTrajectory> {
    run_transformed(transform, y0, path, false)
}

/// H_t = ∂Y_t/∂y for the scheme of [`integrate_transformed`]: the drift step multiplies by
/// 1 + b̃_eps'(Y)dt, a jump z by (1 + u'(x+z))/(1 + u'(x)) = 1 + D_y h(Y_-, z), and the
/// Gaussian step G by 1 + u''(x)G/(1 + u'(x)).
pub fn derivative_flow(transform: &TanakaTransform, path: &LevyPath, y0: f64) -> Result<TransformedTrajectory> {
    run_transformed(transform, y0, path, true)
}

fn run_transformed(tf: &TanakaTransform, y0: f64, path: &LevyPath, with_h: bool) -> Result<TransformedTrajectory> {
    if path.dim() != 1 {
        return Err(Error::UnsupportedDimension(path.dim()));
    }
    if path.spec != tf.spec {
        return Err(Error::invalid("path and transform use different laws"));
    }
    if path.eps > tf.r {
        return Err(Error::invalid(format!("path cutoff {} exceeds the transform radius {}", path.eps, tf.r)));
    }
    let table = tf.drift_table(path.eps)?;
    let mut y = y0;
    let mut x = tf.psi_inverse(y)?;
    tf.check_box(x)?;
    let mut h = 1.0;
    let mut drift_int = 0.0;
    let mut out = TransformedTrajectory {
        y: Trajectory { dim: 1, times: vec![0.0], states: vec![y], drift_integral: vec![0.0], grid_index: vec![0] },
        x: vec![x],
        h: with_h.then(|| vec![1.0]),
    };
    let record = |out: &mut TransformedTrajectory, t: f64, y: f64, x: f64, h: f64, di: f64| {
        out.y.times.push(t);
        out.y.states.push(y);
        out.y.drift_integral.push(di);
        out.x.push(x);
        if let Some(hs) = out.h.as_mut() {
            hs.push(h);
        }
    };
    for k in 0..path.steps() {
        let mut t = path.grid_time(k);
        let t_next = path.grid_time(k + 1);
        let drift_step = |y: &mut f64, x: &mut f64, h: &mut f64, di: &mut f64, dt: f64| -> Result<()> {
            if dt <= 0.0 {
                return Ok(());
            }
            let (b, db, _) = table.eval_1d(*y, 0);
            *y += b * dt;
            *di += b * dt;
            *h *= 1.0 + db * dt;
            *x = tf.psi_inverse(*y)?;
            tf.check_box(*x)
        };
        for j in path.jumps_in_step(k) {
            let jump = &path.jumps()[j];
            drift_step(&mut y, &mut x, &mut h, &mut drift_int, jump.time - t)?;
            t = jump.time;
            let z = jump.size[0];
            let (ux, dux, _) = tf.u3(x);
            let xn = x + z;
            tf.check_box(xn)?;
            let (uz, duz, _) = tf.u3(xn);
            y += uz + z - ux;
            h *= (1.0 + duz) / (1.0 + dux);
            x = tf.psi_inverse(y)?;
            if t < t_next {
                record(&mut out, t, y, x, h, drift_int);
            }
        }
        drift_step(&mut y, &mut x, &mut h, &mut drift_int, t_next - t)?;
        let g = path.increment(k)[0];
        if g != 0.0 {
            let (_, dux, d2ux) = tf.u3(x);
            y += (1.0 + dux) * g;
            h *= 1.0 + d2ux * g / (1.0 + dux);
            x = tf.psi_inverse(y)?;
            tf.check_box(x)?;
        }
        record(&mut out, t_next, y, x, h, drift_int);
        out.y.grid_index.push(out.y.times.len() - 1);
    }
    Ok(out)
}

/// sup_t |ψ(X_t^x) - Y_t^{ψ(x)}| on the common event grid of one path.
pub fn conjugacy_error(tf: &TanakaTransform, b: &dyn Drift, x0: f64, path: &LevyPath) -> Result<f64> {
    let xs = euler_integrate(b, &[x0], path)?;
    let ys = integrate_transformed(tf, tf.psi(x0), path)?;
    Ok(xs
        .states
        .iter()
        .zip(&ys.y.states)
        .map(|(xv, yv)| (tf.psi(*xv) - yv).abs())
        .fold(0.0, f64::max))
}
