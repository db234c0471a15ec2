//! Event-driven Euler scheme for X_t = x + ∫ b(X_s) ds + L_t.
//!
//! Inside a grid step the drift is frozen between consecutive events, each jump is applied at
//! its sampled time and the small-jump surrogate is added at the end of the step. For constant
//! drift the scheme therefore reproduces x + ct + L_t exactly.

use super::drift::Drift;
use super::path::{add, LevyPath};
use crate::error::{Error, Result};

/// States on the path grid augmented by jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Point-major states, càdlàg (post-jump) values.
    pub states: Vec<f64>,
    /// ∫_0^t b(X_s) ds at the same times.
    pub drift_integral: Vec<f64>,
    /// Positions of the grid nodes k·dt in `times`.
    pub grid_index: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// State at grid node k of the integration window.
    pub fn at_grid(&self, k: usize) -> &[f64] {
        self.state(self.grid_index[k])
    }

    /// sup over the recorded times of |self - other|; both must share the time grid.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.times.len(), other.times.len(), "trajectories on different grids");
        self.states
            .chunks(self.dim)
            .zip(other.states.chunks(self.dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, path_id: usize, header: bool) -> Result<()> {
        if header {
            let cols: Vec<String> = (0..self.dim).map(|c| format!("x_{c}")).collect();
            writeln!(w, "path_id,time,{}", cols.join(","))?;
        }
        for (i, t) in self.times.iter().enumerate() {
            let s: Vec<String> = self.state(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{path_id},{t:.17e},{}", s.join(","))?;
        }
        Ok(())
    }
}

pub fn euler_integrate(b: &dyn Drift, x0: &[f64], path: &LevyPath) -> Result<Trajectory> {
    euler_window(b, x0, path, 0, path.steps())
}

/// Integrates from grid time k_start·dt to k_end·dt on the given path.
pub fn euler_window(b: &dyn Drift, x0: &[f64], path: &LevyPath, k_start: usize, k_end: usize) -> Result<Trajectory> {
    let d = path.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
    }
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if k_start > k_end || k_end > path.steps() {
        return Err(Error::invalid(format!("bad window {k_start}..{k_end} of {} steps", path.steps())));
    }
    let mut x = x0.to_vec();
    let mut drift_int = vec![0.0; d];
    let mut bx = vec![0.0; d];
    let zero = b.is_zero();
    let mut tr = Trajectory {
        dim: d,
        times: vec![path.grid_time(k_start)],
        states: x.clone(),
        drift_integral: drift_int.clone(),
        grid_index: vec![0],
    };
    let mut advance = |x: &mut Vec<f64>, drift_int: &mut Vec<f64>, dt: f64| {
        if zero || dt <= 0.0 {
            return;
        }
        b.eval(x, &mut bx);
        for i in 0..d {
            x[i] += bx[i] * dt;
            drift_int[i] += bx[i] * dt;
        }
    };
    for k in k_start..k_end {
        let mut t = path.grid_time(k);
        let t_next = path.grid_time(k + 1);
        for j in path.jumps_in_step(k) {
            let jump = &path.jumps()[j];
            advance(&mut x, &mut drift_int, jump.time - t);
            t = jump.time;
            add(&mut x, &jump.size);
            if t < t_next {
                tr.times.push(t);
                tr.states.extend_from_slice(&x);
                tr.drift_integral.extend_from_slice(&drift_int);
            }
        }
        advance(&mut x, &mut drift_int, t_next - t);
        add(&mut x, path.increment(k));
        tr.times.push(t_next);
        tr.states.extend_from_slice(&x);
        tr.drift_integral.extend_from_slice(&drift_int);
        tr.grid_index.push(tr.times.len() - 1);
    }
    Ok(tr)
}

/// sup_t |X^x_t - X^y_t| computed as |(x - y) + (∫b(X^x) - ∫b(X^y))|, which is exact when the
/// drift integrals vanish.
pub fn sup_separation(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.times.len(), b.times.len(), "trajectories on different grids");
    let d = a.dim;
    let dx: Vec<f64> = a.state(0).iter().zip(b.state(0)).map(|(p, q)| p - q).collect();
    let mut best = 0.0f64;
    for i in 0..a.len() {
        let mut s = 0.0;
        for c in 0..d {
            let v = dx[c] + (a.drift_integral[i * d + c] - b.drift_integral[i * d + c]);
            s += v * v;
        }
        best = best.max(s.sqrt());
    }
    best
}
