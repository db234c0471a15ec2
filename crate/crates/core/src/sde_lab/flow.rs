//! Common-noise ensembles: many initial points driven by the same sampled paths.

use super::drift::Drift;
use super::euler::{euler_integrate, sup_separation};
use super::path::{sample_levy_path, LevyPath, SmallJumpPolicy};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::stable_model::StableSpec;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

pub const MIN_PATHS: usize = 100;

/// Sampling parameters shared by every path of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct PathParams {
    pub horizon: f64,
    pub dt: f64,
    pub eps: f64,
    pub policy: SmallJumpPolicy,
}

impl PathParams {
    pub fn sample(&self, spec: &StableSpec, seed: u64) -> Result<LevyPath> {
        sample_levy_path(spec, self.horizon, self.dt, self.eps, seed, self.policy)
    }
}

/// Seed of path `i` under `base`.
pub fn path_seed(base: u64, i: usize) -> u64 {
    derive_seed(base, &[i as u64])
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEstimate {
    /// Mean of sup_{s≤T}|X^x_s - X^y_s|^p / |x-y|^p.
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub max: f64,
}

/// Monte Carlo estimate of E[sup_{s≤T}|X^x_s - X^y_s|^p]/|x-y|^p over common-noise pairs.
/// Path i uses the seed `path_seed(base_seed, i)`; the mean is reduced in path order.
pub fn lipschitz_ratio(
    spec: &StableSpec,
    b: &dyn Drift,
    x: &[f64],
    y: &[f64],
    p: f64,
    params: &PathParams,
    n_paths: usize,
    base_seed: u64,
) -> Result<LipschitzEstimate> {
    let dist = x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if dist == 0.0 {
        return Err(Error::DegenerateInput("x and y coincide".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p must be at least 1, got {p}")));
    }
    if n_paths < MIN_PATHS {
        return Err(Error::invalid(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let path = params.sample(spec, path_seed(base_seed, i))?;
            let a = euler_integrate(b, x, &path)?;
            let c = euler_integrate(b, y, &path)?;
            Ok((sup_separation(&a, &c) / dist).powf(p))
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_se(&samples);
    Ok(LipschitzEstimate { estimate: mean, std_error: se, n_paths, max: samples.iter().cloned().fold(0.0, f64::max) })
}

/// Sample mean and its standard error, summed in index order.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trajectories of several initial points on shared paths, recorded on the grid k·dt.
#[derive(Debug, Clone)]
pub struct FlowEnsemble {
    pub paths: Vec<LevyPath>,
    pub initial_points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    dim: usize,
    /// Index order [path][point][time][component].
    states: Vec<f64>,
}

impl FlowEnsemble {
    pub fn build(
        spec: &StableSpec,
        b: &dyn Drift,
        initial_points: Vec<Vec<f64>>,
        params: &PathParams,
        n_paths: usize,
        base_seed: u64,
    ) -> Result<Self> {
        let d = spec.dim;
        if initial_points.is_empty() || initial_points.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("initial points must be non-empty vectors of the law's dimension"));
        }
        let per_path: Vec<(LevyPath, Vec<f64>)> = (0..n_paths)
            .into_par_iter()
            .map(|i| -> Result<(LevyPath, Vec<f64>)> {
                let path = params.sample(spec, path_seed(base_seed, i))?;
                let mut block = Vec::with_capacity(initial_points.len() * (path.steps() + 1) * d);
                for x0 in &initial_points {
                    let tr = euler_integrate(b, x0, &path)?;
                    for k in 0..=path.steps() {
                        block.extend_from_slice(tr.at_grid(k));
                    }
                }
                Ok((path, block))
            })
            .collect::<Result<_>>()?;
        let steps = per_path.first().map(|p| p.0.steps()).unwrap_or(0);
        let times = per_path.first().map(|p| (0..=steps).map(|k| p.0.grid_time(k)).collect()).unwrap_or_default();
        let mut paths = Vec::with_capacity(n_paths);
        let mut states = Vec::new();
        for (p, s) in per_path {
            paths.push(p);
            states.extend(s);
        }
        Ok(FlowEnsemble { paths, initial_points, times, dim: d, states })
    }

    pub fn state(&self, path: usize, point: usize, k: usize) -> &[f64] {
        let nt = self.times.len();
        let np = self.initial_points.len();
        let i = ((path * np + point) * nt + k) * self.dim;
        &self.states[i..i + self.dim]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (0..self.dim).map(|c| format!("x_{c}")).collect();
        writeln!(w, "path_id,point_id,time,{}", cols.join(","))?;
        for p in 0..self.paths.len() {
            for q in 0..self.initial_points.len() {
                for (k, t) in self.times.iter().enumerate() {
                    let s: Vec<String> = self.state(p, q, k).iter().map(|v| format!("{v:.17e}")).collect();
                    writeln!(w, "{p},{q},{t:.17e},{}", s.join(","))?;
                }
            }
        }
        Ok(())
    }

    /// Per-point mean and spread of the terminal state, as JSON.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row {
            point: Vec<f64>,
            terminal_mean: Vec<f64>,
            terminal_std: Vec<f64>,
        }
        let last = self.times.len() - 1;
        let n = self.paths.len() as f64;
        let rows: Vec<Row> = (0..self.initial_points.len())
            .map(|q| {
                let mut m = vec![0.0; self.dim];
                let mut s2 = vec![0.0; self.dim];
                for p in 0..self.paths.len() {
                    for (c, v) in self.state(p, q, last).iter().enumerate() {
                        m[c] += v / n;
                        s2[c] += v * v / n;
                    }
                }
                let sd = m.iter().zip(&s2).map(|(m, s)| (s - m * m).max(0.0).sqrt()).collect();
                Row { point: self.initial_points[q].clone(), terminal_mean: m, terminal_std: sd }
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "n_paths": self.paths.len(),
            "seeds": self.paths.iter().map(|p| p.seed).collect::<Vec<_>>(),
            "rows": rows,
        }))
        .map_err(|e| Error::Serde(e.to_string()))
    }
}
