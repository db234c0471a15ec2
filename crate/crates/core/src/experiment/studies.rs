//! Density tables, resolvent solves and the transform-based path studies.

use super::config::{DriftPreset, ExperimentConfig, ExperimentKind, MeasurePreset};
use super::{stage_seed, to_json, Outputs};
use crate::density_engine::DensityEngine;
use crate::error::{Error, Result, StageContext};
use crate::nonlocal_calculus::Lattice;
use crate::resolvent_solver::{
    gradient_decay_scan, solve_constant_drift, solve_hoelder_drift, DriftTerm, ResolventProblem, ResolventSolution,
    SolverOptions,
};
use crate::sde_lab::{
    build_transform, conjugacy_error, derivative_flow, integrate_transformed, mean_se, path_seed, sample_levy_path,
    Drift, TanakaTransform,
};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Finite-difference step of the derivative-flow check.
pub const FD_STEP: f64 = 1e-4;

pub(crate) fn run_density(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let spec = config.stable_spec()?;
    let n = &config.numerics;
    let lat = Lattice::cube(spec.dim, n.half_width, n.spacing)?;
    let table = DensityEngine::new(&spec).and_then(|e| e.tabulate(n.t, &lat)).stage("density table")?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    out.add("density.csv", String::from_utf8(buf).expect("utf8 csv"));
    let cauchy = spec.dim == 1 && spec.alpha == 1.0 && config.spec.measure == MeasurePreset::Isotropic;
    let cauchy_error = cauchy.then(|| {
        let g = n.t * spec.scale;
        (0..lat.len())
            .filter(|&k| lat.coord(0, k).abs() <= 10.0)
            .map(|k| {
                let x = lat.coord(0, k);
                (table.values[k] - g / (PI * (g * g + x * x))).abs()
            })
            .fold(0.0, f64::max)
    });
    if let Some(e) = cauchy_error {
        if e > 1e-5 {
            out.violation(format!("Cauchy sup error {e:.3e} exceeds 1e-5"));
        }
    }
    let summary = serde_json::json!({
        "t": n.t,
        "points": lat.len(),
        "riemann_mass": table.riemann_mass(),
        "captured_mass": table.captured_mass,
        "symmetry_defect": table.symmetry_defect(),
        "method": table.method,
        "cauchy_sup_error": cauchy_error,
    });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}

fn solver_options(residual: bool) -> SolverOptions {
    SolverOptions { compute_residual: residual, ..Default::default() }
}

/// The problem λu - 𝓛u - b·Du = b on [-half_width, half_width] and its solution.
pub fn resolvent_for(config: &ExperimentConfig, lambda: f64, residual: bool) -> Result<(ResolventProblem, ResolventSolution)> {
    let spec = config.stable_spec()?;
    let beta = config.drift.beta.ok_or_else(|| Error::ConfigInvalid("drift.beta is required".into()))?;
    let field = config.drift_field()?;
    let (drift, solve): (DriftTerm, fn(&ResolventProblem, &SolverOptions) -> Result<ResolventSolution>) =
        match config.drift.preset {
            DriftPreset::Constant => (DriftTerm::Constant(config.drift.value.clone()), solve_constant_drift),
            DriftPreset::Zero => (DriftTerm::Constant(vec![0.0]), solve_constant_drift),
            _ => (DriftTerm::Field(field.clone()), solve_hoelder_drift),
        };
    let problem = ResolventProblem::new(spec, lambda, drift, field, beta)?;
    let sol = solve(&problem, &solver_options(residual)).stage("resolvent solve")?;
    Ok((problem, sol))
}

/// Resolvent solution with g = b and the transform built from it.
pub fn transform_for(config: &ExperimentConfig) -> Result<(ResolventSolution, TanakaTransform)> {
    let (mut problem, sol) = resolvent_for(config, config.numerics.lambda, false)?;
    if let DriftTerm::Constant(_) = problem.drift {
        problem.drift = DriftTerm::Field(problem.source.clone());
    }
    let tf = build_transform(&problem, &sol, config.numerics.r).stage("transform")?;
    Ok((sol, tf))
}

pub(crate) fn run_resolvent(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let (problem, sol) = resolvent_for(config, config.numerics.lambda, true)?;
    let mut buf = Vec::new();
    sol.write_csv(&mut buf)?;
    out.add("resolvent.csv", String::from_utf8(buf).expect("utf8 csv"));
    out.add("resolvent.json", sol.diagnostics_json()?);
    let d = &sol.diagnostics;
    if d.lambda_u_sup > d.g_sup * (1.0 + 1e-6) {
        out.violation(format!("maximum principle: lambda|u| = {} > |g| = {}", d.lambda_u_sup, d.g_sup));
    }
    let mut summary = serde_json::json!({
        "method": d.method,
        "residual": d.residual,
        "residual_within_tolerance": d.residual.map(|r| r <= d.tolerance),
        "lambda_u_sup": d.lambda_u_sup,
        "g_sup": d.g_sup,
        "du_sup": sol.du.sup_norm(),
    });
    if !config.sweep.lambdas.is_empty() {
        let DriftTerm::Field(b) = &problem.drift else {
            return Err(Error::ConfigInvalid("a decay scan needs a drift field preset".into()));
        };
        let scan = gradient_decay_scan(
            &problem.spec,
            b,
            &problem.source,
            problem.beta,
            &config.sweep.lambdas,
            &solver_options(false),
        )
        .stage("decay scan")?;
        let mut csv = String::from("lambda,du_sup\n");
        for (l, g) in &scan.rows {
            let _ = writeln!(csv, "{l},{g}");
        }
        out.add("decay.csv", csv);
        if scan.max_principle_margins.iter().any(|&m| m < -1e-6) {
            out.violation("maximum principle fails in the decay scan");
        }
        if !scan.non_increasing {
            out.violation("||Du_lambda|| is not non-increasing in lambda");
        }
        summary["decay"] = serde_json::to_value(&scan).map_err(|e| Error::Serde(e.to_string()))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeFlowRow {
    pub seed: u64,
    pub h_terminal: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeFlowStudy {
    pub c_lambda: f64,
    pub rows: Vec<DerivativeFlowRow>,
    /// Seeds of paths that left the lattice box.
    pub excluded: Vec<u64>,
    pub mean_relative_error: f64,
}

/// H_T against (Y^{y+δ}_T - Y^{y-δ}_T)/2δ on the same path, y = ψ(center).
pub fn derivative_flow_study(config: &ExperimentConfig, tf: &TanakaTransform, seed: u64) -> Result<DerivativeFlowStudy> {
    let y0 = tf.psi(config.sweep.center);
    let params = config.path_params();
    let rows: Vec<std::result::Result<DerivativeFlowRow, u64>> = (0..config.numerics.n_paths)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let s = path_seed(seed, i);
            let path = params.sample(&tf.spec, s)?;
            let run = || -> Result<DerivativeFlowRow> {
                let h = derivative_flow(tf, &path, y0)?;
                let up = integrate_transformed(tf, y0 + FD_STEP, &path)?;
                let dn = integrate_transformed(tf, y0 - FD_STEP, &path)?;
                let fd = (up.y.terminal()[0] - dn.y.terminal()[0]) / (2.0 * FD_STEP);
                let ht = *h.h.as_ref().and_then(|v| v.last()).expect("derivative recorded");
                Ok(DerivativeFlowRow { seed: s, h_terminal: ht, finite_difference: fd, relative_error: ((ht - fd) / fd).abs() })
            };
            match run() {
                Ok(r) => Ok(Ok(r)),
                Err(Error::BoxExceeded(_)) => Ok(Err(s)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let excluded: Vec<u64> = rows.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    let rows: Vec<DerivativeFlowRow> = rows.into_iter().filter_map(|r| r.ok()).collect();
    let mean = rows.iter().map(|r| r.relative_error).sum::<f64>() / rows.len().max(1) as f64;
    Ok(DerivativeFlowStudy { c_lambda: tf.c_lambda, rows, excluded, mean_relative_error: mean })
}

pub(crate) fn run_derivative_flow(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let (_, tf) = transform_for(config)?;
    let seed = stage_seed(config.seed, ExperimentKind::DerivativeFlow, &[0]);
    out.seed("paths", seed);
    let st = derivative_flow_study(config, &tf, seed).stage("derivative flow")?;
    let mut csv = String::from("seed,h_terminal,finite_difference,relative_error\n");
    for r in &st.rows {
        let _ = writeln!(csv, "{},{},{},{}", r.seed, r.h_terminal, r.finite_difference, r.relative_error);
    }
    out.add("derivative_flow.csv", csv);
    if st.rows.is_empty() || st.mean_relative_error > 1e-2 {
        out.violation(format!("mean relative error {:.3e} exceeds 1e-2", st.mean_relative_error));
    }
    let summary = serde_json::json!({
        "c_lambda": st.c_lambda,
        "paths_used": st.rows.len(),
        "excluded_seeds": st.excluded,
        "mean_relative_error": st.mean_relative_error,
    });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyLevel {
    pub dt: f64,
    pub eps: f64,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyStudy {
    pub c_lambda: f64,
    pub levels: Vec<ConjugacyLevel>,
    /// (seed, sup_t error at every level) for the paths that stayed in the box at all levels.
    pub per_path: Vec<(u64, Vec<f64>)>,
    pub excluded: Vec<u64>,
    /// Each level's mean is at most the previous one plus twice their combined standard error.
    pub monotone: bool,
}

/// sup_t |ψ(X_t) - Y_t| from x = center over the refinement levels. Path i has the same seed at
/// every level, so jumps above the coarse cutoff are shared.
pub fn conjugacy_study(
    config: &ExperimentConfig,
    tf: &TanakaTransform,
    b: &dyn Drift,
    seed: u64,
) -> Result<ConjugacyStudy> {
    let n = &config.numerics;
    let levels = &config.sweep.refinements;
    let x0 = config.sweep.center;
    let rows: Vec<std::result::Result<(u64, Vec<f64>), u64>> = (0..n.n_paths)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let s = path_seed(seed, i);
            let mut errs = Vec::with_capacity(levels.len());
            for &(dt, eps) in levels {
                let path = sample_levy_path(&tf.spec, n.horizon, dt, eps, s, n.policy)?;
                match conjugacy_error(tf, b, x0, &path) {
                    Ok(e) => errs.push(e),
                    Err(Error::BoxExceeded(_)) => return Ok(Err(s)),
                    Err(e) => return Err(e),
                }
            }
            Ok(Ok((s, errs)))
        })
        .collect::<Result<_>>()?;
    let excluded: Vec<u64> = rows.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    let per_path: Vec<(u64, Vec<f64>)> = rows.into_iter().filter_map(|r| r.ok()).collect();
    let levels: Vec<ConjugacyLevel> = levels
        .iter()
        .enumerate()
        .map(|(k, &(dt, eps))| {
            let v: Vec<f64> = per_path.iter().map(|p| p.1[k]).collect();
            let (mean, std_error) = mean_se(&v);
            ConjugacyLevel { dt, eps, mean, std_error }
        })
        .collect();
    let monotone = levels.windows(2).all(|w| {
        let noise = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].mean <= w[0].mean + 2.0 * noise
    });
    Ok(ConjugacyStudy { c_lambda: tf.c_lambda, levels, per_path, excluded, monotone })
}

pub(crate) fn run_conjugacy(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let (_, tf) = transform_for(config)?;
    let b = config.drift()?;
    let seed = stage_seed(config.seed, ExperimentKind::Conjugacy, &[0]);
    out.seed("paths", seed);
    let st = conjugacy_study(config, &tf, b.as_ref(), seed).stage("conjugacy")?;
    let mut csv = String::from("dt,eps,mean,std_error,seed\n");
    for l in &st.levels {
        let _ = writeln!(csv, "{},{},{},{},{seed}", l.dt, l.eps, l.mean, l.std_error);
    }
    out.add("conjugacy.csv", csv);
    let mut per = String::from("seed");
    for k in 0..st.levels.len() {
        let _ = write!(per, ",level_{k}");
    }
    per.push('\n');
    for (s, e) in &st.per_path {
        let cols: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(per, "{s},{}", cols.join(","));
    }
    out.add("conjugacy_paths.csv", per);
    if !st.monotone {
        out.violation("conjugacy error does not decrease under refinement");
    }
    let summary = serde_json::json!({
        "c_lambda": st.c_lambda,
        "levels": st.levels,
        "paths_used": st.per_path.len(),
        "excluded_seeds": st.excluded,
        "monotone": st.monotone,
    });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}
