//! Order and flow-composition checks of x ↦ X_t^x in d = 1 under common noise.

use super::config::{DriftPreset, ExperimentConfig, ExperimentKind};
use super::phase::regime_label;
use super::{stage_seed, to_json, Outputs};
use crate::error::{Result, StageContext};
use crate::sde_lab::{euler_integrate, euler_window, path_seed, Drift, PathParams, ZeroDrift};
use crate::stable_model::StableSpec;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, Serialize)]
pub struct HomeomorphismReport {
    pub n_paths: usize,
    pub n_initial: usize,
    /// Consecutive starts x_i < x_{i+1} with X_T^{x_i} ≥ X_T^{x_{i+1}}, summed over paths.
    pub violations: usize,
    pub violating_paths: usize,
    /// max |ξ_{0,t}(x) - ξ_{s,t}(ξ_{0,s}(x))| with s the grid midpoint.
    pub composition_residual: f64,
    /// The same checks with b ≡ 0.
    pub control_violations: usize,
    pub control_residual: f64,
    /// Per path: (seed, violations, composition residual).
    pub per_path: Vec<(u64, usize, f64)>,
}

fn check_path(b: &dyn Drift, starts: &[f64], path: &crate::sde_lab::LevyPath) -> Result<(usize, f64)> {
    let mid = path.steps() / 2;
    let mut terminal = Vec::with_capacity(starts.len());
    let mut residual = 0.0f64;
    for &x in starts {
        let tr = euler_integrate(b, &[x], path)?;
        let t_end = tr.terminal()[0];
        let restarted = euler_window(b, tr.at_grid(mid), path, mid, path.steps())?;
        residual = residual.max((restarted.terminal()[0] - t_end).abs());
        terminal.push(t_end);
    }
    let violations = terminal.windows(2).filter(|w| w[0] >= w[1]).count();
    Ok((violations, residual))
}

/// Integrates `n_initial` sorted starts on `[center - spread, center + spread]` under each path.
pub fn homeomorphism_probe(
    spec: &StableSpec,
    b: &dyn Drift,
    center: f64,
    spread: f64,
    n_initial: usize,
    params: &PathParams,
    n_paths: usize,
    seed: u64,
) -> Result<HomeomorphismReport> {
    let starts: Vec<f64> =
        (0..n_initial).map(|i| center - spread + 2.0 * spread * i as f64 / (n_initial - 1) as f64).collect();
    let zero = ZeroDrift(1);
    let rows: Vec<(u64, usize, f64, usize, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let s = path_seed(seed, i);
            let path = params.sample(spec, s)?;
            let (v, r) = check_path(b, &starts, &path)?;
            let (cv, cr) = check_path(&zero, &starts, &path)?;
            Ok((s, v, r, cv, cr))
        })
        .collect::<Result<_>>()?;
    Ok(HomeomorphismReport {
        n_paths,
        n_initial,
        violations: rows.iter().map(|r| r.1).sum(),
        violating_paths: rows.iter().filter(|r| r.1 > 0).count(),
        composition_residual: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        control_violations: rows.iter().map(|r| r.3).sum(),
        control_residual: rows.iter().map(|r| r.4).fold(0.0, f64::max),
        per_path: rows.iter().map(|r| (r.0, r.1, r.2)).collect(),
    })
}

pub(crate) fn run_probe(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let spec = config.stable_spec()?;
    let drift = config.drift()?;
    let seed = stage_seed(config.seed, ExperimentKind::Homeomorphism, &[0]);
    out.seed("paths", seed);
    let sw = &config.sweep;
    let rep = homeomorphism_probe(
        &spec,
        drift.as_ref(),
        sw.center,
        sw.spread,
        sw.n_initial,
        &config.path_params(),
        config.numerics.n_paths,
        seed,
    )
    .stage("homeomorphism probe")?;
    let mut csv = String::from("path_id,seed,violations,composition_residual\n");
    for (i, (s, v, r)) in rep.per_path.iter().enumerate() {
        let _ = writeln!(csv, "{i},{s},{v},{r}");
    }
    out.add("probe.csv", csv);
    let regime = match config.drift.preset {
        DriftPreset::Tanaka => regime_label(spec.alpha, config.drift.beta.expect("validated")),
        DriftPreset::Zero | DriftPreset::Constant => "uniqueness",
        DriftPreset::Tabulated => "unknown",
    };
    if regime == "uniqueness" && rep.violations > 0 {
        out.violation(format!("{} order violations in the uniqueness regime", rep.violations));
    }
    if rep.control_violations > 0 || rep.control_residual != 0.0 {
        out.violation("b = 0 control is not an exact translation flow");
    }
    let summary = serde_json::json!({
        "regime": regime,
        "n_paths": rep.n_paths,
        "n_initial": rep.n_initial,
        "violations": rep.violations,
        "violating_paths": rep.violating_paths,
        "composition_residual": rep.composition_residual,
        "control_violations": rep.control_violations,
        "control_residual": rep.control_residual,
    });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}
