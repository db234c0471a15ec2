//! Two-point ratio sweeps and the (α, β) phase diagram.
//!
//! Non-uniqueness from x = 0 cannot appear as two different outputs of one deterministic
//! Euler scheme. It is measured instead through its shadow: the common-noise ratio
//! E[sup|X^x - X^y|^p]/|x-y|^p for starts ±δ/2 grows without bound as δ ↓ 0.

use super::config::{DriftPreset, ExperimentConfig, ExperimentKind};
use super::{stage_seed, to_json, Outputs};
use crate::error::{Result, StageContext};
use crate::resolvent_solver::ls_slope;
use crate::sde_lab::{lipschitz_ratio, Drift, PathParams};
use crate::stable_model::StableSpec;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

/// |slope| of ln ratio against ln|x-y| accepted as flat.
pub const STABLE_SLOPE: f64 = 0.1;
/// Ratio growth across the sweep below which a flat cell counts as stable.
pub const STABLE_GROWTH: f64 = 2.0;
/// Ratio growth across the sweep that counts as divergence.
pub const DIVERGING_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Stable,
    Diverging,
    Inconclusive,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Stable => "STABLE",
            Classification::Diverging => "DIVERGING",
            Classification::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// How the two starts are placed around the centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStyle {
    /// x = c, y = c + δ.
    Offset,
    /// x = c - δ/2, y = c + δ/2.
    Symmetric,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub separation: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub max: f64,
    pub seed: u64,
}

/// The same paths (base seed `seed`) are reused for every separation.
#[allow(clippy::too_many_arguments)]
pub fn ratio_sweep(
    spec: &StableSpec,
    b: &dyn Drift,
    center: f64,
    separations: &[f64],
    style: SweepStyle,
    p: f64,
    params: &PathParams,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<RatioRow>> {
    separations
        .iter()
        .map(|&d| {
            let (x, y) = match style {
                SweepStyle::Offset => (center, center + d),
                SweepStyle::Symmetric => (center - 0.5 * d, center + 0.5 * d),
            };
            let r = lipschitz_ratio(spec, b, &[x], &[y], p, params, n_paths, seed)?;
            Ok(RatioRow { separation: d, estimate: r.estimate, std_error: r.std_error, max: r.max, seed })
        })
        .collect()
}

/// (slope, growth, class) of a sweep ordered from the largest separation to the smallest.
pub fn classify(rows: &[RatioRow]) -> (f64, f64, Classification) {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.separation.ln(), r.estimate.ln())).collect();
    let slope = ls_slope(&pts);
    let growth = rows.last().map(|r| r.estimate).unwrap_or(f64::NAN) / rows[0].estimate;
    let class = if growth >= DIVERGING_GROWTH {
        Classification::Diverging
    } else if slope.abs() <= STABLE_SLOPE && growth <= STABLE_GROWTH && growth >= 1.0 / STABLE_GROWTH {
        Classification::Stable
    } else {
        Classification::Inconclusive
    };
    (slope, growth, class)
}

/// "uniqueness" when α ≥ 1 and β > 1 - α/2, "tanaka" when α + β < 1, "gap" otherwise.
pub fn regime_label(alpha: f64, beta: f64) -> &'static str {
    if alpha >= 1.0 && beta > 1.0 - alpha / 2.0 {
        "uniqueness"
    } else if alpha + beta < 1.0 {
        "tanaka"
    } else {
        "gap"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    pub regime: &'static str,
    pub slope: f64,
    pub growth: f64,
    /// dt^{1/(1-β)}: below this separation one frozen-drift Euler step at the kink moves each
    /// start by more than their distance, so the scheme itself separates the pair.
    pub kink_scale: f64,
    /// Classification from the measurement alone.
    pub measured: Classification,
    /// Reported class: INCONCLUSIVE by design in the gap regime of the Tanaka preset.
    pub class: Classification,
    pub seed: u64,
    pub rows: Vec<RatioRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagram {
    pub cells: Vec<PhaseCell>,
    /// Pairs (stable cell, diverging cell) where the diverging cell has α and β at least as large.
    pub monotonicity_violations: Vec<String>,
}

/// Classifies every (α, β) cell of the grid. Cells run concurrently; results keep grid order.
pub fn phase_diagram(config: &ExperimentConfig, alphas: &[f64], betas: &[f64]) -> Result<PhaseDiagram> {
    let cells: Vec<(usize, f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .enumerate()
        .map(|(i, (a, b))| (i, a, b))
        .collect();
    let params = config.path_params();
    let n = &config.numerics;
    let sw = &config.sweep;
    let tanaka = config.drift.preset == DriftPreset::Tanaka;
    let cells: Vec<PhaseCell> = cells
        .par_iter()
        .map(|&(i, alpha, beta)| -> Result<PhaseCell> {
            let spec = config.stable_spec_with_alpha(alpha)?;
            let drift = config.drift_with_beta(Some(beta))?;
            let seed = stage_seed(config.seed, ExperimentKind::PhaseDiagram, &[i as u64]);
            let rows = ratio_sweep(
                &spec,
                drift.as_ref(),
                sw.center,
                &sw.separations,
                SweepStyle::Symmetric,
                n.p,
                &params,
                n.n_paths,
                seed,
            )
            .stage(&format!("cell alpha={alpha} beta={beta}"))?;
            let (slope, growth, measured) = classify(&rows);
            let regime = regime_label(alpha, beta);
            let class = if tanaka && regime == "gap" { Classification::Inconclusive } else { measured };
            let kink_scale = params.dt.powf(1.0 / (1.0 - beta));
            Ok(PhaseCell { alpha, beta, regime, slope, growth, kink_scale, measured, class, seed, rows })
        })
        .collect::<Result<_>>()?;
    let mut monotonicity_violations = Vec::new();
    for s in cells.iter().filter(|c| c.class == Classification::Stable) {
        for d in cells.iter().filter(|c| c.class == Classification::Diverging) {
            let dominates = d.alpha >= s.alpha && d.beta >= s.beta && (d.alpha > s.alpha || d.beta > s.beta);
            if dominates {
                monotonicity_violations.push(format!(
                    "STABLE ({}, {}) is dominated by DIVERGING ({}, {})",
                    s.alpha, s.beta, d.alpha, d.beta
                ));
            }
        }
    }
    Ok(PhaseDiagram { cells, monotonicity_violations })
}

fn ratio_csv(rows: &[RatioRow], prefix: Option<(f64, f64)>) -> String {
    let mut s = String::new();
    for r in rows {
        if let Some((a, b)) = prefix {
            let _ = write!(s, "{a},{b},");
        }
        let _ = writeln!(s, "{},{},{},{},{}", r.separation, r.estimate, r.std_error, r.max, r.seed);
    }
    s
}

pub(crate) fn run_ratio(config: &ExperimentConfig, style: SweepStyle, out: &mut Outputs) -> Result<serde_json::Value> {
    let spec = config.stable_spec()?;
    let drift = config.drift()?;
    let n = &config.numerics;
    let seed = stage_seed(config.seed, config.kind, &[0]);
    out.seed("paths", seed);
    let rows = ratio_sweep(
        &spec,
        drift.as_ref(),
        config.sweep.center,
        &config.sweep.separations,
        style,
        n.p,
        &config.path_params(),
        n.n_paths,
        seed,
    )
    .stage("ratio sweep")?;
    let (slope, growth, class) = classify(&rows);
    if rows.iter().any(|r| !r.estimate.is_finite()) {
        out.violation("non-finite ratio estimate");
    }
    out.add("ratio.csv", format!("separation,estimate,std_error,max,seed\n{}", ratio_csv(&rows, None)));
    let summary = serde_json::json!({ "slope": slope, "growth": growth, "class": class.label() });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}

pub(crate) fn run_phase(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let pd = phase_diagram(config, &config.sweep.alphas, &config.sweep.betas)?;
    let mut table = String::from("alpha,beta,regime,slope,growth,kink_scale,measured,class,seed\n");
    let mut ratios = String::from("alpha,beta,separation,estimate,std_error,max,seed\n");
    for (i, c) in pd.cells.iter().enumerate() {
        out.seed(format!("cell {i}"), c.seed);
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            c.alpha,
            c.beta,
            c.regime,
            c.slope,
            c.growth,
            c.kink_scale,
            c.measured.label(),
            c.class.label(),
            c.seed
        );
        ratios.push_str(&ratio_csv(&c.rows, Some((c.alpha, c.beta))));
    }
    for v in &pd.monotonicity_violations {
        out.violation(v.clone());
    }
    out.add("phase.csv", table);
    out.add("phase_ratios.csv", ratios);
    let summary = serde_json::json!({
        "cells": pd.cells.iter().map(|c| serde_json::json!({
            "alpha": c.alpha, "beta": c.beta, "regime": c.regime,
            "class": c.class.label(), "measured": c.measured.label(),
            "slope": c.slope, "growth": c.growth, "kink_scale": c.kink_scale,
        })).collect::<Vec<_>>(),
        "monotonicity_violations": pd.monotonicity_violations,
    });
    out.add("summary.json", to_json(&summary)?);
    Ok(summary)
}
