//! TOML experiment configuration: one experiment per file.
//!
//! ```toml
//! kind = "phase-diagram"
//! seed = 7
//!
//! [spec]
//! alpha = 1.5
//! measure = "isotropic"
//!
//! [drift]
//! preset = "tanaka"
//! beta = 0.8
//!
//! [numerics]
//! n_paths = 1000
//!
//! [sweep]
//! alphas = [0.5, 1.5]
//! betas = [0.3, 0.8]
//! ```

use crate::error::{Error, Result};
use crate::nonlocal_calculus::{Extension, GridFunction, Lattice};
use crate::resolvent_solver::tanaka_drift;
use crate::sde_lab::{ConstantDrift, Drift, GridDrift, PathParams, SmallJumpPolicy, TanakaDrift, ZeroDrift};
use crate::stable_model::{Atom, SpectralMeasure, StableSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DensityTable,
    Resolvent,
    UniquenessRatio,
    Tanaka,
    PhaseDiagram,
    Homeomorphism,
    DerivativeFlow,
    Conjugacy,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::DensityTable => "density-table",
            ExperimentKind::Resolvent => "resolvent",
            ExperimentKind::UniquenessRatio => "uniqueness-ratio",
            ExperimentKind::Tanaka => "tanaka",
            ExperimentKind::PhaseDiagram => "phase-diagram",
            ExperimentKind::Homeomorphism => "homeomorphism",
            ExperimentKind::DerivativeFlow => "derivative-flow",
            ExperimentKind::Conjugacy => "conjugacy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurePreset {
    /// `directions` equally spaced unit vectors (d = 1: ±1; d = 2: on the circle).
    Isotropic,
    /// ±e_k with equal weights.
    Axes,
    /// Explicit atoms from `spec.atoms`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub alpha: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(default = "isotropic")]
    pub measure: MeasurePreset,
    #[serde(default)]
    pub directions: Option<usize>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default = "one")]
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftPreset {
    Tanaka,
    Constant,
    Tabulated,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub preset: DriftPreset,
    /// Hölder exponent; for `tanaka` also the exponent of the drift.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Constant drift vector.
    #[serde(default)]
    pub value: Vec<f64>,
    /// Tabulated d = 1 drift: values on a uniform grid over [lower, upper].
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { preset: DriftPreset::Zero, beta: None, value: vec![], lower: None, upper: None, values: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub lambda: f64,
    pub dt: f64,
    pub eps: f64,
    pub r: f64,
    /// Half width of the lattice box.
    pub half_width: f64,
    pub spacing: f64,
    pub n_paths: usize,
    pub p: f64,
    /// Horizon T of the path experiments.
    pub horizon: f64,
    /// Time of the density table.
    pub t: f64,
    pub policy: SmallJumpPolicy,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            lambda: 20.0,
            dt: 1e-2,
            eps: 0.1,
            r: 0.5,
            half_width: 10.0,
            spacing: 0.01,
            n_paths: 1000,
            p: 2.0,
            horizon: 1.0,
            t: 1.0,
            policy: SmallJumpPolicy::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    /// |x - y| values of the ratio scans, largest first.
    pub separations: Vec<f64>,
    /// Centre of the initial points.
    pub center: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// λ values of a resolvent decay scan.
    pub lambdas: Vec<f64>,
    pub n_initial: usize,
    /// Half width of the homeomorphism probe's initial grid.
    pub spread: f64,
    /// (dt, eps) pairs of a conjugacy refinement study.
    pub refinements: Vec<(f64, f64)>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            separations: vec![1e-2, 1e-3, 1e-4, 1e-5],
            center: 0.0,
            alphas: vec![],
            betas: vec![],
            lambdas: vec![],
            n_initial: 64,
            spread: 1.0,
            refinements: vec![(1e-2, 1e-1), (5e-3, 5e-2), (2.5e-3, 2.5e-2)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory (relative paths resolve against the output root).
    #[serde(default)]
    pub output: Option<String>,
    pub spec: SpecConfig,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sweep: Sweep,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn isotropic() -> MeasurePreset {
    MeasurePreset::Isotropic
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        let s = &self.spec;
        if !(s.alpha > 0.0 && s.alpha < 2.0) {
            return Err(bad(format!("spec.alpha must lie in (0, 2), got {}", s.alpha)));
        }
        if s.dim == 0 || s.dim > 3 {
            return Err(bad(format!("spec.dim must be 1, 2 or 3, got {}", s.dim)));
        }
        if !(s.scale > 0.0) {
            return Err(bad("spec.scale must be positive"));
        }
        let positive = [
            ("lambda", n.lambda),
            ("dt", n.dt),
            ("eps", n.eps),
            ("half_width", n.half_width),
            ("spacing", n.spacing),
            ("horizon", n.horizon),
            ("t", n.t),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if n.eps > 1.0 {
            return Err(bad("numerics.eps must be at most 1"));
        }
        if !(n.r > 0.0 && n.r < 1.0) {
            return Err(bad("numerics.r must lie in (0, 1)"));
        }
        if n.p < 1.0 {
            return Err(bad("numerics.p must be at least 1"));
        }
        if let Some(b) = self.drift.beta {
            if !(b > 0.0 && b < 1.0) {
                return Err(bad(format!("drift.beta must lie in (0, 1), got {b}")));
            }
        }
        match self.drift.preset {
            DriftPreset::Tanaka => {
                if s.dim != 1 {
                    return Err(bad("the tanaka drift preset requires dim = 1"));
                }
                if self.drift.beta.is_none() {
                    return Err(bad("the tanaka drift preset needs drift.beta"));
                }
            }
            DriftPreset::Constant => {
                if self.drift.value.len() != s.dim {
                    return Err(bad("drift.value must have spec.dim entries"));
                }
            }
            DriftPreset::Tabulated => {
                let (Some(lo), Some(hi)) = (self.drift.lower, self.drift.upper) else {
                    return Err(bad("tabulated drift needs drift.lower and drift.upper"));
                };
                if s.dim != 1 || !(hi > lo) || self.drift.values.len() < 2 {
                    return Err(bad("tabulated drift needs dim = 1, upper > lower and at least two values"));
                }
            }
            DriftPreset::Zero => {}
        }
        if self.sweep.separations.iter().any(|&d| !(d > 0.0)) {
            return Err(bad("sweep.separations must be positive"));
        }
        use ExperimentKind::*;
        match self.kind {
            UniquenessRatio | Tanaka | PhaseDiagram if self.sweep.separations.len() < 2 => {
                return Err(bad("ratio scans need at least two separations"))
            }
            UniquenessRatio | Tanaka | Homeomorphism if s.dim != 1 => {
                return Err(bad(format!("{} runs in dim = 1", self.kind.label())))
            }
            PhaseDiagram => {
                if s.dim != 1 {
                    return Err(bad("phase-diagram runs in dim = 1"));
                }
                if self.sweep.alphas.is_empty() || self.sweep.betas.is_empty() {
                    return Err(bad("phase-diagram needs sweep.alphas and sweep.betas"));
                }
                if self.sweep.alphas.iter().any(|&a| !(0.4..=1.9).contains(&a)) {
                    return Err(bad("phase-diagram alphas must lie in [0.4, 1.9]"));
                }
                if self.sweep.betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
                    return Err(bad("phase-diagram betas must lie in (0, 1)"));
                }
            }
            Homeomorphism if self.sweep.n_initial < 2 => return Err(bad("sweep.n_initial must be at least 2")),
            Resolvent | DerivativeFlow | Conjugacy => {
                if s.dim != 1 {
                    return Err(bad(format!("{} runs in dim = 1", self.kind.label())));
                }
                if self.drift.beta.is_none() {
                    return Err(bad("the resolvent-based experiments need drift.beta"));
                }
                if self.kind == Conjugacy && self.sweep.refinements.len() < 2 {
                    return Err(bad("conjugacy needs at least two refinements"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn stable_spec(&self) -> Result<StableSpec> {
        self.stable_spec_with_alpha(self.spec.alpha)
    }

    pub fn stable_spec_with_alpha(&self, alpha: f64) -> Result<StableSpec> {
        let s = &self.spec;
        let measure = match s.measure {
            MeasurePreset::Isotropic => SpectralMeasure::isotropic(s.dim, s.directions.unwrap_or(2 * s.dim))?,
            MeasurePreset::Axes => SpectralMeasure::axes(s.dim, 1.0)?,
            MeasurePreset::Custom => SpectralMeasure::new(s.dim, s.atoms.clone())?,
        };
        StableSpec::new(alpha, measure, s.scale)
    }

    /// The drift as an SDE coefficient, with β overridden for phase-diagram cells.
    pub fn drift_with_beta(&self, beta: Option<f64>) -> Result<Box<dyn Drift>> {
        let d = &self.drift;
        Ok(match d.preset {
            DriftPreset::Tanaka => Box::new(TanakaDrift { beta: beta.or(d.beta).expect("validated") }),
            DriftPreset::Constant => Box::new(ConstantDrift(d.value.clone())),
            DriftPreset::Zero => Box::new(ZeroDrift(self.spec.dim)),
            DriftPreset::Tabulated => Box::new(GridDrift(self.tabulated_drift()?)),
        })
    }

    pub fn drift(&self) -> Result<Box<dyn Drift>> {
        self.drift_with_beta(None)
    }

    fn tabulated_drift(&self) -> Result<GridFunction> {
        let d = &self.drift;
        let (lo, hi) = (d.lower.expect("validated"), d.upper.expect("validated"));
        let n = d.values.len();
        let lat = Lattice::new(vec![0.5 * (lo + hi)], vec![0.5 * (hi - lo)], (hi - lo) / (n - 1) as f64)?;
        GridFunction::from_values(lat, 1, d.values.clone(), Extension::Constant)
    }

    /// The drift sampled on the resolvent lattice [-half_width, half_width].
    pub fn drift_field(&self) -> Result<GridFunction> {
        let n = &self.numerics;
        let lat = Lattice::cube(1, n.half_width, n.spacing)?;
        let d = &self.drift;
        match d.preset {
            DriftPreset::Tanaka => {
                let beta = d.beta.expect("validated");
                GridFunction::sample(lat, |x| tanaka_drift(x[0], beta), Extension::Constant)
            }
            _ => {
                let b = self.drift()?;
                GridFunction::sample(
                    lat,
                    |x| {
                        let mut o = [0.0];
                        b.eval(x, &mut o);
                        o[0]
                    },
                    Extension::Constant,
                )
            }
        }
    }

    pub fn path_params(&self) -> PathParams {
        let n = &self.numerics;
        PathParams { horizon: n.horizon, dt: n.dt, eps: n.eps, policy: n.policy }
    }
}
