//! Resolvent equation λu - 𝓛u - b·Du = g on a one-dimensional lattice.
//!
//! Constant drift uses the semigroup representation u = ∫ e^{-λt} P_t g dt with P_t g(x) =
//! ∫ g(z + tk) p_t(z - x) dz, discretized on the piecewise-linear interpolant of g (see
//! [`kernel`]). Hölder drift is solved by the fixed-point map Du ↦ D R_λ[g + b·Du], falling
//! back to a direct LU solve of the linear system for Du when the plain iteration stalls.

mod kernel;

use crate::density_engine::StableLaw1d;
use crate::error::{Error, Result};
use crate::nonlocal_calculus::{apply_generator_component, hoelder_seminorm, Extension, GridFunction, RadialGrid};
use crate::stable_model::StableSpec;
use kernel::{KernelParams, Layout, ResolventKernel};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

const WORKING_BETA_GAP: f64 = 0.01;

/// Drift of the resolvent equation.
#[derive(Debug, Clone)]
pub enum DriftTerm {
    Constant(Vec<f64>),
    /// R^d-valued field on the same lattice as the source.
    Field(GridFunction),
}

#[derive(Debug, Clone)]
pub struct ResolventProblem {
    pub spec: StableSpec,
    pub lambda: f64,
    pub drift: DriftTerm,
    /// Scalar or vector source; vector sources are solved componentwise.
    pub source: GridFunction,
    /// Hölder exponent of the source and of a drift field.
    pub beta: f64,
}

impl ResolventProblem {
    pub fn new(spec: StableSpec, lambda: f64, drift: DriftTerm, source: GridFunction, beta: f64) -> Result<Self> {
        let p = ResolventProblem { spec, lambda, drift, source, beta };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        let d = self.spec.dim;
        if d != 1 {
            return Err(Error::UnsupportedDimension(d));
        }
        if self.source.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.source.dim() });
        }
        if self.source.is_callback() {
            return Err(Error::invalid("the solver needs a sampled source (constant or periodic extension)"));
        }
        if self.source.lattice().len() < 3 {
            return Err(Error::invalid("the lattice needs at least three nodes"));
        }
        match &self.drift {
            DriftTerm::Constant(k) => {
                if k.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: k.len() });
                }
            }
            DriftTerm::Field(b) => {
                if b.lattice() != self.source.lattice() {
                    return Err(Error::invalid("drift and source must share a lattice"));
                }
                if b.arity() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: b.arity() });
                }
                if b.is_callback() || !same_extension(b.extension(), self.source.extension()) {
                    return Err(Error::invalid("drift must be sampled with the source's extension"));
                }
            }
        }
        Ok(())
    }
}

fn same_extension(a: &Extension, b: &Extension) -> bool {
    matches!((a, b), (Extension::Constant, Extension::Constant) | (Extension::Periodic, Extension::Periodic))
}

/// Numerical knobs of the solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    /// GL8 panel width in ln t.
    pub time_panel_width: f64,
    /// t_min is where the noise scale σt^{1/α} equals this fraction of the spacing.
    pub t_min_factor: f64,
    /// Stop the fixed-point iteration when ‖Du_{n+1} - Du_n‖_0 falls below this.
    pub picard_tol: f64,
    pub max_iterations: usize,
    /// Declared bound for the independent residual on the interior sub-box.
    pub tolerance: f64,
    pub compute_residual: bool,
    /// Minimum number of periodic images summed on either side.
    pub min_images: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            time_panel_width: 1.0,
            t_min_factor: 1e-6,
            picard_tol: 1e-10,
            max_iterations: 600,
            tolerance: 1e-3,
            compute_residual: true,
            min_images: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    /// Drift strength δ of the stage being iterated.
    pub delta: f64,
    pub difference: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    /// 1 - λ‖u‖_0/‖g‖_0; the maximum principle says this is nonnegative.
    pub max_principle_margin: f64,
    pub lambda_u_sup: f64,
    pub g_sup: f64,
    pub iterations: Vec<IterationRecord>,
    /// Drift strengths at which a dense operator was factorized (1.0 for the direct solve).
    pub stages: Vec<f64>,
    pub time_nodes: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Hölder exponent used for the regime checks (below β when α + β ≥ 2).
    pub working_beta: f64,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    /// Solution with Hermite slopes from `du` attached.
    pub u: GridFunction,
    pub du: GridFunction,
    pub diagnostics: Diagnostics,
}

fn kernel_for(problem: &ResolventProblem, drift: f64, options: &SolverOptions) -> Result<ResolventKernel> {
    let spec = &problem.spec;
    spec.nondegeneracy_constant(2)?;
    let lat = problem.source.lattice();
    let h = lat.spacing;
    let layout = match problem.source.extension() {
        Extension::Periodic => {
            let n = lat.len() - 1;
            let period = n as f64 * h;
            let images = options.min_images.max((60.0 / period).ceil() as usize);
            Layout::Periodic { n, images }
        }
        _ => Layout::Clamped { n: lat.len() },
    };
    let sigma = spec.characteristic_exponent(&[1.0]).powf(1.0 / spec.alpha);
    let law = StableLaw1d::shared(spec.alpha)?;
    ResolventKernel::build(
        law,
        &KernelParams {
            alpha: spec.alpha,
            sigma,
            lambda: problem.lambda,
            drift,
            h,
            layout,
            panel_width: options.time_panel_width,
            t_min_factor: options.t_min_factor,
        },
    )
}

fn component_values(f: &GridFunction, c: usize) -> Vec<f64> {
    (0..f.lattice().len()).map(|k| f.node(k, c)).collect()
}

fn assemble(
    problem: &ResolventProblem,
    kernel: &ResolventKernel,
    method: &str,
    comps: Vec<(Vec<f64>, Vec<f64>)>,
    iterations: Vec<IterationRecord>,
    stages: Vec<f64>,
    options: &SolverOptions,
) -> Result<ResolventSolution> {
    let lat = problem.source.lattice().clone();
    let m = comps.len();
    let n = lat.len();
    let mut u = vec![0.0; n * m];
    let mut du = vec![0.0; n * m];
    for (c, (uc, dc)) in comps.iter().enumerate() {
        for k in 0..n {
            u[k * m + c] = uc[k];
            du[k * m + c] = dc[k];
        }
    }
    let ext = problem.source.extension().clone();
    let du_f = GridFunction::from_values(lat.clone(), m, du.clone(), ext.clone())?;
    let u_f = GridFunction::from_values(lat, m, u, ext)?.with_slopes(du)?;
    let g_sup = problem.source.sup_norm();
    let lambda_u_sup = problem.lambda * u_f.sup_norm();
    let margin = if g_sup > 0.0 { 1.0 - lambda_u_sup / g_sup } else { -lambda_u_sup };
    let mut sol = ResolventSolution {
        u: u_f,
        du: du_f,
        diagnostics: Diagnostics {
            method: method.to_string(),
            residual: None,
            tolerance: options.tolerance,
            max_principle_margin: margin,
            lambda_u_sup,
            g_sup,
            iterations,
            stages,
            time_nodes: kernel.time_nodes,
            t_min: kernel.t_min,
            t_max: kernel.t_max,
            working_beta: problem.beta,
        },
    };
    if options.compute_residual {
        sol.diagnostics.residual = Some(residual(&sol, problem));
    }
    Ok(sol)
}

/// Semigroup-integral solve for constant drift k.
pub fn solve_constant_drift(problem: &ResolventProblem, options: &SolverOptions) -> Result<ResolventSolution> {
    problem.validate()?;
    let k = match &problem.drift {
        DriftTerm::Constant(k) => k[0],
        DriftTerm::Field(_) => return Err(Error::invalid("solve_constant_drift needs a constant drift")),
    };
    let kernel = kernel_for(problem, k, options)?;
    let comps = (0..problem.source.arity())
        .map(|c| kernel.apply(&component_values(&problem.source, c)))
        .collect();
    assemble(problem, &kernel, "semigroup integral", comps, Vec::new(), Vec::new(), options)
}

enum StageOutcome {
    Converged(Vec<f64>),
    Stalled,
}

/// Fixed-point iteration du ← step(du) with the stopping and stalling rules of the solver.
fn iterate<F: FnMut(&[f64]) -> Vec<f64>>(
    start: Vec<f64>,
    delta: f64,
    options: &SolverOptions,
    trace: &mut Vec<IterationRecord>,
    mut step: F,
) -> StageOutcome {
    let mut du = start;
    let mut prev: Option<f64> = None;
    let mut rising = 0;
    for _ in 0..options.max_iterations {
        let next = step(&du);
        let diff = next.iter().zip(&du).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ratio = prev.map(|p| if p > 0.0 { diff / p } else { 0.0 });
        trace.push(IterationRecord { delta, difference: diff, ratio });
        du = next;
        if diff < options.picard_tol {
            return StageOutcome::Converged(du);
        }
        if ratio.is_some_and(|r| r > 1.0) {
            rising += 1;
            if rising >= 3 {
                return StageOutcome::Stalled;
            }
        } else {
            rising = 0;
        }
        prev = Some(diff);
    }
    StageOutcome::Stalled
}

/// Contraction solve for a β-Hölder drift field (α ≥ 1, 1 < α + β < 2).
pub fn solve_hoelder_drift(problem: &ResolventProblem, options: &SolverOptions) -> Result<ResolventSolution> {
    problem.validate()?;
    let b = match &problem.drift {
        DriftTerm::Field(b) => b,
        DriftTerm::Constant(_) => return Err(Error::invalid("solve_hoelder_drift needs a drift field")),
    };
    let a = problem.spec.alpha;
    if a < 1.0 {
        return Err(Error::UnsupportedRegime(format!(
            "non-constant drift needs alpha >= 1 (got {a}); existence is not available below"
        )));
    }
    if a + problem.beta <= 1.0 {
        return Err(Error::UnsupportedRegime(format!("need alpha + beta > 1, got {}", a + problem.beta)));
    }
    // A bounded β-Hölder field is β'-Hölder for every β' < β, so α + β ≥ 2 is handled by
    // working with β' just below 2 - α.
    let working_beta = problem.beta.min(2.0 - a - WORKING_BETA_GAP);
    let kernel = kernel_for(problem, 0.0, options)?;
    let bv = component_values(b, 0);
    let periodic = matches!(kernel.layout, Layout::Periodic { .. });
    let mut trace = Vec::new();
    let mut stages = Vec::new();
    let mut matrix: Option<DMatrix<f64>> = None;
    let mut method = "picard";
    let mut comps = Vec::new();
    for c in 0..problem.source.arity() {
        let g = component_values(&problem.source, c);
        let src = |du: &[f64]| -> Vec<f64> { g.iter().zip(&bv).zip(du).map(|((g, b), d)| g + b * d).collect() };
        let start = vec![0.0; g.len()];
        let du = match iterate(start, 1.0, options, &mut trace, |du| kernel.apply(&src(du)).1) {
            StageOutcome::Converged(du) => du,
            StageOutcome::Stalled => {
                method = "picard with direct solve";
                let d = matrix.get_or_insert_with(|| kernel.gradient_matrix());
                direct_solve(d, &g, &bv, periodic, &mut trace, &mut stages)?
            }
        };
        comps.push(kernel.apply(&src(&du)));
    }
    let mut sol = assemble(problem, &kernel, method, comps, trace, stages, options)?;
    sol.diagnostics.working_beta = working_beta;
    Ok(sol)
}

/// Direct solve of (I - D B) du = D g with LU and one step of iterative refinement. The
/// equation is linear in u, so this is the exact fixed point of the Picard map when that map
/// fails to contract.
fn direct_solve(
    d: &DMatrix<f64>,
    g: &[f64],
    b: &[f64],
    periodic: bool,
    trace: &mut Vec<IterationRecord>,
    stages: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    let n = d.nrows();
    let dg = d * DVector::from_column_slice(&g[..n]);
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - d[(i, j)] * b[j]);
    let lu = m.clone().lu();
    let mut du = lu
        .solve(&dg)
        .ok_or_else(|| Error::NoContraction("I - D B is singular; raise lambda".into()))?;
    let r = &dg - &m * &du;
    if let Some(corr) = lu.solve(&r) {
        du += corr;
    }
    let rel = (&dg - &m * &du).amax() / dg.amax().max(f64::MIN_POSITIVE);
    if !rel.is_finite() || rel > 1e-8 {
        return Err(Error::NoContraction(format!("direct solve residual {rel:e}; raise lambda")));
    }
    trace.push(IterationRecord { delta: 1.0, difference: rel, ratio: None });
    stages.push(1.0);
    let mut out = du.as_slice().to_vec();
    if periodic {
        out.push(out[0]);
    }
    Ok(out)
}

/// Sup over interior lattice nodes of |λu - 𝓛u - b·Du - g|, with 𝓛 from the quadrature of
/// the nonlocal calculus module applied to the Hermite interpolant of u.
pub fn residual(solution: &ResolventSolution, problem: &ResolventProblem) -> f64 {
    let lat = solution.u.lattice();
    let periodic = matches!(solution.u.extension(), Extension::Periodic);
    let margins: Vec<f64> = (0..lat.len()).map(|k| lat.margin(&lat.point(k))).collect();
    let reach = margins.iter().cloned().fold(0.0, f64::max).min(1.0);
    let grid = RadialGrid::default();
    let m = solution.u.arity();
    let lambda = problem.lambda;
    (0..lat.len())
        .into_par_iter()
        .filter(|&k| periodic || margins[k] >= reach - 1e-12)
        .map(|k| {
            let x = lat.point(k);
            let drift = match &problem.drift {
                DriftTerm::Constant(v) => v[0],
                DriftTerm::Field(b) => b.node(k, 0),
            };
            let mut worst = 0.0f64;
            for c in 0..m {
                let lu = match apply_generator_component(&problem.spec, &solution.u, c, &x, &grid) {
                    Ok(v) => v,
                    Err(_) => return f64::INFINITY,
                };
                let r = lambda * solution.u.node(k, c) - lu - drift * solution.du.node(k, c) - problem.source.node(k, c);
                worst = worst.max(r.abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Left-hand quantities of the Schauder estimate and their ratio to ‖g‖_β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchauderReport {
    pub lambda_u_sup: f64,
    pub scaled_grad_sup: f64,
    /// [Du]_{α+β-1}.
    pub grad_seminorm: f64,
    pub g_norm: f64,
    pub ratio: f64,
}

pub fn schauder_report(solution: &ResolventSolution, problem: &ResolventProblem) -> SchauderReport {
    let a = problem.spec.alpha;
    let b = problem.beta;
    let lambda = problem.lambda;
    let e = (a + b - 1.0).max(0.0);
    let lambda_u_sup = lambda * solution.u.sup_norm();
    let scaled_grad_sup = lambda.powf(e / a) * solution.du.sup_norm();
    let grad_seminorm = hoelder_seminorm(&solution.du, e.min(1.0 - 1e-12));
    let g_norm = problem.source.sup_norm() + hoelder_seminorm(&problem.source, b);
    let total = lambda_u_sup + scaled_grad_sup + grad_seminorm;
    let ratio = if g_norm > 0.0 { total / g_norm } else { 0.0 };
    SchauderReport { lambda_u_sup, scaled_grad_sup, grad_seminorm, g_norm, ratio }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayScan {
    /// (λ, ‖Du_λ‖_0) in the order given.
    pub rows: Vec<(f64, f64)>,
    /// Smallest λ with ‖Du_λ‖_0 < 1/3.
    pub lambda_star: f64,
    pub non_increasing: bool,
    /// Least-squares slope of ln‖Du_λ‖_0 against ln λ (None when some entry vanishes).
    pub slope: Option<f64>,
    /// -(α+β-1)/(α+β).
    pub reference_slope: f64,
    /// 1 - λ‖u_λ‖_0/‖g‖_0 of every solve.
    pub max_principle_margins: Vec<f64>,
}

/// ‖Du_λ‖_0 for the drift-field problem (b, g) over increasing λ.
pub fn gradient_decay_scan(
    spec: &StableSpec,
    b: &GridFunction,
    g: &GridFunction,
    beta: f64,
    lambdas: &[f64],
    options: &SolverOptions,
) -> Result<DecayScan> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lambdas must be a non-empty increasing list"));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut max_principle_margins = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let problem = ResolventProblem::new(spec.clone(), lambda, DriftTerm::Field(b.clone()), g.clone(), beta)?;
        let sol = solve_hoelder_drift(&problem, options)?;
        rows.push((lambda, sol.du.sup_norm()));
        max_principle_margins.push(sol.diagnostics.max_principle_margin);
    }
    let lambda_star = rows
        .iter()
        .find(|r| r.1 < 1.0 / 3.0)
        .map(|r| r.0)
        .ok_or_else(|| Error::ThresholdNotReached(format!("no lambda in {lambdas:?} gives ||Du|| < 1/3")))?;
    let non_increasing = rows.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) + 1e-12);
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.1 > 0.0) {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0.ln(), r.1.ln())).collect();
        Some(ls_slope(&pts))
    } else {
        None
    };
    let a = spec.alpha;
    Ok(DecayScan { rows, lambda_star, non_increasing, slope, reference_slope: -(a + beta - 1.0) / (a + beta),
        max_principle_margins,
    })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

impl ResolventSolution {
    /// Columns x, u_0.., du_0..
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.u.arity();
        let mut header = vec!["x".to_string()];
        header.extend((0..m).map(|c| format!("u_{c}")));
        header.extend((0..m).map(|c| format!("du_{c}")));
        writeln!(w, "{}", header.join(","))?;
        let lat = self.u.lattice();
        for k in 0..lat.len() {
            let mut row = vec![format!("{:.17e}", lat.coord(0, k))];
            row.extend((0..m).map(|c| format!("{:.17e}", self.u.node(k, c))));
            row.extend((0..m).map(|c| format!("{:.17e}", self.du.node(k, c))));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.diagnostics).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        std::fs::write(dir.join(format!("{stem}.json")), self.diagnostics_json()?)?;
        Ok(())
    }
}

/// b(x) = sign(x)(|x|^β ∧ 1).
pub fn tanaka_drift(x: f64, beta: f64) -> f64 {
    x.signum() * x.abs().powf(beta).min(1.0)
}
