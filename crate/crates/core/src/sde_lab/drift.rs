use crate::nonlocal_calculus::GridFunction;
use std::fmt;
use std::sync::Arc;

/// Bounded vector field b: R^d → R^d.
pub trait Drift: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Known sup bound, if any.
    fn bound(&self) -> Option<f64> {
        None
    }
    /// True when b vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

/// b(x) = sign(x)(|x|^β ∧ 1) in d=1.
#[derive(Debug, Clone, Copy)]
pub struct TanakaDrift {
    pub beta: f64,
}

impl Drift for TanakaDrift {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = crate::resolvent_solver::tanaka_drift(x[0], self.beta);
    }
    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantDrift(pub Vec<f64>);

impl Drift for ConstantDrift {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
    fn bound(&self) -> Option<f64> {
        Some(self.0.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift(pub usize);

impl Drift for ZeroDrift {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn bound(&self) -> Option<f64> {
        Some(0.0)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Drift given by a closure.
#[derive(Clone)]
pub struct FnDrift {
    dim: usize,
    f: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl FnDrift {
    pub fn new<F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        FnDrift { dim, f: Arc::new(f) }
    }
}

impl fmt::Debug for FnDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnDrift(dim={})", self.dim)
    }
}

impl Drift for FnDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Tabulated field, interpolated and continued by the grid function's extension.
#[derive(Debug, Clone)]
pub struct GridDrift(pub GridFunction);

impl Drift for GridDrift {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.0.eval(x, out)
    }
    fn bound(&self) -> Option<f64> {
        Some(self.0.sup_norm())
    }
}
