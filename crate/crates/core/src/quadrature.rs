//! Gauss-Legendre rules and a few composite helpers shared by the numerical modules.

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over [a, b].
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Map the rule to [a, b], appending nodes and weights.
    pub fn push_mapped(&self, a: f64, b: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            nodes.push(mid + half * x);
            weights.push(w * half);
        }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl4() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(4))
}

pub fn gl8() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(8))
}

pub fn gl16() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(16))
}

/// Composite rule on [a, b]: geometric panels towards `a` (which should be the
/// singular or fast-varying end) followed by uniform panels no wider than `max_width`.
pub fn graded_panels(a: f64, b: f64, first: f64, ratio: f64, max_width: f64) -> Vec<(f64, f64)> {
    let mut panels = Vec::new();
    if b <= a {
        return panels;
    }
    let mut lo = a;
    let mut w = first.min(b - a);
    while lo < b {
        let width = w.min(max_width);
        let hi = if lo + width >= b * (1.0 - 1e-14) { b } else { lo + width };
        panels.push((lo, hi));
        lo = hi;
        w *= ratio;
    }
    panels
}

/// Geometric panel edges between two positive radii with at most `ratio` growth per panel.
pub fn geometric_edges(r0: f64, r1: f64, ratio: f64) -> Vec<f64> {
    debug_assert!(r0 > 0.0 && r1 > r0 && ratio > 1.0);
    let n = ((r1 / r0).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (r1 / r0).powf(1.0 / n as f64);
    let mut edges = Vec::with_capacity(n + 1);
    let mut r = r0;
    edges.push(r0);
    for _ in 1..n {
        r *= q;
        edges.push(r);
    }
    edges.push(r1);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1usize, 2, 4, 8, 16] {
            let g = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let got = g.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-12 * exact, "n={n}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let g = GaussLegendre::new(16);
        let s: f64 = g.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn geometric_edges_cover_interval() {
        let e = geometric_edges(1e-3, 10.0, 2.0);
        assert_eq!(e[0], 1e-3);
        assert_eq!(*e.last().unwrap(), 10.0);
        for w in e.windows(2) {
            assert!(w[1] / w[0] <= 2.0 + 1e-12);
        }
    }
}
