//! Symmetric α-stable laws described by a finite atomic spectral measure.
//!
//! The characteristic exponent is `ψ(u) = scale · Σ w_i |⟨u, ξ_i⟩|^α`. The Lévy measure
//! that produces exactly this exponent is `ν = Σ λ_i ∫ δ_{rξ_i} r^{-1-α} dr` with
//! `λ_i = scale · w_i / K_α` and `K_α = ∫_0^∞ (1 - cos s) s^{-1-α} ds`. Every jump-based
//! computation (generator, sampling, radial moments) uses the `λ_i`.

use crate::error::{Error, Result};
use crate::quadrature::gl16;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

const UNIT_TOL: f64 = 1e-12;
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub direction: Vec<f64>,
    pub weight: f64,
}

/// Finite symmetric measure on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    /// For every atom, the index of its negated partner.
    partner: Vec<usize>,
}

impl SpectralMeasure {
    /// Build from explicit atoms. The list must already contain every negated direction
    /// with the same weight; nothing is completed automatically.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if atoms.is_empty() {
            return Err(Error::invalid("spectral measure needs at least one atom"));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.direction.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.direction.len() });
            }
            if !a.direction.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("atom {i} has a non-finite direction")));
            }
            let n = norm(&a.direction);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!("atom {i} direction has norm {n}, not 1")));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::invalid(format!("atom {i} weight {} is not positive", a.weight)));
            }
        }
        let mut partner = vec![usize::MAX; atoms.len()];
        for i in 0..atoms.len() {
            let found = atoms.iter().position(|b| {
                b.direction
                    .iter()
                    .zip(&atoms[i].direction)
                    .all(|(x, y)| (x + y).abs() <= UNIT_TOL)
            });
            match found {
                Some(j) if (atoms[j].weight - atoms[i].weight).abs() <= 1e-12 * atoms[i].weight => {
                    partner[i] = j
                }
                Some(j) => {
                    return Err(Error::AsymmetricMeasure(format!(
                        "atoms {i} and {j} are opposite but weigh {} and {}",
                        atoms[i].weight, atoms[j].weight
                    )))
                }
                None => {
                    return Err(Error::AsymmetricMeasure(format!(
                        "atom {i} has no negated partner"
                    )))
                }
            }
        }
        Ok(SpectralMeasure { dim, atoms, partner })
    }

    /// Quasi-uniform approximation of the normalized uniform measure on the sphere with
    /// `n` atoms (total mass 1). `n` is the angular-discretization knob; it must be even.
    /// d=1 ignores `n` and uses {±1}.
    pub fn isotropic(dim: usize, n: usize) -> Result<Self> {
        match dim {
            0 => Err(Error::invalid("dimension must be at least 1")),
            1 => Self::new(
                1,
                vec![
                    Atom { direction: vec![1.0], weight: 0.5 },
                    Atom { direction: vec![-1.0], weight: 0.5 },
                ],
            ),
            _ => {
                if n < 2 * dim || n % 2 != 0 {
                    return Err(Error::invalid(format!(
                        "isotropic measure in d={dim} needs an even number of atoms >= {}",
                        2 * dim
                    )));
                }
                let half = sphere_points(dim, n / 2, true);
                let w = 1.0 / n as f64;
                let mut atoms = Vec::with_capacity(n);
                for p in &half {
                    atoms.push(Atom { direction: p.clone(), weight: w });
                }
                for p in &half {
                    atoms.push(Atom { direction: p.iter().map(|c| -c).collect(), weight: w });
                }
                Self::new(dim, atoms)
            }
        }
    }

    /// Independent coordinates: atoms ±e_k, each with the given weight.
    pub fn axes(dim: usize, weight: f64) -> Result<Self> {
        let mut atoms = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[k] = s;
                atoms.push(Atom { direction: e, weight });
            }
        }
        Self::new(dim, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// One representative index per ± pair.
    pub fn pair_representatives(&self) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| self.partner[i] > i).collect()
    }
}

/// A symmetric α-stable law: index, dimension, spectral measure and exponent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub dim: usize,
    pub measure: SpectralMeasure,
    pub scale: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, measure: SpectralMeasure, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,2), got {alpha}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(StableSpec { alpha, dim: measure.dim(), measure, scale })
    }

    /// Spec whose Lévy-measure weights equal the spectral weights (scale = K_α).
    pub fn with_levy_normalization(alpha: f64, measure: SpectralMeasure) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,2), got {alpha}")));
        }
        Self::new(alpha, measure, kappa(alpha))
    }

    /// d=1 law with ψ(u) = scale·|u|^α.
    pub fn one_dimensional(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(alpha, SpectralMeasure::isotropic(1, 2)?, scale)
    }

    /// `λ_i = scale·w_i/K_α`, the Lévy-measure weights of each atom.
    pub fn levy_weights(&self) -> Vec<f64> {
        let k = kappa(self.alpha);
        self.measure.atoms().iter().map(|a| self.scale * a.weight / k).collect()
    }

    pub fn total_levy_weight(&self) -> f64 {
        self.levy_weights().iter().sum()
    }

    /// ψ(u) = scale·Σ w_i |⟨u, ξ_i⟩|^α.
    pub fn characteristic_exponent(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let s: f64 = self
            .measure
            .atoms()
            .iter()
            .map(|a| a.weight * dot(u, &a.direction).abs().powf(self.alpha))
            .sum();
        self.scale * s
    }

    /// Minimum of ψ over unit vectors, searched on a quasi-uniform grid of `n_directions`
    /// points plus the directions orthogonal to atoms and a local refinement.
    pub fn nondegeneracy_constant(&self, n_directions: usize) -> Result<f64> {
        self.nondegeneracy_constant_with(n_directions, DEFAULT_DEGENERACY_THRESHOLD)
    }

    pub fn nondegeneracy_constant_with(&self, n_directions: usize, threshold: f64) -> Result<f64> {
        let d = self.dim;
        if n_directions < 2 * d {
            return Err(Error::invalid(format!("need at least {} search directions", 2 * d)));
        }
        let min = match d {
            1 => self.characteristic_exponent(&[1.0]).min(self.characteristic_exponent(&[-1.0])),
            2 => self.min_on_circle(n_directions),
            _ => self.min_on_sphere(n_directions),
        };
        if min < threshold {
            return Err(Error::DegenerateMeasure(format!(
                "min of psi on the unit sphere is {min:e} (< {threshold:e}); atoms span a proper subspace"
            )));
        }
        Ok(min)
    }

    fn psi_angle(&self, th: f64) -> f64 {
        self.characteristic_exponent(&[th.cos(), th.sin()])
    }

    fn min_on_circle(&self, n: usize) -> f64 {
        let mut cands: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        for a in self.measure.atoms() {
            let th = a.direction[1].atan2(a.direction[0]);
            cands.push(th + 0.5 * PI);
        }
        let step = 2.0 * PI / n as f64;
        let mut best = f64::INFINITY;
        for &th in &cands {
            let v = self.psi_angle(th);
            best = best.min(v);
            // Golden-section refinement in the neighbouring cell catches interior minima (α > 1).
            let (mut a, mut b) = (th - step, th + step);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut e = a + g * (b - a);
            let (mut fc, mut fe) = (self.psi_angle(c), self.psi_angle(e));
            for _ in 0..60 {
                if fc < fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - g * (b - a);
                    fc = self.psi_angle(c);
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + g * (b - a);
                    fe = self.psi_angle(e);
                }
            }
            best = best.min(fc).min(fe);
        }
        best
    }

    fn min_on_sphere(&self, n: usize) -> f64 {
        let d = self.dim;
        let mut cands = sphere_points(d, n, false);
        // Directions orthogonal to pairs of atoms (d = 3) host the kinks of ψ.
        if d == 3 {
            let at = self.measure.atoms();
            for i in 0..at.len() {
                for j in i + 1..at.len() {
                    let c = cross(&at[i].direction, &at[j].direction);
                    let nc = norm(&c);
                    if nc > 1e-9 {
                        cands.push(c.iter().map(|x| x / nc).collect());
                    }
                }
            }
        }
        let mut best = f64::INFINITY;
        let mut best_v = cands[0].clone();
        for v in &cands {
            let p = self.characteristic_exponent(v);
            if p < best {
                best = p;
                best_v = v.clone();
            }
        }
        // Pattern search on the sphere from the best grid point.
        let mut step = (4.0 * PI / n as f64).sqrt();
        let mut v = best_v;
        while step > 1e-10 {
            let mut improved = false;
            for k in 0..d {
                for s in [1.0, -1.0] {
                    let mut w = v.clone();
                    w[k] += s * step;
                    let nw = norm(&w);
                    w.iter_mut().for_each(|x| *x /= nw);
                    let p = self.characteristic_exponent(&w);
                    if p < best {
                        best = p;
                        v = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    /// `Σ λ_i ∫_{r0}^{r1} r^{σ-1-α} dr`, the |y|^σ moment of ν on the annulus r0 < |y| < r1.
    pub fn levy_radial_integral(&self, sigma: f64, r0: f64, r1: f64) -> Result<f64> {
        let a = self.alpha;
        if !(r0 >= 0.0) || !(r1 > r0) {
            return Err(Error::DivergentIntegral(format!("bad radii r0={r0}, r1={r1}")));
        }
        if r0 == 0.0 && sigma <= a {
            return Err(Error::DivergentIntegral(format!(
                "sigma={sigma} <= alpha={a} diverges at the origin"
            )));
        }
        if r1.is_infinite() && sigma >= a {
            return Err(Error::DivergentIntegral(format!(
                "sigma={sigma} >= alpha={a} diverges at infinity"
            )));
        }
        let e = sigma - a;
        let radial = if e.abs() < 1e-14 {
            (r1 / r0).ln()
        } else {
            let hi = if r1.is_infinite() { 0.0 } else { r1.powf(e) };
            let lo = if r0 == 0.0 { 0.0 } else { r0.powf(e) };
            (hi - lo) / e
        };
        Ok(self.total_levy_weight() * radial)
    }

    /// ∫_{|⟨u,y⟩|≤ρ} ⟨u,y⟩² ν(dy) in closed form, checked against radial quadrature.
    pub fn picard_functional(&self, u: &[f64], rho: f64) -> Result<PicardReport> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: u.len() });
        }
        if (norm(u) - 1.0).abs() > 1e-9 || !(rho > 0.0) {
            return Err(Error::invalid("picard functional needs |u| = 1 and rho > 0"));
        }
        let a = self.alpha;
        let lw = self.levy_weights();
        let mut sum = 0.0;
        for (at, l) in self.measure.atoms().iter().zip(&lw) {
            sum += l * dot(u, &at.direction).abs().powf(a);
        }
        let value = rho.powf(2.0 - a) / (2.0 - a) * sum;

        // Independent check: ∫_0^{ρ/|c|} c² r^{1-α} dr with r = R e^{-s}.
        let mut quad = 0.0;
        for (at, l) in self.measure.atoms().iter().zip(&lw) {
            let c = dot(u, &at.direction).abs();
            if c == 0.0 {
                continue;
            }
            let big_r = rho / c;
            let k = 2.0 - a;
            let s_max = 40.0 / k;
            let n = (s_max / 2.0).ceil() as usize;
            let h = s_max / n as f64;
            let mut acc = 0.0;
            for j in 0..n {
                acc += gl16().integrate(j as f64 * h, (j + 1) as f64 * h, |s| (-k * s).exp());
            }
            quad += l * c * c * big_r.powf(k) * acc;
        }
        let agrees = (quad - value).abs() <= 1e-8 * value.abs().max(1e-300);
        Ok(PicardReport { value, quadrature: quad, agrees })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardReport {
    pub value: f64,
    pub quadrature: f64,
    pub agrees: bool,
}

/// `K_α = ∫_0^∞ (1 - cos s) s^{-1-α} ds`.
pub fn kappa(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        PI / 2.0
    } else {
        gamma(2.0 - alpha) * (PI * alpha / 2.0).cos() / (alpha * (1.0 - alpha))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Quasi-uniform unit vectors: uniform angles in d=2, a Fibonacci lattice in d=3 and a
/// deterministic Gaussian-free Halton-style construction above. `half` restricts to a
/// hemisphere (no antipodal duplicates).
fn sphere_points(d: usize, n: usize, half: bool) -> Vec<Vec<f64>> {
    match d {
        2 => {
            let span = if half { PI } else { 2.0 * PI };
            (0..n)
                .map(|k| {
                    let th = span * k as f64 / n as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect()
        }
        3 => {
            let ga = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = if half {
                        1.0 - (k as f64 + 0.5) / n as f64
                    } else {
                        1.0 - 2.0 * (k as f64 + 0.5) / n as f64
                    };
                    let rr = (1.0 - z * z).max(0.0).sqrt();
                    let th = ga * k as f64;
                    vec![rr * th.cos(), rr * th.sin(), z]
                })
                .collect()
        }
        _ => {
            // Radical-inverse points mapped through the inverse normal CDF approximation.
            let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
            (0..n)
                .map(|k| {
                    let mut v: Vec<f64> = (0..d)
                        .map(|j| {
                            let u = radical_inverse(k as u64 + 1, primes[j % primes.len()]);
                            probit(u)
                        })
                        .collect();
                    let nv = norm(&v).max(1e-300);
                    v.iter_mut().for_each(|x| *x /= nv);
                    if half && v[d - 1] < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    v
                })
                .collect()
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    r
}

fn probit(p: f64) -> f64 {
    // Logit-based approximation is enough for spreading points.
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln() * 0.5513
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axes2(alpha: f64) -> StableSpec {
        StableSpec::new(alpha, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn kappa_at_one_is_continuous() {
        assert!((kappa(1.0 - 1e-7) - PI / 2.0).abs() < 1e-5);
        assert!((kappa(1.0 + 1e-7) - PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn kappa_matches_quadrature() {
        for &a in &[0.5, 1.2, 1.5, 1.8] {
            // ∫ (1-cos s) s^{-1-α} ds split at 1; the tail uses ∫_1^∞ s^{-1-α} = 1/α minus the
            // cosine part, integrated on long uniform panels.
            let eps: f64 = 1e-8;
            let mut head = eps.powf(2.0 - a) / (2.0 * (2.0 - a));
            for e in crate::quadrature::geometric_edges(eps, 1.0, 2.0).windows(2) {
                head += gl16().integrate(e[0], e[1], |s| 2.0 * (s / 2.0).sin().powi(2) * s.powf(-1.0 - a));
            }
            let mut cos_tail = 0.0;
            let n = 40000;
            for j in 0..n {
                let lo = 1.0 + j as f64 * 0.5;
                cos_tail += gl16().integrate(lo, lo + 0.5, |s| s.cos() * s.powf(-1.0 - a));
            }
            let upper = 1.0 + n as f64 * 0.5;
            // The cosine remainder beyond `upper` is O(upper^{-1-α}).
            let tail = 1.0 / a - cos_tail;
            assert!(upper.powf(-1.0 - a) < 1e-5);
            let got = head + tail;
            assert!((got - kappa(a)).abs() < 2e-4 * kappa(a), "a={a}: {got} vs {}", kappa(a));
        }
    }

    #[test]
    fn exponent_examples() {
        let s = axes2(1.0);
        assert_eq!(s.characteristic_exponent(&[1.0, 0.0]), 2.0);
        let s1 = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        assert_eq!(s1.characteristic_exponent(&[0.0]), 0.0);
        assert!((s1.characteristic_exponent(&[2.0]) - 2f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn axes_model_is_coordinatewise_sum() {
        let a = 1.3;
        let spec = StableSpec::new(a, SpectralMeasure::axes(3, 0.5).unwrap(), 2.0).unwrap();
        let u = [0.3, -1.7, 2.2];
        let expect: f64 = 2.0 * u.iter().map(|x: &f64| x.abs().powf(a)).sum::<f64>();
        assert!((spec.characteristic_exponent(&u) - expect).abs() < 1e-12);
    }

    #[test]
    fn symmetry_is_required() {
        let atoms = vec![Atom { direction: vec![1.0, 0.0], weight: 1.0 }];
        assert!(matches!(SpectralMeasure::new(2, atoms), Err(Error::AsymmetricMeasure(_))));
        let atoms = vec![
            Atom { direction: vec![1.0], weight: 1.0 },
            Atom { direction: vec![-1.0], weight: 2.0 },
        ];
        assert!(matches!(SpectralMeasure::new(1, atoms), Err(Error::AsymmetricMeasure(_))));
        let atoms = vec![Atom { direction: vec![1.1], weight: 1.0 }];
        assert!(SpectralMeasure::new(1, atoms).is_err());
    }

    #[test]
    fn nondegeneracy_examples() {
        let degenerate = SpectralMeasure::new(
            2,
            vec![
                Atom { direction: vec![1.0, 0.0], weight: 1.0 },
                Atom { direction: vec![-1.0, 0.0], weight: 1.0 },
            ],
        )
        .unwrap();
        let spec = StableSpec::new(1.0, degenerate, 1.0).unwrap();
        assert!(matches!(spec.nondegeneracy_constant(64), Err(Error::DegenerateMeasure(_))));

        let s1 = StableSpec::one_dimensional(1.5, 1.0).unwrap();
        assert_eq!(s1.nondegeneracy_constant(2).unwrap(), 1.0);

        let c = axes2(1.0).nondegeneracy_constant(64).unwrap();
        assert!((c - 2.0).abs() < 1e-12, "{c}");

        // For α < 2, |cos θ|^α + |sin θ|^α is smallest on the axes even with a coarse search.
        let a = 1.5;
        let c = axes2(a).nondegeneracy_constant(7).unwrap();
        let expect = 2.0;
        assert!((c - expect).abs() < 1e-9, "{c} vs {expect}");
    }

    #[test]
    fn nondegeneracy_in_three_dimensions() {
        let spec = StableSpec::new(0.8, SpectralMeasure::axes(3, 1.0).unwrap(), 1.0).unwrap();
        let c = spec.nondegeneracy_constant(200).unwrap();
        assert!((c - 2.0).abs() < 1e-9, "{c}");
        let iso = StableSpec::new(1.5, SpectralMeasure::isotropic(3, 40).unwrap(), 1.0).unwrap();
        assert!(iso.nondegeneracy_constant(200).unwrap() > 0.0);
    }

    #[test]
    fn radial_integral_examples() {
        let spec =
            StableSpec::with_levy_normalization(1.0, SpectralMeasure::axes(2, 1.0).unwrap()).unwrap();
        let w = spec.total_levy_weight();
        assert!((w - 4.0).abs() < 1e-12);
        assert!((spec.levy_radial_integral(2.0, 0.0, 1.0).unwrap() - w).abs() < 1e-12);
        let eps = 0.1;
        let tail = spec.levy_radial_integral(0.0, eps, f64::INFINITY).unwrap();
        assert!((tail - w / eps).abs() < 1e-10);
        assert!(matches!(
            spec.levy_radial_integral(0.5, 0.0, 1.0),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(matches!(
            spec.levy_radial_integral(1.5, 1.0, f64::INFINITY),
            Err(Error::DivergentIntegral(_))
        ));
    }

    #[test]
    fn radial_integral_matches_quadrature() {
        let spec = StableSpec::one_dimensional(1.3, 0.7).unwrap();
        let g = 0.6;
        let sigma = 1.0 + g;
        let closed = spec.levy_radial_integral(sigma, 0.0, 1.0).unwrap();
        let mut q = 0.0;
        for e in crate::quadrature::geometric_edges(1e-30, 1.0, 2.0).windows(2) {
            q += gl16().integrate(e[0], e[1], |r| r.powf(sigma - 1.0 - spec.alpha));
        }
        q *= spec.total_levy_weight();
        assert!((q - closed).abs() < 1e-8 * closed, "{q} vs {closed}");
        assert!((closed - spec.total_levy_weight() / (1.0 + g - spec.alpha)).abs() < 1e-12);
    }

    #[test]
    fn picard_examples() {
        let spec =
            StableSpec::with_levy_normalization(1.0, SpectralMeasure::axes(2, 1.0).unwrap()).unwrap();
        let r = spec.picard_functional(&[1.0, 0.0], 1.0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.agrees);
        let spec = StableSpec::new(1.7, SpectralMeasure::isotropic(2, 12).unwrap(), 1.3).unwrap();
        let u = [0.6, 0.8];
        let p1 = spec.picard_functional(&u, 0.3).unwrap();
        let p2 = spec.picard_functional(&u, 2.0).unwrap();
        assert!(p1.agrees && p2.agrees);
        let expect = (2.0f64 / 0.3).powf(2.0 - 1.7);
        assert!((p2.value / p1.value - expect).abs() < 1e-12 * expect);
    }

    fn any_spec() -> impl Strategy<Value = StableSpec> {
        (0.2f64..1.95, 1usize..4, 0.2f64..3.0, prop::bool::ANY).prop_map(|(a, d, sc, iso)| {
            let m = if iso {
                SpectralMeasure::isotropic(d, 4 * d + 2).unwrap()
            } else {
                SpectralMeasure::axes(d, 0.7).unwrap()
            };
            StableSpec::new(a, m, sc).unwrap()
        })
    }

    proptest! {
        #[test]
        fn exponent_is_even_and_homogeneous(spec in any_spec(), raw in prop::collection::vec(-5.0f64..5.0, 3), c in -4.0f64..4.0) {
            let u = &raw[..spec.dim];
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            let scaled: Vec<f64> = u.iter().map(|x| c * x).collect();
            let p = spec.characteristic_exponent(u);
            prop_assert!((spec.characteristic_exponent(&neg) - p).abs() <= 1e-12 * p.max(1.0));
            let ps = spec.characteristic_exponent(&scaled);
            let expect = c.abs().powf(spec.alpha) * p;
            prop_assert!((ps - expect).abs() <= 1e-10 * expect.max(1e-10));
        }

        #[test]
        fn exponent_dominates_nondegeneracy_bound(spec in any_spec(), raw in prop::collection::vec(-5.0f64..5.0, 3)) {
            let c = spec.nondegeneracy_constant(256).unwrap();
            let u = &raw[..spec.dim];
            let n = norm(u);
            prop_assert!(spec.characteristic_exponent(u) >= c * n.powf(spec.alpha) * (1.0 - 1e-9));
        }

        #[test]
        fn picard_closed_form_matches_quadrature(spec in any_spec(), th in 0.0f64..std::f64::consts::TAU, rho in 0.01f64..10.0) {
            let mut u = vec![0.0; spec.dim];
            if spec.dim == 1 {
                u[0] = if th < std::f64::consts::PI { 1.0 } else { -1.0 };
            } else {
                u[0] = th.cos();
                u[1] = th.sin();
            }
            let r = spec.picard_functional(&u, rho).unwrap();
            prop_assert!(r.agrees, "{:?}", r);
        }

        #[test]
        fn radial_tail_mass_is_closed_form(spec in any_spec(), eps in 1e-3f64..2.0) {
            let m = spec.levy_radial_integral(0.0, eps, f64::INFINITY).unwrap();
            let expect = spec.total_levy_weight() * eps.powf(-spec.alpha) / spec.alpha;
            prop_assert!((m - expect).abs() <= 1e-12 * expect);
        }
    }
}
