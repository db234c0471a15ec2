use super::*;
use crate::nonlocal_calculus::{Extension, GridFunction, Lattice};
use crate::resolvent_solver::{
    solve_hoelder_drift, tanaka_drift, DriftTerm, ResolventProblem, ResolventSolution, SolverOptions,
};
use crate::stable_model::{SpectralMeasure, StableSpec};
use crate::Error;
use proptest::prelude::*;
use rand::Rng;
use std::sync::OnceLock;

fn spec15() -> StableSpec {
    StableSpec::one_dimensional(1.5, 1.0).unwrap()
}

fn field_problem(alpha: f64, lambda: f64, half: f64, h: f64, b: impl Fn(f64) -> f64) -> ResolventProblem {
    let lat = Lattice::cube(1, half, h).unwrap();
    let g = GridFunction::sample(lat, |x| b(x[0]), Extension::Constant).unwrap();
    ResolventProblem::new(StableSpec::one_dimensional(alpha, 1.0).unwrap(), lambda, DriftTerm::Field(g.clone()), g, 0.8)
        .unwrap()
}

/// Tanaka drift, α = 1.5, β = 0.8, λ = 20 on [-6, 6]; shared by several tests.
fn tanaka_setup() -> &'static (ResolventProblem, ResolventSolution) {
    static CELL: OnceLock<(ResolventProblem, ResolventSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = field_problem(1.5, 20.0, 6.0, 0.02, |x| tanaka_drift(x, 0.8));
        let opts = SolverOptions { compute_residual: false, ..Default::default() };
        let s = solve_hoelder_drift(&p, &opts).unwrap();
        (p, s)
    })
}

fn no_residual() -> SolverOptions {
    SolverOptions { compute_residual: false, ..Default::default() }
}

#[test]
fn path_invariants_and_bookkeeping() {
    for policy in [SmallJumpPolicy::Drop, SmallJumpPolicy::Gaussian] {
        let p = sample_levy_path(&spec15(), 2.0, 0.01, 0.05, 42, policy).unwrap();
        assert!(!p.jumps().is_empty());
        assert!(p.jumps().windows(2).all(|w| w[0].time < w[1].time));
        assert!(p.jumps().iter().all(|j| j.time > 0.0 && j.time <= 2.0 && j.size[0].abs() > 0.05));
        let (inc, jmp) = p.parts();
        let mut manual_inc = 0.0;
        for k in 0..p.steps() {
            manual_inc += p.increment(k)[0];
        }
        let manual_jmp: f64 = p.jumps().iter().fold(0.0, |s, j| s + j.size[0]);
        assert_eq!(inc[0], manual_inc);
        assert_eq!(jmp[0], manual_jmp);
        assert_eq!(p.terminal()[0], manual_inc + manual_jmp);
        assert!((p.value_at(2.0)[0] - p.terminal()[0]).abs() < 1e-12 * (1.0 + manual_jmp.abs()));
        if policy == SmallJumpPolicy::Drop {
            assert_eq!(inc[0], 0.0);
        }
    }
}

#[test]
fn paths_are_deterministic_and_nested() {
    let a = sample_levy_path(&spec15(), 1.0, 0.01, 0.1, 9, SmallJumpPolicy::Gaussian).unwrap();
    let b = sample_levy_path(&spec15(), 1.0, 0.01, 0.1, 9, SmallJumpPolicy::Gaussian).unwrap();
    assert_eq!(a, b);
    let c = sample_levy_path(&spec15(), 1.0, 0.01, 0.1, 10, SmallJumpPolicy::Gaussian).unwrap();
    assert_ne!(a, c);
    // Jumps above the coarse cutoff survive a finer cutoff unchanged.
    let fine = sample_levy_path(&spec15(), 1.0, 0.01, 0.05, 9, SmallJumpPolicy::Drop).unwrap();
    for j in a.jumps() {
        assert!(fine.jumps().contains(j));
    }
    assert!(fine.jumps().len() > a.jumps().len());
}

#[test]
fn coarsen_keeps_the_noise() {
    let p = sample_levy_path(&spec15(), 1.0, 0.005, 0.1, 3, SmallJumpPolicy::Gaussian).unwrap();
    let q = p.coarsen(4).unwrap();
    assert_eq!(q.steps(), 50);
    assert_eq!(q.jumps(), p.jumps());
    assert!((q.terminal()[0] - p.terminal()[0]).abs() < 1e-12);
    assert!(p.coarsen(3).is_err());
}

#[test]
fn rejects_bad_arguments() {
    let s = spec15();
    assert!(sample_levy_path(&s, 1.0, 0.3, 0.1, 0, SmallJumpPolicy::Drop).is_err());
    assert!(sample_levy_path(&s, 1.0, 0.1, 0.0, 0, SmallJumpPolicy::Drop).is_err());
    assert!(sample_levy_path(&s, 1.0, 0.1, 1.5, 0, SmallJumpPolicy::Drop).is_err());
}

#[test]
fn jump_count_matches_tail_mass() {
    let s = spec15();
    let (t, eps) = (1.0, 0.2);
    let expect = expected_jump_count(&s, t, eps);
    let oracle = t * s.levy_radial_integral(0.0, eps, f64::INFINITY).unwrap();
    assert!((expect - oracle).abs() < 1e-12 * oracle);
    let n = 4000;
    let total: usize =
        (0..n).map(|i| sample_levy_path(&s, t, t, eps, i, SmallJumpPolicy::Drop).unwrap().jumps().len()).sum();
    let mean = total as f64 / n as f64;
    let se = (expect / n as f64).sqrt();
    assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
}

#[test]
fn gaussian_surrogate_covariance() {
    let spec = StableSpec::new(1.2, SpectralMeasure::axes(2, 1.0).unwrap(), 1.0).unwrap();
    let eps = 0.3;
    let c = small_jump_covariance(&spec, eps);
    assert_eq!(c[1], 0.0);
    assert_eq!(c[2], 0.0);
    let lam = spec.levy_weights();
    let expect = 2.0 * lam[0] * eps.powf(0.8) / 0.8;
    assert!((c[0] - expect).abs() < 1e-14 && (c[3] - expect).abs() < 1e-14);
    let p = sample_levy_path(&spec, 200.0, 0.01, eps, 5, SmallJumpPolicy::Gaussian).unwrap();
    let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
    for k in 0..p.steps() {
        let v = p.increment(k);
        s00 += v[0] * v[0];
        s01 += v[0] * v[1];
        s11 += v[1] * v[1];
    }
    let n = p.steps() as f64;
    let var = c[0] * 0.01;
    // Sample variances of n Gaussians have relative standard deviation sqrt(2/n).
    let tol = 4.0 * (2.0 / n).sqrt();
    assert!((s00 / n / var - 1.0).abs() < tol);
    assert!((s11 / n / var - 1.0).abs() < tol);
    assert!((s01 / n / var).abs() < tol);
}

#[test]
fn characteristic_function_and_mean() {
    let s = spec15();
    let n = 10_000;
    let ls: Vec<f64> = (0..n)
        .map(|i| sample_levy_path(&s, 1.0, 1.0, 0.05, path_seed(77, i), SmallJumpPolicy::Gaussian).unwrap().terminal()[0])
        .collect();
    for &u in &[0.2, 0.5, 1.0, 1.5, 2.5] {
        let c: Vec<f64> = ls.iter().map(|l| (u * l).cos()).collect();
        let (m, se) = mean_se(&c);
        let exact = (-s.characteristic_exponent(&[u])).exp();
        assert!((m - exact).abs() < 3.0 * se, "u={u}: {m} vs {exact} (se {se})");
    }
    let (m, se) = mean_se(&ls);
    assert!(m.abs() < 3.0 * se, "{m} {se}");
}

#[test]
fn euler_is_exact_for_constant_drift() {
    let s = spec15();
    let p = sample_levy_path(&s, 1.0, 0.01, 0.1, 1, SmallJumpPolicy::Gaussian).unwrap();
    let zero = euler_integrate(&ZeroDrift(1), &[0.3], &p).unwrap();
    let konst = euler_integrate(&ConstantDrift(vec![-0.7]), &[0.3], &p).unwrap();
    assert_eq!(zero.times, konst.times);
    assert_eq!(zero.times.len(), p.steps() + 1 + p.jumps().len());
    for (i, &t) in zero.times.iter().enumerate() {
        let l = p.value_at(t)[0];
        assert!((zero.state(i)[0] - (0.3 + l)).abs() < 1e-12);
        assert!((konst.state(i)[0] - (0.3 - 0.7 * t + l)).abs() < 1e-12, "t={t}");
    }
    assert!(euler_integrate(&ZeroDrift(2), &[0.0], &p).is_err());
}

#[test]
fn euler_self_convergence_for_lipschitz_drift() {
    let s = spec15();
    let b = FnDrift::new(1, |x, o| o[0] = (2.0 * x[0]).sin());
    let (mut e1, mut e2) = (0.0, 0.0);
    for i in 0..50 {
        let fine = sample_levy_path(&s, 1.0, 0.0025, 0.1, path_seed(5, i), SmallJumpPolicy::Drop).unwrap();
        let mid = fine.coarsen(2).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        let xf = euler_integrate(&b, &[0.1], &fine).unwrap().terminal()[0];
        let xm = euler_integrate(&b, &[0.1], &mid).unwrap().terminal()[0];
        let xc = euler_integrate(&b, &[0.1], &coarse).unwrap().terminal()[0];
        e1 += (xc - xm).abs();
        e2 += (xm - xf).abs();
    }
    let rate = e1 / e2;
    assert!(rate > 1.5 && rate < 2.7, "ratio {rate}");
}

#[test]
fn lipschitz_ratio_trivial_cases() {
    let s = spec15();
    let params = PathParams { horizon: 1.0, dt: 0.01, eps: 0.1, policy: SmallJumpPolicy::Gaussian };
    let r = lipschitz_ratio(&s, &ZeroDrift(1), &[0.0], &[1e-3], 2.0, &params, 100, 3).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.std_error, 0.0);
    // Pathwise Gronwall with K = 2.
    let b = FnDrift::new(1, |x, o| o[0] = (2.0 * x[0]).sin());
    let r = lipschitz_ratio(&s, &b, &[0.0], &[0.01], 2.0, &params, 100, 3).unwrap();
    assert!(r.max <= (2.0f64 * 2.0).exp() * (1.0 + 1e-9));
    assert!(matches!(
        lipschitz_ratio(&s, &b, &[0.0], &[0.0], 2.0, &params, 100, 3),
        Err(Error::DegenerateInput(_))
    ));
    assert!(lipschitz_ratio(&s, &b, &[0.0], &[0.1], 2.0, &params, 10, 3).is_err());
    let again = lipschitz_ratio(&s, &b, &[0.0], &[0.01], 2.0, &params, 100, 3).unwrap();
    assert_eq!(again.estimate.to_bits(), r.estimate.to_bits());
}

#[test]
fn ensemble_shares_noise() {
    let s = spec15();
    let params = PathParams { horizon: 0.5, dt: 0.05, eps: 0.2, policy: SmallJumpPolicy::Gaussian };
    let pts = vec![vec![-1.0], vec![0.0], vec![2.0]];
    let e = FlowEnsemble::build(&s, &ZeroDrift(1), pts, &params, 4, 8).unwrap();
    assert_eq!(e.times.len(), 11);
    for p in 0..4 {
        for k in 0..11 {
            let d = e.state(p, 2, k)[0] - e.state(p, 0, k)[0];
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("path_id,point_id,time,x_0\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 11);
    let js: serde_json::Value = serde_json::from_str(&e.summary_json().unwrap()).unwrap();
    assert_eq!(js["seeds"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_drift_transform_is_identity() {
    let p = field_problem(1.5, 2.0, 3.0, 0.05, |_| 0.0);
    let s = solve_hoelder_drift(&p, &no_residual()).unwrap();
    let tf = build_transform(&p, &s, 0.5).unwrap();
    assert_eq!(tf.c_lambda, 0.0);
    for &y in &[-2.0, 0.0, 0.7] {
        assert_eq!(tf.psi(y), y);
        assert_eq!(tf.psi_inverse(y).unwrap(), y);
        assert_eq!(tf.drift_tilde(y).unwrap(), 0.0);
        assert_eq!(tf.jump_map(y, 0.3).unwrap(), 0.3);
    }
    let path = sample_levy_path(&p.spec, 0.5, 0.01, 0.1, 2, SmallJumpPolicy::Gaussian).unwrap();
    if let Ok(y) = integrate_transformed(&tf, 0.2, &path) {
        let x = euler_integrate(&ZeroDrift(1), &[0.2], &path).unwrap();
        assert_eq!(y.y.times, x.times);
        assert!(y.y.sup_distance(&x) < 1e-12);
    }
    let h = derivative_flow(&tf, &path, 0.2);
    if let Ok(h) = h {
        assert!(h.h.unwrap().iter().all(|&v| v == 1.0));
    }
}

#[test]
fn constant_drift_gives_flat_derivative_flow() {
    let p = field_problem(1.5, 5.0, 4.0, 0.05, |_| 0.6);
    let s = solve_hoelder_drift(&p, &no_residual()).unwrap();
    assert!((s.u.node(10, 0) - 0.12).abs() < 1e-6);
    let tf = build_transform(&p, &s, 0.5).unwrap();
    assert!(tf.c_lambda < 1e-6);
    let path = sample_levy_path(&p.spec, 0.5, 0.01, 0.1, 4, SmallJumpPolicy::Gaussian).unwrap();
    let h = derivative_flow(&tf, &path, tf.psi(0.0)).unwrap();
    assert!(h.h.unwrap().iter().all(|v| (v - 1.0).abs() < 1e-4));
}

#[test]
fn small_lambda_violates_contraction() {
    let p = field_problem(1.5, 0.3, 4.0, 0.05, |x| tanaka_drift(x, 0.8));
    let s = solve_hoelder_drift(&p, &no_residual()).unwrap();
    assert!(s.du.sup_norm() >= 1.0 / 3.0);
    assert!(matches!(build_transform(&p, &s, 0.5), Err(Error::ContractionViolated(_))));
    // A problem with g ≠ b is refused.
    let (tp, ts) = tanaka_setup();
    let other =
        ResolventProblem::new(tp.spec.clone(), 20.0, tp.drift.clone(), tp.source.scaled(0.5), 0.8).unwrap();
    assert!(build_transform(&other, ts, 0.5).is_err());
    assert!(build_transform(tp, ts, 1.0).is_err());
}

#[test]
fn inverse_and_jacobian_bounds() {
    let (p, s) = tanaka_setup();
    let tf = build_transform(p, s, 0.5).unwrap();
    assert!(tf.c_lambda > 0.01 && tf.c_lambda < 1.0 / 3.0);
    let mut rng = crate::seed::rng(1);
    for _ in 0..1000 {
        let y: f64 = rng.random_range(-5.5..5.5);
        let (x, it) = tf.psi_inverse_counted(y).unwrap();
        assert!(it <= MAX_INVERSE_ITERATIONS);
        assert!((tf.psi(x) - y).abs() < 1e-9);
        let j = tf.dpsi_inverse(y).unwrap();
        assert!(j.abs() <= 1.0 / (1.0 - tf.c_lambda) + 1e-12);
    }
    let bound = tf.inverse_jacobian_bound();
    assert!(bound <= 1.0 / (1.0 - tf.c_lambda) && bound < 1.5);
}

#[test]
fn transformed_start_and_box() {
    let (p, s) = tanaka_setup();
    let tf = build_transform(p, s, 0.5).unwrap();
    let path = sample_levy_path(&p.spec, 0.1, 0.01, 0.1, 13, SmallJumpPolicy::Gaussian).unwrap();
    let y = integrate_transformed(&tf, tf.psi(0.4), &path).unwrap();
    assert_eq!(y.y.state(0)[0], tf.psi(0.4));
    assert_eq!(y.x[0], tf.psi_inverse(tf.psi(0.4)).unwrap());
    assert!(matches!(integrate_transformed(&tf, 100.0, &path), Err(Error::BoxExceeded(_))));
    let coarse = sample_levy_path(&p.spec, 0.5, 0.01, 0.6, 12, SmallJumpPolicy::Gaussian).unwrap();
    assert!(integrate_transformed(&tf, 0.0, &coarse).is_err());
}

#[test]
fn conjugacy_error_shrinks_under_refinement() {
    let (p, s) = tanaka_setup();
    let tf = build_transform(p, s, 0.5).unwrap();
    let b = TanakaDrift { beta: 0.8 };
    let mut means = Vec::new();
    for &(dt, eps) in &[(1e-2, 1e-1), (2.5e-3, 2.5e-2)] {
        let mut errs = Vec::new();
        for i in 0..40 {
            let path = sample_levy_path(&p.spec, 0.5, dt, eps, path_seed(21, i), SmallJumpPolicy::Gaussian).unwrap();
            if let Ok(e) = conjugacy_error(&tf, &b, 0.0, &path) {
                errs.push(e);
            }
        }
        assert!(errs.len() >= 35);
        means.push(mean_se(&errs).0);
    }
    assert!(means[1] < 0.5 * means[0], "{means:?}");
}

#[test]
fn derivative_flow_matches_finite_difference() {
    let (p, s) = tanaka_setup();
    let tf = build_transform(p, s, 0.5).unwrap();
    let (mut err, mut count) = (0.0, 0);
    for i in 0..20 {
        let path = sample_levy_path(&p.spec, 0.5, 0.005, 0.05, path_seed(31, i), SmallJumpPolicy::Gaussian).unwrap();
        let y0 = tf.psi(0.05);
        let (Ok(h), Ok(a), Ok(b)) = (
            derivative_flow(&tf, &path, y0),
            integrate_transformed(&tf, y0 + 1e-4, &path),
            integrate_transformed(&tf, y0 - 1e-4, &path),
        ) else {
            continue;
        };
        let fd = (a.y.terminal()[0] - b.y.terminal()[0]) / 2e-4;
        let ht = *h.h.unwrap().last().unwrap();
        err += ((ht - fd) / fd).abs();
        count += 1;
    }
    assert!(count >= 15);
    assert!(err / (count as f64) < 1e-2, "{}", err / count as f64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn common_noise_separation_is_exact(x in -5.0f64..5.0, gap in 1e-6f64..2.0, seed in 0u64..1000) {
        let p = sample_levy_path(&spec15(), 0.5, 0.05, 0.2, seed, SmallJumpPolicy::Gaussian).unwrap();
        let a = euler_integrate(&ZeroDrift(1), &[x], &p).unwrap();
        let b = euler_integrate(&ZeroDrift(1), &[x + gap], &p).unwrap();
        prop_assert_eq!(sup_separation(&a, &b), ((x + gap) - x).abs());
    }

    #[test]
    fn jump_sizes_exceed_cutoff(eps in 0.05f64..1.0, seed in 0u64..1000, alpha in 0.3f64..1.9) {
        let s = StableSpec::one_dimensional(alpha, 1.0).unwrap();
        let p = sample_levy_path(&s, 1.0, 0.1, eps, seed, SmallJumpPolicy::Drop).unwrap();
        prop_assert!(p.jumps().iter().all(|j| j.size[0].abs() > eps));
        prop_assert!(p.jumps().windows(2).all(|w| w[0].time < w[1].time));
    }
}
