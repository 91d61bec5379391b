use std::f64::consts::PI;
use std::sync::Arc;

use cuspcpm::quadrature::{integrate, QuadConfig};
use cuspcpm::spectral::*;
use cuspcpm::{catalogue, ic, CurveParam};
use proptest::prelude::*;

fn cusp(eps: f64) -> Arc<dyn CurveParam> {
    catalogue("cusp", eps).unwrap().curve().unwrap()
}

fn base_cusp() -> Arc<dyn CurveParam> {
    catalogue("cusp", 0.0).unwrap().base_curve().unwrap()
}

#[test]
fn base_length_matches_riemann_sum() {
    let alen = arclength(base_cusp(), 1e-12).unwrap();
    let c = base_cusp();
    // periodic integrand: the midpoint rule converges faster than any power
    let n = 10_000_000usize;
    let h = 2.0 * PI / n as f64;
    let brute: f64 = (0..n).map(|k| c.speed(-PI + (k as f64 + 0.5) * h)).sum::<f64>() * h;
    assert!((alen.total_length() - brute).abs() < 1e-8, "{} vs {brute}", alen.total_length());
    assert_eq!(alen.eval(-PI), 0.0);
}

#[test]
fn lengths_grow_with_eps_within_the_bound() {
    let base = arclength(base_cusp(), 1e-12).unwrap().total_length();
    let mut prev = base;
    for eps in [0.25, 0.5, 1.0] {
        let l = arclength(cusp(eps), 1e-12).unwrap().total_length();
        assert!(l >= prev - 1e-12);
        assert!(l - base <= eps * PI + 1e-12, "eps={eps}: {}", l - base);
        prev = l;
    }
    let zero = arclength(cusp(0.0), 1e-12).unwrap().total_length();
    assert!((zero - base).abs() < 1e-12);
}

#[test]
fn length_excess_is_below_the_linear_bound() {
    // near the cusp tip the excess behaves like eps^2 log(1/eps), well inside eps * pi
    let base = arclength(base_cusp(), 1e-13).unwrap().total_length();
    let pts: Vec<(f64, f64)> = (4..=12)
        .map(|j| {
            let eps = 2f64.powi(-j);
            (eps, arclength(cusp(eps), 1e-13).unwrap().total_length() - base)
        })
        .collect();
    for (eps, d) in &pts {
        assert!(*d > 0.0 && d / eps < PI);
        let model = eps * eps * (1.0 / eps).ln();
        assert!(d / model > 0.1 && d / model < 10.0, "eps={eps}: {d:e}");
    }
    let (slope, _) = loglog_fit(&pts).unwrap();
    assert!((1.7..=2.0).contains(&slope), "slope {slope}");
}

#[test]
fn speed_excess_is_bounded_by_half_eps() {
    let base = base_cusp();
    for eps in [1.0, 0.5, 0.1, 0.01] {
        let c = cusp(eps);
        for t in theta_samples(2048) {
            let d = c.speed(t) - base.speed(t);
            assert!(d >= -1e-15 && d <= eps / 2.0 + 1e-15, "eps={eps} theta={t}: {d}");
        }
    }
}

#[test]
fn arclength_refinement_is_stable() {
    let coarse = arclength(cusp(0.1), 1e-9).unwrap().total_length();
    let fine = arclength(cusp(0.1), 1e-10).unwrap().total_length();
    assert!((coarse - fine).abs() < 1e-8);
}

fn direct_tail(length: f64, t: f64, amplitude: f64, modes: usize) -> f64 {
    let k = 2.0 * PI / length;
    let mut sum = 0.0;
    for m in modes + 1..=10 * modes.max(1) {
        let term = (-(k * m as f64).powi(2) * t).exp();
        if term == 0.0 {
            break;
        }
        sum += term;
    }
    2.0 * amplitude * sum
}

#[test]
fn truncation_bound_dominates_direct_sum() {
    for &l in &[1.0, 3.2, 10.0] {
        for &t in &[1e-1, 1e-3, 1e-4, 1e-6] {
            for &tol in &[1e-8, 1e-14] {
                let m = choose_truncation(l, t, 1.1, tol).unwrap();
                let direct = direct_tail(l, t, 1.1, m);
                assert!(direct <= tol, "L={l} t={t}: direct {direct:e} at M={m}");
                assert!(direct <= truncation_tail_bound(l, t, 1.1, m) * (1.0 + 1e-12));
            }
        }
    }
    assert!(choose_truncation(3.0, 0.1, 1.0, 1e-14).unwrap() <= choose_truncation(3.0, 1e-3, 1.0, 1e-14).unwrap());
    assert!(choose_truncation(3.0, 0.0, 1.0, 1e-14).is_err());
}

#[test]
fn doubling_modes_changes_nothing() {
    let alen = Arc::new(arclength(cusp(0.05), 1e-12).unwrap());
    let t_min = 1e-4;
    let m = choose_truncation(alen.total_length(), t_min, sampled_amplitude(ic::cusp_theta), 1e-14).unwrap();
    let a = fourier_coefficients(ic::cusp_theta, alen.clone(), m, 1.0).unwrap();
    let b = fourier_coefficients(ic::cusp_theta, alen, 2 * m, 1.0).unwrap();
    for t in [1e-4, 1e-3, 0.1] {
        for th in theta_samples(256) {
            assert!((a.evaluate(t, th) - b.evaluate(t, th)).abs() < 1e-10);
        }
    }
}

#[test]
fn parseval_identity() {
    let alen = Arc::new(arclength(cusp(0.5), 1e-12).unwrap());
    let sol = fourier_coefficients(ic::cusp_theta, alen.clone(), 400, 1.0).unwrap();
    let energy: f64 = (-400..=400).map(|m| sol.coefficient(m).norm_sqr()).sum();
    let cfg = QuadConfig::default();
    let exact = integrate(|t| ic::cusp_theta(t).powi(2) * alen.speed(t), -PI, PI, cfg).unwrap().value / alen.total_length();
    assert!((energy - exact).abs() < 1e-10 * exact, "{energy} vs {exact}");
}

#[test]
fn mean_is_conserved_without_reaction() {
    let sol = solve_on_curve(cusp(0.5), ic::cusp_theta, 0.0, 1e-3, 1e-14).unwrap();
    let alen = sol.arclength().clone();
    let cfg = QuadConfig::default();
    let mass = |t: f64| integrate(|th| sol.evaluate(t, th) * alen.speed(th), -PI, PI, cfg).unwrap().value;
    let m0 = mass(1e-3);
    for t in [0.01, 0.1, 1.0] {
        assert!((mass(t) - m0).abs() < 1e-9);
    }
}

#[test]
fn constant_data_decays_exponentially() {
    let sol = solve_on_curve(cusp(0.3), |_| 0.7, 1.0, 1e-3, 1e-14).unwrap();
    for t in [0.0, 0.1, 1.0] {
        for th in theta_samples(64) {
            // at t = 0 the quadrature noise of every mode adds up undamped
            let tol = if t == 0.0 { 2.0 * sol.modes() as f64 * 1e-14 } else { 1e-12 };
            let d = (sol.evaluate(t, th) - 0.7 * (-t).exp()).abs();
            assert!(d < tol, "t={t} theta={th}: {d:e} modes {}", sol.modes());
        }
    }
}

#[test]
fn zero_eps_member_is_the_reference() {
    let thetas = theta_samples(2048);
    let lifted = solve_on_curve(cusp(0.0), ic::cusp_theta, 1.0, 0.1, 1e-14).unwrap().evaluate_many(0.1, &thetas);
    let base = solve_on_curve(base_cusp(), ic::cusp_theta, 1.0, 0.1, 1e-14).unwrap().evaluate_many(0.1, &thetas);
    let diff = lifted.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff:e}");
}

#[test]
fn study_differences_shrink_along_the_tail() {
    let report = epsilon_study(&EpsilonStudy::default(), ic::cusp_theta).unwrap();
    let tail = &report.records[report.excluded..];
    assert!(tail.windows(2).all(|w| w[1].linf_diff < w[0].linf_diff));
    assert!(report.slope >= 0.9);
    assert!(report.to_csv().starts_with("eps,t_final,linf_diff\n"));
}

#[test]
fn study_rejects_short_windows() {
    let study = EpsilonStudy { eps: vec![0.5, 0.25, 0.125], ..EpsilonStudy::default() };
    assert!(epsilon_study(&study, ic::cusp_theta).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn series_is_linear_in_initial_data(a in -1.0f64..1.0, b in -1.0f64..1.0, th in -3.1f64..3.1) {
        let alen = Arc::new(arclength(cusp(0.25), 1e-12).unwrap());
        let v0 = move |t: f64| a * t.cos() + b * (2.0 * t).sin();
        let sum = move |t: f64| ic::cusp_theta(t) + v0(t);
        let m = 200;
        let su = fourier_coefficients(ic::cusp_theta, alen.clone(), m, 1.0).unwrap();
        let sv = fourier_coefficients(v0, alen.clone(), m, 1.0).unwrap();
        let ss = fourier_coefficients(sum, alen, m, 1.0).unwrap();
        for t in [1e-3, 0.1] {
            prop_assert!((ss.evaluate(t, th) - su.evaluate(t, th) - sv.evaluate(t, th)).abs() < 1e-10);
        }
    }
}
