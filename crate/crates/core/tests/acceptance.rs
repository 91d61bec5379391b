//! Acceptance run: every criterion at its stated tolerance, one `[PASS]`/`[FAIL]` line each.
//! Lines are written straight to stdout so they show without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use cuspcpm::closest_point::{ClosestPoint, DescentConfig, NearestParamCp, TwoStageCp};
use cuspcpm::cpm::*;
use cuspcpm::grid::{diff_matrix, interp_matrix};
use cuspcpm::spectral::*;
use cuspcpm::surface5d::{run_demo, DemoConfig};
use cuspcpm::{catalogue, ic, CurveParam, Error};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn record(&mut self, id: u32, pass: bool, detail: String, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let line = format!("[{tag}] criterion {id:>2}: {detail} ({:.1} s)\n", started.elapsed().as_secs_f64());
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        if !pass {
            self.failed.push(id);
        }
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn reference(eps: f64, t_final: f64, thetas: &[f64]) -> Vec<f64> {
    let curve = catalogue("cusp", eps).unwrap().curve().unwrap();
    solve_on_curve(curve, ic::cusp_theta, 1.0, t_final, DEFAULT_TAIL_TOL).unwrap().evaluate_many(t_final, thetas)
}

fn cusp_error(geo: &CuspGeometry, eps: f64, scheme: Scheme, t_final: f64) -> cuspcpm::Result<f64> {
    let ops = geo.assemble(eps, 1.0)?;
    let out = run(&ops, &geo.grid, geo.initial_state(ic::cusp_xy), scheme, t_final)?;
    Ok(max_diff(&geo.sample(&out.state)?, &reference(eps, t_final, &geo.thetas)))
}

fn implicit_order(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let mut table = Vec::new();
    for eps in [0.5, 0.05] {
        let errs: Vec<f64> = geos.iter().map(|g| cusp_error(g, eps, Scheme::Implicit, 0.1).unwrap_or(f64::NAN)).collect();
        table.push(errs);
    }
    let all_orders: Vec<Vec<f64>> = table.iter().map(|e| orders(e)).collect();
    let ratios: Vec<f64> = table[0].iter().zip(&table[1]).map(|(a, b)| a.max(*b) / a.min(*b)).collect();
    let pass = all_orders.iter().flatten().all(|&o| o >= 1.8) && ratios.iter().all(|&q| q <= 4.0);
    r.record(1, pass, format!("implicit orders eps=0.5 {:.3?}, eps=0.05 {:.3?}; constant ratios {:.2?}", all_orders[0], all_orders[1], ratios), t0);
}

fn explicit_order(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let errs: Vec<f64> = geos[..3].iter().map(|g| cusp_error(g, 0.5, Scheme::Explicit, 0.001).unwrap_or(f64::NAN)).collect();
    let ord = orders(&errs);
    let pass = ord.iter().all(|&o| o >= 1.8);
    r.record(2, pass, format!("explicit errors [{}], orders {ord:.3?}", sci(&errs)), t0);
}

fn explicit_guard(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let (eps, tf) = (0.005, 0.1);
    let steps: Vec<u64> = LADDER.iter().map(|&h| step_plan(timestep_size(Scheme::Explicit, eps, h), tf).0).collect();
    let fine = &geos[3];
    let outcome = fine
        .assemble(eps, 1.0)
        .and_then(|ops| run(&ops, &fine.grid, fine.initial_state(ic::cusp_xy), Scheme::Explicit, tf));
    let pass = matches!(outcome, Err(Error::Infeasible(_)));
    let what = match &outcome {
        Err(e) => format!("{} ({e})", e.code()),
        Ok(_) => "ran to completion".into(),
    };
    r.record(3, pass, format!("explicit eps=0.005 t_f=0.1 at h=0.0125: {what}; step counts over the ladder {steps:?}"), t0);
}

fn eps_rate(r: &mut Report) {
    let t0 = Instant::now();
    let rep = epsilon_study(&EpsilonStudy::default(), ic::cusp_theta).unwrap();
    let pass = (1.7..=2.0).contains(&rep.slope) && t0.elapsed().as_secs_f64() < 60.0;
    r.record(4, pass, format!("fitted slope {:.4} over {} points", rep.slope, rep.records.len() - rep.excluded), t0);
}

fn band_samples(n: usize) -> Vec<Vec<f64>> {
    let entry = catalogue("cusp", 1.0).unwrap();
    let curve = entry.curve().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    while out.len() < n {
        let theta: f64 = rng.random_range(-PI..PI);
        let p = curve.point(theta);
        let d: Vec<f64> = (0..3).map(|_| rng.random_range(-0.1..0.1)).collect();
        let x: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + b).collect();
        if cuspcpm::closest_point::in_band(entry.system(), &x) {
            out.push(x);
        }
    }
    out
}

fn fd_jacobian(cp: &dyn ClosestPoint, x: &[f64]) -> DMatrix<f64> {
    let h = 1e-5;
    DMatrix::from_fn(3, 3, |i, j| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        (cp.project(&xp).unwrap().point[i] - cp.project(&xm).unwrap().point[i]) / (2.0 * h)
    })
}

fn cp_suite(r: &mut Report) {
    let t0 = Instant::now();
    let entry = catalogue("cusp", 1.0).unwrap();
    let sys = entry.system().clone();
    let curve = entry.curve().unwrap();
    let band = band_samples(128);
    let on_curve: Vec<Vec<f64>> = theta_samples(128).into_iter().map(|t| curve.point(t)).collect();
    let two_stage = TwoStageCp::new(sys.clone(), DescentConfig::default()).unwrap();
    let nearest = NearestParamCp::new(sys.clone(), entry.parametrization(), 32, 4).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, cp) in [("two-stage", &two_stage as &dyn ClosestPoint), ("nearest-param", &nearest as &dyn ClosestPoint)] {
        let (mut retraction, mut residual, mut jac) = (0.0f64, 0.0f64, 0.0f64);
        for x in &band {
            let p = cp.project(x).unwrap().point;
            retraction = retraction.max(max_diff(&cp.project(&p).unwrap().point, &p));
            residual = residual.max(sys.eval(&p).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        for y in &on_curve {
            jac = jac.max((fd_jacobian(cp, y) - sys.tangent_projector(y).unwrap()).amax());
        }
        pass &= retraction < 1e-10 && residual < 1e-10 && jac < 1e-4;
        parts.push(format!("{name}: retraction {retraction:.1e}, residual {residual:.1e}, jacobian {jac:.1e}"));
    }
    r.record(5, pass, format!("{} band + {} curve samples; {}", band.len(), on_curve.len(), parts.join("; ")), t0);
}

fn derivative_error(geo: &CuspGeometry) -> f64 {
    let f = |x: &[f64]| (x[0] + 2.0 * x[1] + 0.5 * x[2]).sin();
    let w = geo.grid.sample(f);
    let mut worst = 0.0f64;
    for (axis, scale) in [(0usize, 1.0), (1, 2.0), (2, 0.5)] {
        let d = diff_matrix(&geo.grid, axis).unwrap().matvec(&w);
        for i in 0..geo.grid.n_core() {
            let x = geo.grid.coords(i);
            worst = worst.max((d[i] - scale * (x[0] + 2.0 * x[1] + 0.5 * x[2]).cos()).abs());
        }
    }
    worst
}

fn fixtures(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let grid = &geos[0].grid;
    let cubics: [fn(&[f64]) -> f64; 3] = [
        |x| x[0].powi(3) + 2.0 * x[1] * x[1] * x[2],
        |x| x[0] * x[1] * x[2] - 3.0 * x[2].powi(3) + x[1],
        |x| (x[0] - 0.3).powi(2) * (x[1] + 1.0) + 0.5,
    ];
    let targets = grid.cp_targets();
    let m = interp_matrix(grid, &targets).unwrap();
    let exact_err = cubics
        .iter()
        .map(|p| max_diff(&m.matvec(&grid.sample(p)), &targets.iter().map(|y| p(y)).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let errs: Vec<f64> = geos[..3].iter().map(derivative_error).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = exact_err < 1e-12 && ratios.iter().all(|q| (3.5..=4.5).contains(q));
    r.record(6, pass, format!("tri-cubic error on cubics {exact_err:.1e}; difference error ratios {ratios:.3?}"), t0);
}

fn constant_states(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let geo = &geos[0];
    let c = 0.7;
    let w = vec![c; geo.grid.len()];
    let mut worst = 0.0f64;
    for mu in [1.0, 0.5] {
        let ops = geo.assemble(0.5, mu).unwrap();
        let te = timestep_size(Scheme::Explicit, 0.5, 0.1);
        let ti = timestep_size(Scheme::Implicit, 0.5, 0.1);
        let ex = explicit_step(&ops, &w, te).unwrap();
        let im = implicit_step(&ops, &w, ti).unwrap();
        worst = worst.max(max_diff(&ex, &vec![c * (1.0 - te * mu * mu); w.len()]));
        worst = worst.max(max_diff(&im, &vec![c / (1.0 + ti * mu * mu); w.len()]));
    }
    r.record(7, worst < 1e-12, format!("max deviation from c(1 - tau mu^2) and c/(1 + tau mu^2): {worst:.1e}"), t0);
}

fn arclength_estimates(r: &mut Report) {
    let t0 = Instant::now();
    let base_curve = catalogue("cusp", 0.0).unwrap().base_curve().unwrap();
    let base = arclength(base_curve.clone(), 1e-13).unwrap().total_length();
    let pts: Vec<(f64, f64)> = (4..=12)
        .map(|j| {
            let eps = 2f64.powi(-j);
            let curve: Arc<dyn CurveParam> = catalogue("cusp", eps).unwrap().curve().unwrap();
            (eps, arclength(curve, 1e-13).unwrap().total_length() - base)
        })
        .collect();
    let (slope, _) = loglog_fit(&pts).unwrap();
    let mut speed_ok = true;
    for eps in [1.0, 0.5, 0.1, 0.01, 1e-3] {
        let c = catalogue("cusp", eps).unwrap().curve().unwrap();
        for t in theta_samples(2048) {
            let d = c.speed(t) - base_curve.speed(t);
            speed_ok &= (-1e-15..=eps / 2.0 + 1e-15).contains(&d);
        }
    }
    let slope_ok = (0.9..=1.1).contains(&slope);
    r.record(
        8,
        slope_ok && speed_ok,
        format!("length excess slope {slope:.4} over eps = 2^-4..2^-12 (needs [0.9, 1.1]); speed excess within [0, eps/2]: {speed_ok}"),
        t0,
    );
}

fn oracle_consistency(r: &mut Report) {
    let t0 = Instant::now();
    let thetas = theta_samples(512);
    let mut doubling = 0.0f64;
    for eps in [0.5, 0.05, 0.0] {
        let curve = catalogue("cusp", eps).unwrap().curve().unwrap();
        let alen = Arc::new(arclength(curve, DEFAULT_QUAD_TOL).unwrap());
        let m = choose_truncation(alen.total_length(), 1e-4, sampled_amplitude(ic::cusp_theta), DEFAULT_TAIL_TOL).unwrap();
        let a = fourier_coefficients(ic::cusp_theta, alen.clone(), m, 1.0).unwrap();
        let b = fourier_coefficients(ic::cusp_theta, alen, 2 * m, 1.0).unwrap();
        for t in [1e-4, 1e-3, 1e-2, 0.1] {
            doubling = doubling.max(max_diff(&a.evaluate_many(t, &thetas), &b.evaluate_many(t, &thetas)));
        }
    }
    let base = catalogue("cusp", 0.0).unwrap().base_curve().unwrap();
    let reference = solve_on_curve(base, ic::cusp_theta, 1.0, 0.1, DEFAULT_TAIL_TOL).unwrap().evaluate_many(0.1, &thetas);
    let zero = max_diff(&self::reference(0.0, 0.1, &thetas), &reference);
    r.record(9, doubling < 1e-10 && zero < 1e-12, format!("mode doubling change {doubling:.1e}; eps=0 vs reference {zero:.1e}"), t0);
}

fn surface_demo(r: &mut Report) {
    let t0 = Instant::now();
    let cfg = DemoConfig::default();
    let h = cfg.band.h;
    match run_demo(&cfg) {
        Ok(res) => {
            let frac = res.fraction();
            let maxes: Vec<f64> = res.log.iter().map(|l| l.max_w).collect();
            let monotone = maxes.windows(2).all(|w| w[1] <= w[0]);
            let sym_ok = res.symmetry_residual <= 10.0 * h * h;
            let frac_ok = (1e-4..=2.5e-3).contains(&frac);
            let fast = t0.elapsed().as_secs_f64() < 900.0;
            r.record(
                10,
                frac_ok && monotone && sym_ok && fast,
                format!(
                    "band fraction {:.4}% ({} of {} points, needs 0.01%..0.25%); max_w {maxes:.4?} non-increasing: {monotone}; symmetry residual {:.2e} vs {:.2e}",
                    100.0 * frac,
                    res.active_points,
                    res.total_points,
                    res.symmetry_residual,
                    10.0 * h * h
                ),
                t0,
            );
        }
        Err(e) => r.record(10, false, format!("demo failed: {e}"), t0),
    }
}

fn stiff_stability(r: &mut Report, geos: &[CuspGeometry]) {
    let t0 = Instant::now();
    let geo = &geos[0];
    let ops = geo.assemble(0.005, 1.0).unwrap();
    let n_core = geo.grid.n_core();
    let sup = |w: &[f64]| w[..n_core].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut w = geo.initial_state(ic::cusp_xy);
    let bound = sup(&w) + 1e-8;
    let stepper = ImplicitStepper::new(&ops, timestep_size(Scheme::Implicit, 0.005, 0.1)).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        w = stepper.step(&ops, &w).unwrap();
        worst = worst.max(sup(&w));
    }
    r.record(11, worst <= bound, format!("max |w| over 200 implicit steps {worst:.6} vs bound {bound:.6}"), t0);
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };
    let geos: Vec<CuspGeometry> = LADDER.iter().map(|&h| cusp_geometry(&CuspBandConfig::new(h)).unwrap()).collect();
    implicit_order(&mut r, &geos);
    explicit_order(&mut r, &geos);
    explicit_guard(&mut r, &geos);
    eps_rate(&mut r);
    cp_suite(&mut r);
    fixtures(&mut r, &geos);
    constant_states(&mut r, &geos);
    arclength_estimates(&mut r);
    oracle_consistency(&mut r);
    stiff_stability(&mut r, &geos);
    drop(geos);
    surface_demo(&mut r);
    assert!(r.failed.is_empty(), "failing criteria: {:?}", r.failed);
}
