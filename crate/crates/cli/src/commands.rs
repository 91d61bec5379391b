//! Experiment commands. Each writes its CSV files into the configured output directory
//! and returns the in-memory report.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cuspcpm::closest_point::{
    diagnostics_csv, in_band, jacobian_check, ClosestPoint, CpResult, DescentConfig, NearestParamCp, TwoStageCp, DEFAULT_MULTISTART,
};
use cuspcpm::cpm::{self, cusp_geometry, step_plan, timestep_size, CuspBandConfig, CuspGeometry, Scheme, SolverRun, MAX_EXPLICIT_STEPS};
use cuspcpm::spectral::{self, EpsilonStudy, EpsilonStudyReport};
use cuspcpm::surface5d::{self, DemoConfig, DemoResult, SurfaceBandConfig};
use cuspcpm::{catalogue, ic, Error, Result};

use crate::config::ExperimentConfig;

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn require_cusp(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.variety != "cusp" {
        return Err(Error::Config(format!("the curve solver supports only the cusp, got `{}`", cfg.variety)));
    }
    Ok(())
}

fn geometry(cfg: &ExperimentConfig, h: f64) -> Result<CuspGeometry> {
    let mut band = CuspBandConfig::new(h);
    band.radius = cfg.band_radius;
    band.thetas = spectral::theta_samples(cfg.theta_samples);
    cusp_geometry(&band)
}

/// One `(eps, h, t_final)` cell of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub scheme: Scheme,
    pub eps: f64,
    pub h: f64,
    pub tau: f64,
    pub t_final: f64,
    /// `NaN` when the cell failed.
    pub linf_error: f64,
    /// `log2(e(2h) / e(h))` against the previous record when it has twice this `h`.
    pub observed_order: Option<f64>,
    /// `ok`, or the error code of the failure.
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,eps,h,tau,t_final,linf_error,observed_order,reason\n");
        for r in &self.records {
            let order = r.observed_order.map_or(String::new(), |o| format!("{o:.6}"));
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{},{}\n",
                r.scheme.name(),
                r.eps,
                r.h,
                r.tau,
                r.t_final,
                r.linf_error,
                order,
                r.reason
            ));
        }
        s
    }

    /// Records for one `eps`, in study order.
    pub fn series(&self, eps: f64) -> Vec<&ConvergenceRecord> {
        self.records.iter().filter(|r| r.eps == eps).collect()
    }

    fn fill_orders(&mut self) {
        for i in 1..self.records.len() {
            let (prev, cur) = (&self.records[i - 1], &self.records[i]);
            let same_cell = prev.eps == cur.eps && prev.t_final == cur.t_final;
            let halving = ((prev.h / cur.h) - 2.0).abs() < 1e-9;
            let order = (same_cell && halving && prev.linf_error > 0.0 && cur.linf_error > 0.0)
                .then(|| (prev.linf_error / cur.linf_error).log2())
                .filter(|o| o.is_finite());
            self.records[i].observed_order = order;
        }
    }
}

/// Sup-norm error of the closest point solution against the spectral solution on the
/// regularized curve, over the theta lattice of `geo`.
pub fn curve_error(geo: &CuspGeometry, cfg: &ExperimentConfig, eps: f64, t_final: f64, reference: &[f64]) -> Result<f64> {
    let steps = step_plan(timestep_size(cfg.scheme, eps, geo.grid.spec().h()), t_final).0;
    if cfg.scheme == Scheme::Explicit && steps > MAX_EXPLICIT_STEPS {
        return Err(Error::Infeasible(format!("explicit scheme needs {steps} steps at eps = {eps}")));
    }
    let ops = geo.assemble(eps, cfg.mu)?;
    let run = cpm::run(&ops, &geo.grid, geo.initial_state(ic::cusp_xy), cfg.scheme, t_final)?;
    let got = geo.sample(&run.state)?;
    let err = got.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(err)
}

fn reference_solution(cfg: &ExperimentConfig, eps: f64, t_final: f64, thetas: &[f64]) -> Result<Vec<f64>> {
    let curve = catalogue("cusp", eps)?.curve().ok_or_else(|| Error::Config("cusp has no curve parametrization".into()))?;
    let sol = spectral::solve_on_curve(curve, ic::cusp_theta, cfg.mu, t_final, cfg.tail_tol)?;
    Ok(sol.evaluate_many(t_final, thetas))
}

/// Mesh refinement study of the closest point solver against the spectral solution.
/// A failing cell is recorded with a `NaN` error and its error code.
pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    require_cusp(cfg)?;
    prepare_output(&cfg.output)?;
    let thetas = spectral::theta_samples(cfg.theta_samples);
    let mut references = Vec::new();
    for &eps in &cfg.eps {
        for &tf in &cfg.t_final {
            references.push(((eps, tf), reference_solution(cfg, eps, tf, &thetas)));
        }
    }
    let mut cells = Vec::new();
    for (hi, &h) in cfg.h.iter().enumerate() {
        let geo = geometry(cfg, h);
        for (ri, ((eps, tf), reference)) in references.iter().enumerate() {
            let tau = step_plan(timestep_size(cfg.scheme, *eps, h), *tf).1;
            let (linf_error, reason) = match (&geo, reference) {
                (Ok(g), Ok(r)) => match curve_error(g, cfg, *eps, *tf, r) {
                    Ok(err) => (err, "ok".to_string()),
                    Err(e) => (f64::NAN, e.code().to_string()),
                },
                (Err(e), _) | (_, Err(e)) => (f64::NAN, e.code().to_string()),
            };
            cells.push((ri, hi, ConvergenceRecord {
                scheme: cfg.scheme,
                eps: *eps,
                h,
                tau,
                t_final: *tf,
                linf_error,
                observed_order: None,
                reason,
            }));
        }
    }
    cells.sort_by_key(|c| (c.0, c.1));
    let mut report = ConvergenceReport { records: cells.into_iter().map(|c| c.2).collect() };
    report.fill_orders();
    write(&cfg.output, "converge.csv", &report.to_csv())?;
    Ok(report)
}

/// Spectral eps-study, one CSV per final time plus a slope summary.
pub fn cmd_eps_study(cfg: &ExperimentConfig) -> Result<Vec<EpsilonStudyReport>> {
    prepare_output(&cfg.output)?;
    let mut reports = Vec::new();
    let mut summary = String::from("t_final,slope,intercept,excluded,leading_slope\n");
    for &tf in &cfg.t_final {
        let study = EpsilonStudy {
            variety: cfg.variety.clone(),
            mu: cfg.mu,
            t_final: tf,
            eps: cfg.eps.clone(),
            exclude_first: cfg.exclude_first,
            samples: cfg.theta_samples,
            tail_tol: cfg.tail_tol,
        };
        let report = spectral::epsilon_study(&study, ic::cusp_theta)?;
        write(&cfg.output, &format!("eps_study_t{tf:e}.csv"), &report.to_csv())?;
        let leading = report.leading_slope(cfg.exclude_first.max(3)).map_or(f64::NAN, |s| s);
        summary.push_str(&format!("{tf:e},{:.6},{:.6},{},{:.6}\n", report.slope, report.intercept, report.excluded, leading));
        reports.push(report);
    }
    write(&cfg.output, "eps_study_summary.csv", &summary)?;
    Ok(reports)
}

/// Worst-case closest point diagnostics of one construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CpCheckSummary {
    pub construction: String,
    pub samples: usize,
    pub retraction_max: f64,
    pub residual_max: f64,
    pub jacobian_max: f64,
    /// Fraction of band samples that converged with retraction and residuals below `1e-10`.
    pub pass_fraction: f64,
}

/// Seeded band samples around the unit-scale cusp: a curve point plus a normal offset of
/// length at most `max_offset`, kept when inside the admissible tube.
pub fn cusp_band_samples(count: usize, seed: u64, max_offset: f64) -> Result<Vec<Vec<f64>>> {
    let entry = catalogue("cusp", 1.0)?;
    let curve = entry.curve().ok_or_else(|| Error::Config("cusp has no curve parametrization".into()))?;
    let sys = entry.system();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let theta = rng.random_range(-PI..PI);
        let p = curve.point(theta);
        let t = DVector::from_vec(curve.deriv(theta)).normalize();
        let mut dir = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        dir -= &t * t.dot(&dir);
        if dir.norm() < 1e-3 {
            continue;
        }
        let x: Vec<f64> = (0..3).map(|i| p[i] + max_offset * rng.random::<f64>() * dir[i] / dir.norm()).collect();
        if in_band(sys, &x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Retraction, residual and Jacobian diagnostics for `cp` on band samples and curve points.
pub fn check_construction(name: &str, cp: &dyn ClosestPoint, band: &[Vec<f64>], on_curve: &[Vec<f64>]) -> Result<(CpCheckSummary, Vec<(Vec<f64>, CpResult)>)> {
    let sys = cp.system();
    let mut rows = Vec::with_capacity(band.len());
    let (mut retraction_max, mut residual_max, mut passed) = (0.0f64, 0.0f64, 0usize);
    for x in band {
        let r = cp.project(x)?;
        let again = cp.project(&r.point)?;
        let retraction = r.point.iter().zip(&again.point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let residual = r.residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        retraction_max = retraction_max.max(retraction);
        residual_max = residual_max.max(residual);
        if r.converged && retraction < 1e-10 && residual < 1e-10 {
            passed += 1;
        }
        rows.push((x.clone(), r));
    }
    let mut jacobian_max = 0.0f64;
    for y in on_curve {
        let jac = jacobian_check(cp, y)?;
        let p = sys.tangent_projector(y)?;
        jacobian_max = jacobian_max.max((jac - p).amax());
    }
    let summary = CpCheckSummary {
        construction: name.to_string(),
        samples: band.len(),
        retraction_max,
        residual_max,
        jacobian_max,
        pass_fraction: passed as f64 / band.len().max(1) as f64,
    };
    Ok((summary, rows))
}

/// Closest point diagnostics for both constructions on the unit-scale cusp.
pub fn cmd_cp_check(cfg: &ExperimentConfig) -> Result<Vec<CpCheckSummary>> {
    require_cusp(cfg)?;
    prepare_output(&cfg.output)?;
    let entry = catalogue("cusp", 1.0)?;
    let curve = entry.curve().ok_or_else(|| Error::Config("cusp has no curve parametrization".into()))?;
    let band = cusp_band_samples(cfg.cp_samples, cfg.seed, 0.15)?;
    let on_curve: Vec<Vec<f64>> = spectral::theta_samples(cfg.cp_samples).into_iter().map(|t| curve.point(t)).collect();
    let two_stage = TwoStageCp::new(entry.system().clone(), DescentConfig::default())?;
    let nearest = NearestParamCp::new(entry.system().clone(), entry.parametrization(), DEFAULT_MULTISTART, 4)?;
    let mut summaries = Vec::new();
    let mut csv = String::from("construction,samples,retraction_max,residual_max,jacobian_max,pass_fraction\n");
    for (name, cp) in [("two_stage", &two_stage as &dyn ClosestPoint), ("nearest_param", &nearest as &dyn ClosestPoint)] {
        let (summary, rows) = check_construction(name, cp, &band, &on_curve)?;
        write(&cfg.output, &format!("cp_{name}.csv"), &diagnostics_csv(&rows))?;
        csv.push_str(&format!(
            "{},{},{:e},{:e},{:e},{}\n",
            summary.construction, summary.samples, summary.retraction_max, summary.residual_max, summary.jacobian_max, summary.pass_fraction
        ));
        summaries.push(summary);
    }
    write(&cfg.output, "cp_check.csv", &csv)?;
    Ok(summaries)
}

/// Output of [`cmd_solve`].
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub run: SolverRun,
    pub samples: Vec<(f64, f64)>,
}

/// Single closest point run on the cusp at the first `eps`, `h` and `t_final` of the config.
/// Writes the state with grid coordinates, the step log, curve samples and the band index dump.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveOutput> {
    require_cusp(cfg)?;
    prepare_output(&cfg.output)?;
    let (eps, h, tf) = (cfg.eps[0], cfg.h[0], cfg.t_final[0]);
    let geo = geometry(cfg, h)?;
    let ops = geo.assemble(eps, cfg.mu)?;
    let run = cpm::run(&ops, &geo.grid, geo.initial_state(ic::cusp_xy), cfg.scheme, tf)?;
    let values = geo.sample(&run.state)?;
    let samples: Vec<(f64, f64)> = geo.thetas.iter().copied().zip(values).collect();

    let mut state = String::from("x1,x2,x3,core,w\n");
    for (i, w) in run.state.iter().enumerate() {
        let c = geo.grid.coords(i);
        state.push_str(&format!("{:e},{:e},{:e},{},{w:e}\n", c[0], c[1], c[2], u8::from(i < geo.grid.n_core())));
    }
    write(&cfg.output, "state.csv", &state)?;
    write(&cfg.output, "log.csv", &run.log_csv())?;
    let mut curve = String::from("theta,w\n");
    for (t, w) in &samples {
        curve.push_str(&format!("{t:e},{w:e}\n"));
    }
    write(&cfg.output, "samples.csv", &curve)?;
    let mut dump = Vec::new();
    geo.grid.write_index_dump(&mut dump)?;
    fs::write(cfg.output.join("band.bin"), dump)?;
    Ok(SolveOutput { run, samples })
}

/// The reaction-diffusion run on the desingularized surface of revolution.
pub fn cmd_surface_demo(cfg: &ExperimentConfig) -> Result<DemoResult> {
    if cfg.variety != "revolution" {
        return Err(Error::Config(format!("the surface demo runs on `revolution`, got `{}`", cfg.variety)));
    }
    if cfg.scheme != Scheme::Explicit {
        return Err(Error::Config("the surface demo supports only the explicit scheme".into()));
    }
    prepare_output(&cfg.output)?;
    let band = SurfaceBandConfig { h: cfg.h[0], radius: cfg.band_radius, ..SurfaceBandConfig::default() };
    let demo = DemoConfig {
        band,
        eps: cfg.eps[0],
        mu: cfg.mu,
        t_final: cfg.t_final[0],
        n_theta: cfg.theta_samples,
        n_alpha: cfg.alpha_samples,
        ..DemoConfig::default()
    };
    let result = surface5d::run_demo(&demo)?;
    write(&cfg.output, "surface_demo.csv", &result.to_csv())?;
    let mut log = String::from("step,t,max_w,min_w\n");
    for r in &result.log {
        log.push_str(&format!("{},{:e},{:e},{:e}\n", r.step, r.t, r.max_w, r.min_w));
    }
    write(&cfg.output, "surface_log.csv", &log)?;
    write(
        &cfg.output,
        "surface_summary.csv",
        &format!(
            "active_points,predicate_points,total_points,fraction,steps,tau,symmetry_residual\n{},{},{},{:e},{},{:e},{:e}\n",
            result.active_points,
            result.predicate_points,
            result.total_points,
            result.fraction(),
            result.steps,
            result.tau,
            result.symmetry_residual
        ),
    )?;
    Ok(result)
}
