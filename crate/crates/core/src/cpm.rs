//! Closest point method for `w_t = beta div E(beta grad w) - mu^2 w` on a space curve.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::closest_point::{beta_from_tangent, in_band, unit_tangent, ClosestPoint, DescentConfig, TwoStageCp};
use crate::error::{Error, Result};
use crate::grid::{build_band, candidates_near, diag_matrix, diff_matrix, extension_matrix, interp_matrix, variety_samples, BandRequest, BandedGrid, GridSpec};
use crate::linsolve::LinearSolver;
use crate::sparse::CsrMatrix;
use crate::varieties::{catalogue, CurveParam, ImplicitSystem, Parametrization, VarietyEntry};

/// Explicit runs needing more steps than this are reported as infeasible.
pub const MAX_EXPLICIT_STEPS: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    Implicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::Implicit => "implicit",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(Error::Config(format!("unknown scheme `{other}` (expected explicit or implicit)"))),
        }
    }
}

/// `eps^2 h^2 / 4` for the explicit scheme, `h^2` for the implicit one.
pub fn timestep_size(scheme: Scheme, eps: f64, h: f64) -> f64 {
    match scheme {
        Scheme::Explicit => 0.25 * eps * eps * h * h,
        Scheme::Implicit => h * h,
    }
}

/// Number of steps and the step size adjusted so that `steps * tau = t_final`.
pub fn step_plan(tau: f64, t_final: f64) -> (u64, f64) {
    if t_final <= 0.0 {
        return (0, tau);
    }
    let steps = (t_final / tau * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    (steps, t_final / steps as f64)
}

/// Discrete operators on a banded grid. All matrices are square over the active points;
/// `e` has non-zero columns only at core points and `d`, `l` have zero ghost rows.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub e: CsrMatrix,
    pub d: Vec<CsrMatrix>,
    pub b: CsrMatrix,
    pub l: CsrMatrix,
    pub beta: Vec<f64>,
    pub mu: f64,
    pub eps: f64,
}

/// `beta_eps(cp(x))` at every active point, from the unit tangent of the curve `system`.
pub fn beta_field(grid: &BandedGrid, system: &ImplicitSystem, eps: f64, base_dim: usize) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.cp(i);
            let t = unit_tangent(system, p, &vec![0.0; p.len()])?;
            Ok(beta_from_tangent(&t, eps, base_dim))
        })
        .collect()
}

/// Assembles `L = B sum_a D_a E B D_a` with `B = diag(beta_eps o cp)`.
pub fn assemble(grid: &BandedGrid, system: &ImplicitSystem, eps: f64, mu: f64) -> Result<OperatorSet> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let e = extension_matrix(grid)?;
    let beta = beta_field(grid, system, eps, 2)?;
    let b = diag_matrix(grid, &beta)?;
    let mut d = Vec::with_capacity(grid.spec().dim());
    let mut sum: Option<CsrMatrix> = None;
    for axis in 0..grid.spec().dim() {
        let da = diff_matrix(grid, axis)?;
        let term = da.matmul(&e.matmul(&da.scale_rows(&beta)));
        sum = Some(match sum {
            None => term,
            Some(s) => s.add_scaled(&term, 1.0),
        });
        d.push(da);
    }
    let l = sum.expect("at least one axis").scale_rows(&beta);
    Ok(OperatorSet { e, d, b, l, beta, mu, eps })
}

impl OperatorSet {
    pub fn len(&self) -> usize {
        self.e.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `E L w`.
    pub fn apply_el(&self, w: &[f64]) -> Vec<f64> {
        self.e.matvec(&self.l.matvec(w))
    }

    /// The product `E L` as an explicit matrix.
    pub fn el_matrix(&self) -> CsrMatrix {
        self.e.matmul(&self.l)
    }
}

/// One step of `w <- E (I + tau (E L - mu^2 I)) w`.
pub fn explicit_step(ops: &OperatorSet, w: &[f64], tau: f64) -> Result<Vec<f64>> {
    let elw = ops.apply_el(w);
    let m2 = ops.mu * ops.mu;
    let inner: Vec<f64> = w.iter().zip(&elw).map(|(wi, li)| wi + tau * (li - m2 * wi)).collect();
    let next = ops.e.matvec(&inner);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp(format!(
            "non-finite state after an explicit step with tau = {tau:.3e}; tau * max beta^2 / h^2 estimate is {:.3e}",
            tau * ops.beta.iter().fold(0.0f64, |m, b| m.max(b * b)) * ops.l.norm_inf()
                / ops.beta.iter().fold(1.0f64, |m, b| m.max(b * b))
        )));
    }
    Ok(next)
}

/// Factor-once backward Euler stepper: solve `(I - tau (E L - mu^2 I)) v = w`, then `w <- E v`.
pub struct ImplicitStepper {
    solver: LinearSolver,
    tau: f64,
}

impl ImplicitStepper {
    pub fn new(ops: &OperatorSet, tau: f64) -> Result<Self> {
        let n = ops.len();
        let m = CsrMatrix::identity(n)
            .scale(1.0 + tau * ops.mu * ops.mu)
            .add_scaled(&ops.el_matrix(), -tau);
        Ok(Self { solver: LinearSolver::new(&m)?, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self, ops: &OperatorSet, w: &[f64]) -> Result<Vec<f64>> {
        let v = self.solver.solve(w)?;
        Ok(ops.e.matvec(&v))
    }
}

/// One implicit step, factoring the system from scratch.
pub fn implicit_step(ops: &OperatorSet, w: &[f64], tau: f64) -> Result<Vec<f64>> {
    ImplicitStepper::new(ops, tau)?.step(ops, w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub t: f64,
    pub max_w: f64,
    pub min_w: f64,
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct SolverRun {
    pub scheme: Scheme,
    pub tau: f64,
    pub steps: u64,
    pub t_final: f64,
    pub state: Vec<f64>,
    pub log: Vec<LogRow>,
}

impl SolverRun {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("step,t,max_w,min_w\n");
        for r in &self.log {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", r.step, r.t, r.max_w, r.min_w));
        }
        s
    }

    /// `ordinal,value` rows of the final state.
    pub fn state_csv(&self) -> String {
        let mut s = String::from("ordinal,w\n");
        for (i, v) in self.state.iter().enumerate() {
            s.push_str(&format!("{i},{v:e}\n"));
        }
        s
    }
}

fn extrema(w: &[f64], n_core: usize) -> (f64, f64) {
    w[..n_core].iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(mx, mn), &v| (mx.max(v), mn.min(v)))
}

/// `w0(x) = u0(cp(x)_1, cp(x)_2)` on every active point.
pub fn initial_state<F: Fn(f64, f64) -> f64>(grid: &BandedGrid, u0: F) -> Vec<f64> {
    (0..grid.len()).map(|i| {
        let p = grid.cp(i);
        u0(p[0], p[1])
    }).collect()
}

/// Integrates from `w0` to `t_final` with the step size of `scheme`, adjusted to land on `t_final`.
pub fn run(ops: &OperatorSet, grid: &BandedGrid, w0: Vec<f64>, scheme: Scheme, t_final: f64) -> Result<SolverRun> {
    if t_final < 0.0 {
        return Err(Error::Domain(format!("final time must be non-negative, got {t_final}")));
    }
    let base_tau = timestep_size(scheme, ops.eps, grid.spec().h());
    let (steps, tau) = step_plan(base_tau, t_final);
    if scheme == Scheme::Explicit && steps > MAX_EXPLICIT_STEPS {
        return Err(Error::Infeasible(format!(
            "explicit scheme needs {steps} steps (tau = {tau:.3e}), more than the limit of {MAX_EXPLICIT_STEPS}"
        )));
    }
    let (mx, mn) = extrema(&w0, grid.n_core());
    let mut log = vec![LogRow { step: 0, t: 0.0, max_w: mx, min_w: mn }];
    let mut w = w0;
    let stepper = if scheme == Scheme::Implicit && steps > 0 { Some(ImplicitStepper::new(ops, tau)?) } else { None };
    for k in 1..=steps {
        w = match &stepper {
            Some(s) => s.step(ops, &w)?,
            None => explicit_step(ops, &w, tau)?,
        };
        let (mx, mn) = extrema(&w, grid.n_core());
        if !mx.is_finite() || !mn.is_finite() {
            return Err(Error::BlowUp(format!("non-finite state at step {k}")));
        }
        log.push(LogRow { step: k, t: k as f64 * tau, max_w: mx, min_w: mn });
    }
    Ok(SolverRun { scheme, tau, steps, t_final, state: w, log })
}

/// Tensor-cubic interpolation of `w` at `curve(theta)` for each sample.
pub fn sample_on_curve(grid: &BandedGrid, w: &[f64], curve: &dyn CurveParam, thetas: &[f64]) -> Result<Vec<f64>> {
    let targets: Vec<Vec<f64>> = thetas.iter().map(|&t| curve.point(t)).collect();
    let m = interp_matrix(grid, &targets).map_err(|e| match e {
        Error::StencilEscape(msg) => Error::StencilEscape(format!("sampling: {msg}")),
        other => other,
    })?;
    m.try_matvec(w)
}

/// Grid and closest point map for the desingularized cusp at unit scale.
pub struct CuspGeometry {
    pub entry: VarietyEntry,
    pub cp: TwoStageCp,
    pub grid: BandedGrid,
    pub thetas: Vec<f64>,
}

/// Settings for the banded grid around the unit-scale desingularized cusp.
#[derive(Clone, Debug)]
pub struct CuspBandConfig {
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    /// Predicate radius in multiples of `h`: a grid point is seeded into the band when
    /// it lies in the admissible tube and `|x - cp(x)| <= radius * h`.
    pub radius: f64,
    /// Parameter samples whose stencils must be in the band.
    pub thetas: Vec<f64>,
}

impl CuspBandConfig {
    pub fn new(h: f64) -> Self {
        Self {
            bounds: vec![(-0.5, 1.5), (-1.0, 1.0), (-1.0, 1.0)],
            h,
            radius: 2.0,
            thetas: crate::spectral::theta_samples(crate::spectral::DEFAULT_THETA_SAMPLES),
        }
    }
}

pub fn cusp_geometry(cfg: &CuspBandConfig) -> Result<CuspGeometry> {
    let entry = catalogue("cusp", 1.0)?;
    let cp = TwoStageCp::new(entry.system().clone(), DescentConfig::for_mesh(cfg.h))?;
    let spec = GridSpec::new(&cfg.bounds, cfg.h)?;
    let param = entry.parametrization();
    let spacing = cfg.h / 4.0;
    let samples = variety_samples(param.as_ref(), spacing);
    let radius = cfg.radius * cfg.h;
    let candidates = candidates_near(&spec, &samples, radius, spacing);
    let sys = entry.system().clone();
    let predicate = move |x: &[f64], r: &crate::closest_point::CpResult| r.distance <= radius && in_band(&sys, x);
    let extra_targets = cfg.thetas.iter().map(|&t| Parametrization::point(param.as_ref(), &[t])).collect();
    let grid = build_band(BandRequest { spec, cp: &cp, candidates, predicate: &predicate, extra_targets })?;
    Ok(CuspGeometry { entry, cp, grid, thetas: cfg.thetas.clone() })
}

impl CuspGeometry {
    pub fn assemble(&self, eps: f64, mu: f64) -> Result<OperatorSet> {
        assemble(&self.grid, self.cp.system(), eps, mu)
    }

    /// Extends `u0(x, y)` from the curve to the band.
    pub fn initial_state<F: Fn(f64, f64) -> f64>(&self, u0: F) -> Vec<f64> {
        initial_state(&self.grid, u0)
    }

    pub fn sample(&self, w: &[f64]) -> Result<Vec<f64>> {
        let curve = self.entry.curve().expect("cusp is a curve");
        sample_on_curve(&self.grid, w, curve.as_ref(), &self.thetas)
    }
}

/// Uniform samples of `[-pi, pi)`, re-exported for callers that only need the solver.
pub fn default_thetas() -> Vec<f64> {
    (0..crate::spectral::DEFAULT_THETA_SAMPLES)
        .map(|k| -PI + 2.0 * PI * k as f64 / crate::spectral::DEFAULT_THETA_SAMPLES as f64)
        .collect()
}
