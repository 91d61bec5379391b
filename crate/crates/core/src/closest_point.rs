//! Closest point maps onto smooth varieties.
//!
//! Two constructions are provided: a two-stage gradient-flow map for curves cut out
//! by two equations in `R^3`, and a Euclidean nearest-point map driven by an
//! explicit parametrization (used for the surface in `R^5`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::varieties::{ImplicitSystem, Parametrization};

/// Integrator settings for the two-stage construction.
#[derive(Clone, Copy, Debug)]
pub struct DescentConfig {
    /// Initial spatial step length; refined by step doubling.
    pub step: f64,
    /// Accuracy target for the integrated end point.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { step: 0.025, tol: 1e-12, max_steps: 100_000 }
    }
}

impl DescentConfig {
    pub fn for_mesh(h: f64) -> Self {
        Self { step: h / 4.0, ..Self::default() }
    }
}

/// A projected point with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct CpResult {
    pub point: Vec<f64>,
    pub converged: bool,
    /// Residual of each defining polynomial at `point`.
    pub residuals: Vec<f64>,
    /// `|x - point|`.
    pub distance: f64,
    /// Parameter value of `point` when the map knows it.
    pub param: Option<Vec<f64>>,
}

/// A retraction of a neighbourhood onto a variety.
pub trait ClosestPoint: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn system(&self) -> &ImplicitSystem;
    fn project(&self, x: &[f64]) -> Result<CpResult>;

    /// Projects many points in parallel, preserving order.
    fn project_all(&self, xs: &[Vec<f64>]) -> Vec<Result<CpResult>> {
        xs.par_iter().map(|x| self.project(x)).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Minimum-norm Newton iteration `x <- x - J^+ F(x)` onto the zero set of `sys`.
fn newton_polish(sys: &ImplicitSystem, x: &mut [f64], iters: usize) -> Result<()> {
    for _ in 0..iters {
        let f = DVector::from_vec(sys.eval(x)?);
        if f.amax() < 1e-15 {
            break;
        }
        let j = sys.jacobian(x)?;
        let jjt = &j * j.transpose();
        let Some(y) = jjt.lu().solve(&f) else {
            return Err(Error::SingularPoint(format!("rank-deficient Jacobian at {x:?}")));
        };
        let dx = j.transpose() * y;
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi -= d;
        }
    }
    Ok(())
}

/// Two-stage descent: flow along `grad psi` to `psi = 0`, then along the surface
/// gradient of `phi` within `{psi = 0}` to `phi = 0`.
///
/// Both flows are integrated with RK4 using the level value as the independent
/// variable, `dx/dl = g / |g|^2`, so the target level is reached exactly at the end of
/// the interval and no event location is needed.
#[derive(Clone, Debug)]
pub struct TwoStageCp {
    system: ImplicitSystem,
    cfg: DescentConfig,
}

/// Stage-2 gradient norm below which a point is declared non-projectable.
pub const NON_PROJECTABLE_GRAD: f64 = 1e-8;

impl TwoStageCp {
    /// `system` must consist of two equations `[phi, psi]` in `R^3`.
    pub fn new(system: ImplicitSystem, cfg: DescentConfig) -> Result<Self> {
        check_dim(3, system.ambient_dim())?;
        check_dim(2, system.codim())?;
        if !(cfg.step > 0.0 && cfg.tol > 0.0 && cfg.max_steps > 0) {
            return Err(Error::Config("descent step, tolerance and step budget must be positive".into()));
        }
        Ok(Self { system, cfg })
    }

    pub fn config(&self) -> &DescentConfig {
        &self.cfg
    }

    fn grads(&self, x: &[f64]) -> ([f64; 3], [f64; 3]) {
        let j = self.system.jacobian(x).expect("dimension checked at construction");
        ([j[(0, 0)], j[(0, 1)], j[(0, 2)]], [j[(1, 0)], j[(1, 1)], j[(1, 2)]])
    }

    fn psi_field(&self, x: &[f64]) -> [f64; 3] {
        let (_, gp) = self.grads(x);
        let n2 = dot(&gp, &gp);
        gp.map(|v| v / n2)
    }

    /// `P_psi grad phi`, the gradient of `phi` restricted to the level sets of `psi`.
    pub fn surface_gradient(&self, x: &[f64]) -> [f64; 3] {
        let (gf, gp) = self.grads(x);
        let c = dot(&gf, &gp) / dot(&gp, &gp);
        [gf[0] - c * gp[0], gf[1] - c * gp[1], gf[2] - c * gp[2]]
    }

    fn phi_field(&self, x: &[f64]) -> [f64; 3] {
        let g = self.surface_gradient(x);
        let n2 = dot(&g, &g);
        g.map(|v| v / n2)
    }

    fn psi_correct(&self, x: &mut [f64; 3]) {
        let psi = self.system.polys()[1].eval(x);
        let f = self.psi_field(x);
        for i in 0..3 {
            x[i] -= psi * f[i];
        }
    }

    fn rk4<F>(&self, x0: [f64; 3], dl: f64, steps: usize, field: F, reproject: bool) -> Option<[f64; 3]>
    where
        F: Fn(&[f64]) -> [f64; 3],
    {
        let hl = dl / steps as f64;
        let mut x = x0;
        let add = |x: &[f64; 3], k: &[f64; 3], s: f64| [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]];
        for _ in 0..steps {
            let k1 = field(&x);
            let k2 = field(&add(&x, &k1, 0.5 * hl));
            let k3 = field(&add(&x, &k2, 0.5 * hl));
            let k4 = field(&add(&x, &k3, hl));
            for i in 0..3 {
                x[i] += hl / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if reproject {
                self.psi_correct(&mut x);
            }
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        Some(x)
    }

    /// Integrates one stage with step doubling until successive results agree to `tol`.
    fn stage<F>(&self, x0: [f64; 3], level: f64, grad_norm: f64, field: F, reproject: bool) -> Result<[f64; 3]>
    where
        F: Fn(&[f64]) -> [f64; 3] + Copy,
    {
        if level == 0.0 {
            return Ok(x0);
        }
        let travel = level.abs() / grad_norm.max(1e-300);
        let mut n = ((travel / self.cfg.step).ceil() as usize).max(4);
        let mut prev = self.rk4(x0, -level, n, field, reproject);
        loop {
            n *= 2;
            if n > self.cfg.max_steps {
                return Err(Error::NonConvergence(format!(
                    "descent from {x0:?} needs more than {} steps",
                    self.cfg.max_steps
                )));
            }
            let next = self.rk4(x0, -level, n, field, reproject);
            if let (Some(a), Some(b)) = (prev, next) {
                if dist(&a, &b) < self.cfg.tol {
                    return Ok(b);
                }
            }
            prev = next;
        }
    }
}

impl ClosestPoint for TwoStageCp {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn system(&self) -> &ImplicitSystem {
        &self.system
    }

    fn project(&self, x: &[f64]) -> Result<CpResult> {
        check_dim(3, x.len())?;
        let x0 = [x[0], x[1], x[2]];
        let psi0 = self.system.polys()[1].eval(&x0);
        let (_, gp) = self.grads(&x0);
        let mut xbar = self.stage(x0, psi0, dot(&gp, &gp).sqrt(), |p| self.psi_field(p), false)?;
        // land exactly on psi = 0 before the constrained flow
        for _ in 0..3 {
            self.psi_correct(&mut xbar);
        }
        let g = self.surface_gradient(&xbar);
        let gnorm = dot(&g, &g).sqrt();
        let phi0 = self.system.polys()[0].eval(&xbar);
        if gnorm < NON_PROJECTABLE_GRAD {
            if phi0.abs() < 1e-14 {
                return self.finish(x, xbar.to_vec());
            }
            return Err(Error::NonProjectable(format!(
                "constrained gradient vanishes at {xbar:?} (|g| = {gnorm:.2e})"
            )));
        }
        let end = self.stage(xbar, phi0, gnorm, |p| self.phi_field(p), true)?;
        self.finish(x, end.to_vec())
    }
}

impl TwoStageCp {
    fn finish(&self, x: &[f64], mut p: Vec<f64>) -> Result<CpResult> {
        newton_polish(&self.system, &mut p, 4)?;
        let residuals = self.system.eval(&p)?;
        let converged = residuals.iter().all(|r| r.abs() < 10.0 * self.cfg.tol);
        Ok(CpResult { distance: dist(x, &p), point: p, converged, residuals, param: None })
    }
}

/// Euclidean nearest point on a parametrized variety by multistart damped Newton.
pub struct NearestParamCp {
    system: ImplicitSystem,
    param: Arc<dyn Parametrization>,
    lattice: Vec<(Vec<f64>, Vec<f64>)>,
    newton_starts: usize,
}

impl std::fmt::Debug for NearestParamCp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NearestParamCp")
            .field("lattice", &self.lattice.len())
            .field("newton_starts", &self.newton_starts)
            .finish()
    }
}

/// Seeds per parameter direction when none is configured.
pub const DEFAULT_MULTISTART: usize = 32;

impl NearestParamCp {
    /// `multistart` seeds per parameter; Newton runs from the `newton_starts` nearest seeds.
    pub fn new(system: ImplicitSystem, param: Arc<dyn Parametrization>, multistart: usize, newton_starts: usize) -> Result<Self> {
        check_dim(system.ambient_dim(), param.ambient_dim())?;
        if multistart == 0 || newton_starts == 0 {
            return Err(Error::Config("multistart counts must be positive".into()));
        }
        let dom = param.domain();
        let axis = |k: usize| -> Vec<f64> {
            let (lo, hi) = dom[k];
            (0..multistart).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / multistart as f64).collect()
        };
        let lattice: Vec<Vec<f64>> = match param.param_dim() {
            1 => axis(0).into_iter().map(|t| vec![t]).collect(),
            2 => {
                let (a0, a1) = (axis(0), axis(1));
                a0.iter().flat_map(|&t| a1.iter().map(move |&a| vec![t, a])).collect()
            }
            d => return Err(Error::Config(format!("unsupported parameter dimension {d}"))),
        };
        let lattice = lattice.into_iter().map(|u| (param.point(&u), u)).collect();
        Ok(Self { system, param, lattice, newton_starts })
    }

    pub fn parametrization(&self) -> &Arc<dyn Parametrization> {
        &self.param
    }

    /// Levenberg–Marquardt-damped Newton on `|x - p(u)|^2 / 2`. Returns the parameter
    /// and squared distance.
    fn descend(&self, x: &[f64], mut u: Vec<f64>) -> Option<(Vec<f64>, f64)> {
        let d = u.len();
        let objective = |u: &[f64]| -> f64 {
            let p = self.param.point(u);
            p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let mut f = objective(&u);
        let mut lambda = 1e-10;
        for _ in 0..200 {
            let p = self.param.point(&u);
            let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            let t = self.param.tangents(&u);
            let s = self.param.second(&u);
            let grad = DVector::from_fn(d, |k, _| -dot(&r, &t[k]));
            let hess = DMatrix::from_fn(d, d, |k, l| {
                let idx = if d == 1 { 0 } else { k + l };
                dot(&t[k], &t[l]) - dot(&r, &s[idx])
            });
            let scale = hess.diagonal().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            let mut accepted = false;
            for _ in 0..60 {
                let mut h = hess.clone();
                for k in 0..d {
                    h[(k, k)] += lambda * scale;
                }
                let Some(step) = h.cholesky().map(|c| c.solve(&grad)) else {
                    lambda = (lambda * 10.0).max(1e-8);
                    continue;
                };
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
                let ft = objective(&trial);
                if ft <= f {
                    let small = step.amax() < 1e-15 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                    u = trial;
                    let df = f - ft;
                    f = ft;
                    lambda = (lambda * 0.1).max(1e-14);
                    accepted = true;
                    if small || df <= 1e-32 {
                        return Some((u, f));
                    }
                    break;
                }
                lambda = (lambda * 10.0).max(1e-8);
            }
            if !accepted {
                // no decrease possible: stationary to rounding
                let g = grad.amax();
                return (g < 1e-7).then_some((u, f));
            }
        }
        Some((u, f))
    }

    /// Nearest parameter value to `x` (global over the seed lattice).
    pub fn nearest_param(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.system.ambient_dim(), x.len())?;
        let mut scored: Vec<(f64, usize)> = self
            .lattice
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        let k = self.newton_starts.min(scored.len());
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        scored.truncate(k);
        let best = scored
            .iter()
            .filter_map(|&(_, i)| self.descend(x, self.lattice[i].1.clone()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        best.ok_or_else(|| Error::NonConvergence(format!("all {k} Newton starts failed for {x:?}")))
    }
}

impl ClosestPoint for NearestParamCp {
    fn ambient_dim(&self) -> usize {
        self.system.ambient_dim()
    }

    fn system(&self) -> &ImplicitSystem {
        &self.system
    }

    fn project(&self, x: &[f64]) -> Result<CpResult> {
        let (u, d2) = self.nearest_param(x)?;
        let point = self.param.point(&u);
        let residuals = self.system.eval(&point)?;
        let converged = residuals.iter().all(|r| r.abs() < 1e-10);
        Ok(CpResult { point, converged, residuals, distance: d2.sqrt(), param: Some(u) })
    }
}

/// The tubular band `sqrt(5 phi^2 + psi^2) < 1/2` around a curve given by `[phi, psi]`.
pub fn in_band(system: &ImplicitSystem, x: &[f64]) -> bool {
    let f = &system.polys()[0];
    let g = &system.polys()[1];
    let (p, q) = (f.eval(x), g.eval(x));
    (5.0 * p * p + q * q).sqrt() < 0.5
}

/// Central finite-difference Jacobian of a closest point map (step `1e-5`).
pub fn jacobian_check(cp: &dyn ClosestPoint, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = cp.ambient_dim();
    check_dim(n, x.len())?;
    let h = 1e-5;
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (a, b) = (cp.project(&xp)?.point, cp.project(&xm)?.point);
        for i in 0..n {
            jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Unit vector spanning the kernel of the Jacobian of a curve system at `x`.
///
/// The sign is chosen so the vector has positive inner product with `reference`
/// (typically the parametrization derivative at the nearest parameter).
pub fn unit_tangent(system: &ImplicitSystem, x: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    let n = system.ambient_dim();
    if system.codim() + 1 != n {
        return Err(Error::Config("unit tangents are defined for curves only".into()));
    }
    let jac = system.jacobian(x)?;
    if crate::varieties::numerical_rank(&jac) < system.codim() {
        return Err(Error::SingularPoint(format!("no tangent line at {x:?}")));
    }
    // kernel of the m x n Jacobian: last right singular vector of the padded square matrix
    let mut square = DMatrix::zeros(n, n);
    square.rows_mut(0, system.codim()).copy_from(&jac);
    let svd = square.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let mut t: Vec<f64> = vt.row(imin).iter().copied().collect();
    let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if dot(&t, reference) < 0.0 { -1.0 } else { 1.0 };
    t.iter_mut().for_each(|v| *v *= sign / norm);
    Ok(t)
}

/// `1 / |H_eps t|` for a unit tangent `t`, where `H_eps` scales coordinates past
/// `base_dim` by `eps`.
pub fn beta_from_tangent(tangent: &[f64], eps: f64, base_dim: usize) -> f64 {
    let s: f64 = tangent
        .iter()
        .enumerate()
        .map(|(i, v)| if i < base_dim { v * v } else { eps * eps * v * v })
        .sum();
    1.0 / s.sqrt()
}

/// `beta_eps(cp(x))` for a curve closest point map.
pub fn beta_coeff(cp: &dyn ClosestPoint, x: &[f64], eps: f64, base_dim: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let p = cp.project(x)?.point;
    let t = unit_tangent(cp.system(), &p, &vec![0.0; p.len()])?;
    Ok(beta_from_tangent(&t, eps, base_dim))
}

/// Diagnostic CSV: `x1..xn,cp1..cpn,res_phi,res_psi[,res_3..],converged`.
pub fn diagnostics_csv(rows: &[(Vec<f64>, CpResult)]) -> String {
    let n = rows.first().map_or(0, |r| r.0.len());
    let m = rows.first().map_or(2, |r| r.1.residuals.len());
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend((1..=n).map(|i| format!("cp{i}")));
    for k in 0..m {
        header.push(match k {
            0 => "res_phi".into(),
            1 => "res_psi".into(),
            _ => format!("res_{}", k + 1),
        });
    }
    header.push("converged".into());
    let mut out = header.join(",");
    out.push('\n');
    for (x, r) in rows {
        let mut fields: Vec<String> = x.iter().chain(&r.point).map(|v| format!("{v:e}")).collect();
        fields.extend(r.residuals.iter().map(|v| format!("{v:e}")));
        fields.push(r.converged.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
