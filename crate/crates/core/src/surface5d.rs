//! Reaction-diffusion on the desingularized surface of revolution in `R^5`.
//!
//! The unknown lives on the unit-scale lift `S~` and the `eps`-dependence enters through
//! the matrix coefficient `C_eps = H P (H^-2 - H^-2 N (N^T H^-2 N)^-1 N^T H^-2)`, giving
//! `w_t = trace(C^T D(C grad w)) - mu^2 w`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::closest_point::{ClosestPoint, CpResult, NearestParamCp, DEFAULT_MULTISTART};
use crate::cpm::{step_plan, timestep_size, LogRow, Scheme};
use crate::error::{Error, Result};
use crate::grid::{build_band, candidates_near, diff_matrix, variety_samples, BandRequest, BandedGrid, GridSpec, TensorInterp};
use crate::ic;
use crate::sparse::CsrMatrix;
use crate::varieties::{catalogue, DeformationMatrix, ImplicitSystem, Parametrization, VarietyEntry};

/// The coefficient matrix at a regular point `x` of the unit-scale surface.
pub fn build_ceps(system: &ImplicitSystem, x: &[f64], h: &DeformationMatrix) -> Result<DMatrix<f64>> {
    let n = system.ambient_dim();
    if h.dim() != n || !h.is_invertible() {
        return Err(Error::Config("deformation must be invertible and match the ambient dimension".into()));
    }
    let p = system.tangent_projector(x)?;
    let normals = system.jacobian(x)?.transpose();
    let hinv2: Vec<f64> = h.diag().iter().map(|d| 1.0 / (d * d)).collect();
    let hinv2_n = DMatrix::from_fn(n, normals.ncols(), |i, j| hinv2[i] * normals[(i, j)]);
    let gram = normals.transpose() * &hinv2_n;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::SingularPoint(format!("N^T H^-2 N is singular at {x:?}")))?;
    let mut k = -(&hinv2_n * gram_inv * hinv2_n.transpose());
    for i in 0..n {
        k[(i, i)] += hinv2[i];
    }
    let hp = DMatrix::from_fn(n, n, |i, j| h.diag()[i] * p[(i, j)]);
    Ok(hp * k)
}

/// `C_eps` at the closest point of every active grid point, row-major per point.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    n: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn build(grid: &BandedGrid, system: &ImplicitSystem, h: &DeformationMatrix) -> Result<Self> {
        let n = system.ambient_dim();
        let per: Vec<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let c = build_ceps(system, grid.cp(i), h)?;
                Ok((0..n * n).map(|k| c[(k / n, k % n)]).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, values: per.concat() })
    }

    pub fn at(&self, point: usize, i: usize, j: usize) -> f64 {
        self.values[point * self.n * self.n + i * self.n + j]
    }
}

/// Composite operator `L w = sum_ij C_ij D_j E (sum_k C_ik D_k w)` on a banded grid.
#[derive(Clone, Debug)]
pub struct SurfaceOperator {
    pub e: TensorInterp,
    pub d: Vec<CsrMatrix>,
    pub coeff: CoefficientField,
    pub mu: f64,
    pub eps: f64,
    n_core: usize,
}

/// Assembles the operator for the deformation `H = diag(1, .., 1, eps, .., eps)` on a band
/// around the unit-scale variety described by `system`.
pub fn assemble_surface(grid: &BandedGrid, system: &ImplicitSystem, h: &DeformationMatrix, mu: f64) -> Result<SurfaceOperator> {
    let eps = h.eps();
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let coeff = CoefficientField::build(grid, system, h)?;
    let e = TensorInterp::new(grid, &grid.cp_targets())?;
    let d = (0..system.ambient_dim()).map(|a| diff_matrix(grid, a)).collect::<Result<Vec<_>>>()?;
    Ok(SurfaceOperator { e, d, coeff, mu, eps, n_core: grid.n_core() })
}

impl SurfaceOperator {
    pub fn len(&self) -> usize {
        self.e.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `L w` (zero on ghost points).
    pub fn apply_l(&self, w: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let len = self.len();
        let dw: Vec<Vec<f64>> = self.d.iter().map(|d| d.matvec(w)).collect();
        let mut out = vec![0.0; len];
        for i in 0..n {
            let g: Vec<f64> = (0..len)
                .map(|p| if p < self.n_core { (0..n).map(|k| self.coeff.at(p, i, k) * dw[k][p]).sum() } else { 0.0 })
                .collect();
            let eg = self.e.matvec(&g);
            for j in 0..n {
                let deg = self.d[j].matvec(&eg);
                out.par_iter_mut().enumerate().take(self.n_core).for_each(|(p, o)| {
                    *o += self.coeff.at(p, i, j) * deg[p];
                });
            }
        }
        out
    }

    /// `w <- E (w + tau (E L w - mu^2 w))`.
    pub fn explicit_step(&self, w: &[f64], tau: f64) -> Result<Vec<f64>> {
        let elw = self.e.matvec(&self.apply_l(w));
        let m2 = self.mu * self.mu;
        let inner: Vec<f64> = w.iter().zip(&elw).map(|(a, b)| a + tau * (b - m2 * a)).collect();
        let next = self.e.matvec(&inner);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp(format!("non-finite state in the surface solver with tau = {tau:.3e}")));
        }
        Ok(next)
    }
}

/// Unit-scale surface geometry with its band.
pub struct SurfaceGeometry {
    pub entry: VarietyEntry,
    pub cp: Arc<NearestParamCp>,
    pub grid: BandedGrid,
}

/// Band settings for the surface.
#[derive(Clone, Debug)]
pub struct SurfaceBandConfig {
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    /// Seed the band with grid points satisfying `|x - cp(x)| < radius * h`.
    pub radius: f64,
    pub extra_targets: Vec<Vec<f64>>,
}

impl Default for SurfaceBandConfig {
    fn default() -> Self {
        let mut bounds = vec![(-0.3, 1.2)];
        bounds.extend([(-0.75, 0.75); 4]);
        Self { bounds, h: 0.075, radius: 3.0, extra_targets: Vec::new() }
    }
}

pub fn surface_geometry(cfg: &SurfaceBandConfig) -> Result<SurfaceGeometry> {
    let entry = catalogue("revolution", 1.0)?;
    let param: Arc<dyn Parametrization> = entry.parametrization();
    let cp = Arc::new(NearestParamCp::new(entry.system().clone(), param.clone(), DEFAULT_MULTISTART, 4)?);
    let spec = GridSpec::new(&cfg.bounds, cfg.h)?;
    let spacing = cfg.h / 4.0;
    let radius = cfg.radius * cfg.h;
    let samples = variety_samples(param.as_ref(), spacing);
    let candidates = candidates_near(&spec, &samples, radius, spacing);
    let predicate = move |_: &[f64], r: &CpResult| r.distance < radius;
    let grid = build_band(BandRequest {
        spec,
        cp: cp.as_ref() as &dyn ClosestPoint,
        candidates,
        predicate: &predicate,
        extra_targets: cfg.extra_targets.clone(),
    })?;
    Ok(SurfaceGeometry { entry, cp, grid })
}

/// One `(theta, alpha)` sample of the demo output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub theta: f64,
    pub alpha: f64,
    pub u_initial: f64,
    pub u_final: f64,
}

#[derive(Clone, Debug)]
pub struct DemoConfig {
    pub band: SurfaceBandConfig,
    pub eps: f64,
    pub mu: f64,
    pub t_final: f64,
    pub n_theta: usize,
    pub n_alpha: usize,
    /// Samples whose base point has `|x|` below this are skipped (the pull-down divides by `x`).
    pub min_abs_x: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { band: SurfaceBandConfig::default(), eps: 0.5, mu: 1.0, t_final: 0.001, n_theta: 64, n_alpha: 32, min_abs_x: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct DemoResult {
    pub active_points: usize,
    pub total_points: u64,
    pub predicate_points: usize,
    pub tau: f64,
    pub steps: u64,
    pub log: Vec<LogRow>,
    pub samples: Vec<SurfaceSample>,
    /// `max |w(sigma(theta, alpha)) - w(sigma(theta, 0))|` over the final samples.
    pub symmetry_residual: f64,
}

impl DemoResult {
    pub fn fraction(&self) -> f64 {
        self.active_points as f64 / self.total_points as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,alpha,u_initial,u_final\n");
        for r in &self.samples {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.theta, r.alpha, r.u_initial, r.u_final));
        }
        s
    }
}

fn lattice(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// Explicit closest point run on the surface, sampled on a `(theta, alpha)` lattice.
///
/// The sample at `(theta, alpha)` pulls the solution down to the base point
/// `(x, y, z)` of the unscaled parametrization, whose lift `(x, y, z, y/x, z/x)` is
/// the unit-scale surface point at the same parameters.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoResult> {
    let base = catalogue("revolution", 0.0)?.base_parametrization();
    let lifted = catalogue("revolution", 1.0)?.parametrization();
    let mut params = Vec::new();
    for &t in &lattice(cfg.n_theta) {
        let x = Parametrization::point(base.as_ref(), &[t, 0.0])[0];
        if x.abs() < cfg.min_abs_x {
            continue;
        }
        for &a in &lattice(cfg.n_alpha) {
            params.push((t, a));
        }
    }
    let targets: Vec<Vec<f64>> = params.iter().map(|&(t, a)| Parametrization::point(lifted.as_ref(), &[t, a])).collect();
    let mut band = cfg.band.clone();
    band.extra_targets.extend(targets.iter().cloned());
    let geo = surface_geometry(&band)?;
    let ops = assemble_surface(&geo.grid, geo.entry.system(), &DeformationMatrix::new(3, 2, cfg.eps), cfg.mu)?;

    let mut w: Vec<f64> = (0..geo.grid.len()).map(|i| ic::revolution_x(geo.grid.cp(i)[0])).collect();
    let (steps, tau) = step_plan(timestep_size(Scheme::Explicit, cfg.eps, band.h), cfg.t_final);
    let ext = |w: &[f64]| {
        w[..geo.grid.n_core()].iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)))
    };
    let (mx, mn) = ext(&w);
    let mut log = vec![LogRow { step: 0, t: 0.0, max_w: mx, min_w: mn }];
    for k in 1..=steps {
        w = ops.explicit_step(&w, tau)?;
        let (mx, mn) = ext(&w);
        log.push(LogRow { step: k, t: k as f64 * tau, max_w: mx, min_w: mn });
    }

    let sampler = TensorInterp::new(&geo.grid, &targets)?;
    let finals = sampler.matvec(&w);
    let samples: Vec<SurfaceSample> = params
        .iter()
        .zip(&finals)
        .map(|(&(theta, alpha), &u_final)| {
            let x = Parametrization::point(base.as_ref(), &[theta, alpha])[0];
            SurfaceSample { theta, alpha, u_initial: ic::revolution_x(x), u_final }
        })
        .collect();
    let mut symmetry_residual = 0.0f64;
    for row in samples.chunks(cfg.n_alpha) {
        let reference = row.iter().find(|s| s.alpha == 0.0).map_or(row[0].u_final, |s| s.u_final);
        for s in row {
            symmetry_residual = symmetry_residual.max((s.u_final - reference).abs());
        }
    }
    Ok(DemoResult {
        active_points: geo.grid.len(),
        total_points: geo.grid.spec().total_points(),
        predicate_points: geo.grid.n_predicate(),
        tau,
        steps,
        log,
        samples,
        symmetry_residual,
    })
}
