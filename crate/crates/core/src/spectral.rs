//! Truncated Fourier reference solutions of `u_t = u_ss - mu^2 u` on closed curves.
//!
//! With arclength `s = a(theta)` and length `L`, the periodic heat kernel gives
//! `u(t, theta) = exp(-mu^2 t) sum_m c_m exp(-(2 pi m / L)^2 t) exp(i 2 pi m a(theta) / L)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_vec, QuadConfig};
use crate::varieties::{catalogue, CurveParam};

pub const DEFAULT_QUAD_TOL: f64 = 1e-12;
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;
pub const DEFAULT_THETA_SAMPLES: usize = 2048;
const MIN_INTERVALS: usize = 4096;
const MAX_SPEED: f64 = 1e12;

/// `a(theta)`: arclength from `-pi`, stored as a cubic Hermite table on adaptively refined nodes.
pub struct ArclengthFn {
    curve: Arc<dyn CurveParam>,
    nodes: Vec<f64>,
    values: Vec<f64>,
    speeds: Vec<f64>,
    length: f64,
    tol: f64,
}

impl std::fmt::Debug for ArclengthFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArclengthFn")
            .field("nodes", &self.nodes.len())
            .field("length", &self.length)
            .field("tol", &self.tol)
            .finish()
    }
}

fn checked_speed(curve: &dyn CurveParam, t: f64) -> Result<f64> {
    let s = curve.speed(t);
    if !s.is_finite() || s > MAX_SPEED {
        return Err(Error::Domain(format!("parametrization derivative is unbounded near theta = {t}")));
    }
    Ok(s)
}

fn hermite(t0: f64, t1: f64, a0: f64, a1: f64, s0: f64, s1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let u = (t - t0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * a0 + h10 * h * s0 + h01 * a1 + h11 * h * s1
}

/// Builds the arclength table of `curve` to absolute tolerance `tol`.
pub fn arclength(curve: Arc<dyn CurveParam>, tol: f64) -> Result<ArclengthFn> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = MIN_INTERVALS;
    let seg_tol = tol / n as f64;
    let cfg = QuadConfig { abs_tol: seg_tol, max_intervals: 4096 };
    let c = curve.as_ref();
    let integral = |a: f64, b: f64| -> Result<f64> {
        integrate(|t| c.speed(t), a, b, cfg)
            .map(|r| r.value)
            .map_err(|e| Error::Domain(format!("arclength quadrature on [{a}, {b}] failed: {e}")))
    };

    let mut nodes = vec![-PI];
    let mut speeds = vec![checked_speed(c, -PI)?];
    let mut values = vec![0.0];
    // Kahan-compensated running sum of segment integrals
    let mut comp = 0.0;
    for k in 0..n {
        let t0 = -PI + 2.0 * PI * k as f64 / n as f64;
        let t1 = if k + 1 == n { PI } else { -PI + 2.0 * PI * (k + 1) as f64 / n as f64 };
        // stack of pending subintervals, processed left to right
        let mut pending = vec![(t0, t1, 0u32)];
        while let Some((a, b, depth)) = pending.pop() {
            let a0 = *values.last().unwrap();
            let s0 = *speeds.last().unwrap();
            let s1 = checked_speed(c, b)?;
            let seg = integral(a, b)?;
            let y = seg - comp;
            let a1 = a0 + y;
            let mid = 0.5 * (a + b);
            let exact_mid = a0 + integral(a, mid)?;
            let approx_mid = hermite(a, b, a0, a1, s0, s1, mid);
            if (exact_mid - approx_mid).abs() > tol && depth < 40 {
                pending.push((mid, b, depth + 1));
                pending.push((a, mid, depth + 1));
                continue;
            }
            comp = (a1 - a0) - y;
            nodes.push(b);
            speeds.push(s1);
            values.push(a1);
        }
    }
    let length = *values.last().unwrap();
    if !(length > 0.0) {
        return Err(Error::Domain("curve has zero length".into()));
    }
    Ok(ArclengthFn { curve, nodes, values, speeds, length, tol })
}

impl ArclengthFn {
    /// `a(theta)`, extended quasi-periodically: `a(theta + 2 pi) = a(theta) + L`.
    pub fn eval(&self, theta: f64) -> f64 {
        let k = ((theta + PI) / (2.0 * PI)).floor();
        let t = theta - 2.0 * PI * k;
        let i = self.nodes.partition_point(|&x| x <= t).clamp(1, self.nodes.len() - 1) - 1;
        k * self.length
            + hermite(
                self.nodes[i],
                self.nodes[i + 1],
                self.values[i],
                self.values[i + 1],
                self.speeds[i],
                self.speeds[i + 1],
                t,
            )
    }

    /// `a'(theta) = |gamma'(theta)|`, evaluated from the analytic derivative.
    pub fn speed(&self, theta: f64) -> f64 {
        self.curve.speed(theta)
    }

    /// `L = a(pi)`.
    pub fn total_length(&self) -> f64 {
        self.length
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn curve(&self) -> &Arc<dyn CurveParam> {
        &self.curve
    }
}

/// `2B sqrt(pi) / (2 k sqrt t) * erfc(k M sqrt t)` with `k = 2 pi / L`: an upper bound
/// for `2B sum_{m > M} exp(-k^2 m^2 t)` by the integral test.
pub fn truncation_tail_bound(length: f64, t: f64, amplitude: f64, modes: usize) -> f64 {
    let k = 2.0 * PI / length;
    let st = t.sqrt();
    2.0 * amplitude * PI.sqrt() / (2.0 * k * st) * erfc(k * modes as f64 * st)
}

/// Smallest mode bound `M` whose tail bound is at most `tail_tol`.
pub fn choose_truncation(length: f64, t: f64, amplitude: f64, tail_tol: f64) -> Result<usize> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("truncation needs t > 0, got {t}")));
    }
    if !(length > 0.0) || !(tail_tol > 0.0) {
        return Err(Error::Domain("length and tail tolerance must be positive".into()));
    }
    let bound = |m: usize| truncation_tail_bound(length, t, amplitude.abs(), m);
    if bound(0) <= tail_tol {
        return Ok(0);
    }
    let mut hi = 1usize;
    while bound(hi) > tail_tol {
        hi *= 2;
        if hi > 1 << 24 {
            return Err(Error::Domain(format!("no mode bound below 2^24 reaches {tail_tol:e} at t = {t}")));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if bound(mid) <= tail_tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Coefficients `c_m`, `|m| <= M`, of the series solution on a curve.
#[derive(Clone, Debug)]
pub struct FourierSolution {
    coeffs: Vec<Complex64>,
    modes: usize,
    length: f64,
    mu: f64,
    alen: Arc<ArclengthFn>,
}

/// `c_m = (1/L) int u0(theta) exp(-i 2 pi m a(theta) / L) a'(theta) dtheta` for `|m| <= modes`.
///
/// Since `u0` is real, only `m >= 0` is integrated and `c_{-m} = conj(c_m)`.
pub fn fourier_coefficients<F>(u0: F, alen: Arc<ArclengthFn>, modes: usize, mu: f64) -> Result<FourierSolution>
where
    F: Fn(f64) -> f64,
{
    let length = alen.total_length();
    let k = 2.0 * PI / length;
    let dim = 2 * (modes + 1);
    let cfg = QuadConfig { abs_tol: DEFAULT_QUAD_TOL, max_intervals: 500_000 };
    let integrand = |theta: f64, out: &mut [f64]| {
        let weight = u0(theta) * alen.speed(theta) / length;
        let phase = -k * alen.eval(theta);
        let step = Complex64::from_polar(1.0, phase);
        let mut z = Complex64::new(1.0, 0.0);
        for m in 0..=modes {
            if m % 64 == 0 {
                z = Complex64::from_polar(1.0, phase * m as f64);
            }
            out[2 * m] = weight * z.re;
            out[2 * m + 1] = weight * z.im;
            z *= step;
        }
    };
    let r = integrate_vec(integrand, dim, -PI, PI, cfg).map_err(|e| match e {
        Error::Quadrature(msg) => Error::Quadrature(format!("Fourier coefficients up to m = {modes}: {msg}")),
        other => other,
    })?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * modes + 1];
    for m in 0..=modes {
        let c = Complex64::new(r.value[2 * m], r.value[2 * m + 1]);
        coeffs[modes + m] = c;
        coeffs[modes - m] = c.conj();
    }
    Ok(FourierSolution { coeffs, modes, length, mu, alen })
}

impl FourierSolution {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn arclength(&self) -> &Arc<ArclengthFn> {
        &self.alen
    }

    /// `c_m` for `|m| <= M`.
    pub fn coefficient(&self, m: i64) -> Complex64 {
        assert!(m.unsigned_abs() as usize <= self.modes, "mode {m} beyond bound {}", self.modes);
        self.coeffs[(self.modes as i64 + m) as usize]
    }

    /// Real part of the truncated series at `(t, theta)`.
    pub fn evaluate(&self, t: f64, theta: f64) -> f64 {
        let k = 2.0 * PI / self.length;
        let phase = k * self.alen.eval(theta);
        let mut sum = self.coeffs[self.modes];
        for m in 1..=self.modes {
            let damp = (-(k * m as f64).powi(2) * t).exp();
            if damp == 0.0 {
                break;
            }
            let z = Complex64::from_polar(damp, phase * m as f64);
            sum += self.coeffs[self.modes + m] * z + self.coeffs[self.modes - m] * z.conj();
        }
        debug_assert!(sum.im.abs() < 1e-10, "imaginary residue {}", sum.im);
        (-self.mu * self.mu * t).exp() * sum.re
    }

    pub fn evaluate_many(&self, t: f64, thetas: &[f64]) -> Vec<f64> {
        thetas.iter().map(|&th| self.evaluate(t, th)).collect()
    }
}

/// `n` uniform samples of `[-pi, pi)`.
pub fn theta_samples(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// Largest sampled magnitude of `u0`, used as the coefficient bound in the tail estimate.
pub fn sampled_amplitude<F: Fn(f64) -> f64>(u0: F) -> f64 {
    theta_samples(8192).into_iter().map(|t| u0(t).abs()).fold(0.0, f64::max)
}

/// Series solution on `curve` with the mode bound chosen for accuracy at all times `>= t_min`.
pub fn solve_on_curve<F>(curve: Arc<dyn CurveParam>, u0: F, mu: f64, t_min: f64, tail_tol: f64) -> Result<FourierSolution>
where
    F: Fn(f64) -> f64,
{
    let alen = Arc::new(arclength(curve, DEFAULT_QUAD_TOL)?);
    let modes = choose_truncation(alen.total_length(), t_min, sampled_amplitude(&u0), tail_tol)?;
    fourier_coefficients(u0, alen, modes, mu)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonRecord {
    pub eps: f64,
    pub t_final: f64,
    pub linf_diff: f64,
}

/// Differences between regularized and reference solutions as `eps -> 0`, with a log-log fit.
#[derive(Clone, Debug)]
pub struct EpsilonStudyReport {
    pub records: Vec<EpsilonRecord>,
    pub slope: f64,
    pub intercept: f64,
    /// Number of largest-`eps` records left out of the fit.
    pub excluded: usize,
}

impl EpsilonStudyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,t_final,linf_diff\n");
        for r in &self.records {
            s.push_str(&format!("{:e},{:e},{:e}\n", r.eps, r.t_final, r.linf_diff));
        }
        s
    }

    /// Slope of the fit over the `count` largest-`eps` records only.
    pub fn leading_slope(&self, count: usize) -> Result<f64> {
        let pts: Vec<_> = self.records.iter().take(count).map(|r| (r.eps, r.linf_diff)).collect();
        loglog_fit(&pts).map(|(s, _)| s)
    }
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Study(format!("need at least 3 points to fit, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Study("log-log fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Study("degenerate abscissae in log-log fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    Ok((slope, (sy - slope * sx) / n))
}

/// Settings for [`epsilon_study`].
#[derive(Clone, Debug)]
pub struct EpsilonStudy {
    pub variety: String,
    pub mu: f64,
    pub t_final: f64,
    pub eps: Vec<f64>,
    pub exclude_first: usize,
    pub samples: usize,
    pub tail_tol: f64,
}

impl Default for EpsilonStudy {
    fn default() -> Self {
        Self {
            variety: "cusp".into(),
            mu: 1.0,
            t_final: 0.1,
            eps: (1..=14).map(|j| 2f64.powi(-j)).collect(),
            exclude_first: 6,
            samples: DEFAULT_THETA_SAMPLES,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

/// Sup-norm distance over `theta` between the regularized solutions and the `eps = 0` reference.
pub fn epsilon_study<F>(study: &EpsilonStudy, u0: F) -> Result<EpsilonStudyReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if study.eps.windows(2).any(|w| !(w[0] > w[1])) || study.eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Study("eps list must be positive and strictly decreasing".into()));
    }
    if study.eps.len() < study.exclude_first + 3 {
        return Err(Error::Study(format!(
            "{} eps values leave fewer than 3 points after excluding {}",
            study.eps.len(),
            study.exclude_first
        )));
    }
    let thetas = theta_samples(study.samples);
    let solve = |eps: f64| -> Result<Vec<f64>> {
        let entry = catalogue(&study.variety, eps)?;
        let curve = entry
            .curve()
            .ok_or_else(|| Error::Study(format!("{} is not a curve", study.variety)))?;
        let sol = solve_on_curve(curve, &u0, study.mu, study.t_final, study.tail_tol)?;
        Ok(sol.evaluate_many(study.t_final, &thetas))
    };
    let reference = solve(0.0)?;
    let diffs: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = study
            .eps
            .iter()
            .map(|&eps| {
                let solve = &solve;
                let reference = &reference;
                scope.spawn(move || {
                    let v = solve(eps)?;
                    Ok(v.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("study worker panicked")).collect()
    });
    let mut records = Vec::with_capacity(diffs.len());
    for (&eps, d) in study.eps.iter().zip(diffs) {
        records.push(EpsilonRecord { eps, t_final: study.t_final, linf_diff: d? });
    }
    let window: Vec<_> = records[study.exclude_first..].iter().map(|r| (r.eps, r.linf_diff)).collect();
    let (slope, intercept) = loglog_fit(&window)?;
    Ok(EpsilonStudyReport { records, slope, intercept, excluded: study.exclude_first })
}
