//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar and vector integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Limits for the adaptive driver.
#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    /// Target bound on the summed local error estimates.
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_intervals: 200_000 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Result<Segment>
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut accumulate = |x: f64, wk: f64, wg: f64, buf: &mut [f64]| -> Result<()> {
        buf.iter_mut().for_each(|v| *v = 0.0);
        f(x, buf);
        for i in 0..dim {
            if !buf[i].is_finite() {
                return Err(Error::Quadrature(format!("integrand is not finite at {x}")));
            }
            kron[i] += wk * buf[i];
            gauss[i] += wg * buf[i];
        }
        Ok(())
    };
    accumulate(c, WGK[7], WG[3], buf)?;
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        let dx = r * XGK[j];
        accumulate(c - dx, WGK[j], wg, buf)?;
        accumulate(c + dx, WGK[j], wg, buf)?;
    }
    let mut error = 0.0f64;
    for i in 0..dim {
        kron[i] *= r;
        gauss[i] *= r;
        error = error.max((kron[i] - gauss[i]).abs());
    }
    Ok(Segment { a, b, value: kron, error })
}

/// Integrates a vector-valued `f` over `[a, b]`. The callback fills a zeroed buffer of length `dim`.
///
/// Error is measured componentwise in the max norm and summed over subintervals.
pub fn integrate_vec<F>(mut f: F, dim: usize, a: f64, b: f64, cfg: QuadConfig) -> Result<QuadResult<Vec<f64>>>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    if a == b {
        return Ok(QuadResult { value: vec![0.0; dim], error: 0.0, intervals: 0 });
    }
    let first = gk15(&mut f, a, b, dim, &mut buf)?;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while total_err > cfg.abs_tol {
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:.3e} above {:.1e} after {} subintervals on [{a}, {b}]",
                cfg.abs_tol,
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(format!(
                "interval around {mid} cannot be bisected further (error {total_err:.3e})"
            )));
        }
        let left = gk15(&mut f, worst.a, mid, dim, &mut buf)?;
        let right = gk15(&mut f, mid, worst.b, dim, &mut buf)?;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum the error to avoid drift from the incremental update.
    let intervals = heap.len();
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    let mut segs = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    for s in &segs {
        error += s.error;
        for (v, sv) in value.iter_mut().zip(&s.value) {
            *v += sv;
        }
    }
    Ok(QuadResult { value, error, intervals })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: QuadConfig) -> Result<QuadResult<f64>>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec(|x, out| out[0] = f(x), 1, a, b, cfg)?;
    Ok(QuadResult { value: r.value[0], error: r.error, intervals: r.intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, QuadConfig::default()).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn endpoint_kink() {
        // |sin| has kinks at the endpoints of [-pi, pi] and at 0
        let r = integrate(|x: f64| x.sin().abs(), -PI, PI, QuadConfig::default()).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn sqrt_singularity() {
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, QuadConfig::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vector_oscillatory() {
        let r = integrate_vec(
            |x, out| {
                for (m, o) in out.iter_mut().enumerate() {
                    *o = (m as f64 * x).cos().powi(2);
                }
            },
            40,
            -PI,
            PI,
            QuadConfig::default(),
        )
        .unwrap();
        assert!((r.value[0] - 2.0 * PI).abs() < 1e-12);
        for v in &r.value[1..] {
            assert!((v - PI).abs() < 1e-11);
        }
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate(|x| 1.0 / x, -1.0, 1.0, QuadConfig::default());
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn interval_budget_is_enforced() {
        let cfg = QuadConfig { abs_tol: 1e-14, max_intervals: 4 };
        let r = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 3.0, cfg);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
