//! Analytic parametrizations of the catalogue varieties.

use std::f64::consts::PI;

use super::catalogue::Shape;

/// A smooth map from a parameter box into `R^n` with analytic first and second derivatives.
pub trait Parametrization: Send + Sync {
    fn ambient_dim(&self) -> usize;

    /// Number of parameters (1 for curves, 2 for surfaces).
    fn param_dim(&self) -> usize;

    fn point(&self, u: &[f64]) -> Vec<f64>;

    /// One partial derivative vector per parameter.
    fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>>;

    /// Second partials in the order `(0,0)`, `(0,1)`, `(1,1)`, truncated to what the
    /// parameter dimension needs.
    fn second(&self, u: &[f64]) -> Vec<Vec<f64>>;

    /// Parameter box as `(lo, hi)` pairs. Every coordinate is `2 pi`-periodic.
    fn domain(&self) -> Vec<(f64, f64)> {
        vec![(-PI, PI); self.param_dim()]
    }
}

/// A closed parametrized curve over `[-pi, pi)`.
pub trait CurveParam: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn point(&self, theta: f64) -> Vec<f64>;
    fn deriv(&self, theta: f64) -> Vec<f64>;
    fn second_deriv(&self, theta: f64) -> Vec<f64>;

    fn speed(&self, theta: f64) -> f64 {
        self.deriv(theta).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The unit circle in the plane, used as a fixture with known length.
#[derive(Clone, Copy, Debug, Default)]
pub struct CircleParam {
    pub radius: f64,
}

impl CurveParam for CircleParam {
    fn ambient_dim(&self) -> usize {
        2
    }
    fn point(&self, t: f64) -> Vec<f64> {
        vec![self.radius * t.cos(), self.radius * t.sin()]
    }
    fn deriv(&self, t: f64) -> Vec<f64> {
        vec![-self.radius * t.sin(), self.radius * t.cos()]
    }
    fn second_deriv(&self, t: f64) -> Vec<f64> {
        vec![-self.radius * t.cos(), -self.radius * t.sin()]
    }
}

/// Parametrization of a catalogue variety, either lifted (with adjoined
/// coordinates scaled by `eps`) or projected back to the base space.
#[derive(Clone, Debug)]
pub struct VarietyParam {
    shape: Shape,
    eps: f64,
    lifted: bool,
}

impl VarietyParam {
    pub(crate) fn new(shape: Shape, eps: f64, lifted: bool) -> Self {
        Self { shape, eps, lifted }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn base_dim(&self) -> usize {
        match self.shape {
            Shape::Revolution => 3,
            _ => 2,
        }
    }

    fn full_dim(&self) -> usize {
        match self.shape {
            Shape::Cusp | Shape::Cardioid | Shape::FigureEight => 3,
            Shape::DoubleCusp => 4,
            Shape::Revolution => 5,
        }
    }

    fn truncate(&self, mut v: Vec<f64>) -> Vec<f64> {
        if !self.lifted {
            v.truncate(self.base_dim());
        }
        v
    }

    /// Point, first and second derivatives of a lifted curve.
    fn curve_jet(&self, t: f64) -> [Vec<f64>; 3] {
        let e = self.eps;
        let (s, c) = t.sin_cos();
        let (s2, c2) = (2.0 * t).sin_cos();
        match self.shape {
            Shape::Cusp => [
                vec![0.5 * (1.0 + c), 0.25 * (1.0 + c) * s, 0.5 * e * s],
                vec![-0.5 * s, 0.25 * (c + c2), 0.5 * e * c],
                vec![-0.5 * c, 0.25 * (-s - 2.0 * s2), -0.5 * e * s],
            ],
            Shape::Cardioid => {
                let sec2 = 1.0 / (c * c);
                let tan = s / c;
                [
                    vec![0.5 * (1.0 + c) * c, 0.5 * (1.0 + c) * s, e * tan],
                    vec![-0.5 * (s + s2), 0.5 * (c + c2), e * sec2],
                    vec![-0.5 * (c + 2.0 * c2), 0.5 * (-s - 2.0 * s2), 2.0 * e * sec2 * tan],
                ]
            }
            Shape::FigureEight => [
                vec![s, c * s, e * c],
                vec![c, c2, -e * s],
                vec![-s, -2.0 * s2, -e * c],
            ],
            Shape::DoubleCusp => [
                vec![
                    0.5 * (1.0 + c),
                    -0.125 * s * s * s,
                    0.25 * e * s * (1.0 + c),
                    0.5 * e * s,
                ],
                vec![
                    -0.5 * s,
                    -0.375 * s * s * c,
                    0.25 * e * (c + c2),
                    0.5 * e * c,
                ],
                vec![
                    -0.5 * c,
                    -0.375 * (2.0 * s * c * c - s * s * s),
                    0.25 * e * (-s - 2.0 * s2),
                    -0.5 * e * s,
                ],
            ],
            Shape::Revolution => unreachable!("surface parametrization used as a curve"),
        }
    }

    /// Point and derivatives of the revolution surface, in the order
    /// `[point, d_theta, d_alpha, d_theta_theta, d_theta_alpha, d_alpha_alpha]`.
    fn surface_jet(&self, theta: f64, alpha: f64) -> [Vec<f64>; 6] {
        let e = self.eps;
        let (s, c) = theta.sin_cos();
        let (s2, c2) = (2.0 * theta).sin_cos();
        let (sa, ca) = alpha.sin_cos();
        // profile (x, r, rho) and its theta derivatives
        let x = [0.5 * (1.0 + c), -0.5 * s, -0.5 * c];
        let r = [0.25 * (1.0 + c) * s, 0.25 * (c + c2), 0.25 * (-s - 2.0 * s2)];
        let rho = [0.5 * e * s, 0.5 * e * c, -0.5 * e * s];
        let spin = |k: usize| vec![x[k], r[k] * ca, r[k] * sa, rho[k] * ca, rho[k] * sa];
        let d_alpha = |k: usize| vec![0.0, -r[k] * sa, r[k] * ca, -rho[k] * sa, rho[k] * ca];
        [
            spin(0),
            spin(1),
            d_alpha(0),
            spin(2),
            d_alpha(1),
            vec![0.0, -r[0] * ca, -r[0] * sa, -rho[0] * ca, -rho[0] * sa],
        ]
    }
}

impl Parametrization for VarietyParam {
    fn ambient_dim(&self) -> usize {
        if self.lifted {
            self.full_dim()
        } else {
            self.base_dim()
        }
    }

    fn param_dim(&self) -> usize {
        match self.shape {
            Shape::Revolution => 2,
            _ => 1,
        }
    }

    fn point(&self, u: &[f64]) -> Vec<f64> {
        let p = match self.shape {
            Shape::Revolution => self.surface_jet(u[0], u[1])[0].clone(),
            _ => self.curve_jet(u[0])[0].clone(),
        };
        self.truncate(p)
    }

    fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match self.shape {
            Shape::Revolution => {
                let [_, dt, da, ..] = self.surface_jet(u[0], u[1]);
                vec![self.truncate(dt), self.truncate(da)]
            }
            _ => {
                let [_, d, _] = self.curve_jet(u[0]);
                vec![self.truncate(d)]
            }
        }
    }

    fn second(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match self.shape {
            Shape::Revolution => {
                let [_, _, _, tt, ta, aa] = self.surface_jet(u[0], u[1]);
                vec![self.truncate(tt), self.truncate(ta), self.truncate(aa)]
            }
            _ => {
                let [_, _, dd] = self.curve_jet(u[0]);
                vec![self.truncate(dd)]
            }
        }
    }
}

impl CurveParam for VarietyParam {
    fn ambient_dim(&self) -> usize {
        Parametrization::ambient_dim(self)
    }
    fn point(&self, t: f64) -> Vec<f64> {
        Parametrization::point(self, &[t])
    }
    fn deriv(&self, t: f64) -> Vec<f64> {
        self.truncate(self.curve_jet(t)[1].clone())
    }
    fn second_deriv(&self, t: f64) -> Vec<f64> {
        self.truncate(self.curve_jet(t)[2].clone())
    }
}
