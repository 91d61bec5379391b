//! Hard-coded singular varieties and their blow-up desingularizations.

use std::sync::Arc;

use super::param::{CurveParam, VarietyParam};
use super::{DeformationMatrix, ImplicitSystem, ON_VARIETY_TOL};
use crate::error::{check_dim, Error, Result};
use crate::poly::Polynomial;

/// Keys accepted by [`catalogue`].
pub const CATALOGUE_NAMES: [&str; 5] = ["cusp", "cardioid", "figure_eight", "double_cusp", "revolution"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `y^2 = x^3 - x^4`
    Cusp,
    /// `(x^2+y^2)^2 - x(x^2+y^2) - y^2/4 = 0`
    Cardioid,
    /// `y^2 - x^2 + x^4 = 0`
    FigureEight,
    /// `y^2 = x^3 (1-x)^3`
    DoubleCusp,
    /// `y^2 + z^2 = x^3 - x^4`, a surface in `R^3`
    Revolution,
}

impl Shape {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "cusp" => Shape::Cusp,
            "cardioid" => Shape::Cardioid,
            "figure_eight" => Shape::FigureEight,
            "double_cusp" => Shape::DoubleCusp,
            "revolution" => Shape::Revolution,
            other => return Err(Error::UnknownVariety(other.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Cusp => "cusp",
            Shape::Cardioid => "cardioid",
            Shape::FigureEight => "figure_eight",
            Shape::DoubleCusp => "double_cusp",
            Shape::Revolution => "revolution",
        }
    }
}

/// A singular base variety together with its `eps`-family of desingularizations.
#[derive(Clone, Debug)]
pub struct VarietyEntry {
    shape: Shape,
    eps: f64,
    base_system: ImplicitSystem,
    lifted_system: Option<ImplicitSystem>,
    deformation: DeformationMatrix,
    singular_points: Vec<Vec<f64>>,
    /// The lifted curve is not closed: blowing up changes the topology.
    pub tears_apart: bool,
    /// Whether the lift is a consistent regularization depends on the junction
    /// conditions imposed at the singular point.
    pub junction_dependent: bool,
}

/// Looks up a catalogue entry. `eps = 0` yields the singular base variety.
pub fn catalogue(name: &str, eps: f64) -> Result<VarietyEntry> {
    let shape = Shape::from_name(name)?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be finite and non-negative, got {eps}")));
    }
    let (base_dim, lifted_dim) = match shape {
        Shape::Cusp | Shape::Cardioid | Shape::FigureEight => (2, 3),
        Shape::DoubleCusp => (2, 4),
        Shape::Revolution => (3, 5),
    };
    let v = |n: usize, i: usize| Polynomial::var(n, i);
    let base = {
        let (x, y) = (v(base_dim, 0), v(base_dim, 1));
        let poly = match shape {
            Shape::Cusp => y.powi(2) - x.powi(3) + x.powi(4),
            Shape::Cardioid => {
                let r2 = x.powi(2) + y.powi(2);
                r2.powi(2) - &x * &r2 - y.powi(2) * 0.25
            }
            Shape::FigureEight => y.powi(2) - x.powi(2) + x.powi(4),
            Shape::DoubleCusp => {
                let one_minus_x = (-&x) + 1.0;
                y.powi(2) - x.powi(3) * one_minus_x.powi(3)
            }
            Shape::Revolution => {
                let z = v(3, 2);
                y.powi(2) + z.powi(2) - x.powi(3) + x.powi(4)
            }
        };
        ImplicitSystem::new(base_dim, vec![poly])?
    };
    let lifted = if eps > 0.0 { Some(lifted_system(shape, eps, lifted_dim)?) } else { None };
    let singular_points = match shape {
        Shape::DoubleCusp => vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        _ => vec![vec![0.0; base_dim]],
    };
    Ok(VarietyEntry {
        shape,
        eps,
        base_system: base,
        lifted_system: lifted,
        deformation: DeformationMatrix::new(base_dim, lifted_dim - base_dim, eps),
        singular_points,
        tears_apart: shape == Shape::Cardioid,
        junction_dependent: shape == Shape::FigureEight,
    })
}

fn lifted_system(shape: Shape, eps: f64, n: usize) -> Result<ImplicitSystem> {
    let v = |i: usize| Polynomial::var(n, i);
    let half_circle = |x: &Polynomial| (x.clone() - 0.5).powi(2) - 0.25;
    let polys = match shape {
        Shape::Cusp => {
            let (x, y, z) = (v(0), v(1), v(2));
            vec![
                (&z * (1.0 / eps)).powi(2) + half_circle(&x),
                &y * eps - &z * &x,
            ]
        }
        Shape::Cardioid => {
            let (x, y, z) = (v(0), v(1), v(2));
            let q = (&z * (1.0 / eps)).powi(2) + 1.0;
            vec![
                (&x * &q - 0.5).powi(2) - q * 0.25,
                y - &z * (1.0 / eps) * &x,
            ]
        }
        Shape::FigureEight => {
            let (x, y, z) = (v(0), v(1), v(2));
            vec![
                (&z * (1.0 / eps)).powi(2) + x.powi(2) - 1.0,
                y - &z * (1.0 / eps) * &x,
            ]
        }
        Shape::DoubleCusp => {
            let (x, y, z, w) = (v(0), v(1), v(2), v(3));
            vec![
                (&w * (1.0 / eps)).powi(2) + half_circle(&x),
                y - &z * (1.0 / eps) * (x.clone() - 1.0),
                z - &w * &x,
            ]
        }
        Shape::Revolution => {
            let (x, y, z, xi, eta) = (v(0), v(1), v(2), v(3), v(4));
            vec![
                (&xi * (1.0 / eps)).powi(2) + (&eta * (1.0 / eps)).powi(2) + half_circle(&x),
                &y * eps - &xi * &x,
                &z * eps - &eta * &x,
            ]
        }
    };
    ImplicitSystem::new(n, polys)
}

impl VarietyEntry {
    pub fn name(&self) -> &'static str {
        self.shape.name()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base_dim(&self) -> usize {
        self.base_system.ambient_dim()
    }

    pub fn lifted_dim(&self) -> usize {
        self.deformation.dim()
    }

    /// Ambient dimension of [`Self::system`].
    pub fn ambient_dim(&self) -> usize {
        self.system().ambient_dim()
    }

    /// The desingularized system for `eps > 0`, the base system for `eps = 0`.
    pub fn system(&self) -> &ImplicitSystem {
        self.lifted_system.as_ref().unwrap_or(&self.base_system)
    }

    pub fn base_system(&self) -> &ImplicitSystem {
        &self.base_system
    }

    pub fn lifted_system(&self) -> Option<&ImplicitSystem> {
        self.lifted_system.as_ref()
    }

    pub fn deformation(&self) -> &DeformationMatrix {
        &self.deformation
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular_points
    }

    /// Parametrization of the lifted variety in the full lifted space. At `eps = 0`
    /// the adjoined coordinates vanish identically.
    pub fn parametrization(&self) -> Arc<VarietyParam> {
        Arc::new(VarietyParam::new(self.shape, self.eps, true))
    }

    /// Parametrization of the base variety, i.e. the lifted one composed with blow-down.
    pub fn base_parametrization(&self) -> Arc<VarietyParam> {
        Arc::new(VarietyParam::new(self.shape, self.eps, false))
    }

    /// The lifted parametrization as a closed curve, if this entry is a curve.
    pub fn curve(&self) -> Option<Arc<dyn CurveParam>> {
        (self.shape != Shape::Revolution).then(|| self.parametrization() as Arc<dyn CurveParam>)
    }

    /// Same as [`Self::curve`] for the base variety.
    pub fn base_curve(&self) -> Option<Arc<dyn CurveParam>> {
        (self.shape != Shape::Revolution).then(|| self.base_parametrization() as Arc<dyn CurveParam>)
    }

    /// Section of the blow-down projection: lifts a base point onto the desingularized variety.
    pub fn blow_up_point(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.base_dim(), p.len())?;
        let residual = self.base_system.residual_norm(p)?;
        if residual > ON_VARIETY_TOL {
            return Err(Error::OffVariety { residual, tol: ON_VARIETY_TOL });
        }
        let e = self.eps;
        let (x, y) = (p[0], p[1]);
        let mut q = p.to_vec();
        match self.shape {
            Shape::Cusp | Shape::Cardioid => {
                q.push(if x == 0.0 {
                    if y != 0.0 {
                        return Err(Error::SingularPoint(format!(
                            "{} has no lift over {p:?}",
                            self.name()
                        )));
                    }
                    0.0
                } else {
                    e * y / x
                });
            }
            Shape::FigureEight => {
                if x == 0.0 {
                    return Err(Error::SingularPoint(
                        "the lift of the figure-eight node is not unique".into(),
                    ));
                }
                q.push(e * y / x);
            }
            Shape::DoubleCusp => {
                let z = if x == 1.0 { 0.0 } else { e * y / (x - 1.0) };
                let w = if x == 0.0 { 0.0 } else { z / x };
                q.push(z);
                q.push(w);
            }
            Shape::Revolution => {
                let z = p[2];
                if x == 0.0 {
                    q.extend([0.0, 0.0]);
                } else {
                    q.extend([e * y / x, e * z / x]);
                }
            }
        }
        Ok(q)
    }

    /// Coordinate projection from the lifted space onto the base space.
    pub fn blow_down_point(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.lifted_dim(), q.len())?;
        if let Some(sys) = &self.lifted_system {
            let residual = sys.residual_norm(q)?;
            if residual > ON_VARIETY_TOL {
                return Err(Error::OffVariety { residual, tol: ON_VARIETY_TOL });
            }
        }
        Ok(q[..self.base_dim()].to_vec())
    }
}
