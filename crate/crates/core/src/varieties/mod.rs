//! Implicit algebraic varieties, regularity classification and tangent projectors.

mod catalogue;
mod param;

pub use catalogue::{catalogue, Shape, VarietyEntry, CATALOGUE_NAMES};
pub use param::{CircleParam, CurveParam, Parametrization, VarietyParam};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::poly::Polynomial;

/// Residual tolerance used when a caller does not supply one.
pub const ON_VARIETY_TOL: f64 = 1e-10;

/// Outcome of [`ImplicitSystem::classify_point`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Regular,
    Singular,
}

/// The common zero set of `m` polynomials in `n` variables.
#[derive(Clone, Debug)]
pub struct ImplicitSystem {
    ambient_dim: usize,
    polys: Vec<Polynomial>,
    grads: Vec<Vec<Polynomial>>,
}

impl ImplicitSystem {
    pub fn new(ambient_dim: usize, polys: Vec<Polynomial>) -> Result<Self> {
        if polys.len() > ambient_dim {
            return Err(Error::Config(format!(
                "{} equations in {} unknowns",
                polys.len(),
                ambient_dim
            )));
        }
        for p in &polys {
            check_dim(ambient_dim, p.nvars())?;
        }
        let grads = polys
            .iter()
            .map(|p| (0..ambient_dim).map(|j| p.derivative(j)).collect())
            .collect();
        Ok(Self { ambient_dim, polys, grads })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codim(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    /// Componentwise residual of the system at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim, x.len())?;
        Ok(self.polys.iter().map(|p| p.eval(x)).collect())
    }

    /// Euclidean norm of the residual.
    pub fn residual_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.iter().map(|r| r * r).sum::<f64>().sqrt())
    }

    /// Analytic `m x n` Jacobian.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.ambient_dim, x.len())?;
        Ok(DMatrix::from_fn(self.codim(), self.ambient_dim, |i, j| {
            self.grads[i][j].eval(x)
        }))
    }

    /// Rank test of the Jacobian at a point of the variety.
    pub fn classify_point(&self, x: &[f64], tol: f64) -> Result<PointClass> {
        let residual = self.residual_norm(x)?;
        if !(residual <= tol) {
            return Err(Error::OffVariety { residual, tol });
        }
        let jac = self.jacobian(x)?;
        Ok(if numerical_rank(&jac) == self.codim() {
            PointClass::Regular
        } else {
            PointClass::Singular
        })
    }

    /// Orthogonal projector onto the tangent space, `I - N (N^T N)^{-1} N^T` with `N = Dphi^T`.
    pub fn tangent_projector(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let jac = self.jacobian(x)?;
        if numerical_rank(&jac) < self.codim() {
            return Err(Error::SingularPoint(format!("Jacobian is rank deficient at {x:?}")));
        }
        Ok(projector_from_normals(&jac.transpose()))
    }
}

/// Numerical rank with threshold `n * eps * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let thresh = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > thresh).count()
}

/// `I - N (N^T N)^{-1} N^T` for a full column rank `N`.
///
/// Computed through a thin QR factorization, which keeps the result symmetric and
/// idempotent to rounding even when the normals are badly scaled.
pub fn projector_from_normals(normals: &DMatrix<f64>) -> DMatrix<f64> {
    let n = normals.nrows();
    let q = normals.clone().qr().q();
    let mut p = DMatrix::identity(n, n) - &q * q.transpose();
    // symmetrize away the last bit of rounding
    let pt = p.transpose();
    p += pt;
    p *= 0.5;
    p
}

/// Diagonal deformation matrix; the adjoined coordinates carry the factor `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationMatrix {
    diag: Vec<f64>,
    eps: f64,
}

impl DeformationMatrix {
    /// `base_dim` unit entries followed by `extra` copies of `eps`.
    pub fn new(base_dim: usize, extra: usize, eps: f64) -> Self {
        let mut diag = vec![1.0; base_dim];
        diag.extend(std::iter::repeat(eps).take(extra));
        Self { diag, eps }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_invertible(&self) -> bool {
        self.diag.iter().all(|&d| d != 0.0)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(v).map(|(d, x)| d * x).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cusp_base() -> ImplicitSystem {
        catalogue("cusp", 0.0).unwrap().base_system().clone()
    }

    #[test]
    fn cusp_jacobian_examples() {
        let sys = cusp_base();
        let j0 = sys.jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j0.as_slice(), &[0.0, 0.0]);
        let j1 = sys.jacobian(&[1.0, 0.0]).unwrap();
        assert_eq!(j1.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn classification_of_cusp() {
        let sys = cusp_base();
        assert_eq!(sys.classify_point(&[0.0, 0.0], ON_VARIETY_TOL).unwrap(), PointClass::Singular);
        assert_eq!(sys.classify_point(&[1.0, 0.0], ON_VARIETY_TOL).unwrap(), PointClass::Regular);
        assert!(matches!(
            sys.classify_point(&[0.5, 0.5], ON_VARIETY_TOL),
            Err(Error::OffVariety { .. })
        ));
    }

    #[test]
    fn projector_at_cusp_tip() {
        let p = cusp_base().tangent_projector(&[1.0, 0.0]).unwrap();
        assert!((p[(0, 0)]).abs() < 1e-15);
        assert!((p[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(p[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn projector_refuses_singular_point() {
        assert!(matches!(
            cusp_base().tangent_projector(&[0.0, 0.0]),
            Err(Error::SingularPoint(_))
        ));
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            cusp_base().eval(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn deformation_at_zero_kills_extra_coordinates() {
        let h = DeformationMatrix::new(2, 1, 0.0);
        assert!(!h.is_invertible());
        assert_eq!(h.apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 0.0]);
        assert!(DeformationMatrix::new(3, 2, 0.1).is_invertible());
    }
}
