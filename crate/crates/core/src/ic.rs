//! Initial data used by the experiments.

/// `exp(4 cos^2 theta) / 50` on the curve parameter.
pub fn cusp_theta(theta: f64) -> f64 {
    (4.0 * theta.cos().powi(2)).exp() / 50.0
}

/// The same data written on the plane: `exp(4 (2x - 1)^2) / 50`, using `2x - 1 = cos theta`.
pub fn cusp_xy(x: f64, _y: f64) -> f64 {
    (4.0 * (2.0 * x - 1.0).powi(2)).exp() / 50.0
}

/// `exp(2 cos(4 arccos(2x - 1))^2) / 7.5`, the surface demo data. The argument of
/// `arccos` is clamped to `[-1, 1]` so grid points slightly off the surface stay finite.
pub fn revolution_x(x: f64) -> f64 {
    let c = (2.0 * x - 1.0).clamp(-1.0, 1.0);
    (2.0 * (4.0 * c.acos()).cos().powi(2)).exp() / 7.5
}
