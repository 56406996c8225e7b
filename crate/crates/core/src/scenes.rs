//! Built-in analytic height fields with exact evaluators.
//!
//! Each scene provides its height jet (for exact derivative tensors) and
//! closed-form height, normal, and image values (for ground truth grids).

use crate::error::{Error, Result};
use crate::jet::Jet2;
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub enum Scene {
    /// `f = sqrt(R^2 - x^2) - R`, curving in x only.
    Cylinder { radius: f64 },
    /// `f = sqrt(R^2 - x^2 - y^2) - R`.
    SphereCap { radius: f64 },
    /// A polynomial height field given by its coefficient jet.
    Polynomial { coeffs: Jet2 },
}

impl Scene {
    pub fn cylinder(radius: f64) -> Scene {
        assert!(radius > 0.0);
        Scene::Cylinder { radius }
    }

    pub fn sphere_cap(radius: f64) -> Scene {
        assert!(radius > 0.0);
        Scene::SphereCap { radius }
    }

    pub fn polynomial(coeffs: Jet2) -> Scene {
        Scene::Polynomial { coeffs }
    }

    /// Height function as a jet of the requested order.
    pub fn height_jet(&self, order: usize) -> Result<Jet2> {
        match self {
            Scene::Cylinder { radius } => {
                let arg = Jet2::from_coeffs(
                    order,
                    [((0, 0), radius * radius), ((2, 0), -1.0)],
                );
                arg.sqrt()?.sub(&Jet2::constant(order, *radius))
            }
            Scene::SphereCap { radius } => {
                let arg = Jet2::from_coeffs(
                    order,
                    [((0, 0), radius * radius), ((2, 0), -1.0), ((0, 2), -1.0)],
                );
                arg.sqrt()?.sub(&Jet2::constant(order, *radius))
            }
            Scene::Polynomial { coeffs } => {
                if order < coeffs.order() {
                    // truncating would silently change the surface
                    let truncated = coeffs.resized(order);
                    if truncated.resized(coeffs.order()) != *coeffs {
                        return Err(Error::OrderTooLarge {
                            requested: coeffs.order(),
                            available: order,
                        });
                    }
                    return Ok(truncated);
                }
                Ok(coeffs.resized(order))
            }
        }
    }

    /// Exact height; NaN outside the analytic domain.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Scene::Cylinder { radius } => (radius * radius - x * x).sqrt() - radius,
            Scene::SphereCap { radius } => (radius * radius - x * x - y * y).sqrt() - radius,
            Scene::Polynomial { coeffs } => coeffs.eval(x, y),
        }
    }

    /// Exact unit upward normal.
    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        match self {
            Scene::Cylinder { radius } => {
                let z = (radius * radius - x * x).sqrt();
                Vector3::new(x / radius, 0.0, z / radius)
            }
            Scene::SphereCap { radius } => {
                let z = (radius * radius - x * x - y * y).sqrt();
                Vector3::new(x / radius, y / radius, z / radius)
            }
            Scene::Polynomial { coeffs } => {
                let fx = coeffs.dx().eval(x, y);
                let fy = coeffs.dy().eval(x, y);
                Vector3::new(-fx, -fy, 1.0).normalize()
            }
        }
    }

    /// Exact Lambertian intensity under a unit light (unit albedo).
    pub fn image(&self, x: f64, y: f64, light: &Vector3<f64>) -> f64 {
        light.dot(&self.normal(x, y))
    }
}
