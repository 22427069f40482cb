//! Closest-point projection onto analytic rigid obstacles.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::ObstacleShape;

/// Normal gap at a point and the derivative of `g n_p` with respect to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub g: f64,
    /// Outward obstacle normal at the projection point.
    pub n_p: Vec3,
    /// `∂(g n_p)/∂x`.
    pub d_gn: Matrix3<f64>,
}

impl Gap {
    /// Penalty traction `t_c = −ε g n_p` when penetrating, else zero.
    pub fn traction(&self, epsilon_n: f64) -> Vec3 {
        if self.g < 0.0 {
            -epsilon_n * self.g * self.n_p
        } else {
            Vec3::zeros()
        }
    }
}

pub fn obstacle_gap(shape: &ObstacleShape, x: &Vec3) -> Result<Gap> {
    match *shape {
        ObstacleShape::HalfSpace { normal, offset } => {
            let n_p = Vec3::from(normal);
            Ok(Gap {
                g: n_p.dot(x) - offset,
                n_p,
                d_gn: n_p * n_p.transpose(),
            })
        }
        ObstacleShape::Sphere { center, radius } => {
            let r = x - Vec3::from(center);
            let d = r.norm();
            if d <= 1e-12 * radius {
                return Err(Error::AmbiguousProjection(format!(
                    "point {x:?} coincides with the sphere centre"
                )));
            }
            let n_p = r / d;
            let g = d - radius;
            let nn = n_p * n_p.transpose();
            Ok(Gap {
                g,
                n_p,
                d_gn: nn + (g / d) * (Matrix3::identity() - nn),
            })
        }
    }
}
