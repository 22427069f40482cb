//! Curvilinear surface kinematics at a single parametric point.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::master_element::BasisEval;

pub type Vec3 = Vector3<f64>;
pub type Mat2 = [[f64; 2]; 2];

/// Relative threshold on `det a_{αβ} / (a_11 a_22)` below which a frame is
/// considered collapsed.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Covariant and contravariant bases, metric, normal and curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFrame {
    /// Covariant tangents `a_α = ∂x/∂ξ^α`.
    pub a: [Vec3; 2],
    /// Metric `a_{αβ}`.
    pub a_cov: Mat2,
    /// Inverse metric `a^{αβ}`.
    pub a_con: Mat2,
    /// Dual tangents `a^α = a^{αβ} a_β`.
    pub a_dual: [Vec3; 2],
    /// Unit normal `a_1 × a_2 / |a_1 × a_2|`.
    pub n: Vec3,
    /// Area Jacobian `√det a_{αβ}`.
    pub ja: f64,
    /// Curvature components `b_{αβ}`, when requested.
    pub b_cov: Option<Mat2>,
}

impl SurfaceFrame {
    pub fn det(&self) -> f64 {
        self.a_cov[0][0] * self.a_cov[1][1] - self.a_cov[0][1] * self.a_cov[1][0]
    }

    /// Mixed components `a^{αγ} M_{γβ}` of a covariant 2-tensor.
    pub fn raise_first(&self, m: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = (0..2).map(|g| self.a_con[a][g] * m[g][b]).sum();
            }
        }
        out
    }
}

/// Position `x = Σ N_I x_I`.
pub fn interpolate(eval: &BasisEval, coords: &[Vec3]) -> Vec3 {
    eval.n
        .iter()
        .zip(coords)
        .fold(Vec3::zeros(), |acc, (n, x)| acc + *n * x)
}

/// Closed-form inverse of a symmetric 2×2 matrix with given determinant.
pub fn inverse_sym2(m: &Mat2, det: f64) -> Mat2 {
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

/// Build the surface frame from a basis evaluation and nodal coordinates.
pub fn frame(eval: &BasisEval, coords: &[Vec3], with_curvature: bool) -> Result<SurfaceFrame> {
    debug_assert_eq!(eval.len(), coords.len());
    let mut a = [Vec3::zeros(); 2];
    for (dn, x) in eval.dn.iter().zip(coords) {
        a[0] += dn[0] * x;
        a[1] += dn[1] * x;
    }
    let a_cov = [
        [a[0].dot(&a[0]), a[0].dot(&a[1])],
        [a[1].dot(&a[0]), a[1].dot(&a[1])],
    ];
    let det = a_cov[0][0] * a_cov[1][1] - a_cov[0][1] * a_cov[1][0];
    let scale = a_cov[0][0] * a_cov[1][1];
    if !(det.is_finite() && det > DEGENERACY_TOL * scale && det > 0.0) {
        return Err(Error::DegenerateFrame { det, scale });
    }
    let a_con = inverse_sym2(&a_cov, det);
    let a_dual = [
        a_con[0][0] * a[0] + a_con[0][1] * a[1],
        a_con[1][0] * a[0] + a_con[1][1] * a[1],
    ];
    let cross = a[0].cross(&a[1]);
    let ja = det.sqrt();
    let n = cross / cross.norm();

    let b_cov = if with_curvature {
        let mut second = [Vec3::zeros(); 3];
        for (d2, x) in eval.d2n.iter().zip(coords) {
            for k in 0..3 {
                second[k] += d2[k] * x;
            }
        }
        let b11 = n.dot(&second[0]);
        let b12 = n.dot(&second[1]);
        let b22 = n.dot(&second[2]);
        Some([[b11, b12], [b12, b22]])
    } else {
        None
    };

    Ok(SurfaceFrame {
        a,
        a_cov,
        a_con,
        a_dual,
        n,
        ja,
        b_cov,
    })
}

/// Stress-free reference metric at a quadrature point.
///
/// An isotropic pre-stretch `λ₀` scales the stored metric as
/// `A_{αβ} → A_{αβ}/λ₀²` without moving the reference nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMetric {
    pub a_con: Mat2,
    pub ja: f64,
}

impl ReferenceMetric {
    pub fn from_frame(frame: &SurfaceFrame) -> Self {
        Self {
            a_con: frame.a_con,
            ja: frame.ja,
        }
    }

    pub fn prestretched(self, lambda0: f64) -> Self {
        let l2 = lambda0 * lambda0;
        let mut a_con = self.a_con;
        for row in a_con.iter_mut() {
            for v in row.iter_mut() {
                *v *= l2;
            }
        }
        Self {
            a_con,
            ja: self.ja / l2,
        }
    }
}

/// Area stretch and the pushed-forward reference inverse metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationMeasures {
    /// `J = J_a / J_A`.
    pub j: f64,
    /// `A^{αβ}`, the components of `B = F Fᵀ` in the current basis.
    pub a_con_push: Mat2,
}

pub fn deformation(
    reference: &ReferenceMetric,
    current: &SurfaceFrame,
) -> Result<DeformationMeasures> {
    let j = current.ja / reference.ja;
    if !(j.is_finite() && j > 0.0) {
        return Err(Error::NonPositiveStretch(j));
    }
    Ok(DeformationMeasures {
        j,
        a_con_push: reference.a_con,
    })
}

/// `b^α_α = a^{αβ} b_{αβ}`; equals `-2/r` on a sphere of radius `r` with
/// outward normal.
pub fn mean_curvature_trace(frame: &SurfaceFrame) -> Result<f64> {
    let b = frame.b_cov.as_ref().ok_or(Error::MissingCurvature)?;
    Ok((0..2)
        .flat_map(|a| (0..2).map(move |c| (a, c)))
        .map(|(a, c)| frame.a_con[a][c] * b[a][c])
        .sum())
}
