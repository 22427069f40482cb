//! Open B-spline utilities used by the NURBS generators: span search, basis
//! evaluation, refinement of homogeneous control polygons and per-element
//! Bézier extraction operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::master_element::BezierBasis;

/// Index of the knot span containing `u` (NURBS Book A2.1).
pub fn find_span(knots: &[f64], degree: usize, u: f64) -> usize {
    let n = knots.len() - degree - 2;
    if u >= knots[n + 1] {
        return n;
    }
    if u <= knots[degree] {
        return degree;
    }
    let (mut low, mut high) = (degree, n + 1);
    let mut mid = (low + high) / 2;
    while u < knots[mid] || u >= knots[mid + 1] {
        if u < knots[mid] {
            high = mid;
        } else {
            low = mid;
        }
        mid = (low + high) / 2;
    }
    mid
}

/// Nonzero basis values `N_{span-p..=span}` at `u` (NURBS Book A2.2).
pub fn basis_funs(knots: &[f64], degree: usize, span: usize, u: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Open knot vector on `[0, 1]` with `spans` uniform intervals.
pub fn open_uniform_knots(degree: usize, spans: usize) -> Vec<f64> {
    let mut k = vec![0.0; degree + 1];
    for i in 1..spans {
        k.push(i as f64 / spans as f64);
    }
    k.extend(std::iter::repeat_n(1.0, degree + 1));
    k
}

/// Greville abscissae of an open knot vector.
pub fn greville(knots: &[f64], degree: usize) -> Vec<f64> {
    let n = knots.len() - degree - 1;
    (0..n)
        .map(|i| knots[i + 1..=i + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

/// Homogeneous curve point `Σ N_i(u) P_i`.
pub fn curve_point<const D: usize>(
    knots: &[f64],
    degree: usize,
    ctrl: &[[f64; D]],
    u: f64,
) -> [f64; D] {
    let span = find_span(knots, degree, u);
    let n = basis_funs(knots, degree, span, u);
    let mut out = [0.0; D];
    for (k, nk) in n.iter().enumerate() {
        let p = &ctrl[span - degree + k];
        for d in 0..D {
            out[d] += nk * p[d];
        }
    }
    out
}

/// Re-express a homogeneous control polygon on a refined knot vector.
///
/// The refined knots must contain the original ones, so the curve lies in
/// the refined spline space and collocation at the Greville points recovers
/// its coefficients exactly.
pub fn refine<const D: usize>(
    knots: &[f64],
    degree: usize,
    ctrl: &[[f64; D]],
    new_knots: &[f64],
) -> Result<Vec<[f64; D]>> {
    let g = greville(new_knots, degree);
    let m = g.len();
    let mut a = DMatrix::zeros(m, m);
    for (row, &u) in g.iter().enumerate() {
        let span = find_span(new_knots, degree, u);
        for (k, v) in basis_funs(new_knots, degree, span, u)
            .into_iter()
            .enumerate()
        {
            a[(row, span - degree + k)] = v;
        }
    }
    let lu = a.lu();
    let mut out = vec![[0.0; D]; m];
    for d in 0..D {
        let rhs =
            DVector::from_iterator(m, g.iter().map(|&u| curve_point(knots, degree, ctrl, u)[d]));
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidMesh("singular refinement collocation".into()))?;
        for i in 0..m {
            out[i][d] = sol[i];
        }
    }
    Ok(out)
}

/// One element of a 1D spline: parameter interval, first global function
/// and the `(p+1) × (p+1)` extraction operator onto Bernstein polynomials.
#[derive(Debug, Clone)]
pub struct SpanExtraction {
    pub first: usize,
    pub interval: (f64, f64),
    pub operator: DMatrix<f64>,
}

/// Bézier extraction operators for every nonzero span of an open knot vector.
///
/// Computed by matching the span's polynomial pieces against the Bernstein
/// basis at `p+1` distinct points.
pub fn extraction_1d(knots: &[f64], degree: usize) -> Vec<SpanExtraction> {
    let p = degree;
    let n_fn = knots.len() - p - 1;
    let xs: Vec<f64> = (0..=p).map(|k| -1.0 + 2.0 * k as f64 / p as f64).collect();
    let mut bern = DMatrix::zeros(p + 1, p + 1);
    for (k, &x) in xs.iter().enumerate() {
        let t = 0.5 * (1.0 + x);
        for j in 0..=p {
            let c = (0..j).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64);
            bern[(k, j)] = c * t.powi(j as i32) * (1.0 - t).powi((p - j) as i32);
        }
    }
    let bern_lu = bern.lu();
    let mut out = Vec::new();
    for span in p..n_fn {
        let (u0, u1) = (knots[span], knots[span + 1]);
        if u1 <= u0 {
            continue;
        }
        let mut vals = DMatrix::zeros(p + 1, p + 1);
        for (k, &x) in xs.iter().enumerate() {
            let u = u0 + 0.5 * (x + 1.0) * (u1 - u0);
            for (i, v) in basis_funs(knots, p, span, u).into_iter().enumerate() {
                vals[(k, i)] = v;
            }
        }
        // vals = bern · Cᵀ
        let ct = bern_lu
            .solve(&vals)
            .expect("Bernstein collocation matrix is regular");
        let mut op = ct.transpose();
        op.iter_mut().for_each(|c| {
            if c.abs() < 1e-15 {
                *c = 0.0;
            }
        });
        out.push(SpanExtraction {
            first: span - p,
            interval: (u0, u1),
            operator: op,
        });
    }
    out
}

/// Tensor-product rational patch, control net indexed `i + n_u·j`.
#[derive(Debug, Clone)]
pub struct TensorPatch {
    pub degree: usize,
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TensorPatch {
    pub fn n_u(&self) -> usize {
        self.knots_u.len() - self.degree - 1
    }

    pub fn n_v(&self) -> usize {
        self.knots_v.len() - self.degree - 1
    }

    /// Bézier elements of the patch, each with the patch control-point indices
    /// of its local functions.
    pub fn elements(&self) -> Result<Vec<(BezierBasis, Vec<usize>)>> {
        let p = self.degree;
        let m = p + 1;
        let nu = self.n_u();
        let eu = extraction_1d(&self.knots_u, p);
        let ev = extraction_1d(&self.knots_v, p);
        let mut out = Vec::with_capacity(eu.len() * ev.len());
        for sv in &ev {
            for su in &eu {
                let mut c = DMatrix::zeros(m * m, m * m);
                let mut ids = Vec::with_capacity(m * m);
                let mut w = Vec::with_capacity(m * m);
                for b in 0..m {
                    for a in 0..m {
                        let row = a + m * b;
                        let id = (su.first + a) + nu * (sv.first + b);
                        ids.push(id);
                        w.push(self.weights[id]);
                        for d in 0..m {
                            for cc in 0..m {
                                c[(row, cc + m * d)] = su.operator[(a, cc)] * sv.operator[(b, d)];
                            }
                        }
                    }
                }
                out.push((BezierBasis::new(p, c, w)?, ids));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_span_extraction_is_identity() {
        let k = open_uniform_knots(2, 1);
        let e = extraction_1d(&k, 2);
        assert_eq!(e.len(), 1);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_abs_diff_eq!((&e[0].operator - id).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn uniform_quadratic_extraction() {
        // Two spans of an open quadratic knot vector: known operators.
        let k = open_uniform_knots(2, 2);
        let e = extraction_1d(&k, 2);
        let c1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5]);
        let c2 = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!((&e[0].operator - c1).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((&e[1].operator - c2).norm(), 0.0, epsilon = 1e-14);
        assert_eq!(e[1].first, 1);
    }

    #[test]
    fn refinement_preserves_curve() {
        let k = open_uniform_knots(2, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ctrl = [[1.0, 0.0, 1.0], [s, s, s], [0.0, 1.0, 1.0]];
        let nk = open_uniform_knots(2, 3);
        let fine = refine(&k, 2, &ctrl, &nk).unwrap();
        for i in 0..=20 {
            let u = i as f64 / 20.0;
            let a = curve_point(&k, 2, &ctrl, u);
            let b = curve_point(&nk, 2, &fine, u);
            for d in 0..3 {
                assert_abs_diff_eq!(a[d], b[d], epsilon = 1e-14);
            }
            // Rational quarter circle stays on the unit circle.
            let (x, y) = (b[0] / b[2], b[1] / b[2]);
            assert_abs_diff_eq!(x * x + y * y, 1.0, epsilon = 1e-14);
        }
    }
}
