//! Shape functions on the master square `[-1, 1]²` and Gauss–Legendre rules.
//!
//! Every element kind uses tensor-product local ordering with `ξ¹` running
//! fastest: local function `(a, b)` has index `a + m·b`, where `m` is the
//! number of functions per direction. Lagrange nodes sit at equally spaced
//! parametric positions; Bézier-extracted elements combine Bernstein
//! polynomials through an extraction operator and then apply rational
//! weights, so NURBS and T-spline elements share one evaluation path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Points may sit this far outside the master square and are clamped back.
const DOMAIN_TOL: f64 = 1e-12;

/// Rational Bézier-extracted basis of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierBasis {
    degree: usize,
    extraction: DMatrix<f64>,
    weights: Vec<f64>,
}

impl BezierBasis {
    /// `extraction` is `n_ne × (p+1)²`; `weights` holds one positive weight
    /// per local function.
    pub fn new(degree: usize, extraction: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidBasis(
                "Bezier degree must be at least 1".into(),
            ));
        }
        let n_bern = (degree + 1) * (degree + 1);
        if extraction.ncols() != n_bern {
            return Err(Error::InvalidBasis(format!(
                "extraction operator has {} columns, degree {} needs {}",
                extraction.ncols(),
                degree,
                n_bern
            )));
        }
        if extraction.nrows() == 0 {
            return Err(Error::InvalidBasis(
                "extraction operator has no rows".into(),
            ));
        }
        if weights.len() != extraction.nrows() {
            return Err(Error::InvalidBasis(format!(
                "{} weights for {} local functions",
                weights.len(),
                extraction.nrows()
            )));
        }
        if extraction.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBasis(
                "non-finite extraction coefficient".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidBasis(
                "weights must be finite and positive".into(),
            ));
        }
        Ok(Self {
            degree,
            extraction,
            weights,
        })
    }

    /// Plain (non-rational) Bernstein element: identity extraction, unit weights.
    pub fn bernstein(degree: usize) -> Result<Self> {
        let n = (degree + 1) * (degree + 1);
        Self::new(degree, DMatrix::identity(n, n), vec![1.0; n])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn extraction(&self) -> &DMatrix<f64> {
        &self.extraction
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Shape-function family of one element.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementBasis {
    /// Bilinear, 4 nodes.
    LagrangeLinear,
    /// Biquadratic, 9 nodes.
    LagrangeQuadratic,
    /// Rational Bernstein basis through a Bézier extraction operator.
    BezierExtracted(BezierBasis),
}

impl ElementBasis {
    /// Number of local shape functions.
    pub fn n_ne(&self) -> usize {
        match self {
            ElementBasis::LagrangeLinear => 4,
            ElementBasis::LagrangeQuadratic => 9,
            ElementBasis::BezierExtracted(b) => b.extraction.nrows(),
        }
    }

    /// Gauss points per direction used unless a scenario overrides it.
    pub fn default_quadrature(&self) -> usize {
        match self {
            ElementBasis::LagrangeLinear => 2,
            ElementBasis::LagrangeQuadratic => 3,
            ElementBasis::BezierExtracted(b) => b.degree + 1,
        }
    }

    /// Short tag used in mesh files and logs.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ElementBasis::LagrangeLinear => "lagrange_linear",
            ElementBasis::LagrangeQuadratic => "lagrange_quadratic",
            ElementBasis::BezierExtracted(_) => "bezier",
        }
    }
}

/// Shape-function values and parametric derivatives at one point.
///
/// `d2n[I]` stores `(N_{I,11}, N_{I,12}, N_{I,22})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub n: Vec<f64>,
    pub dn: Vec<[f64; 2]>,
    pub d2n: Vec<[f64; 3]>,
}

impl BasisEval {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Second derivative `N_{I,αβ}` for `α, β ∈ {0, 1}`.
    #[inline]
    pub fn d2(&self, node: usize, alpha: usize, beta: usize) -> f64 {
        self.d2n[node][alpha + beta]
    }
}

/// Tensor-product quadrature rule on the master square.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

/// One-dimensional Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=6).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Enforce exact symmetry of the rule.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor-product Gauss–Legendre rule with `n_per_dir²` points.
pub fn gauss_rule(n_per_dir: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_legendre_1d(n_per_dir)?;
    let mut points = Vec::with_capacity(n_per_dir * n_per_dir);
    let mut weights = Vec::with_capacity(n_per_dir * n_per_dir);
    for j in 0..n_per_dir {
        for i in 0..n_per_dir {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Values, first and second derivatives of a 1D family at one coordinate.
struct Basis1d {
    v: Vec<f64>,
    d: Vec<f64>,
    dd: Vec<f64>,
}

fn lagrange_linear_1d(x: f64) -> Basis1d {
    Basis1d {
        v: vec![0.5 * (1.0 - x), 0.5 * (1.0 + x)],
        d: vec![-0.5, 0.5],
        dd: vec![0.0, 0.0],
    }
}

fn lagrange_quadratic_1d(x: f64) -> Basis1d {
    Basis1d {
        v: vec![0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)],
        d: vec![x - 0.5, -2.0 * x, x + 0.5],
        dd: vec![1.0, -2.0, 1.0],
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `x^e`, with the convention that negative exponents contribute nothing.
fn pw(x: f64, e: i32) -> f64 {
    if e < 0 {
        0.0
    } else {
        x.powi(e)
    }
}

/// Bernstein polynomials of degree `p` on `[-1, 1]`.
fn bernstein_1d(p: usize, x: f64) -> Basis1d {
    let t = 0.5 * (1.0 + x);
    let s = 1.0 - t;
    let mut out = Basis1d {
        v: Vec::with_capacity(p + 1),
        d: Vec::with_capacity(p + 1),
        dd: Vec::with_capacity(p + 1),
    };
    for i in 0..=p {
        let c = binomial(p, i);
        let (a, b) = (i as i32, (p - i) as i32);
        let af = a as f64;
        let bf = b as f64;
        let v = pw(t, a) * pw(s, b);
        let dt = af * pw(t, a - 1) * pw(s, b) - bf * pw(t, a) * pw(s, b - 1);
        let ddt = af * (af - 1.0) * pw(t, a - 2) * pw(s, b)
            - 2.0 * af * bf * pw(t, a - 1) * pw(s, b - 1)
            + bf * (bf - 1.0) * pw(t, a) * pw(s, b - 2);
        // dt/dξ = 1/2
        out.v.push(c * v);
        out.d.push(0.5 * c * dt);
        out.dd.push(0.25 * c * ddt);
    }
    out
}

fn tensor(u: &Basis1d, v: &Basis1d) -> BasisEval {
    let m = u.v.len();
    let k = v.v.len();
    let mut eval = BasisEval {
        n: Vec::with_capacity(m * k),
        dn: Vec::with_capacity(m * k),
        d2n: Vec::with_capacity(m * k),
    };
    for b in 0..k {
        for a in 0..m {
            eval.n.push(u.v[a] * v.v[b]);
            eval.dn.push([u.d[a] * v.v[b], u.v[a] * v.d[b]]);
            eval.d2n
                .push([u.dd[a] * v.v[b], u.d[a] * v.d[b], u.v[a] * v.dd[b]]);
        }
    }
    eval
}

fn clamp_to_domain(xi: [f64; 2]) -> Result<[f64; 2]> {
    let mut out = xi;
    for c in out.iter_mut() {
        if !c.is_finite() || c.abs() > 1.0 + DOMAIN_TOL {
            return Err(Error::InvalidBasis(format!(
                "point ({}, {}) outside master domain",
                xi[0], xi[1]
            )));
        }
        *c = c.clamp(-1.0, 1.0);
    }
    Ok(out)
}

/// Evaluate all shape functions of `basis` at parametric point `xi`.
pub fn eval_basis(basis: &ElementBasis, xi: [f64; 2]) -> Result<BasisEval> {
    let xi = clamp_to_domain(xi)?;
    match basis {
        ElementBasis::LagrangeLinear => Ok(tensor(
            &lagrange_linear_1d(xi[0]),
            &lagrange_linear_1d(xi[1]),
        )),
        ElementBasis::LagrangeQuadratic => Ok(tensor(
            &lagrange_quadratic_1d(xi[0]),
            &lagrange_quadratic_1d(xi[1]),
        )),
        ElementBasis::BezierExtracted(bz) => eval_bezier(bz, xi),
    }
}

fn eval_bezier(bz: &BezierBasis, xi: [f64; 2]) -> Result<BasisEval> {
    let p = bz.degree;
    let bern = tensor(&bernstein_1d(p, xi[0]), &bernstein_1d(p, xi[1]));
    let c = &bz.extraction;
    if c.ncols() != bern.len() {
        return Err(Error::InvalidBasis(
            "extraction operator dimension mismatch".into(),
        ));
    }
    let n_ne = c.nrows();

    // Polynomial spline functions N = C B and their derivatives.
    let mut n = vec![0.0; n_ne];
    let mut dn = vec![[0.0; 2]; n_ne];
    let mut d2n = vec![[0.0; 3]; n_ne];
    for i in 0..n_ne {
        for j in 0..bern.len() {
            let cij = c[(i, j)];
            if cij == 0.0 {
                continue;
            }
            n[i] += cij * bern.n[j];
            for a in 0..2 {
                dn[i][a] += cij * bern.dn[j][a];
            }
            for a in 0..3 {
                d2n[i][a] += cij * bern.d2n[j][a];
            }
        }
    }

    // Rational weighting with the quotient rule.
    let w = &bz.weights;
    let mut wsum = 0.0;
    let mut wd = [0.0; 2];
    let mut wdd = [0.0; 3];
    for i in 0..n_ne {
        wsum += w[i] * n[i];
        for a in 0..2 {
            wd[a] += w[i] * dn[i][a];
        }
        for a in 0..3 {
            wdd[a] += w[i] * d2n[i][a];
        }
    }
    if !(wsum.is_finite() && wsum > 0.0) {
        return Err(Error::InvalidBasis(format!(
            "weight function W = {wsum} not positive"
        )));
    }
    let inv = 1.0 / wsum;
    let mut out = BasisEval {
        n: vec![0.0; n_ne],
        dn: vec![[0.0; 2]; n_ne],
        d2n: vec![[0.0; 3]; n_ne],
    };
    // (α, β) index pairs for the three stored second derivatives.
    const PAIRS: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];
    for i in 0..n_ne {
        let r = n[i] * inv;
        out.n[i] = w[i] * r;
        let mut dr = [0.0; 2];
        for a in 0..2 {
            dr[a] = (dn[i][a] - r * wd[a]) * inv;
            out.dn[i][a] = w[i] * dr[a];
        }
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            // R = N/W  ⇒  R_ab = (N_ab - R_a W_b - R_b W_a - R W_ab) / W
            let rab = (d2n[i][k] - dr[a] * wd[b] - dr[b] * wd[a] - r * wdd[k]) * inv;
            out.d2n[i][k] = w[i] * rab;
        }
    }
    Ok(out)
}
