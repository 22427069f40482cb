//! Built-in meshes: sphere octants and their reflections, and the flat sheet.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spline::{greville, open_uniform_knots, refine, TensorPatch};
use super::{Element, Mesh, SET_CLAMPED, SET_SYM_X, SET_SYM_Y, SET_SYM_Z};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::master_element::{BezierBasis, ElementBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    LagrangeLinear,
    LagrangeQuadratic,
    /// Quadratic NURBS through Bézier extraction.
    Nurbs,
}

impl ElementKind {
    fn lagrange_order(self) -> Option<usize> {
        match self {
            ElementKind::LagrangeLinear => Some(1),
            ElementKind::LagrangeQuadratic => Some(2),
            ElementKind::Nurbs => None,
        }
    }

    fn lagrange_basis(order: usize) -> ElementBasis {
        if order == 1 {
            ElementBasis::LagrangeLinear
        } else {
            ElementBasis::LagrangeQuadratic
        }
    }
}

/// Which octants of the sphere to mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OctantSet {
    /// `x, y, z ≥ 0`.
    Octant,
    /// `x, y ≥ 0`, both hemispheres.
    Quarter,
    Full,
}

impl OctantSet {
    fn signs(self) -> Vec<[f64; 3]> {
        let zs: &[f64] = match self {
            OctantSet::Octant => &[1.0],
            _ => &[1.0, -1.0],
        };
        let xy: &[f64] = match self {
            OctantSet::Full => &[1.0, -1.0],
            _ => &[1.0],
        };
        let mut out = Vec::new();
        for &sz in zs {
            for &sy in xy {
                for &sx in xy {
                    out.push([sx, sy, sz]);
                }
            }
        }
        out
    }
}

/// Merges coincident points by quantized position.
struct NodePool {
    coords: Vec<Vec3>,
    index: HashMap<[i64; 3], usize>,
    quantum: f64,
}

impl NodePool {
    fn new(scale: f64) -> Self {
        Self {
            coords: Vec::new(),
            index: HashMap::new(),
            quantum: 1e-9 * scale,
        }
    }

    fn insert(&mut self, x: Vec3) -> usize {
        let key = [
            (x[0] / self.quantum).round() as i64,
            (x[1] / self.quantum).round() as i64,
            (x[2] / self.quantum).round() as i64,
        ];
        *self.index.entry(key).or_insert_with(|| {
            self.coords.push(x);
            self.coords.len() - 1
        })
    }
}

fn plane_sets(coords: &[Vec3], scale: f64, planes: [bool; 3]) -> BTreeMap<String, Vec<usize>> {
    let mut sets = BTreeMap::new();
    for (c, name) in [SET_SYM_X, SET_SYM_Y, SET_SYM_Z].into_iter().enumerate() {
        if planes[c] {
            let ids = (0..coords.len())
                .filter(|&i| coords[i][c].abs() <= 1e-10 * scale)
                .collect();
            sets.insert(name.to_string(), ids);
        }
    }
    sets
}

/// Outward-oriented mesh of the octant `x, y, z ≥ 0` of a sphere.
///
/// The NURBS kind is a single exact rational biquadratic patch with the pole
/// collapsed onto one control point; `ξ¹` runs along the circles of latitude
/// and `ξ²` from the equator to the pole, with `n_circ × n_merid` elements.
/// The Lagrange kinds split the octant into three quadrilateral patches
/// around the point `(1,1,1)/√3`, each with `n_circ × n_merid` elements and
/// nodes projected onto the sphere; conformity between patches requires
/// `n_circ == n_merid`.
pub fn make_sphere_octant(
    n_circ: usize,
    n_merid: usize,
    kind: ElementKind,
    radius: f64,
) -> Result<Mesh> {
    make_sphere(OctantSet::Octant, n_circ, n_merid, kind, radius)
}

/// Sphere mesh over the requested octants, built by reflecting the octant.
pub fn make_sphere(
    set: OctantSet,
    n_circ: usize,
    n_merid: usize,
    kind: ElementKind,
    radius: f64,
) -> Result<Mesh> {
    if n_circ == 0 || n_merid == 0 {
        return Err(Error::InvalidMesh("element counts must be positive".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidMesh(format!("invalid radius {radius}")));
    }
    let (coords, elements) = match kind.lagrange_order() {
        Some(order) => {
            if n_circ != n_merid {
                return Err(Error::InvalidMesh(
                    "three-patch Lagrange octant needs n_circ == n_merid".into(),
                ));
            }
            lagrange_octant(n_circ, order, radius)
        }
        None => nurbs_octant(n_circ, n_merid, radius)?,
    };

    let mut pool = NodePool::new(radius);
    let mut out_elements = Vec::new();
    for s in set.signs() {
        let flip = s.iter().filter(|v| **v < 0.0).count() % 2 == 1;
        let map: Vec<usize> = coords
            .iter()
            .map(|x| pool.insert(Vec3::new(s[0] * x[0], s[1] * x[1], s[2] * x[2])))
            .collect();
        for el in &elements {
            let el = if flip {
                transpose_element(el)?
            } else {
                el.clone()
            };
            out_elements.push(Element {
                basis: el.basis,
                nodes: el.nodes.iter().map(|&i| map[i]).collect(),
            });
        }
    }
    let planes = match set {
        OctantSet::Octant => [true, true, true],
        OctantSet::Quarter => [true, true, false],
        OctantSet::Full => [false, false, false],
    };
    let sets = plane_sets(&pool.coords, radius, planes);
    Mesh::new(pool.coords, out_elements, sets, set == OctantSet::Full, 1.0)
}

/// Swap the roles of `ξ¹` and `ξ²`, reversing the element normal.
fn transpose_element(el: &Element) -> Result<Element> {
    let n = el.nodes.len();
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n {
        return Err(Error::InvalidMesh(
            "cannot transpose a non-tensor element".into(),
        ));
    }
    let perm: Vec<usize> = (0..n).map(|k| (k / m) + m * (k % m)).collect();
    let nodes = perm.iter().map(|&k| el.nodes[k]).collect();
    let basis = match &el.basis {
        ElementBasis::BezierExtracted(b) => {
            let c = b.extraction();
            let mb = b.degree() + 1;
            let col_perm: Vec<usize> = (0..mb * mb).map(|k| (k / mb) + mb * (k % mb)).collect();
            let ct = DMatrix::from_fn(c.nrows(), c.ncols(), |r, q| c[(perm[r], col_perm[q])]);
            let w = perm.iter().map(|&k| b.weights()[k]).collect();
            ElementBasis::BezierExtracted(BezierBasis::new(b.degree(), ct, w)?)
        }
        other => other.clone(),
    };
    Ok(Element { basis, nodes })
}

fn lagrange_octant(n: usize, order: usize, radius: f64) -> (Vec<Vec3>, Vec<Element>) {
    let e = [Vec3::x(), Vec3::y(), Vec3::z()];
    let centre = Vec3::new(1.0, 1.0, 1.0).normalize();
    let mut pool = NodePool::new(radius);
    let mut elements = Vec::new();
    let np = order * n + 1;
    for k in 0..3 {
        let (a, b, c) = (e[k], e[(k + 1) % 3], e[(k + 2) % 3]);
        let corners = [a, (a + b).normalize(), centre, (a + c).normalize()];
        let mut ids = vec![0usize; np * np];
        for j in 0..np {
            for i in 0..np {
                let s = i as f64 / (np - 1) as f64;
                let t = j as f64 / (np - 1) as f64;
                let p = (1.0 - s) * (1.0 - t) * corners[0]
                    + s * (1.0 - t) * corners[1]
                    + s * t * corners[2]
                    + (1.0 - s) * t * corners[3];
                ids[i + np * j] = pool.insert(p.normalize() * radius);
            }
        }
        for ej in 0..n {
            for ei in 0..n {
                let mut nodes = Vec::with_capacity((order + 1) * (order + 1));
                for b in 0..=order {
                    for a in 0..=order {
                        nodes.push(ids[(order * ei + a) + np * (order * ej + b)]);
                    }
                }
                elements.push(Element {
                    basis: ElementKind::lagrange_basis(order),
                    nodes,
                });
            }
        }
    }
    (pool.coords, elements)
}

fn nurbs_octant(n_circ: usize, n_merid: usize, radius: f64) -> Result<(Vec<Vec3>, Vec<Element>)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Homogeneous quarter circle `(w·x, w·y, w)`, used both for the latitude
    // circles and for the meridian profile `(r, z)`.
    let quarter = [[1.0, 0.0, 1.0], [s, s, s], [0.0, 1.0, 1.0]];
    let k0 = open_uniform_knots(2, 1);
    let ku = open_uniform_knots(2, n_circ);
    let kv = open_uniform_knots(2, n_merid);
    let circ = refine(&k0, 2, &quarter, &ku)?;
    let merid = refine(&k0, 2, &quarter, &kv)?;
    let mut points = Vec::with_capacity(circ.len() * merid.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for m in &merid {
        for c in &circ {
            let w = c[2] * m[2];
            points.push([
                radius * c[0] * m[0] / w,
                radius * c[1] * m[0] / w,
                radius * c[2] * m[1] / w,
            ]);
            weights.push(w);
        }
    }
    let patch = TensorPatch {
        degree: 2,
        knots_u: ku,
        knots_v: kv,
        points,
        weights,
    };
    let mut pool = NodePool::new(radius);
    let ids: Vec<usize> = patch
        .points
        .iter()
        .map(|p| pool.insert(Vec3::from(*p)))
        .collect();
    let elements = patch
        .elements()?
        .into_iter()
        .map(|(basis, local)| Element {
            basis: ElementBasis::BezierExtracted(basis),
            nodes: local.into_iter().map(|i| ids[i]).collect(),
        })
        .collect();
    Ok((pool.coords, elements))
}

/// Flat `n × n` sheet over `[-h, h]²` in the plane `z = 0`, normal `+z`.
///
/// The NURBS kind is an open uniform biquadratic B-spline with control points
/// at the Greville abscissae, so the geometry map is affine.
pub fn make_square_sheet(
    n: usize,
    kind: ElementKind,
    half_width: f64,
    prestretch: f64,
) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh(
            "sheet needs at least one element".into(),
        ));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "invalid half width {half_width}"
        )));
    }
    if !(prestretch.is_finite() && prestretch >= 1.0) {
        return Err(Error::InvalidMesh(format!(
            "prestretch must be >= 1, got {prestretch}"
        )));
    }
    let (coords, elements, np) = match kind.lagrange_order() {
        Some(order) => {
            let np = order * n + 1;
            let coords = (0..np * np)
                .map(|k| {
                    let (i, j) = (k % np, k / np);
                    Vec3::new(
                        -half_width + 2.0 * half_width * i as f64 / (np - 1) as f64,
                        -half_width + 2.0 * half_width * j as f64 / (np - 1) as f64,
                        0.0,
                    )
                })
                .collect();
            let mut elements = Vec::new();
            for ej in 0..n {
                for ei in 0..n {
                    let mut nodes = Vec::new();
                    for b in 0..=order {
                        for a in 0..=order {
                            nodes.push((order * ei + a) + np * (order * ej + b));
                        }
                    }
                    elements.push(Element {
                        basis: ElementKind::lagrange_basis(order),
                        nodes,
                    });
                }
            }
            (coords, elements, np)
        }
        None => {
            let knots = open_uniform_knots(2, n);
            let g = greville(&knots, 2);
            let np = g.len();
            let mut points = Vec::with_capacity(np * np);
            for v in &g {
                for u in &g {
                    points.push([
                        half_width * (2.0 * u - 1.0),
                        half_width * (2.0 * v - 1.0),
                        0.0,
                    ]);
                }
            }
            let patch = TensorPatch {
                degree: 2,
                knots_u: knots.clone(),
                knots_v: knots,
                weights: vec![1.0; points.len()],
                points,
            };
            let elements = patch
                .elements()?
                .into_iter()
                .map(|(basis, nodes)| Element {
                    basis: ElementBasis::BezierExtracted(basis),
                    nodes,
                })
                .collect();
            let coords = patch.points.iter().map(|p| Vec3::from(*p)).collect();
            (coords, elements, np)
        }
    };
    let clamped = (0..np * np)
        .filter(|k| {
            let (i, j) = (k % np, k / np);
            i == 0 || j == 0 || i == np - 1 || j == np - 1
        })
        .collect();
    let mut sets = BTreeMap::new();
    sets.insert(SET_CLAMPED.to_string(), clamped);
    Mesh::new(coords, elements, sets, false, prestretch)
}
