//! Discrete problem definition: nodes, elements, boundary conditions, loads
//! and the evolving solver state.

mod generators;
mod io;
pub mod spline;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{frame, interpolate, Vec3};
use crate::master_element::{eval_basis, gauss_rule, ElementBasis};

pub use generators::{make_sphere, make_sphere_octant, make_square_sheet, ElementKind, OctantSet};
pub use io::MeshFile;

/// Reserved node-set names emitted by the generators.
pub const SET_CLAMPED: &str = "clamped";
pub const SET_SYM_X: &str = "sym_x";
pub const SET_SYM_Y: &str = "sym_y";
pub const SET_SYM_Z: &str = "sym_z";

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub basis: ElementBasis,
    pub nodes: Vec<usize>,
}

/// Edge `k` of the master square: 0 `ξ²=-1`, 1 `ξ¹=+1`, 2 `ξ²=+1`, 3 `ξ¹=-1`.
pub fn edge_point(edge: usize, s: f64) -> [f64; 2] {
    match edge {
        0 => [s, -1.0],
        1 => [1.0, s],
        2 => [-s, 1.0],
        _ => [-1.0, -s],
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub ref_coords: Vec<Vec3>,
    pub elements: Vec<Element>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub closed: bool,
    /// Isotropic pre-stretch applied to the stress-free reference metric.
    pub prestretch: f64,
    boundary_edges: Vec<(usize, usize)>,
}

impl Mesh {
    pub fn new(
        ref_coords: Vec<Vec3>,
        elements: Vec<Element>,
        node_sets: BTreeMap<String, Vec<usize>>,
        closed: bool,
        prestretch: f64,
    ) -> Result<Self> {
        if ref_coords.iter().any(|x| !x.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite reference coordinate".into()));
        }
        if !(prestretch.is_finite() && prestretch > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "invalid prestretch {prestretch}"
            )));
        }
        let n = ref_coords.len();
        for (e, el) in elements.iter().enumerate() {
            if el.nodes.len() != el.basis.n_ne() {
                return Err(Error::InvalidMesh(format!(
                    "element {e}: {} nodes but basis has {} functions",
                    el.nodes.len(),
                    el.basis.n_ne()
                )));
            }
            if let Some(bad) = el.nodes.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "element {e}: node id {bad} out of range"
                )));
            }
        }
        for (name, ids) in &node_sets {
            if let Some(bad) = ids.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "node set {name}: id {bad} out of range"
                )));
            }
        }
        let mut mesh = Self {
            ref_coords,
            elements,
            node_sets,
            closed,
            prestretch,
            boundary_edges: Vec::new(),
        };
        mesh.boundary_edges = mesh.find_boundary_edges()?;
        if closed && !mesh.boundary_edges.is_empty() {
            log::debug!(
                "closed mesh has {} unmatched element edges",
                mesh.boundary_edges.len()
            );
        }
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.ref_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.ref_coords.len()
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::InvalidMesh(format!("unknown node set '{name}'")))
    }

    /// Element edges not shared with any other element, as `(element, edge)`.
    pub fn boundary_edges(&self) -> &[(usize, usize)] {
        &self.boundary_edges
    }

    pub fn element_coords(&self, e: usize, coords: &[Vec3]) -> Vec<Vec3> {
        self.elements[e].nodes.iter().map(|&i| coords[i]).collect()
    }

    /// Square root of the mean reference element area.
    pub fn characteristic_size(&self) -> Result<f64> {
        let mut total = 0.0;
        for e in 0..self.elements.len() {
            let rule = gauss_rule(self.elements[e].basis.default_quadrature())?;
            let xe = self.element_coords(e, &self.ref_coords);
            for (xi, w) in rule.iter() {
                let ev = eval_basis(&self.elements[e].basis, xi)?;
                total += w * frame(&ev, &xe, false)?.ja;
            }
        }
        Ok((total / self.elements.len().max(1) as f64).sqrt())
    }

    fn find_boundary_edges(&self) -> Result<Vec<(usize, usize)>> {
        let scale = self
            .ref_coords
            .iter()
            .map(|x| x.amax())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let q = |x: &Vec3| -> [i64; 3] {
            let s = 1e-7 * scale;
            [
                (x[0] / s).round() as i64,
                (x[1] / s).round() as i64,
                (x[2] / s).round() as i64,
            ]
        };
        let mut count: HashMap<[[i64; 3]; 3], Vec<(usize, usize)>> = HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            let xe = self.element_coords(e, &self.ref_coords);
            for edge in 0..4 {
                let mut pts = [[0i64; 3]; 3];
                for (k, s) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
                    let ev = eval_basis(&el.basis, edge_point(edge, s))?;
                    pts[k] = q(&interpolate(&ev, &xe));
                }
                if pts[0] > pts[2] {
                    pts.swap(0, 2);
                }
                count.entry(pts).or_default().push((e, edge));
            }
        }
        let mut out: Vec<(usize, usize)> = count
            .into_values()
            .filter(|v| v.len() == 1)
            .map(|v| v[0])
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

/// Enclosed volume `V = (1/3) Σ_e ∫ x·n da`.
///
/// For open meshes the surface is closed by the cone joining the boundary to
/// the origin, on which `x·n = 0`. When the whole boundary is planar that
/// cone must degenerate to the flat closure, so the plane has to contain
/// the origin; otherwise each boundary edge must lie in its own plane
/// through the origin (the symmetry planes of octant models).
pub fn enclosed_volume(mesh: &Mesh, coords: &[Vec3], quadrature: Option<usize>) -> Result<f64> {
    if !mesh.closed {
        check_open_boundary(mesh, coords)?;
    }
    let mut v = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let rule = gauss_rule(quadrature.unwrap_or_else(|| el.basis.default_quadrature()))?;
        let xe = mesh.element_coords(e, coords);
        for (xi, w) in rule.iter() {
            let ev = eval_basis(&el.basis, xi)?;
            let f = frame(&ev, &xe, false)?;
            v += w * f.ja * interpolate(&ev, &xe).dot(&f.n);
        }
    }
    Ok(v / 3.0)
}

fn check_open_boundary(mesh: &Mesh, coords: &[Vec3]) -> Result<()> {
    let mut all = Vec::new();
    let mut edges = Vec::new();
    for &(e, edge) in mesh.boundary_edges() {
        let el = &mesh.elements[e];
        let xe = mesh.element_coords(e, coords);
        let pts: Vec<Vec3> = [-1.0, -0.5, 0.0, 0.5, 1.0]
            .into_iter()
            .map(|s| eval_basis(&el.basis, edge_point(edge, s)).map(|ev| interpolate(&ev, &xe)))
            .collect::<Result<_>>()?;
        all.extend_from_slice(&pts);
        edges.push((e, edge, pts));
    }
    if all.is_empty() {
        return Ok(());
    }
    let centroid = all.iter().sum::<Vec3>() / all.len() as f64;
    let extent = all
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max);
    let scale = extent.max(all.iter().map(|p| p.norm()).fold(0.0, f64::max));
    if scale == 0.0 {
        return Ok(());
    }
    let cov = all
        .iter()
        .map(|p| (p - centroid) * (p - centroid).transpose())
        .sum::<nalgebra::Matrix3<f64>>();
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let planar = eig.eigenvalues[k].max(0.0).sqrt() <= 1e-9 * extent * (all.len() as f64).sqrt();
    if planar {
        let n: Vec3 = eig.eigenvectors.column(k).into();
        let off = n.dot(&centroid).abs();
        if off > 1e-8 * scale {
            return Err(Error::InvalidMesh(format!(
                "open boundary plane misses the origin by {off:e}"
            )));
        }
        return Ok(());
    }
    for (e, edge, pts) in edges {
        let rad = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let mut normal = Vec3::zeros();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let c = pts[i].cross(&pts[j]);
                if c.norm() > normal.norm() {
                    normal = c;
                }
            }
        }
        if rad == 0.0 || normal.norm() <= 1e-12 * rad * rad {
            // Edge lies on a line through the origin.
            continue;
        }
        let normal = normal / normal.norm();
        let off = pts.iter().map(|p| p.dot(&normal).abs()).fold(0.0, f64::max);
        if off > 1e-8 * rad {
            return Err(Error::InvalidMesh(format!(
                "open boundary edge {edge} of element {e} is not in a plane through the origin \
                 (offset {off:e})"
            )));
        }
    }
    Ok(())
}

/// Per-node, per-component Dirichlet constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub fixed: Vec<[bool; 3]>,
    /// Prescribed displacements `x - X` for fixed components.
    pub prescribed: Vec<[f64; 3]>,
}

/// One Dirichlet rule of a scenario: components of every node in `set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    pub set: String,
    pub components: Vec<usize>,
    #[serde(default)]
    pub displacement: Option<[f64; 3]>,
}

impl BoundaryConditions {
    pub fn free(n_nodes: usize) -> Self {
        Self {
            fixed: vec![[false; 3]; n_nodes],
            prescribed: vec![[0.0; 3]; n_nodes],
        }
    }

    pub fn from_specs(mesh: &Mesh, specs: &[DirichletSpec]) -> Result<Self> {
        let mut bc = Self::free(mesh.n_nodes());
        for s in specs {
            let ids = mesh.node_set(&s.set)?;
            let u = s.displacement.unwrap_or([0.0; 3]);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMesh(
                    "non-finite prescribed displacement".into(),
                ));
            }
            for &c in &s.components {
                if c > 2 {
                    return Err(Error::InvalidMesh(format!("component {c} out of range")));
                }
                for &i in ids {
                    bc.fixed[i][c] = true;
                    bc.prescribed[i][c] = u[c];
                }
            }
        }
        Ok(bc)
    }

    /// Reflective symmetry on every generator symmetry set present in `mesh`.
    pub fn symmetry(mesh: &Mesh) -> Self {
        let mut bc = Self::free(mesh.n_nodes());
        for (c, name) in [SET_SYM_X, SET_SYM_Y, SET_SYM_Z].into_iter().enumerate() {
            if let Some(ids) = mesh.node_sets.get(name) {
                for &i in ids {
                    bc.fixed[i][c] = true;
                }
            }
        }
        bc
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof / 3][dof % 3]
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.iter().flatten().filter(|f| **f).count()
    }
}

/// Sign convention for the hydrostatic pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HydrostaticSign {
    /// `p_h = ρ g·x`: pressure grows along the gravity direction, so the
    /// resultant on a closed surface equals the fluid weight.
    #[default]
    Physical,
    /// `p_h = -ρ g·x`.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hydrostatic {
    pub rho: f64,
    pub g_vec: [f64; 3],
    #[serde(default)]
    pub sign: HydrostaticSign,
}

impl Hydrostatic {
    fn factor(&self) -> f64 {
        match self.sign {
            HydrostaticSign::Physical => 1.0,
            HydrostaticSign::Reversed => -1.0,
        }
    }

    pub fn pressure(&self, x: &Vec3) -> f64 {
        self.factor() * self.rho * Vec3::from(self.g_vec).dot(x)
    }

    /// `∂p_h/∂x`.
    pub fn gradient(&self) -> Vec3 {
        self.factor() * self.rho * Vec3::from(self.g_vec)
    }
}

/// How the datum pressure `p_v` is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureMode {
    Prescribed { p: f64 },
    VolumeConstraint { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleShape {
    /// Rigid region `n·y ≤ offset`; `normal` points out of the obstacle.
    HalfSpace { normal: [f64; 3], offset: f64 },
    /// Rigid ball; the membrane stays outside it.
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: ObstacleShape,
    pub epsilon_n: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_n.is_finite() && self.epsilon_n > 0.0) {
            return Err(Error::InvalidLoad(
                "penalty parameter must be positive".into(),
            ));
        }
        match self.shape {
            ObstacleShape::HalfSpace { normal, .. } => {
                let n = Vec3::from(normal).norm();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidLoad(format!(
                        "half-space normal must be unit length (|n| = {n})"
                    )));
                }
            }
            ObstacleShape::Sphere { radius, .. } if radius.is_nan() || radius <= 0.0 => {
                return Err(Error::InvalidLoad(
                    "sphere obstacle radius must be positive".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Dead traction per unit reference length on one element edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeTraction {
    pub element: usize,
    pub edge: usize,
    pub traction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    /// Dead force per unit reference area.
    #[serde(default)]
    pub dead_load: [f64; 3],
    pub pressure: PressureMode,
    #[serde(default)]
    pub hydrostatic: Option<Hydrostatic>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub tractions: Vec<EdgeTraction>,
}

impl LoadCase {
    pub fn prescribed(p: f64) -> Self {
        Self {
            dead_load: [0.0; 3],
            pressure: PressureMode::Prescribed { p },
            hydrostatic: None,
            obstacles: Vec::new(),
            tractions: Vec::new(),
        }
    }

    pub fn volume(target: f64) -> Self {
        Self {
            pressure: PressureMode::VolumeConstraint { target },
            ..Self::prescribed(0.0)
        }
    }

    pub fn volume_constrained(&self) -> bool {
        matches!(self.pressure, PressureMode::VolumeConstraint { .. })
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.dead_load.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLoad("non-finite dead load".into()));
        }
        match self.pressure {
            PressureMode::Prescribed { p } if !p.is_finite() => {
                return Err(Error::InvalidLoad("non-finite prescribed pressure".into()))
            }
            PressureMode::VolumeConstraint { target } if !target.is_finite() => {
                return Err(Error::InvalidLoad("non-finite volume target".into()))
            }
            _ => {}
        }
        if let Some(h) = &self.hydrostatic {
            if !(h.rho.is_finite() && h.rho >= 0.0) || h.g_vec.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidLoad("invalid hydrostatic parameters".into()));
            }
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        for t in &self.tractions {
            if t.element >= mesh.elements.len() || t.edge > 3 {
                return Err(Error::InvalidLoad(format!(
                    "traction on element {} edge {} does not exist",
                    t.element, t.edge
                )));
            }
        }
        Ok(())
    }
}

/// Current nodal positions, volume multiplier and load factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub coords: Vec<Vec3>,
    pub p_v: f64,
    pub load_factor: f64,
}

impl SystemState {
    /// Reference configuration with prescribed displacements applied.
    pub fn initial(mesh: &Mesh, bcs: &BoundaryConditions) -> Self {
        let coords = mesh
            .ref_coords
            .iter()
            .enumerate()
            .map(|(i, x)| x + Vec3::from(bcs.prescribed[i]))
            .collect();
        Self {
            coords,
            p_v: 0.0,
            load_factor: 0.0,
        }
    }

    pub fn dof(&self, d: usize) -> f64 {
        self.coords[d / 3][d % 3]
    }

    pub fn add_to_dof(&mut self, d: usize, v: f64) {
        self.coords[d / 3][d % 3] += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat_patch(offset_z: f64) -> Mesh {
        let coords = vec![
            Vec3::new(0.0, 0.0, offset_z),
            Vec3::new(1.0, 0.0, offset_z),
            Vec3::new(0.0, 1.0, offset_z),
            Vec3::new(1.0, 1.0, offset_z),
        ];
        Mesh::new(
            coords,
            vec![Element {
                basis: ElementBasis::LagrangeLinear,
                nodes: vec![0, 1, 2, 3],
            }],
            BTreeMap::new(),
            false,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn flat_open_sheet_volume_zero() {
        let m = flat_patch(0.0);
        assert_eq!(m.boundary_edges().len(), 4);
        assert_abs_diff_eq!(enclosed_volume(&m, &m.ref_coords, None).unwrap(), 0.0);
    }

    #[test]
    fn open_boundary_off_origin_rejected() {
        let m = flat_patch(0.5);
        assert!(matches!(
            enclosed_volume(&m, &m.ref_coords, None),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn bad_node_ids_rejected() {
        let r = Mesh::new(
            vec![Vec3::zeros(); 3],
            vec![Element {
                basis: ElementBasis::LagrangeLinear,
                nodes: vec![0, 1, 2, 3],
            }],
            BTreeMap::new(),
            false,
            1.0,
        );
        assert!(r.is_err());
        let r = Mesh::new(
            vec![Vec3::zeros(); 4],
            vec![Element {
                basis: ElementBasis::LagrangeLinear,
                nodes: vec![0, 1, 2],
            }],
            BTreeMap::new(),
            false,
            1.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn hydrostatic_signs() {
        let h = Hydrostatic {
            rho: 2.0,
            g_vec: [0.0, 0.0, -1.0],
            sign: HydrostaticSign::Physical,
        };
        assert_abs_diff_eq!(h.pressure(&Vec3::new(0.0, 0.0, -1.0)), 2.0);
        let r = Hydrostatic {
            sign: HydrostaticSign::Reversed,
            ..h
        };
        assert_abs_diff_eq!(r.pressure(&Vec3::new(0.0, 0.0, -1.0)), -2.0);
    }

    #[test]
    fn obstacle_validation() {
        let o = Obstacle {
            shape: ObstacleShape::HalfSpace {
                normal: [0.0, 0.0, 2.0],
                offset: 0.0,
            },
            epsilon_n: 1.0,
        };
        assert!(o.validate().is_err());
        let o = Obstacle {
            shape: ObstacleShape::HalfSpace {
                normal: [0.0, 0.0, 1.0],
                offset: 0.0,
            },
            epsilon_n: 0.0,
        };
        assert!(o.validate().is_err());
    }
}
