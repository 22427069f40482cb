//! Element force vectors, consistent tangents and their global assembly.

mod contact;
mod element;

use faer::sparse::SparseColMat;
use nalgebra::DMatrix;

use crate::constitutive::MaterialModel;
use crate::error::{Error, Result};
use crate::geometry::{frame, ReferenceMetric, Vec3};
use crate::master_element::{eval_basis, gauss_rule, BasisEval};
use crate::mesh::{BoundaryConditions, LoadCase, Mesh, SystemState};

pub use contact::{obstacle_gap, Gap};
pub use element::{
    element_arrays, element_inplane_force, element_internal_split, element_volume, InternalSplit,
};

/// How element loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel element loop; falls back to sequential without the
    /// `parallel` feature. Results are identical to the sequential path.
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Basis data and stress-free reference metric at one quadrature point.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub xi: [f64; 2],
    pub weight: f64,
    pub eval: BasisEval,
    /// Stress-free metric, including any pre-stretch.
    pub reference: ReferenceMetric,
    /// `J_A` of the undeformed mesh, used for dead loads.
    pub ja_mesh: f64,
}

/// Per-element quadrature data, computed once per mesh and rule.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub points: Vec<Vec<QuadPoint>>,
    /// Gauss points per direction, per element.
    pub order: Vec<usize>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, quadrature: Option<usize>) -> Result<Self> {
        let mut points = Vec::with_capacity(mesh.elements.len());
        let mut order = Vec::with_capacity(mesh.elements.len());
        for (e, el) in mesh.elements.iter().enumerate() {
            let q = quadrature.unwrap_or_else(|| el.basis.default_quadrature());
            let rule = gauss_rule(q)?;
            let xe = mesh.element_coords(e, &mesh.ref_coords);
            let mut pts = Vec::with_capacity(rule.len());
            for (xi, weight) in rule.iter() {
                let eval = eval_basis(&el.basis, xi)?;
                let f = frame(&eval, &xe, false)?;
                let reference = ReferenceMetric::from_frame(&f).prestretched(mesh.prestretch);
                pts.push(QuadPoint {
                    xi,
                    weight,
                    eval,
                    reference,
                    ja_mesh: f.ja,
                });
            }
            points.push(pts);
            order.push(q);
        }
        Ok(Self { points, order })
    }
}

/// Everything the element kernels need besides the current state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub bcs: BoundaryConditions,
    pub load: LoadCase,
    pub model: MaterialModel,
    pub disc: Discretization,
    /// Nodal force unit `stiffness · h`, with `h` the characteristic element size.
    pub force_unit: f64,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        bcs: BoundaryConditions,
        load: LoadCase,
        model: MaterialModel,
        quadrature: Option<usize>,
    ) -> Result<Self> {
        model.validate()?;
        load.validate(&mesh)?;
        if bcs.fixed.len() != mesh.n_nodes() || bcs.prescribed.len() != mesh.n_nodes() {
            return Err(Error::InvalidMesh(
                "boundary conditions do not match the mesh".into(),
            ));
        }
        let disc = Discretization::new(&mesh, quadrature)?;
        let force_unit = model.stiffness_scale() * mesh.characteristic_size()?;
        Ok(Self {
            mesh,
            bcs,
            load,
            model,
            disc,
            force_unit,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }
}

/// Element-level forces and couplings in element dof order `3·I + i`.
#[derive(Debug, Clone)]
pub struct ElementArrays {
    pub nodes: Vec<usize>,
    pub f_int: Vec<f64>,
    pub f_ext: Vec<f64>,
    pub f_c: Vec<f64>,
    /// `∂(f_int − f_ext + f_c)/∂x_e`, when requested.
    pub k: Option<DMatrix<f64>>,
    /// `∂f_ext/∂p_v = ∫ N n da`.
    pub l_ext: Vec<f64>,
    /// `∂V_e/∂x_e`.
    pub h_v: Vec<f64>,
    /// Element contribution to the enclosed volume.
    pub volume: f64,
}

impl ElementArrays {
    pub fn residual(&self) -> Vec<f64> {
        (0..self.f_int.len())
            .map(|i| self.f_int[i] - self.f_ext[i] + self.f_c[i])
            .collect()
    }
}

/// Assembled residual, tangent and constraint couplings.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    /// `f = f_int − f_ext + f_c`, zero at fixed dofs.
    pub residual: Vec<f64>,
    /// Tangent with identity rows and columns at fixed dofs.
    pub tangent: Option<SparseColMat<usize, f64>>,
    /// `∂f_ext/∂p_v`, zero at fixed dofs.
    pub l_ext: Vec<f64>,
    /// `∂V/∂x`, zero at fixed dofs.
    pub h_v: Vec<f64>,
    pub volume: f64,
    /// `V − V̄` when a volume constraint is active.
    pub g_v: Option<f64>,
}

/// Assemble the global system at `state`.
pub fn assemble(
    problem: &Problem,
    state: &SystemState,
    with_tangent: bool,
    exec: Execution,
) -> Result<GlobalSystem> {
    let n = problem.n_dofs();
    let arrays = exec.map(problem.mesh.elements.len(), |e| {
        element_arrays(problem, e, &state.coords, state.p_v, with_tangent)
    });
    let mut residual = vec![0.0; n];
    let mut l_ext = vec![0.0; n];
    let mut h_v = vec![0.0; n];
    let mut volume = 0.0;
    let mut triplets = Vec::new();
    let fixed = |d: usize| problem.bcs.is_fixed(d);
    for arr in arrays {
        let arr = arr?;
        let dofs: Vec<usize> = arr
            .nodes
            .iter()
            .flat_map(|&i| [3 * i, 3 * i + 1, 3 * i + 2])
            .collect();
        let r = arr.residual();
        for (a, &d) in dofs.iter().enumerate() {
            residual[d] += r[a];
            l_ext[d] += arr.l_ext[a];
            h_v[d] += arr.h_v[a];
        }
        volume += arr.volume;
        if let Some(k) = &arr.k {
            for (b, &db) in dofs.iter().enumerate() {
                if fixed(db) {
                    continue;
                }
                for (a, &da) in dofs.iter().enumerate() {
                    if !fixed(da) {
                        triplets.push((da, db, k[(a, b)]));
                    }
                }
            }
        }
    }
    for d in (0..n).filter(|&d| fixed(d)) {
        residual[d] = 0.0;
        l_ext[d] = 0.0;
        h_v[d] = 0.0;
        if with_tangent {
            triplets.push((d, d, 1.0));
        }
    }
    let tangent = if with_tangent {
        Some(
            SparseColMat::try_new_from_triplets(n, n, &triplets)
                .map_err(|e| Error::SingularSystem(format!("tangent assembly failed: {e:?}")))?,
        )
    } else {
        None
    };
    let g_v = match problem.load.pressure {
        crate::mesh::PressureMode::VolumeConstraint { target } => Some(volume - target),
        crate::mesh::PressureMode::Prescribed { .. } => None,
    };
    Ok(GlobalSystem {
        residual,
        tangent,
        l_ext,
        h_v,
        volume,
        g_v,
    })
}

/// Dense copy of a sparse matrix, for tests and small audits.
pub fn to_dense(m: &SparseColMat<usize, f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let rows = m.row_indices_of_col(j);
        let vals = m.values_of_col(j);
        for (i, v) in rows.zip(vals) {
            out[(i, j)] += *v;
        }
    }
    out
}

/// Current positions of element `e`.
pub(crate) fn gather(problem: &Problem, e: usize, coords: &[Vec3]) -> Vec<Vec3> {
    problem.mesh.element_coords(e, coords)
}
