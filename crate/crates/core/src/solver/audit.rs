//! Finite-difference audit of the analytic element tangents.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{element_arrays, element_volume, ElementArrays, Problem};
use crate::error::Result;
use crate::geometry::{frame, interpolate, Vec3};
use crate::mesh::{Hydrostatic, HydrostaticSign, LoadCase, Obstacle, ObstacleShape, SystemState};

/// Relative central-difference step.
const FD_STEP: f64 = 1e-6;

/// Worst relative mismatch of one tangent block over all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub block: &'static str,
    pub max_rel_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub blocks: Vec<BlockError>,
}

impl AuditReport {
    pub fn max_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.blocks
            .iter()
            .map(|b| {
                format!(
                    "block={} samples={} max_rel_error={:.3e}",
                    b.block, b.samples, b.max_rel_error
                )
            })
            .collect()
    }
}

/// Element dofs collapsed onto distinct global nodes, so that elements with
/// repeated node ids (a collapsed pole) compare against global differences.
struct NodeMap {
    unique: Vec<usize>,
    local_to_unique: Vec<usize>,
}

impl NodeMap {
    fn new(nodes: &[usize]) -> Self {
        let mut unique: Vec<usize> = Vec::new();
        let local_to_unique = nodes
            .iter()
            .map(|n| match unique.iter().position(|u| u == n) {
                Some(k) => k,
                None => {
                    unique.push(*n);
                    unique.len() - 1
                }
            })
            .collect();
        Self {
            unique,
            local_to_unique,
        }
    }

    fn vector(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.unique.len()];
        for (a, x) in v.iter().enumerate() {
            out[3 * self.local_to_unique[a / 3] + a % 3] += x;
        }
        out
    }

    fn matrix(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let m = 3 * self.unique.len();
        let mut out = DMatrix::zeros(m, m);
        for a in 0..k.nrows() {
            let ra = 3 * self.local_to_unique[a / 3] + a % 3;
            for b in 0..k.ncols() {
                let cb = 3 * self.local_to_unique[b / 3] + b % 3;
                out[(ra, cb)] += k[(a, b)];
            }
        }
        out
    }
}

fn rel_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    let scale = analytic.amax().max(fd.amax());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - fd).amax() / scale
    }
}

fn element_size(xe: &[Vec3]) -> f64 {
    let mut lo = xe[0];
    let mut hi = xe[0];
    for x in xe {
        lo = lo.inf(x);
        hi = hi.sup(x);
    }
    (hi - lo).norm()
}

fn bare_load() -> LoadCase {
    LoadCase {
        dead_load: [0.0; 3],
        obstacles: Vec::new(),
        hydrostatic: None,
        tractions: Vec::new(),
        pressure: crate::mesh::PressureMode::Prescribed { p: 0.0 },
    }
}

/// Analytic tangent and its central-difference counterpart, in unique-node dofs.
fn tangent_pair(
    problem: &Problem,
    e: usize,
    coords: &[Vec3],
    p_v: f64,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let arr: ElementArrays = element_arrays(problem, e, coords, p_v, true)?;
    let map = NodeMap::new(&arr.nodes);
    let analytic = map.matrix(arr.k.as_ref().expect("tangent requested"));
    let m = 3 * map.unique.len();
    let mut fd = DMatrix::zeros(m, m);
    let mut x = coords.to_vec();
    for col in 0..m {
        let (node, c) = (map.unique[col / 3], col % 3);
        let x0 = x[node][c];
        x[node][c] = x0 + h;
        let rp = map.vector(&element_arrays(problem, e, &x, p_v, false)?.residual());
        x[node][c] = x0 - h;
        let rm = map.vector(&element_arrays(problem, e, &x, p_v, false)?.residual());
        x[node][c] = x0;
        for row in 0..m {
            fd[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
        }
    }
    Ok((analytic, fd))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n < 1.0 {
            return v / n;
        }
    }
}

/// Compare every analytic element tangent block with central differences at
/// `n_samples` randomly perturbed states around `state`.
///
/// Blocks: internal (`k_mat + k_geo`, plus the stabilization part),
/// live pressure, hydrostatic pressure, contact, `h_v` and `l_ext`. Each
/// load block is isolated by subtracting the internal contribution.
pub fn fd_tangent_audit(
    problem: &Problem,
    state: &SystemState,
    n_samples: usize,
    seed: u64,
) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "k_int",
        "k_ext_pressure",
        "k_ext_hydrostatic",
        "k_c",
        "h_v",
        "l_ext",
    ];
    let mut worst = [0.0f64; 6];
    let n_el = problem.mesh.elements.len();
    let scale = problem.model.stiffness_scale();

    let mut base = problem.clone();
    base.load = bare_load();

    for _ in 0..n_samples {
        let e = rng.gen_range(0..n_el);
        let x_state = problem.mesh.element_coords(e, &state.coords);
        let size = element_size(&x_state);
        let mut coords = state.coords.clone();
        for &n in &problem.mesh.elements[e].nodes {
            coords[n] += 0.02 * size * random_unit(&mut rng);
        }
        let xe = problem.mesh.element_coords(e, &coords);
        let h = FD_STEP * size;

        let (k0, fd0) = tangent_pair(&base, e, &coords, 0.0, h)?;
        worst[0] = worst[0].max(rel_error(&k0, &fd0));

        let p = scale / size * rng.gen_range(0.5..2.0);
        let (k1, fd1) = tangent_pair(&base, e, &coords, p, h)?;
        worst[1] = worst[1].max(rel_error(&(&k1 - &k0), &(&fd1 - &fd0)));

        let mut hydro = base.clone();
        hydro.load.hydrostatic = Some(Hydrostatic {
            rho: scale / (size * size),
            g_vec: random_unit(&mut rng).into(),
            sign: problem
                .load
                .hydrostatic
                .map_or(HydrostaticSign::Physical, |h| h.sign),
        });
        let (k2, fd2) = tangent_pair(&hydro, e, &coords, 0.0, h)?;
        worst[2] = worst[2].max(rel_error(&(&k2 - &k0), &(&fd2 - &fd0)));

        // Obstacles placed to cut through the element.
        let qp = &problem.disc.points[e][0];
        let f = frame(&qp.eval, &xe, false)?;
        let centre = xe.iter().sum::<Vec3>() / xe.len() as f64;
        let normal = (f.n + 0.3 * random_unit(&mut rng)).normalize();
        let eps = 100.0 * scale / size;
        let mut contact = base.clone();
        contact.load.obstacles = vec![
            Obstacle {
                shape: ObstacleShape::HalfSpace {
                    normal: normal.into(),
                    offset: normal.dot(&centre),
                },
                epsilon_n: eps,
            },
            Obstacle {
                shape: ObstacleShape::Sphere {
                    center: (interpolate(&qp.eval, &xe) - 0.5 * size * f.n).into(),
                    radius: 0.6 * size,
                },
                epsilon_n: eps,
            },
        ];
        let (k3, fd3) = tangent_pair(&contact, e, &coords, 0.0, h)?;
        worst[3] = worst[3].max(rel_error(&(&k3 - &k0), &(&fd3 - &fd0)));

        // h_v against differences of the element volume.
        let arr = element_arrays(&base, e, &coords, 0.0, false)?;
        let map = NodeMap::new(&arr.nodes);
        let hv = map.vector(&arr.h_v);
        let mut fd_h = vec![0.0; hv.len()];
        let mut x = coords.clone();
        for (col, slot) in fd_h.iter_mut().enumerate() {
            let (node, c) = (map.unique[col / 3], col % 3);
            let x0 = x[node][c];
            x[node][c] = x0 + h;
            let vp = element_volume(&base, e, &x)?;
            x[node][c] = x0 - h;
            let vm = element_volume(&base, e, &x)?;
            x[node][c] = x0;
            *slot = (vp - vm) / (2.0 * h);
        }
        worst[4] = worst[4].max(rel_error(
            &DMatrix::from_column_slice(hv.len(), 1, &hv),
            &DMatrix::from_column_slice(fd_h.len(), 1, &fd_h),
        ));

        // l_ext against differences in the datum pressure.
        let dp = 1e-3 * p;
        let fp = element_arrays(&base, e, &coords, p + dp, false)?.f_ext;
        let fm = element_arrays(&base, e, &coords, p - dp, false)?.f_ext;
        let fd_l: Vec<f64> = fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * dp))
            .collect();
        worst[5] = worst[5].max(rel_error(
            &DMatrix::from_column_slice(arr.l_ext.len(), 1, &arr.l_ext),
            &DMatrix::from_column_slice(fd_l.len(), 1, &fd_l),
        ));
    }
    Ok(AuditReport {
        blocks: names
            .iter()
            .zip(worst)
            .map(|(&block, max_rel_error)| BlockError {
                block,
                max_rel_error,
                samples: n_samples,
            })
            .collect(),
    })
}
