use nalgebra::{DMatrix, Matrix3};

use super::contact::obstacle_gap;
use super::{gather, ElementArrays, Problem, QuadPoint};
use crate::constitutive::{evaluate, MaterialModel, Moduli};
use crate::error::Result;
use crate::geometry::{deformation, frame, interpolate, Mat2, SurfaceFrame, Vec3};
use crate::master_element::{eval_basis, gauss_legendre_1d, BasisEval};
use crate::mesh::edge_point;

/// Relative step of the central differences used for the stabilization
/// tangent.
const STAB_FD_STEP: f64 = 1e-7;

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

fn add3(f: &mut [f64], node: usize, v: &Vec3) {
    f[3 * node] += v[0];
    f[3 * node + 1] += v[1];
    f[3 * node + 2] += v[2];
}

fn add_block(k: &mut DMatrix<f64>, i: usize, j: usize, m: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            k[(3 * i + r, 3 * j + c)] += m[(r, c)];
        }
    }
}

/// `Σ_{αβ} N_{I,α} τ^{αβ} a_β`.
fn stress_divergence(ev: &BasisEval, node: usize, tau: &Mat2, f: &SurfaceFrame) -> Vec3 {
    let dn = ev.dn[node];
    let mut v = Vec3::zeros();
    for a in 0..2 {
        for b in 0..2 {
            v += dn[a] * tau[a][b] * f.a[b];
        }
    }
    v
}

/// `Σ_{αβ} N_I τ^{αβ} b_{αβ} n`.
fn curvature_term(ev: &BasisEval, node: usize, tau: &Mat2, b: &Mat2, n: &Vec3) -> Vec3 {
    let s: f64 = (0..2)
        .flat_map(|a| (0..2).map(move |c| (a, c)))
        .map(|(a, c)| tau[a][c] * b[a][c])
        .sum();
    ev.n[node] * s * n
}

/// Material plus geometric stiffness of one quadrature point, scaled by `d_a`.
fn add_internal_tangent(
    k: &mut DMatrix<f64>,
    ev: &BasisEval,
    f: &SurfaceFrame,
    tau: &Mat2,
    c: &Moduli,
    d_a: f64,
) {
    let n = ev.len();
    // ab[β][γ] = a_β ⊗ a_γ
    let ab: [[Matrix3<f64>; 2]; 2] = [
        [f.a[0] * f.a[0].transpose(), f.a[0] * f.a[1].transpose()],
        [f.a[1] * f.a[0].transpose(), f.a[1] * f.a[1].transpose()],
    ];
    for i in 0..n {
        let di = ev.dn[i];
        for j in 0..n {
            let dj = ev.dn[j];
            let mut m = Matrix3::zeros();
            let mut geo = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    geo += di[a] * tau[a][b] * dj[b];
                    for g in 0..2 {
                        for d in 0..2 {
                            let s = c.get(a, b, g, d) * di[a] * dj[d];
                            if s != 0.0 {
                                m += s * ab[b][g];
                            }
                        }
                    }
                }
            }
            for r in 0..3 {
                m[(r, r)] += geo;
            }
            add_block(k, i, j, &(m * d_a));
        }
    }
}

/// `f_int`, `f_inti`, `f_into` of one element for the total stress.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalSplit {
    pub f_int: Vec<f64>,
    pub f_inti: Vec<f64>,
    pub f_into: Vec<f64>,
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

/// Internal force and its in-plane/out-of-plane split for the total stress
/// `τ + τ_stab`.
pub fn element_internal_split(
    problem: &Problem,
    e: usize,
    coords: &[Vec3],
) -> Result<InternalSplit> {
    let xe = gather(problem, e, coords);
    let m = 3 * xe.len();
    let mut out = InternalSplit {
        f_int: vec![0.0; m],
        f_inti: vec![0.0; m],
        f_into: vec![0.0; m],
    };
    for qp in &problem.disc.points[e] {
        let f = frame(&qp.eval, &xe, true)?;
        let st = evaluate(&problem.model, &deformation(&qp.reference, &f)?, &f)?;
        let tau = st.tau_total();
        let b = f.b_cov.expect("curvature requested");
        let d_a = qp.weight * qp.reference.ja;
        for i in 0..xe.len() {
            let div = stress_divergence(&qp.eval, i, &tau, &f) * d_a;
            let curv = curvature_term(&qp.eval, i, &tau, &b, &f.n) * d_a;
            add3(&mut out.f_int, i, &div);
            add3(&mut out.f_inti, i, &(div + curv));
            add3(&mut out.f_into, i, &(-curv));
        }
    }
    Ok(out)
}

/// In-plane force `f_inti` of the stabilization stress alone.
pub fn element_inplane_force(problem: &Problem, e: usize, xe: &[Vec3]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 3 * xe.len()];
    let mu = match problem.model {
        MaterialModel::StabilizedLiquid { mu_stab, .. } => mu_stab,
        _ => return Ok(out),
    };
    let stab = MaterialModel::NeoHooke { mu_t: mu };
    for qp in &problem.disc.points[e] {
        let f = frame(&qp.eval, xe, true)?;
        let st = evaluate(&stab, &deformation(&qp.reference, &f)?, &f)?;
        let b = f.b_cov.expect("curvature requested");
        let d_a = qp.weight * qp.reference.ja;
        for i in 0..xe.len() {
            let v = stress_divergence(&qp.eval, i, &st.tau, &f)
                + curvature_term(&qp.eval, i, &st.tau, &b, &f.n);
            add3(&mut out, i, &(v * d_a));
        }
    }
    Ok(out)
}

fn stabilization_tangent(problem: &Problem, e: usize, xe: &[Vec3]) -> Result<DMatrix<f64>> {
    let m = 3 * xe.len();
    let h = STAB_FD_STEP * element_size(xe);
    let mut k = DMatrix::zeros(m, m);
    let mut x = xe.to_vec();
    for col in 0..m {
        let (node, comp) = (col / 3, col % 3);
        let x0 = x[node][comp];
        x[node][comp] = x0 + h;
        let fp = element_inplane_force(problem, e, &x)?;
        x[node][comp] = x0 - h;
        let fm = element_inplane_force(problem, e, &x)?;
        x[node][comp] = x0;
        for row in 0..m {
            k[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(k)
}

/// Volume contribution `(1/3) ∫ x·n da` of one element.
pub fn element_volume(problem: &Problem, e: usize, coords: &[Vec3]) -> Result<f64> {
    let xe = gather(problem, e, coords);
    let mut v = 0.0;
    for qp in &problem.disc.points[e] {
        let f = frame(&qp.eval, &xe, false)?;
        v += qp.weight * f.ja * interpolate(&qp.eval, &xe).dot(&f.n) / 3.0;
    }
    Ok(v)
}

/// All element arrays at the given positions and datum pressure.
pub fn element_arrays(
    problem: &Problem,
    e: usize,
    coords: &[Vec3],
    p_v: f64,
    with_tangent: bool,
) -> Result<ElementArrays> {
    let xe = gather(problem, e, coords);
    let nn = xe.len();
    let m = 3 * nn;
    let load = &problem.load;
    let mut out = ElementArrays {
        nodes: problem.mesh.elements[e].nodes.clone(),
        f_int: vec![0.0; m],
        f_ext: vec![0.0; m],
        f_c: vec![0.0; m],
        k: with_tangent.then(|| DMatrix::zeros(m, m)),
        l_ext: vec![0.0; m],
        h_v: vec![0.0; m],
        volume: 0.0,
    };
    let f0 = Vec3::from(load.dead_load);
    let grad_p = load.hydrostatic.as_ref().map(|h| h.gradient());
    for qp in &problem.disc.points[e] {
        quad_point(problem, qp, &xe, p_v, f0, grad_p, &mut out)?;
    }
    for t in load.tractions.iter().filter(|t| t.element == e) {
        edge_traction(problem, e, t.edge, &Vec3::from(t.traction), &mut out.f_ext)?;
    }
    if problem.model.is_stabilized() {
        let f = element_inplane_force(problem, e, &xe)?;
        for (a, v) in f.iter().enumerate() {
            out.f_int[a] += v;
        }
        if let Some(k) = out.k.as_mut() {
            *k += stabilization_tangent(problem, e, &xe)?;
        }
    }
    Ok(out)
}

fn quad_point(
    problem: &Problem,
    qp: &QuadPoint,
    xe: &[Vec3],
    p_v: f64,
    f0: Vec3,
    grad_p: Option<Vec3>,
    out: &mut ElementArrays,
) -> Result<()> {
    let ev = &qp.eval;
    let nn = xe.len();
    let f = frame(ev, xe, false)?;
    let st = evaluate(&problem.model, &deformation(&qp.reference, &f)?, &f)?;
    let x = interpolate(ev, xe);
    let d_a_ref = qp.weight * qp.reference.ja;
    let w = qp.weight;
    // Unnormalized normal a_1 × a_2 = J_a n.
    let nja = f.ja * f.n;
    let da = w * f.ja;

    // Internal force.
    for i in 0..nn {
        let v = stress_divergence(ev, i, &st.tau, &f) * d_a_ref;
        add3(&mut out.f_int, i, &v);
    }

    // Pressure, dead load, volume.
    let p = p_v
        + problem
            .load
            .hydrostatic
            .as_ref()
            .map_or(0.0, |h| h.pressure(&x));
    for i in 0..nn {
        let ni = ev.n[i];
        add3(
            &mut out.f_ext,
            i,
            &(ni * p * nja * w + ni * f0 * w * qp.ja_mesh),
        );
        add3(&mut out.l_ext, i, &(ni * nja * w));
        let dn = ev.dn[i];
        let hv = (ni * nja + dn[0] * f.a[1].cross(&x) + dn[1] * x.cross(&f.a[0])) * (w / 3.0);
        add3(&mut out.h_v, i, &hv);
    }
    out.volume += w * x.dot(&nja) / 3.0;

    // Contact.
    let mut gaps = Vec::new();
    for ob in &problem.load.obstacles {
        let gap = obstacle_gap(&ob.shape, &x)?;
        if gap.g < 0.0 {
            let tc = gap.traction(ob.epsilon_n);
            for i in 0..nn {
                add3(&mut out.f_c, i, &(-ev.n[i] * tc * da));
            }
            gaps.push((gap, ob.epsilon_n));
        }
    }

    let Some(k) = out.k.as_mut() else {
        return Ok(());
    };
    add_internal_tangent(k, ev, &f, &st.tau, &st.c, d_a_ref);

    // −∂f_ext/∂x: d(a_1 × a_2) = N_{J,1} Δ × a_2 + N_{J,2} a_1 × Δ.
    let s1 = -skew(&f.a[1]);
    let s2 = skew(&f.a[0]);
    for i in 0..nn {
        let ni = ev.n[i];
        if ni == 0.0 {
            continue;
        }
        for j in 0..nn {
            let dj = ev.dn[j];
            let mut m = p * (dj[0] * s1 + dj[1] * s2);
            if let Some(g) = grad_p {
                m += nja * g.transpose() * ev.n[j];
            }
            add_block(k, i, j, &(-ni * w * m));
        }
    }

    // ∂f_c/∂x with f_c = ε g n_p N da.
    for (gap, eps) in gaps {
        let gn = gap.g * gap.n_p;
        for i in 0..nn {
            let ni = ev.n[i];
            if ni == 0.0 {
                continue;
            }
            for j in 0..nn {
                let dj = ev.dn[j];
                let dja = f.ja * (dj[0] * f.a_dual[0] + dj[1] * f.a_dual[1]);
                let m = gap.d_gn * (ev.n[j] * f.ja) + gn * dja.transpose();
                add_block(k, i, j, &(eps * ni * w * m));
            }
        }
    }
    Ok(())
}

fn edge_traction(
    problem: &Problem,
    e: usize,
    edge: usize,
    t: &Vec3,
    f_ext: &mut [f64],
) -> Result<()> {
    let el = &problem.mesh.elements[e];
    let xe = problem.mesh.element_coords(e, &problem.mesh.ref_coords);
    let (pts, wts) = gauss_legendre_1d(problem.disc.order[e])?;
    for (s, w) in pts.iter().zip(wts) {
        let ev = eval_basis(&el.basis, edge_point(edge, *s))?;
        let dir = if edge.is_multiple_of(2) { 0 } else { 1 };
        // |dX/ds|; the edge parameter runs along ξ^1 on edges 0, 2 and ξ^2 on 1, 3.
        let tangent = ev
            .dn
            .iter()
            .zip(&xe)
            .fold(Vec3::zeros(), |acc, (d, x)| acc + d[dir] * x);
        let dl = w * tangent.norm();
        for i in 0..xe.len() {
            add3(f_ext, i, &(ev.n[i] * dl * t));
        }
    }
    Ok(())
}
