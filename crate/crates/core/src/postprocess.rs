//! Stress measures sampled at quadrature points or arbitrary parametric points.

use crate::assembly::{Execution, Problem};
use crate::constitutive::{evaluate, first_invariant, min_principal_stress};
use crate::error::{Error, Result};
use crate::geometry::{deformation, frame, interpolate, ReferenceMetric, Vec3};
use crate::master_element::eval_basis;
use crate::mesh::SystemState;

/// Derived quantities at one surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub x: Vec3,
    pub j: f64,
    /// `I₁ = σ^α_α` of the total Cauchy stress.
    pub i1: f64,
    pub sigma_min: f64,
    /// Total pressure `p_v + p_h`.
    pub pressure: f64,
}

/// Extremes over all quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSummary {
    pub sigma_min: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// `max |I₁/(2γ) − 1|` for liquid models.
    pub surface_tension_error: Option<f64>,
}

fn sample(
    problem: &Problem,
    e: usize,
    xi: [f64; 2],
    reference: ReferenceMetric,
    coords: &[Vec3],
    p_v: f64,
) -> Result<PointSample> {
    let el = &problem.mesh.elements[e];
    let ev = eval_basis(&el.basis, xi)?;
    let xe = problem.mesh.element_coords(e, coords);
    let f = frame(&ev, &xe, false)?;
    let st = evaluate(&problem.model, &deformation(&reference, &f)?, &f)?;
    let sigma = st.cauchy_mixed(&f);
    let x = interpolate(&ev, &xe);
    let p_h = problem
        .load
        .hydrostatic
        .as_ref()
        .map_or(0.0, |h| h.pressure(&x));
    Ok(PointSample {
        x,
        j: st.j,
        i1: first_invariant(&sigma),
        sigma_min: min_principal_stress(&sigma)?.sigma_min,
        pressure: p_v + p_h,
    })
}

/// Samples at every quadrature point, element by element.
pub fn quadrature_samples(
    problem: &Problem,
    state: &SystemState,
    exec: Execution,
) -> Result<Vec<Vec<PointSample>>> {
    exec.map(problem.mesh.elements.len(), |e| {
        problem.disc.points[e]
            .iter()
            .map(|qp| sample(problem, e, qp.xi, qp.reference, &state.coords, state.p_v))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

pub fn summarize(problem: &Problem, samples: &[Vec<PointSample>]) -> FieldSummary {
    let mut s = FieldSummary {
        sigma_min: f64::INFINITY,
        p_min: f64::INFINITY,
        p_max: f64::NEG_INFINITY,
        surface_tension_error: None,
    };
    let gamma = problem.model.surface_tension();
    for p in samples.iter().flatten() {
        s.sigma_min = s.sigma_min.min(p.sigma_min);
        s.p_min = s.p_min.min(p.pressure);
        s.p_max = s.p_max.max(p.pressure);
        if let Some(g) = gamma {
            let err = (p.i1 / (2.0 * g) - 1.0).abs();
            s.surface_tension_error = Some(s.surface_tension_error.unwrap_or(0.0).max(err));
        }
    }
    s
}

/// Sample at an arbitrary parametric point of element `e`.
///
/// The stress-free metric is rebuilt from the reference mesh there. Points
/// on a collapsed edge (the NURBS pole) are nudged inwards until both the
/// reference and the current frame are regular.
pub fn sample_at(
    problem: &Problem,
    e: usize,
    xi: [f64; 2],
    state: &SystemState,
) -> Result<PointSample> {
    let el = &problem.mesh.elements[e];
    let x_ref = problem.mesh.element_coords(e, &problem.mesh.ref_coords);
    let mut xi = xi;
    let mut tries = 0;
    loop {
        let ev = eval_basis(&el.basis, xi)?;
        let attempt = frame(&ev, &x_ref, false).and_then(|f| {
            let reference = ReferenceMetric::from_frame(&f).prestretched(problem.mesh.prestretch);
            sample(problem, e, xi, reference, &state.coords, state.p_v)
        });
        match attempt {
            Err(Error::DegenerateFrame { .. }) if tries < 6 => {
                xi = [xi[0] * (1.0 - 1e-3), xi[1] * (1.0 - 1e-3)];
                tries += 1;
            }
            other => return other,
        }
    }
}
