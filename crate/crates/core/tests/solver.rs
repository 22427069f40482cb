use std::f64::consts::PI;

use memfem_core::analytic::{balloon_pressure, droplet_pressure};
use memfem_core::assembly::{assemble, Execution, Problem};
use memfem_core::constitutive::MaterialModel;
use memfem_core::geometry::Vec3;
use memfem_core::mesh::{
    enclosed_volume, make_sphere, make_sphere_octant, make_square_sheet, BoundaryConditions,
    DirichletSpec, ElementKind, LoadCase, OctantSet, SystemState, SET_CLAMPED,
};
use memfem_core::solver::{
    newton_step, run_schedule, solve_step, LoadDriver, NewtonSettings, ScheduleParameter,
    StepSchedule, Trajectory,
};

fn octant(
    n: usize,
    kind: ElementKind,
    model: MaterialModel,
    q: Option<usize>,
    values: Vec<f64>,
    settings: NewtonSettings,
    exec: Execution,
) -> Trajectory {
    let mesh = make_sphere_octant(n, n, kind, 1.0).unwrap();
    let bcs = BoundaryConditions::symmetry(&mesh);
    let state = SystemState::initial(&mesh, &bcs);
    let v0 = PI / 6.0;
    let mut problem = Problem::new(mesh, bcs, LoadCase::volume(v0), model, q).unwrap();
    let schedule = StepSchedule {
        parameter: ScheduleParameter::Volume,
        values,
        substep_levels: 4,
    };
    let driver = LoadDriver::new(&problem, ScheduleParameter::Volume, v0);
    run_schedule(
        &mut problem,
        state,
        &schedule,
        &driver,
        &settings,
        exec,
        v0,
        |_, _, _| Ok(()),
    )
    .unwrap()
}

fn balloon(values: Vec<f64>) -> Trajectory {
    octant(
        1,
        ElementKind::Nurbs,
        MaterialModel::NeoHooke { mu_t: 1.0 },
        Some(6),
        values,
        NewtonSettings::default(),
        Execution::Sequential,
    )
}

#[test]
fn fully_constrained_system_has_zero_increment() {
    let mesh = make_square_sheet(2, ElementKind::LagrangeQuadratic, 1.0, 1.05).unwrap();
    let mut bcs = BoundaryConditions::free(mesh.n_nodes());
    for f in bcs.fixed.iter_mut() {
        *f = [true; 3];
    }
    let mut state = SystemState::initial(&mesh, &bcs);
    state.p_v = 2.0;
    let problem = Problem::new(
        mesh,
        bcs,
        LoadCase::prescribed(2.0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        None,
    )
    .unwrap();
    let sys = assemble(&problem, &state, true, Execution::Sequential).unwrap();
    assert!(sys.residual.iter().all(|r| *r == 0.0));
    let (dx, dp) = newton_step(&sys).unwrap();
    assert!(dx.iter().all(|v| *v == 0.0));
    assert_eq!(dp, 0.0);
}

#[test]
fn prescribed_displacements_are_applied_exactly() {
    let mesh = make_square_sheet(2, ElementKind::LagrangeLinear, 1.0, 1.0).unwrap();
    let spec = DirichletSpec {
        set: SET_CLAMPED.into(),
        components: vec![0, 1, 2],
        displacement: Some([0.1, -0.2, 0.3]),
    };
    let bcs = BoundaryConditions::from_specs(&mesh, &[spec]).unwrap();
    let state = SystemState::initial(&mesh, &bcs);
    for &i in mesh.node_set(SET_CLAMPED).unwrap() {
        assert!((state.coords[i] - mesh.ref_coords[i] - Vec3::new(0.1, -0.2, 0.3)).norm() < 1e-15);
    }
    // A rigid translation of a stress-free sheet is an equilibrium state.
    let mut state = state;
    for (x, x0) in state.coords.iter_mut().zip(&mesh.ref_coords) {
        *x = x0 + Vec3::new(0.1, -0.2, 0.3);
    }
    let problem = Problem::new(
        mesh,
        bcs,
        LoadCase::prescribed(0.0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        None,
    )
    .unwrap();
    let conv = solve_step(
        &problem,
        &mut state,
        &NewtonSettings::default(),
        Execution::Sequential,
        1.0,
        0,
    )
    .unwrap();
    assert_eq!(conv.iterations, 0);
}

#[test]
fn pressure_driven_balloon_matches_closed_form() {
    let mesh = make_sphere_octant(1, 1, ElementKind::Nurbs, 1.0).unwrap();
    let bcs = BoundaryConditions::symmetry(&mesh);
    let state = SystemState::initial(&mesh, &bcs);
    let v0 = enclosed_volume(&mesh, &mesh.ref_coords, Some(6)).unwrap();
    let mut problem = Problem::new(
        mesh,
        bcs,
        LoadCase::prescribed(0.0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        Some(6),
    )
    .unwrap();
    let schedule = StepSchedule {
        parameter: ScheduleParameter::Pressure,
        values: vec![0.2, 0.4, 0.6, 0.8],
        substep_levels: 4,
    };
    let driver = LoadDriver::new(&problem, ScheduleParameter::Pressure, PI / 6.0);
    let t = run_schedule(
        &mut problem,
        state,
        &schedule,
        &driver,
        &NewtonSettings::default(),
        Execution::Sequential,
        PI / 6.0,
        |_, _, _| Ok(()),
    )
    .unwrap();
    assert!(t.failure.is_none());
    // Below the peak the pressure fixes the volume on the rising branch.
    for s in &t.steps {
        let ratio = s.volume / v0;
        assert!(ratio > 1.0 && ratio < 7f64.sqrt());
        assert!(
            (balloon_pressure(ratio, 1.0, 1.0).unwrap() / s.value - 1.0).abs() < 1e-6,
            "at V/V0 = {ratio}"
        );
    }
}

#[test]
fn volume_constraint_is_met_at_every_step() {
    let t = balloon((1..=10).map(f64::from).collect());
    assert!(t.failure.is_none());
    for s in &t.steps {
        let target = s.value * PI / 6.0;
        assert!(
            (s.volume - target).abs() < 1e-9 * target,
            "{} vs {target}",
            s.volume
        );
    }
}

#[test]
fn balloon_pressure_peaks_near_root_seven() {
    let values: Vec<f64> = (0..=80).map(|k| 1.0 + 0.05 * k as f64).collect();
    let t = balloon(values);
    assert!(t.failure.is_none());
    let peak = t
        .steps
        .iter()
        .max_by(|a, b| a.p_v.total_cmp(&b.p_v))
        .unwrap();
    assert!(
        (peak.value - 7f64.sqrt()).abs() <= 0.05,
        "peak at {}",
        peak.value
    );
    let p_max = balloon_pressure(7f64.sqrt(), 1.0, 1.0).unwrap();
    assert!(peak.p_v <= p_max * (1.0 + 1e-7));
    assert!((peak.p_v / p_max - 1.0).abs() < 1e-3);
}

#[test]
fn droplet_pressure_is_positive_and_decreasing() {
    let t = octant(
        2,
        ElementKind::LagrangeQuadratic,
        MaterialModel::StabilizedLiquid {
            gamma: 1.0,
            mu_stab: 0.01,
        },
        None,
        vec![1.0, 1.5, 2.0, 3.0, 4.0],
        NewtonSettings::default(),
        Execution::Parallel,
    );
    assert!(t.failure.is_none());
    assert!(t.steps.iter().all(|s| s.p_v > 0.0));
    assert!(t.steps.windows(2).all(|w| w[1].p_v < w[0].p_v));
    let last = t.steps.last().unwrap();
    assert!((last.p_v / droplet_pressure(4.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-2);
}

#[test]
fn sequential_and_parallel_runs_are_identical() {
    let run = |exec| {
        octant(
            2,
            ElementKind::LagrangeQuadratic,
            MaterialModel::StabilizedLiquid {
                gamma: 1.0,
                mu_stab: 0.01,
            },
            None,
            vec![1.0, 2.0, 3.0],
            NewtonSettings::default(),
            exec,
        )
    };
    let (a, b) = (run(Execution::Sequential), run(Execution::Parallel));
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.state.coords, b.state.coords);
    assert_eq!(a.state.p_v.to_bits(), b.state.p_v.to_bits());
}

#[test]
fn empty_schedule_keeps_the_initial_state() {
    let t = balloon(Vec::new());
    assert!(t.steps.is_empty() && t.failure.is_none());
    let mesh = make_sphere_octant(1, 1, ElementKind::Nurbs, 1.0).unwrap();
    assert_eq!(t.state.coords, mesh.ref_coords);
}

#[test]
fn schedule_at_the_start_value_needs_no_iterations() {
    let mesh = make_sphere_octant(2, 2, ElementKind::LagrangeQuadratic, 1.0).unwrap();
    let bcs = BoundaryConditions::symmetry(&mesh);
    let state = SystemState::initial(&mesh, &bcs);
    let v0 = enclosed_volume(&mesh, &mesh.ref_coords, None).unwrap();
    let mut problem = Problem::new(
        mesh,
        bcs,
        LoadCase::volume(v0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        None,
    )
    .unwrap();
    let schedule = StepSchedule {
        parameter: ScheduleParameter::Volume,
        values: vec![1.0],
        substep_levels: 0,
    };
    let driver = LoadDriver::new(&problem, ScheduleParameter::Volume, v0);
    let t = run_schedule(
        &mut problem,
        state,
        &schedule,
        &driver,
        &NewtonSettings::default(),
        Execution::Sequential,
        v0,
        |_, _, _| Ok(()),
    )
    .unwrap();
    assert!(t.failure.is_none());
    assert_eq!(t.steps[0].total_iterations, 0);
    assert_eq!(t.state.coords, problem.mesh.ref_coords);
}

#[test]
fn non_monotone_schedule_is_rejected() {
    let mesh = make_sphere_octant(1, 1, ElementKind::Nurbs, 1.0).unwrap();
    let bcs = BoundaryConditions::symmetry(&mesh);
    let state = SystemState::initial(&mesh, &bcs);
    let mut problem = Problem::new(
        mesh,
        bcs,
        LoadCase::volume(1.0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        None,
    )
    .unwrap();
    let schedule = StepSchedule {
        parameter: ScheduleParameter::Volume,
        values: vec![1.0, 3.0, 2.0],
        substep_levels: 0,
    };
    let driver = LoadDriver::new(&problem, ScheduleParameter::Volume, 1.0);
    let res = run_schedule(
        &mut problem,
        state,
        &schedule,
        &driver,
        &NewtonSettings::default(),
        Execution::Sequential,
        1.0,
        |_, _, _| Ok(()),
    );
    assert!(res.is_err());
}

#[test]
fn failure_keeps_converged_steps() {
    let settings = NewtonSettings {
        max_iter: 1,
        ..NewtonSettings::default()
    };
    let mesh = make_sphere_octant(1, 1, ElementKind::Nurbs, 1.0).unwrap();
    let bcs = BoundaryConditions::symmetry(&mesh);
    let state = SystemState::initial(&mesh, &bcs);
    let v0 = PI / 6.0;
    let mut problem = Problem::new(
        mesh,
        bcs,
        LoadCase::volume(v0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        Some(6),
    )
    .unwrap();
    let schedule = StepSchedule {
        parameter: ScheduleParameter::Volume,
        values: vec![1.0, 10.0],
        substep_levels: 0,
    };
    let driver = LoadDriver::new(&problem, ScheduleParameter::Volume, v0);
    let t = run_schedule(
        &mut problem,
        state,
        &schedule,
        &driver,
        &settings,
        Execution::Sequential,
        v0,
        |_, _, _| Ok(()),
    )
    .unwrap();
    assert_eq!(t.steps.len(), 1);
    assert!(t.failure.unwrap().contains("10"));
    // The state is the one converged at V̄ = V₀.
    let v = assemble(&problem, &t.state, false, Execution::Sequential)
        .unwrap()
        .volume;
    assert!((v / v0 - 1.0).abs() < 1e-9);
}

/// On a closed surface `∂V/∂x = ∫ N n da`, so the bordered tangent of a
/// volume-constrained conservative problem is symmetric.
#[test]
fn closed_surface_border_is_symmetric() {
    let mesh = make_sphere(OctantSet::Full, 2, 2, ElementKind::LagrangeQuadratic, 1.0).unwrap();
    let bcs = BoundaryConditions::free(mesh.n_nodes());
    let mut state = SystemState::initial(&mesh, &bcs);
    for (i, x) in state.coords.iter_mut().enumerate() {
        *x *= 1.0 + 0.05 * (i as f64).sin();
    }
    state.p_v = 1.5;
    let problem = Problem::new(
        mesh,
        bcs,
        LoadCase::volume(4.0),
        MaterialModel::NeoHooke { mu_t: 1.0 },
        None,
    )
    .unwrap();
    let sys = assemble(&problem, &state, true, Execution::Sequential).unwrap();
    let scale = sys.h_v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (h, l) in sys.h_v.iter().zip(&sys.l_ext) {
        assert!((h - l).abs() < 1e-12 * scale);
    }
}
