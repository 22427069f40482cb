//! Ready-made scenarios.

use std::path::PathBuf;

use super::{BcSpec, MeshGenerator, MeshSource, Outputs, Scenario, VolumeScale, FORMAT_VERSION};
use crate::analytic::ReferenceCurve;
use crate::constitutive::MaterialModel;
use crate::mesh::{
    DirichletSpec, ElementKind, Hydrostatic, HydrostaticSign, LoadCase, Obstacle, ObstacleShape,
    OctantSet, SET_CLAMPED,
};
use crate::solver::{NewtonSettings, ScheduleParameter, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

pub fn builtin_scenarios() -> Vec<BuiltinInfo> {
    vec![
        BuiltinInfo {
            name: "balloon",
            summary: "Neo-Hookean spherical balloon, one quadratic NURBS octant element, V = 1..10 V0",
        },
        BuiltinInfo {
            name: "sheet",
            summary: "clamped square sheet, pre-stretch 1.05, 8x8 NURBS, V = 1..10 V0 with V0 = 4 L0^3",
        },
        BuiltinInfo {
            name: "droplet-growth",
            summary: "hemispherical droplet, 12 quadratic elements, mu = 0.01 gamma, V = 1/8..4 V0",
        },
        BuiltinInfo {
            name: "droplet-contact",
            summary: "droplet on a rigid plane, quarter model, mu = 0.005 gamma, rho g = 1, 2, 4, 8 gamma/R^2",
        },
    ]
}

fn outputs(name: &str) -> Outputs {
    Outputs {
        csv: Some(PathBuf::from(format!("{name}.csv"))),
        vtk_dir: Some(PathBuf::from("vtk")),
        diagnostics: Some(PathBuf::from(format!("{name}.diag"))),
        report: None,
    }
}

fn base(
    name: &str,
    generator: MeshGenerator,
    material: MaterialModel,
    load: LoadCase,
    schedule: StepSchedule,
) -> Scenario {
    Scenario {
        version: FORMAT_VERSION,
        name: name.to_string(),
        mesh: MeshSource {
            generator: Some(generator),
            file: None,
        },
        material,
        bcs: BcSpec {
            symmetry: true,
            dirichlet: Vec::new(),
        },
        load,
        schedule,
        newton: NewtonSettings::default(),
        quadrature: None,
        volume_scale: VolumeScale::Initial,
        reference: None,
        outputs: outputs(name),
        seed: 0,
        base_dir: PathBuf::new(),
    }
}

fn volume_schedule(values: Vec<f64>) -> StepSchedule {
    StepSchedule {
        parameter: ScheduleParameter::Volume,
        values,
        substep_levels: 6,
    }
}

/// Built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    let unit_steps = || (1..=10).map(f64::from).collect::<Vec<_>>();
    Some(match name {
        "balloon" => {
            let mut s = base(
                name,
                MeshGenerator::Sphere {
                    octants: OctantSet::Octant,
                    n_circ: 1,
                    n_merid: 1,
                    kind: ElementKind::Nurbs,
                    radius: 1.0,
                },
                MaterialModel::NeoHooke { mu_t: 1.0 },
                LoadCase::volume(1.0),
                volume_schedule(unit_steps()),
            );
            s.quadrature = Some(6);
            s.volume_scale = VolumeScale::Value(std::f64::consts::FRAC_PI_6);
            s.reference = Some(ReferenceCurve::Balloon {
                radius: 1.0,
                mu_t: 1.0,
            });
            s.outputs.report = Some(PathBuf::from("balloon.report"));
            s
        }
        "sheet" => {
            let mut s = base(
                name,
                MeshGenerator::Sheet {
                    n: 8,
                    kind: ElementKind::Nurbs,
                    half_width: 2.0,
                    prestretch: 1.05,
                },
                MaterialModel::NeoHooke { mu_t: 1.0 },
                LoadCase::volume(0.0),
                volume_schedule(unit_steps()),
            );
            s.bcs = BcSpec {
                symmetry: false,
                dirichlet: vec![DirichletSpec {
                    set: SET_CLAMPED.into(),
                    components: vec![0, 1, 2],
                    displacement: None,
                }],
            };
            s.volume_scale = VolumeScale::Value(4.0);
            s
        }
        "droplet-growth" => {
            let values = vec![0.125, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];
            let mut s = base(
                name,
                MeshGenerator::Sphere {
                    octants: OctantSet::Octant,
                    n_circ: 2,
                    n_merid: 2,
                    kind: ElementKind::LagrangeQuadratic,
                    radius: 1.0,
                },
                MaterialModel::StabilizedLiquid {
                    gamma: 1.0,
                    mu_stab: 0.01,
                },
                LoadCase::volume(1.0),
                volume_schedule(values),
            );
            s.reference = Some(ReferenceCurve::Droplet {
                radius: 1.0,
                gamma: 1.0,
            });
            s.outputs.report = Some(PathBuf::from("droplet-growth.report"));
            s
        }
        "droplet-contact" => {
            let generator = MeshGenerator::Sphere {
                octants: OctantSet::Quarter,
                n_circ: 2,
                n_merid: 2,
                kind: ElementKind::LagrangeQuadratic,
                radius: 1.0,
            };
            let h = generator.build().ok()?.characteristic_size().ok()?;
            let mut load = LoadCase::volume(1.0);
            load.hydrostatic = Some(Hydrostatic {
                rho: 0.0,
                g_vec: [0.0, 0.0, -1.0],
                sign: HydrostaticSign::Physical,
            });
            // The plane cuts the sphere slightly above the south pole, so initial
            // contact removes the vertical rigid-body mode.
            load.obstacles = vec![Obstacle {
                shape: ObstacleShape::HalfSpace {
                    normal: [0.0, 0.0, 1.0],
                    offset: -0.99,
                },
                epsilon_n: 100.0 / h,
            }];
            let mut s = base(
                name,
                generator,
                MaterialModel::StabilizedLiquid {
                    gamma: 1.0,
                    mu_stab: 0.005,
                },
                load,
                StepSchedule {
                    parameter: ScheduleParameter::Gravity,
                    values: vec![1.0, 2.0, 4.0, 8.0],
                    substep_levels: 8,
                },
            );
            s.quadrature = Some(4);
            s
        }
        _ => return None,
    })
}
