use std::fs;

use memfem_core::mesh::{make_sphere_octant, ElementKind, MeshFile};
use memfem_core::scenario::{
    builtin_scenario, builtin_scenarios, run_scenario, MeshGenerator, MeshSource, RunOptions,
    Scenario,
};
use memfem_core::Error;

#[test]
fn builtins_round_trip_through_json() {
    let names: Vec<&str> = builtin_scenarios().iter().map(|b| b.name).collect();
    assert_eq!(
        names,
        ["balloon", "sheet", "droplet-growth", "droplet-contact"]
    );
    for name in names {
        let s = builtin_scenario(name).unwrap();
        s.validate().unwrap();
        let back = Scenario::from_json(&s.to_json().unwrap(), std::path::Path::new("")).unwrap();
        assert_eq!(back, s, "{name}");
        s.setup(None).unwrap();
    }
    assert!(builtin_scenario("cushion").is_none());
}

#[test]
fn builtin_parameters() {
    let contact = builtin_scenario("droplet-contact").unwrap();
    assert_eq!(contact.schedule.values, [1.0, 2.0, 4.0, 8.0]);
    assert!(matches!(
        contact.material,
        memfem_core::constitutive::MaterialModel::StabilizedLiquid { mu_stab, .. } if mu_stab == 0.005
    ));
    let sheet = builtin_scenario("sheet").unwrap();
    assert!(
        matches!(sheet.mesh.generator, Some(MeshGenerator::Sheet { prestretch, .. }) if prestretch == 1.05)
    );
    assert_eq!(sheet.schedule.values.last(), Some(&10.0));
    let balloon = builtin_scenario("balloon").unwrap();
    assert_eq!(
        balloon.schedule.values,
        (1..=10).map(f64::from).collect::<Vec<_>>()
    );
}

#[test]
fn mesh_file_resolves_relative_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("meshes")).unwrap();
    let mesh = make_sphere_octant(1, 1, ElementKind::Nurbs, 1.0).unwrap();
    fs::write(
        dir.path().join("meshes/octant.json"),
        MeshFile::from_mesh(&mesh).to_json().unwrap(),
    )
    .unwrap();

    let mut s = builtin_scenario("balloon").unwrap();
    s.mesh = MeshSource {
        generator: None,
        file: Some("meshes/octant.json".into()),
    };
    s.schedule.values = vec![1.0, 2.0];
    s.outputs.csv = Some("out/balloon.csv".into());
    s.outputs.vtk_dir = None;
    s.outputs.report = None;
    s.outputs.diagnostics = None;
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, s.to_json().unwrap()).unwrap();

    let loaded = Scenario::read(&cfg).unwrap();
    assert_eq!(loaded.base_dir, dir.path());
    let from_file = run_scenario(
        &loaded,
        &RunOptions {
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        },
    )
    .unwrap();
    let generated = run_scenario(
        &builtin_scenario("balloon")
            .map(|mut b| {
                b.schedule.values = vec![1.0, 2.0];
                b.outputs = Default::default();
                b
            })
            .unwrap(),
        &RunOptions {
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(from_file.rows, generated.rows);
    let csv = fs::read_to_string(dir.path().join("out/balloon.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("value,volume,p_v,"));
}

fn config_error(text: &str) -> String {
    match Scenario::from_json(text, std::path::Path::new(".")) {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn edited(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value =
        serde_json::from_str(&builtin_scenario("balloon").unwrap().to_json().unwrap()).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn invalid_documents_are_config_errors() {
    assert!(config_error("{ not json").contains("key"));
    assert!(config_error(&edited(|v| v["version"] = 2.into())).contains("version"));
    assert!(config_error(&edited(|v| v["quadrature"] = 7.into())).contains("quadrature"));
    assert!(
        config_error(&edited(|v| v["schedule"]["values"] = serde_json::json!([])))
            .contains("schedule")
    );
    assert!(config_error(&edited(
        |v| v["schedule"]["values"] = serde_json::json!([1, 3, 2])
    ))
    .contains("monotone"));
    assert!(config_error(&edited(|v| v["mesh"]["file"] = "a.json".into())).contains("exactly one"));
    assert!(!config_error(&edited(
        |v| v["material"] = serde_json::json!({"type": "neo_hooke", "muT": -1.0})
    ))
    .is_empty());
    assert!(config_error(&edited(|v| v["volume_scale"] = 0.into())).contains("volume_scale"));
    assert!(config_error(&edited(|v| v["colour"] = "red".into())).contains("colour"));
    assert!(config_error(&edited(|v| v["name"] = "".into())).contains("name"));
}

#[test]
fn volume_scale_accepts_initial_or_a_number() {
    let a = Scenario::from_json(
        &edited(|v| v["volume_scale"] = "initial".into()),
        std::path::Path::new("."),
    )
    .unwrap();
    let b = Scenario::from_json(
        &edited(|v| v["volume_scale"] = 0.5.into()),
        std::path::Path::new("."),
    )
    .unwrap();
    let (sa, sb) = (a.setup(None).unwrap(), b.setup(None).unwrap());
    assert!((sa.volume_scale - std::f64::consts::PI / 6.0).abs() < 1e-6);
    assert_eq!(sb.volume_scale, 0.5);
    assert!(!config_error(&edited(|v| v["volume_scale"] = "final".into())).is_empty());
}

#[test]
fn missing_mesh_file_fails_at_setup() {
    let mut s = builtin_scenario("balloon").unwrap();
    s.mesh = MeshSource {
        generator: None,
        file: Some("does/not/exist.json".into()),
    };
    s.validate().unwrap();
    assert!(s.setup(None).is_err());
}
