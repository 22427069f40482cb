//! Scenario files: mesh, material, supports, loading and schedule in one
//! JSON document, plus the runner that writes result artifacts.
//!
//! Volume targets, both in `load.pressure` and in a volume schedule, are
//! ratios to `volume_scale`. Relative mesh paths resolve against the
//! scenario's base directory; output paths resolve against the output
//! directory of the run.

mod builtin;
mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::ReferenceCurve;
use crate::assembly::{Execution, Problem};
use crate::constitutive::MaterialModel;
use crate::error::{Error, Result};
use crate::mesh::{
    enclosed_volume, make_sphere, make_square_sheet, BoundaryConditions, DirichletSpec,
    ElementKind, LoadCase, Mesh, MeshFile, OctantSet, PressureMode, SystemState,
};
use crate::solver::{
    run_schedule, LoadDriver, NewtonSettings, StepRecord, StepSchedule, Trajectory,
};

pub use builtin::{builtin_scenario, builtin_scenarios, BuiltinInfo};
pub use output::{
    atomic_write, csv_text, diagnostics_text, report_rows, report_text, vtk_text, ReferenceRow,
    ResultRow,
};

/// Scenario file format version understood by this build.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshGenerator {
    Sphere {
        octants: OctantSet,
        n_circ: usize,
        n_merid: usize,
        kind: ElementKind,
        radius: f64,
    },
    Sheet {
        n: usize,
        kind: ElementKind,
        half_width: f64,
        #[serde(default = "one")]
        prestretch: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MeshGenerator {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshGenerator::Sphere {
                octants,
                n_circ,
                n_merid,
                kind,
                radius,
            } => make_sphere(octants, n_circ, n_merid, kind, radius),
            MeshGenerator::Sheet {
                n,
                kind,
                half_width,
                prestretch,
            } => make_square_sheet(n, kind, half_width, prestretch),
        }
    }
}

/// Exactly one of `generator` and `file`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MeshGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    /// Fix the normal component on every generator symmetry plane.
    #[serde(default)]
    pub symmetry: bool,
    #[serde(default)]
    pub dirichlet: Vec<DirichletSpec>,
}

/// `V_scale`: divides reported volumes and normalizes the volume residual.
/// Written as `"initial"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VolumeScale {
    /// Enclosed volume of the undeformed mesh.
    #[default]
    Initial,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VolumeScaleRepr {
    Name(String),
    Value(f64),
}

impl Serialize for VolumeScale {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            VolumeScale::Initial => VolumeScaleRepr::Name("initial".into()),
            VolumeScale::Value(v) => VolumeScaleRepr::Value(v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VolumeScale {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match VolumeScaleRepr::deserialize(d)? {
            VolumeScaleRepr::Name(n) if n == "initial" => Ok(VolumeScale::Initial),
            VolumeScaleRepr::Name(n) => Err(serde::de::Error::custom(format!(
                "volume_scale must be \"initial\" or a number, got {n:?}"
            ))),
            VolumeScaleRepr::Value(v) => Ok(VolumeScale::Value(v)),
        }
    }
}

/// Output file names; any can be omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vtk_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub mesh: MeshSource,
    pub material: MaterialModel,
    #[serde(default)]
    pub bcs: BcSpec,
    pub load: LoadCase,
    pub schedule: StepSchedule,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    #[serde(default)]
    pub volume_scale: VolumeScale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCurve>,
    #[serde(default)]
    pub outputs: Outputs,
    /// Seeds the random states of the tangent audit.
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative mesh paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A scenario turned into a solvable problem.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: Problem,
    pub state: SystemState,
    pub driver: LoadDriver,
    pub volume_scale: f64,
}

impl Scenario {
    /// Parse and validate a scenario document.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: Scenario =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that need no mesh.
    pub fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        if self.name.is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        match (&self.mesh.generator, &self.mesh.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "mesh needs exactly one of `generator` and `file`".into(),
                ))
            }
        }
        self.material
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.schedule.validate()?;
        if self.schedule.values.is_empty() {
            return Err(Error::Config("schedule needs at least one value".into()));
        }
        self.newton.validate()?;
        if let Some(q) = self.quadrature {
            if !(1..=6).contains(&q) {
                return Err(Error::Config(format!(
                    "quadrature {q} out of range (1..=6)"
                )));
            }
        }
        if let VolumeScale::Value(v) = self.volume_scale {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "volume_scale must be positive, got {v}"
                )));
            }
        }
        if let Some(r) = &self.reference {
            r.pressure(1.0).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match (&self.mesh.generator, &self.mesh.file) {
            (Some(g), None) => g.build(),
            (None, Some(f)) => MeshFile::read(&self.base_dir.join(f)),
            _ => Err(Error::Config(
                "mesh needs exactly one of `generator` and `file`".into(),
            )),
        }
    }

    /// Mesh, supports, loads and the initial state, with an optional
    /// quadrature override taking precedence over the file.
    pub fn setup(&self, quadrature: Option<usize>) -> Result<Setup> {
        let mesh = self.build_mesh()?;
        let mut bcs = if self.bcs.symmetry {
            BoundaryConditions::symmetry(&mesh)
        } else {
            BoundaryConditions::free(mesh.n_nodes())
        };
        let extra = BoundaryConditions::from_specs(&mesh, &self.bcs.dirichlet)?;
        for i in 0..mesh.n_nodes() {
            for c in 0..3 {
                if extra.fixed[i][c] {
                    bcs.fixed[i][c] = true;
                    bcs.prescribed[i][c] = extra.prescribed[i][c];
                }
            }
        }
        let quadrature = quadrature.or(self.quadrature);
        let volume_scale = match self.volume_scale {
            VolumeScale::Value(v) => v,
            VolumeScale::Initial => {
                let v = enclosed_volume(&mesh, &mesh.ref_coords, quadrature)?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!(
                        "initial enclosed volume is {v}; give volume_scale explicitly"
                    )));
                }
                v
            }
        };
        let mut load = self.load.clone();
        if let PressureMode::VolumeConstraint { target } = &mut load.pressure {
            *target *= volume_scale;
        }
        let state = SystemState::initial(&mesh, &bcs);
        let problem = Problem::new(mesh, bcs, load, self.material, quadrature)?;
        let driver = LoadDriver::new(&problem, self.schedule.parameter, volume_scale);
        Ok(Setup {
            problem,
            state,
            driver,
            volume_scale,
        })
    }
}

/// How a run executes and where it writes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub quadrature: Option<usize>,
    pub exec: Execution,
    pub out_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            quadrature: None,
            exec: Execution::default(),
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub rows: Vec<ResultRow>,
    pub reference: Option<Vec<ReferenceRow>>,
    pub volume_scale: f64,
    /// Files written, in order of first write.
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.trajectory.failure.is_none()
    }
}

struct Writer<'a> {
    scenario: &'a Scenario,
    out_dir: &'a Path,
    volume_scale: f64,
    rows: Vec<ResultRow>,
    records: Vec<StepRecord>,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &Path, text: &str) -> Result<()> {
        let path = self.out_dir.join(rel);
        atomic_write(&path, text)?;
        if !self.written.contains(&path) {
            self.written.push(path);
        }
        Ok(())
    }

    fn flush(&mut self, failure: Option<&str>) -> Result<()> {
        let out = self.scenario.outputs.clone();
        if let Some(p) = &out.csv {
            self.put(p, &csv_text(&self.rows))?;
        }
        if let Some(p) = &out.diagnostics {
            self.put(p, &diagnostics_text(&self.records, failure))?;
        }
        if let (Some(p), Some(curve)) = (&out.report, &self.scenario.reference) {
            let rows = report_rows(curve, &self.records, self.volume_scale)?;
            self.put(p, &report_text(&self.scenario.name, curve, &rows))?;
        }
        Ok(())
    }
}

/// Run the scenario, writing artifacts after every converged step.
///
/// A solver failure is not an error: the trajectory records it and every
/// artifact reflects the last converged step.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let setup = scenario.setup(opts.quadrature)?;
    run_setup(scenario, setup, opts)
}

/// [`run_scenario`] on a setup built beforehand, so that callers can tell
/// scenario errors from run errors.
pub fn run_setup(scenario: &Scenario, setup: Setup, opts: &RunOptions) -> Result<RunOutcome> {
    let Setup {
        mut problem,
        state,
        driver,
        volume_scale,
    } = setup;
    let mut w = Writer {
        scenario,
        out_dir: &opts.out_dir,
        volume_scale,
        rows: Vec::new(),
        records: Vec::new(),
        written: Vec::new(),
    };
    let trajectory = run_schedule(
        &mut problem,
        state,
        &scenario.schedule,
        &driver,
        &scenario.newton,
        opts.exec,
        volume_scale,
        |rec, st, prob| {
            w.rows.push(ResultRow::from_record(rec, volume_scale));
            w.records.push(rec.clone());
            if let Some(dir) = &scenario.outputs.vtk_dir {
                let k = w.records.len() - 1;
                let name = format!("{}_{:04}.vtk", scenario.name, k);
                let text = vtk_text(prob, st, &format!("{} value={}", scenario.name, rec.value))?;
                w.put(&dir.join(name), &text)?;
            }
            w.flush(None)
        },
    )?;
    w.flush(trajectory.failure.as_deref())?;
    let reference = match &scenario.reference {
        Some(curve) => Some(report_rows(curve, &w.records, volume_scale)?),
        None => None,
    };
    Ok(RunOutcome {
        trajectory,
        rows: w.rows,
        reference,
        volume_scale,
        written: w.written,
    })
}
