//! Result rows and their text artifacts: CSV, legacy VTK, reference report
//! and the key=value diagnostics stream.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::analytic::ReferenceCurve;
use crate::assembly::Problem;
use crate::error::{Error, Result};
use crate::mesh::SystemState;
use crate::postprocess::sample_at;
use crate::solver::StepRecord;

/// Facets per element edge in VTK output.
const SUBDIVISION: usize = 4;

/// One CSV row per converged schedule value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub value: f64,
    /// Enclosed volume divided by the volume scale.
    pub volume: f64,
    pub p_v: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub sigma_min: f64,
    /// `max |I₁/(2γ) − 1|`, liquids only.
    pub surface_tension_error: Option<f64>,
    pub iterations: usize,
}

impl ResultRow {
    pub fn from_record(rec: &StepRecord, volume_scale: f64) -> Self {
        Self {
            value: rec.value,
            volume: rec.volume / volume_scale,
            p_v: rec.p_v,
            p_min: rec.summary.p_min,
            p_max: rec.summary.p_max,
            sigma_min: rec.summary.sigma_min,
            surface_tension_error: rec.summary.surface_tension_error,
            iterations: rec.total_iterations,
        }
    }
}

pub fn csv_text(rows: &[ResultRow]) -> String {
    let mut s =
        String::from("value,volume,p_v,p_min,p_max,sigma_min,surface_tension_error,iterations\n");
    for r in rows {
        let st = r
            .surface_tension_error
            .map_or(String::new(), |e| format!("{e:.12e}"));
        let _ = writeln!(
            s,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
            r.value, r.volume, r.p_v, r.p_min, r.p_max, r.sigma_min, st, r.iterations
        );
    }
    s
}

/// Computed against closed-form pressure at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub value: f64,
    pub v_ratio: f64,
    pub p_computed: f64,
    pub p_reference: f64,
    pub abs_error: f64,
    /// `None` where the reference pressure is below `1e-6` of its unit.
    pub rel_error: Option<f64>,
}

pub fn report_rows(
    curve: &ReferenceCurve,
    records: &[StepRecord],
    volume_scale: f64,
) -> Result<Vec<ReferenceRow>> {
    records
        .iter()
        .map(|r| {
            let v_ratio = r.volume / volume_scale;
            let p_ref = curve.pressure(v_ratio)?;
            let abs_error = (r.p_v - p_ref).abs();
            Ok(ReferenceRow {
                value: r.value,
                v_ratio,
                p_computed: r.p_v,
                p_reference: p_ref,
                abs_error,
                rel_error: (p_ref.abs() > 1e-6 * curve.pressure_unit())
                    .then(|| abs_error / p_ref.abs()),
            })
        })
        .collect()
}

pub fn report_text(name: &str, curve: &ReferenceCurve, rows: &[ReferenceRow]) -> String {
    let mut s = format!("# scenario={name} reference={curve:?}\n");
    s.push_str("value,v_ratio,p_computed,p_reference,abs_error,rel_error\n");
    for r in rows {
        let rel = r.rel_error.map_or(String::new(), |e| format!("{e:.6e}"));
        let _ = writeln!(
            s,
            "{},{:.12e},{:.12e},{:.12e},{:.6e},{}",
            r.value, r.v_ratio, r.p_computed, r.p_reference, r.abs_error, rel
        );
    }
    let worst = rows.iter().filter_map(|r| r.rel_error).fold(0.0, f64::max);
    let _ = writeln!(s, "# max_rel_error={worst:.6e}");
    s
}

/// Newton iterations, one step summary per converged step, and the failure.
pub fn diagnostics_text(records: &[StepRecord], failure: Option<&str>) -> String {
    let mut s = String::new();
    for (k, r) in records.iter().enumerate() {
        for it in &r.history {
            s.push_str(&it.to_line());
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "event=step step={k} value={} volume={:.12e} p_v={:.12e} sigma_min={:.6e} iterations={} substeps={} \
             sigma_min_negative={}",
            r.value,
            r.volume,
            r.p_v,
            r.summary.sigma_min,
            r.total_iterations,
            r.substeps,
            u8::from(r.summary.sigma_min < 0.0)
        );
    }
    if let Some(f) = failure {
        let _ = writeln!(s, "event=failure step={} reason={:?}", records.len(), f);
    }
    s
}

/// Legacy ASCII PolyData of the deformed surface, each element drawn as
/// `4 × 4` bilinear facets carrying `J`, `I1` and `sigma_min` at points.
pub fn vtk_text(problem: &Problem, state: &SystemState, title: &str) -> Result<String> {
    let m = SUBDIVISION + 1;
    let mut samples = Vec::with_capacity(problem.mesh.elements.len() * m * m);
    for e in 0..problem.mesh.elements.len() {
        for j in 0..m {
            for i in 0..m {
                let xi = [
                    -1.0 + 2.0 * i as f64 / SUBDIVISION as f64,
                    -1.0 + 2.0 * j as f64 / SUBDIVISION as f64,
                ];
                samples.push(sample_at(problem, e, xi, state)?);
            }
        }
    }
    let n_el = problem.mesh.elements.len();
    let n_cells = n_el * SUBDIVISION * SUBDIVISION;
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let mut s = String::new();
    let _ = write!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\n"
    );
    let _ = writeln!(s, "POINTS {} double", samples.len());
    for p in &samples {
        let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", p.x[0], p.x[1], p.x[2]);
    }
    let _ = writeln!(s, "POLYGONS {} {}", n_cells, 5 * n_cells);
    for e in 0..n_el {
        let base = e * m * m;
        for j in 0..SUBDIVISION {
            for i in 0..SUBDIVISION {
                let a = base + i + m * j;
                let _ = writeln!(s, "4 {} {} {} {}", a, a + 1, a + 1 + m, a + m);
            }
        }
    }
    let _ = writeln!(s, "POINT_DATA {}", samples.len());
    for (name, get) in [
        (
            "J",
            (|p: &crate::postprocess::PointSample| p.j) as fn(&_) -> f64,
        ),
        ("I1", |p| p.i1),
        ("sigma_min", |p| p.sigma_min),
    ] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for p in &samples {
            let _ = writeln!(s, "{:.12e}", get(p));
        }
    }
    Ok(s)
}

/// Write through a temporary file in the target directory, then rename.
pub fn atomic_write(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
