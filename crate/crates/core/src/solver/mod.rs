//! Newton's method on the bordered equilibrium/volume system and load
//! stepping with step halving.

mod audit;

use faer::sparse::SparseColMat;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Execution, GlobalSystem, Problem};
use crate::error::{Error, Result};
use crate::mesh::{PressureMode, SystemState};
use crate::postprocess::{quadrature_samples, summarize, FieldSummary};

pub use audit::{fd_tangent_audit, AuditReport, BlockError};

/// Absolute floor of the force scale used to normalize residuals.
const FORCE_FLOOR: f64 = 1e-12;
/// Smallest line-search factor, `2⁻⁸`.
const MIN_STEP: f64 = 1.0 / 256.0;

fn default_tol_residual() -> f64 {
    1e-9
}
fn default_tol_increment() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    30
}
fn default_true() -> bool {
    true
}
fn default_substeps() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    #[serde(default = "default_tol_residual")]
    pub tol_residual: f64,
    #[serde(default = "default_tol_increment")]
    pub tol_increment: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub line_search: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol_residual: default_tol_residual(),
            tol_increment: default_tol_increment(),
            max_iter: default_max_iter(),
            line_search: true,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0 && self.tol_increment > 0.0 && self.max_iter >= 1) {
            return Err(Error::Config(
                "Newton tolerances must be positive and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Quantity driven by the load schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleParameter {
    /// Volume target `V̄ = value · volume_scale`.
    Volume,
    /// Hydrostatic density `ρ` (with unit `g_vec`, this is `ρg`).
    Gravity,
    /// Prescribed pressure.
    Pressure,
    /// Multiplier of the dead load.
    DeadLoad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub parameter: ScheduleParameter,
    pub values: Vec<f64>,
    /// Maximum number of step halvings on failure.
    #[serde(default = "default_substeps")]
    pub substep_levels: usize,
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("schedule values must be finite".into()));
        }
        let inc = self.values.windows(2).all(|w| w[1] >= w[0]);
        let dec = self.values.windows(2).all(|w| w[1] <= w[0]);
        if !(inc || dec) {
            return Err(Error::Config("schedule values must be monotone".into()));
        }
        Ok(())
    }
}

/// Load state derived from a schedule value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadDriver {
    pub parameter: ScheduleParameter,
    /// Multiplies volume schedule values.
    pub volume_scale: f64,
    /// Dead load at unit scale.
    pub dead_load: [f64; 3],
}

impl LoadDriver {
    pub fn new(problem: &Problem, parameter: ScheduleParameter, volume_scale: f64) -> Self {
        Self {
            parameter,
            volume_scale,
            dead_load: problem.load.dead_load,
        }
    }

    /// Write schedule `value` into the problem and the state.
    pub fn apply(&self, problem: &mut Problem, state: &mut SystemState, value: f64) -> Result<()> {
        match self.parameter {
            ScheduleParameter::Volume => match &mut problem.load.pressure {
                PressureMode::VolumeConstraint { target } => *target = value * self.volume_scale,
                PressureMode::Prescribed { .. } => {
                    return Err(Error::Config(
                        "volume schedule needs a volume-constraint load".into(),
                    ))
                }
            },
            ScheduleParameter::Gravity => match &mut problem.load.hydrostatic {
                Some(h) => h.rho = value,
                None => {
                    return Err(Error::Config(
                        "gravity schedule needs hydrostatic loading".into(),
                    ))
                }
            },
            ScheduleParameter::Pressure => {
                problem.load.pressure = PressureMode::Prescribed { p: value };
            }
            ScheduleParameter::DeadLoad => {
                problem.load.dead_load = self.dead_load.map(|c| c * value);
            }
        }
        if let PressureMode::Prescribed { p } = problem.load.pressure {
            state.p_v = p;
        }
        state.load_factor = value;
        Ok(())
    }

    /// Schedule value matching the current problem and state.
    pub fn current_value(
        &self,
        problem: &Problem,
        state: &SystemState,
        exec: Execution,
    ) -> Result<f64> {
        Ok(match self.parameter {
            ScheduleParameter::Volume => {
                assemble(problem, state, false, exec)?.volume / self.volume_scale
            }
            ScheduleParameter::Gravity => problem.load.hydrostatic.map_or(0.0, |h| h.rho),
            ScheduleParameter::Pressure => match problem.load.pressure {
                PressureMode::Prescribed { p } => p,
                PressureMode::VolumeConstraint { .. } => state.p_v,
            },
            ScheduleParameter::DeadLoad => state.load_factor,
        })
    }
}

/// One Newton iteration, for the diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    pub iter: usize,
    /// Combined scaled residual `max(‖f‖/f_ref, |g_v|/V_scale)` before the update.
    pub residual: f64,
    pub g_v: f64,
    pub p_v: f64,
    /// Accepted line-search factor, zero on the converged iterate.
    pub alpha: f64,
}

impl IterationRecord {
    pub fn to_line(&self) -> String {
        format!(
            "step={} iter={} residual={:.6e} g_v={:.6e} p_v={:.12e} alpha={}",
            self.step, self.iter, self.residual, self.g_v, self.p_v, self.alpha
        )
    }
}

/// Sparse LU with partial pivoting.
///
/// The supernodal path bounds fill by the structure of `AᵀA`, which a dense
/// border row makes full, so bordered systems use the left-looking path.
fn sparse_lu_solve(
    a: &SparseColMat<usize, f64>,
    mut rhs: Mat<f64>,
    bordered: bool,
) -> std::result::Result<Mat<f64>, String> {
    use faer::dyn_stack::{GlobalPodBuffer, PodStack};
    use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu};
    use faer::sparse::linalg::SupernodalThreshold;
    use faer::{Conj, Parallelism};

    let params = LuSymbolicParams {
        supernodal_flop_ratio_threshold: if bordered {
            SupernodalThreshold::FORCE_SIMPLICIAL
        } else {
            SupernodalThreshold::AUTO
        },
        ..Default::default()
    };
    let symbolic = factorize_symbolic_lu(a.symbolic(), params).map_err(|e| format!("{e:?}"))?;
    let par = Parallelism::None;
    let req = symbolic
        .factorize_numeric_lu_req::<f64>(par)
        .and_then(|r| r.try_or(symbolic.solve_in_place_req::<f64>(1, par)?))
        .map_err(|e| format!("{e:?}"))?;
    let mut mem = GlobalPodBuffer::try_new(req).map_err(|e| format!("{e:?}"))?;
    let mut numeric = NumericLu::new();
    let lu = symbolic
        .factorize_numeric_lu(&mut numeric, a.as_ref(), par, PodStack::new(&mut mem))
        .map_err(|e| format!("{e:?}"))?;
    lu.solve_in_place_with_conj(Conj::No, rhs.as_mut(), par, PodStack::new(&mut mem));
    Ok(rhs)
}

/// Solve the (optionally bordered) linear system for `(Δx, Δp_v)`.
///
/// With a volume constraint the system is `[[K, −L], [Hᵀ, 0]] [Δx; Δp] =
/// −[f; g_v]`; otherwise `K Δx = −f`.
pub fn newton_step(system: &GlobalSystem) -> Result<(Vec<f64>, f64)> {
    let n = system.residual.len();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let k = system
        .tangent
        .as_ref()
        .ok_or_else(|| Error::SingularSystem("tangent was not assembled".into()))?;
    let bordered = system.g_v.is_some();
    let size = if bordered { n + 1 } else { n };
    let mut trip = Vec::with_capacity(k.compute_nnz() + 2 * n);
    for j in 0..n {
        for (i, v) in k.row_indices_of_col(j).zip(k.values_of_col(j)) {
            trip.push((i, j, *v));
        }
    }
    // Power-of-two scaling keeps the dense border row out of the pivot
    // search until the end without perturbing the solution.
    let (row_scale, col_scale) = if bordered {
        let k_max = k.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let h_max = system.h_v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let l_max = system.l_ext.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pow2 = |target: f64, have: f64| {
            if have > 0.0 && target > 0.0 {
                2f64.powi((target / have).log2().floor() as i32)
            } else {
                1.0
            }
        };
        (pow2(1e-6 * k_max, h_max), pow2(1e-6 * k_max, l_max))
    } else {
        (1.0, 1.0)
    };
    if bordered {
        for d in 0..n {
            if system.l_ext[d] != 0.0 {
                trip.push((d, n, -system.l_ext[d] * col_scale));
            }
            if system.h_v[d] != 0.0 {
                trip.push((n, d, system.h_v[d] * row_scale));
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(size, size, &trip)
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(size, 1);
    for d in 0..n {
        rhs[(d, 0)] = -system.residual[d];
    }
    if let Some(g) = system.g_v {
        rhs[(n, 0)] = -g * row_scale;
    }
    let h_norm = system.h_v.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sol = sparse_lu_solve(&a, rhs, bordered).map_err(|e| {
        Error::SingularSystem(format!(
            "factorization failed ({e}); constraint row norm {h_norm:e}"
        ))
    })?;
    let dx: Vec<f64> = (0..n).map(|d| sol[(d, 0)]).collect();
    let dp = if bordered {
        sol[(n, 0)] * col_scale
    } else {
        0.0
    };
    if dx.iter().any(|v| !v.is_finite()) || !dp.is_finite() {
        return Err(Error::SingularSystem(format!(
            "non-finite increment; constraint row norm {h_norm:e}"
        )));
    }
    Ok((dx, dp))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Force scale: the larger of the internal force and the pressure load.
fn force_scale(problem: &Problem, state: &SystemState, exec: Execution) -> Result<f64> {
    let arrays = exec.map(problem.mesh.elements.len(), |e| {
        crate::assembly::element_arrays(problem, e, &state.coords, state.p_v, false)
    });
    let n = problem.n_dofs();
    let mut fi = vec![0.0; n];
    let mut fe = vec![0.0; n];
    for arr in arrays {
        let arr = arr?;
        for (k, &node) in arr.nodes.iter().enumerate() {
            for c in 0..3 {
                let d = 3 * node + c;
                if !problem.bcs.is_fixed(d) {
                    fi[d] += arr.f_int[3 * k + c];
                    fe[d] += arr.f_ext[3 * k + c];
                }
            }
        }
    }
    Ok(norm(&fi).max(norm(&fe)))
}

struct Measure {
    value: f64,
    g_v: f64,
}

fn measure(system: &GlobalSystem, f_ref: f64, v_scale: f64) -> Measure {
    let g_v = system.g_v.unwrap_or(0.0);
    let value = (norm(&system.residual) / f_ref).max(g_v.abs() / v_scale);
    Measure { value, g_v }
}

fn apply_update(state: &SystemState, dx: &[f64], dp: f64, alpha: f64) -> SystemState {
    let mut s = state.clone();
    for (d, v) in dx.iter().enumerate() {
        s.add_to_dof(d, alpha * v);
    }
    s.p_v += alpha * dp;
    s
}

/// Outcome of one converged load step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepConvergence {
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// Newton iteration at fixed load from `state`, updated in place on success.
pub fn solve_step(
    problem: &Problem,
    state: &mut SystemState,
    settings: &NewtonSettings,
    exec: Execution,
    v_scale: f64,
    step: usize,
) -> Result<StepConvergence> {
    let mut history = Vec::new();
    let mut f_ref = FORCE_FLOOR.max(problem.force_unit);
    let v_scale = v_scale.abs().max(f64::MIN_POSITIVE);
    let x_scale = state
        .coords
        .iter()
        .map(|x| x.amax())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for iter in 0..=settings.max_iter {
        let system = assemble(problem, state, true, exec)?;
        f_ref = f_ref
            .max(norm(&system.residual))
            .max(force_scale(problem, state, exec)?);
        let m = measure(&system, f_ref, v_scale);
        let mut rec = IterationRecord {
            step,
            iter,
            residual: m.value,
            g_v: m.g_v,
            p_v: state.p_v,
            alpha: 0.0,
        };
        if m.value < settings.tol_residual {
            log::debug!("{}", rec.to_line());
            history.push(rec);
            return Ok(StepConvergence {
                iterations: iter,
                history,
            });
        }
        if iter == settings.max_iter {
            history.push(rec);
            break;
        }
        let (dx, dp) = newton_step(&system)?;
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = apply_update(state, &dx, dp, alpha);
            let ok = assemble(problem, &trial, false, exec)
                .ok()
                .map(|s| measure(&s, f_ref, v_scale).value)
                .filter(|v| v.is_finite());
            match ok {
                Some(v) if !settings.line_search || v < (1.0 - 1e-4 * alpha) * m.value => {
                    break Some(trial)
                }
                // Stagnation at round-off: accept the full step.
                Some(v) if alpha == 1.0 && m.value.max(v) < 10.0 * settings.tol_residual => {
                    break Some(trial)
                }
                _ if !settings.line_search => break None,
                _ => {}
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                break None;
            }
        };
        rec.alpha = alpha;
        log::debug!("{}", rec.to_line());
        history.push(rec);
        match accepted {
            Some(trial) => *state = trial,
            None => {
                return Err(Error::Divergence(format!(
                    "line search failed at iteration {iter} (scaled residual {:.3e})",
                    m.value
                )))
            }
        }
        let dx_norm = alpha * norm(&dx);
        if dx_norm < settings.tol_increment * x_scale {
            let check = assemble(problem, state, false, exec)?;
            let mm = measure(&check, f_ref, v_scale);
            if mm.value < settings.tol_residual.sqrt() {
                let rec = IterationRecord {
                    step,
                    iter: iter + 1,
                    residual: mm.value,
                    g_v: mm.g_v,
                    p_v: state.p_v,
                    alpha: 0.0,
                };
                log::debug!("{} increment_converged=1", rec.to_line());
                history.push(rec);
                return Ok(StepConvergence {
                    iterations: iter + 1,
                    history,
                });
            }
        }
    }
    Err(Error::Divergence(format!(
        "no convergence within {} iterations (scaled residual {:.3e})",
        settings.max_iter,
        history.last().map_or(f64::NAN, |r| r.residual)
    )))
}

/// Converged state at one schedule value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub value: f64,
    pub volume: f64,
    pub p_v: f64,
    pub summary: FieldSummary,
    /// Newton iterations of the final (sub)step reaching `value`.
    pub iterations: usize,
    /// Newton iterations summed over all substeps.
    pub total_iterations: usize,
    pub substeps: usize,
    pub history: Vec<IterationRecord>,
}

/// Result of a complete or aborted schedule.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub state: SystemState,
    /// Error that aborted the schedule, if any.
    pub failure: Option<String>,
}

/// Drive `problem` through the schedule from `state`.
///
/// `on_step` sees every converged schedule value; failures halve the
/// remaining interval up to `substep_levels` times before aborting with the
/// last converged state kept.
#[allow(clippy::too_many_arguments)]
pub fn run_schedule(
    problem: &mut Problem,
    state: SystemState,
    schedule: &StepSchedule,
    driver: &LoadDriver,
    settings: &NewtonSettings,
    exec: Execution,
    v_scale: f64,
    mut on_step: impl FnMut(&StepRecord, &SystemState, &Problem) -> Result<()>,
) -> Result<Trajectory> {
    schedule.validate()?;
    settings.validate()?;
    let mut state = state;
    let mut steps = Vec::new();
    let mut prev: Option<f64> = None;
    let start = driver.current_value(problem, &state, exec)?;
    for (k, &value) in schedule.values.iter().enumerate() {
        let mut history = Vec::new();
        let mut substeps = 0;
        let mut total = 0;
        let mut last_iters = 0;
        // Stack of targets still to reach, last element next.
        let mut pending = vec![(value, 0usize)];
        let mut from = prev.unwrap_or(start);
        let mut failure = None;
        while let Some((target, level)) = pending.pop() {
            let mut trial = state.clone();
            let attempt = driver
                .apply(problem, &mut trial, target)
                .and_then(|_| solve_step(problem, &mut trial, settings, exec, v_scale, k));
            match attempt {
                Ok(conv) => {
                    total += conv.iterations;
                    last_iters = conv.iterations;
                    history.extend(conv.history);
                    state = trial;
                    from = target;
                    substeps += 1;
                }
                Err(err) if level < schedule.substep_levels => {
                    log::info!("step={k} target={target} level={level} halving: {err}");
                    let mid = 0.5 * (from + target);
                    pending.push((target, level + 1));
                    pending.push((mid, level + 1));
                }
                Err(err) => {
                    failure = Some(Error::StepFailure {
                        value: target,
                        reason: err.to_string(),
                    });
                    break;
                }
            }
        }
        if let Some(err) = failure {
            // Restore the load of the last converged state.
            if let Some(p) = prev {
                let mut s = state.clone();
                driver.apply(problem, &mut s, p)?;
            }
            return Ok(Trajectory {
                steps,
                state,
                failure: Some(err.to_string()),
            });
        }
        let system = assemble(problem, &state, false, exec)?;
        let samples = quadrature_samples(problem, &state, exec)?;
        let rec = StepRecord {
            value,
            volume: system.volume,
            p_v: state.p_v,
            summary: summarize(problem, &samples),
            iterations: last_iters,
            total_iterations: total,
            substeps,
            history,
        };
        on_step(&rec, &state, problem)?;
        steps.push(rec);
        prev = Some(value);
    }
    Ok(Trajectory {
        steps,
        state,
        failure: None,
    })
}
