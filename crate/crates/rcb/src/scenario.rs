//! End-to-end scenario pipeline: build a model, solve it, realize the
//! schedule on the element fleet, verify admissibility, and report
//! predicted vs realized performance.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulations::{build_model, BuiltModel, FormulationError, ModelKind, Objective};
use crate::problem::{Solution, SolveStatus};
use crate::psc::{disaggregate_schedule, PscError};
use crate::sim::{
    check_admissibility, realize_net_power, simulate_fleet, soe_spread, SimError,
};
use crate::signals::{load_signal, SignalError};
use crate::solver::{solve_external, FileFormat, SolveError, SolverConfig};
use crate::types::{
    validate_fleet, AdmissibilityReport, CompositeSchedule, CoreError, ElementDispatch,
    ElementParams, FleetParams, TimeGrid,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Psc(#[from] PscError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("solver finished without a usable solution: status {0}")]
    SolveFailed(SolveStatus),
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Initial SOEs: either `"uniform:<kwh>"` or an explicit per-element list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum E0Spec {
    Spec(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetConfig {
    pub n: usize,
    pub element: ElementParams,
    pub e0: E0Spec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub delta_t_sched_hours: f64,
    pub m: usize,
    pub k_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    TrackingL1,
    TrackingQp,
    Revenue,
}

impl ObjectiveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveKind::TrackingL1 => "tracking-l1",
            ObjectiveKind::TrackingQp => "tracking-qp",
            ObjectiveKind::Revenue => "revenue",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// Signal CSV, resolved relative to the config file's directory.
    pub signal: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverSection {
    /// Command template tokens; defaults to the bundled backend.
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub time_limit_seconds: Option<f64>,
    /// "lp" (default) or "mps".
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub fleet: FleetConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf), ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let config: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, base))
    }

    pub fn fleet(&self) -> Result<FleetParams, ScenarioError> {
        let e0 = match &self.fleet.e0 {
            E0Spec::Values(v) => v.clone(),
            E0Spec::Spec(s) => {
                let rest = s.strip_prefix("uniform:").ok_or_else(|| {
                    ScenarioError::Config(format!(
                        "e0 spec must be 'uniform:<kwh>' or a list, got {s:?}"
                    ))
                })?;
                let value: f64 = rest.trim().parse().map_err(|_| {
                    ScenarioError::Config(format!("bad uniform e0 value {rest:?}"))
                })?;
                vec![value; self.fleet.n]
            }
        };
        Ok(FleetParams::new(self.fleet.n, self.fleet.element, e0)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ScenarioError> {
        Ok(crate::types::build_time_grid(
            self.grid.delta_t_sched_hours,
            self.grid.m,
            self.grid.k_steps,
        )?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, ScenarioError> {
        let mut cfg = SolverConfig::default();
        if let Some(cmd) = &self.solver.command {
            cfg.command = cmd.clone();
        }
        if let Some(secs) = self.solver.time_limit_seconds {
            cfg.time_limit = Some(Duration::from_secs_f64(secs));
        }
        match self.solver.format.as_deref() {
            None | Some("lp") => cfg.format = FileFormat::LpText,
            Some("mps") => cfg.format = FileFormat::Mps,
            Some(other) => {
                return Err(ScenarioError::Config(format!(
                    "unknown problem file format {other:?}"
                )))
            }
        }
        Ok(cfg)
    }

    pub fn objective(&self, base_dir: &Path, k_steps: usize) -> Result<Objective, ScenarioError> {
        let section = self
            .objective
            .as_ref()
            .ok_or_else(|| ScenarioError::Config("scenario has no objective".into()))?;
        let path = if section.signal.is_absolute() {
            section.signal.clone()
        } else {
            base_dir.join(&section.signal)
        };
        let signal = load_signal(&path, k_steps)?;
        Ok(match section.kind {
            ObjectiveKind::TrackingL1 => Objective::TrackingL1 { reference: signal },
            ObjectiveKind::TrackingQp => Objective::TrackingQp { reference: signal },
            ObjectiveKind::Revenue => Objective::Revenue { prices: signal },
        })
    }
}

// ---------------------------------------------------------------------------
// Results and metrics
// ---------------------------------------------------------------------------

/// Per-scheduler-step realized composite powers, averaged over the
/// controller steps of each scheduler step.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedComposite {
    pub p_c: Vec<f64>,
    pub p_d: Vec<f64>,
}

impl RealizedComposite {
    pub fn net(&self, k: usize) -> f64 {
        self.p_c[k] - self.p_d[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveMetrics {
    pub objective: f64,
    pub mse_kw2: Option<f64>,
    pub mae_kw: Option<f64>,
    pub revenue_usd: Option<f64>,
    pub revenue_step_scaled_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub predicted: ObjectiveMetrics,
    pub realized: ObjectiveMetrics,
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub model: ModelKind,
    pub objective_kind: ObjectiveKind,
    pub status: SolveStatus,
    pub solve_wall_time: Duration,
    pub mip_gap: Option<f64>,
    /// Energy buffer in effect (RCB only).
    pub epsilon_kwh: Option<f64>,
    pub schedule: CompositeSchedule,
    pub predicted_energy: Vec<f64>,
    pub dispatch: ElementDispatch,
    pub realized: RealizedComposite,
    pub admissibility: AdmissibilityReport,
    pub saturation_events: usize,
    pub max_soe_spread_kwh: f64,
    pub metrics: Metrics,
}

/// Post-hoc metrics from a composite power trajectory; the predicted and
/// realized sides use the same arithmetic so gaps are attributable to the
/// realization alone.
pub fn compute_metrics(
    p_c: &[f64],
    p_d: &[f64],
    objective: &Objective,
    delta_t_sched: f64,
) -> ObjectiveMetrics {
    let k_steps = p_c.len();
    let net = |k: usize| p_c[k] - p_d[k];
    match objective {
        Objective::TrackingL1 { reference } | Objective::TrackingQp { reference } => {
            let sq: f64 = (0..k_steps).map(|k| (net(k) - reference[k]).powi(2)).sum();
            let abs: f64 = (0..k_steps).map(|k| (net(k) - reference[k]).abs()).sum();
            let objective_value = match objective {
                Objective::TrackingL1 { .. } => abs,
                _ => sq,
            };
            ObjectiveMetrics {
                objective: objective_value,
                mse_kw2: Some(sq / k_steps as f64),
                mae_kw: Some(abs / k_steps as f64),
                revenue_usd: None,
                revenue_step_scaled_usd: None,
            }
        }
        Objective::Revenue { prices } => {
            let raw: f64 = (0..k_steps).map(|k| prices[k] * (p_d[k] - p_c[k])).sum();
            ObjectiveMetrics {
                objective: raw,
                mse_kw2: None,
                mae_kw: None,
                revenue_usd: Some(raw),
                revenue_step_scaled_usd: Some(raw * delta_t_sched),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct Realization {
    dispatch: ElementDispatch,
    /// Fleet the dispatch is checked against (the aggregate battery for the
    /// net-power realization, the real fleet otherwise).
    check_fleet: FleetParams,
    saturation_events: usize,
    /// Composite schedule the dispatch implements, when it differs from the
    /// solver's composite variables by solver feasibility noise (the
    /// element-wise MILP case).
    implemented: Option<CompositeSchedule>,
}

/// Aggregate single-battery stand-in for realizations that cannot split
/// power across elements.
fn aggregate_fleet(fleet: &FleetParams) -> FleetParams {
    let n = fleet.n as f64;
    FleetParams {
        n: 1,
        element: ElementParams {
            p_c_max: fleet.element.p_c_max * n,
            p_d_max: fleet.element.p_d_max * n,
            e_max: fleet.element.e_max * n,
            ..fleet.element
        },
        e0: vec![fleet.total_e0()],
    }
}

/// Replicates scheduler-step powers over the controller steps of each step.
pub fn expand_to_controller_steps(grid: &TimeGrid, by_k: &[Vec<f64>]) -> Vec<Vec<f64>> {
    by_k
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(grid.l_steps());
            for &v in row {
                out.extend(std::iter::repeat_n(v, grid.m));
            }
            out
        })
        .collect()
}

fn realize(
    kind: ModelKind,
    fleet: &FleetParams,
    grid: &TimeGrid,
    built: &BuiltModel,
    assignment: &[f64],
    schedule: &CompositeSchedule,
) -> Result<Realization, ScenarioError> {
    match kind {
        ModelKind::Rcb => {
            let dispatch = disaggregate_schedule(fleet, grid, schedule)?;
            Ok(Realization {
                dispatch,
                check_fleet: fleet.clone(),
                saturation_events: 0,
                implemented: None,
            })
        }
        ModelKind::Relaxed => {
            let r = realize_net_power(fleet, grid, schedule)?;
            Ok(Realization {
                dispatch: r.dispatch,
                check_fleet: aggregate_fleet(fleet),
                saturation_events: r.saturation.len(),
                implemented: None,
            })
        }
        ModelKind::MilpEqual => {
            let n = fleet.n as f64;
            let share_c: Vec<Vec<f64>> =
                vec![schedule.p_c.iter().map(|p| p / n).collect(); fleet.n];
            let share_d: Vec<Vec<f64>> =
                vec![schedule.p_d.iter().map(|p| p / n).collect(); fleet.n];
            let p_c = expand_to_controller_steps(grid, &share_c);
            let p_d = expand_to_controller_steps(grid, &share_d);
            let dispatch = simulate_fleet(fleet, grid, p_c, p_d)?;
            Ok(Realization {
                dispatch,
                check_fleet: fleet.clone(),
                saturation_events: 0,
                implemented: None,
            })
        }
        ModelKind::MilpUnequal => {
            let (pc_k, pd_k) = built
                .element_powers(assignment)
                .ok_or_else(|| ScenarioError::Config("model lacks element variables".into()))?;
            // the composite this dispatch actually implements: the element
            // sums, which match the solver's composite variables only to
            // solver feasibility tolerance
            let k_steps = grid.k_steps;
            let sum = |m: &Vec<Vec<f64>>, k: usize| m.iter().map(|row| row[k]).sum::<f64>();
            let implemented = CompositeSchedule::new(
                (0..k_steps).map(|k| sum(&pc_k, k)).collect(),
                (0..k_steps).map(|k| sum(&pd_k, k)).collect(),
            )?;
            let p_c = expand_to_controller_steps(grid, &pc_k);
            let p_d = expand_to_controller_steps(grid, &pd_k);
            let dispatch = simulate_fleet(fleet, grid, p_c, p_d)?;
            Ok(Realization {
                dispatch,
                check_fleet: fleet.clone(),
                saturation_events: 0,
                implemented: Some(implemented),
            })
        }
    }
}

/// Runs the full pipeline for one scenario. `base_dir` anchors relative
/// signal paths (normally the config file's directory).
pub fn run_scenario(
    config: &ScenarioConfig,
    base_dir: &Path,
) -> Result<ScenarioResult, ScenarioError> {
    let fleet = config.fleet()?;
    let grid = config.time_grid()?;
    let kind = config
        .model
        .ok_or_else(|| ScenarioError::Config("scenario has no model".into()))?;
    let objective = config.objective(base_dir, grid.k_steps)?;
    let objective_kind = config.objective.as_ref().unwrap().kind;

    let built = build_model(kind, &fleet, &grid, &objective)?;
    let solver_cfg = config.solver_config()?;
    let solution: Solution = solve_external(&built.problem, &solver_cfg)?;
    let assignment = match (&solution.status, &solution.assignment) {
        (SolveStatus::Optimal, Some(x)) => x.clone(),
        (SolveStatus::TimeLimit, Some(x)) => x.clone(),
        (status, _) => return Err(ScenarioError::SolveFailed(*status)),
    };

    let schedule = built.schedule(&assignment)?;
    let predicted_energy = built.energy_trajectory(&assignment);
    let realization = realize(kind, &fleet, &grid, &built, &assignment, &schedule)?;
    let checked_schedule = realization.implemented.as_ref().unwrap_or(&schedule);
    let admissibility = check_admissibility(
        &realization.check_fleet,
        &grid,
        &realization.dispatch,
        checked_schedule,
    )?;
    let spread = soe_spread(&realization.dispatch);

    let realized = realized_composite(&grid, &realization.dispatch);
    let epsilon_kwh = match kind {
        ModelKind::Rcb => Some(validate_fleet(&fleet, &grid)?),
        _ => None,
    };

    let metrics = Metrics {
        predicted: compute_metrics(&schedule.p_c, &schedule.p_d, &objective, grid.delta_t_sched),
        realized: compute_metrics(&realized.p_c, &realized.p_d, &objective, grid.delta_t_sched),
    };

    Ok(ScenarioResult {
        name: config.name.clone(),
        model: kind,
        objective_kind,
        status: solution.status,
        solve_wall_time: solution.wall_time,
        mip_gap: solution.mip_gap,
        epsilon_kwh,
        schedule,
        predicted_energy,
        dispatch: realization.dispatch,
        realized,
        admissibility,
        saturation_events: realization.saturation_events,
        max_soe_spread_kwh: spread.max(),
        metrics,
    })
}

fn realized_composite(grid: &TimeGrid, dispatch: &ElementDispatch) -> RealizedComposite {
    let mut p_c = vec![0.0; grid.k_steps];
    let mut p_d = vec![0.0; grid.k_steps];
    for l in 0..grid.l_steps() {
        let k = grid.scheduler_index(l);
        p_c[k] += dispatch.total_charge(l);
        p_d[k] += dispatch.total_discharge(l);
    }
    let m = grid.m as f64;
    for k in 0..grid.k_steps {
        p_c[k] /= m;
        p_d[k] /= m;
    }
    RealizedComposite { p_c, p_d }
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MetricsFile<'a> {
    scenario: &'a str,
    model: &'a str,
    objective: &'a str,
    status: String,
    solver_wall_time_seconds: f64,
    mip_gap: Option<f64>,
    epsilon_kwh: Option<f64>,
    admissible: bool,
    violation_count: usize,
    max_violation: f64,
    saturation_events: usize,
    max_soe_spread_kwh: f64,
    metrics: &'a Metrics,
    /// The robust envelope model the comparison tables cite lives in an
    /// external codebase; this slot records that it was not run here.
    robust_model: &'a str,
}

/// Writes the documented result files into `out_dir`:
/// `composite_schedule.csv`, `element_dispatch.csv`, `spread.csv`, and
/// `metrics.json`. CSV contents are deterministic for identical inputs.
pub fn emit_results(result: &ScenarioResult, out_dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(out_dir)?;

    let mut composite = String::from("k,p_c_kw,p_d_kw,e_start_kwh,e_end_kwh\n");
    for k in 0..result.schedule.len() {
        composite.push_str(&format!(
            "{k},{},{},{},{}\n",
            result.schedule.p_c[k],
            result.schedule.p_d[k],
            result.predicted_energy[k],
            result.predicted_energy[k + 1],
        ));
    }
    std::fs::write(out_dir.join("composite_schedule.csv"), composite)?;

    let mut element = String::from("l,i,p_c_kw,p_d_kw,e_end_kwh\n");
    for l in 0..result.dispatch.l_steps() {
        for i in 0..result.dispatch.n_elements() {
            element.push_str(&format!(
                "{l},{i},{},{},{}\n",
                result.dispatch.p_c[i][l],
                result.dispatch.p_d[i][l],
                result.dispatch.soe[i][l + 1],
            ));
        }
    }
    std::fs::write(out_dir.join("element_dispatch.csv"), element)?;

    let trace = soe_spread(&result.dispatch);
    let mut spread = String::from("l,spread_kwh\n");
    for (l, s) in trace.0.iter().enumerate() {
        spread.push_str(&format!("{l},{s}\n"));
    }
    std::fs::write(out_dir.join("spread.csv"), spread)?;

    let metrics = MetricsFile {
        scenario: &result.name,
        model: result.model.as_str(),
        objective: result.objective_kind.as_str(),
        status: result.status.to_string(),
        solver_wall_time_seconds: result.solve_wall_time.as_secs_f64(),
        mip_gap: result.mip_gap,
        epsilon_kwh: result.epsilon_kwh,
        admissible: result.admissibility.ok,
        violation_count: result.admissibility.violations.len(),
        max_violation: result.admissibility.max_magnitude(),
        saturation_events: result.saturation_events,
        max_soe_spread_kwh: result.max_soe_spread_kwh,
        metrics: &result.metrics,
        robust_model: "external (not implemented here)",
    };
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)? + "\n",
    )?;
    Ok(())
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Config(e.to_string())
    }
}

/// Writes the feasible-region CSVs (`region_power.csv`,
/// `region_energy.csv`) for the `region` subcommand.
pub fn emit_region(
    region: &crate::region::FeasibleRegion,
    out_dir: &Path,
) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(out_dir)?;
    let mut power = String::from("region,p_c_kw,p_d_kw\n");
    for &(x, y) in &region.polygon {
        power.push_str(&format!("polygon,{x},{y}\n"));
    }
    for &(x, y) in &region.staircase {
        power.push_str(&format!("staircase,{x},{y}\n"));
    }
    std::fs::write(out_dir.join("region_power.csv"), power)?;

    let mut energy = String::from("k,e_min_kwh,e_max_kwh\n");
    for (k, (lo, hi)) in region.energy_min.iter().zip(&region.energy_max).enumerate() {
        energy.push_str(&format!("{k},{lo},{hi}\n"));
    }
    std::fs::write(out_dir.join("region_energy.csv"), energy)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV readers for the disaggregate / simulate subcommands
// ---------------------------------------------------------------------------

/// Reads a composite schedule CSV (header `k,p_c_kw,p_d_kw[,...]`).
pub fn read_composite_csv(path: &Path) -> Result<CompositeSchedule, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let mut p_c = Vec::new();
    let mut p_d = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(ScenarioError::Config(format!(
                "{}: row {} needs at least k,p_c_kw,p_d_kw",
                path.display(),
                idx + 1
            )));
        }
        let parse = |s: &str| -> Result<f64, ScenarioError> {
            s.trim()
                .parse()
                .map_err(|_| ScenarioError::Config(format!("bad number {s:?} in row {}", idx + 1)))
        };
        p_c.push(parse(cols[1])?);
        p_d.push(parse(cols[2])?);
    }
    Ok(CompositeSchedule::new(p_c, p_d)?)
}

/// Reads an element dispatch CSV (header `l,i,p_c_kw,p_d_kw[,...]`) into
/// power matrices, then recomputes the SOE trajectories by simulation.
pub fn read_dispatch_csv(
    path: &Path,
    fleet: &FleetParams,
    grid: &TimeGrid,
) -> Result<ElementDispatch, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let l_steps = grid.l_steps();
    let mut p_c = vec![vec![f64::NAN; l_steps]; fleet.n];
    let mut p_d = vec![vec![f64::NAN; l_steps]; fleet.n];
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return Err(ScenarioError::Config(format!(
                "{}: row {} needs l,i,p_c_kw,p_d_kw",
                path.display(),
                idx + 1
            )));
        }
        let bad = |what: &str| ScenarioError::Config(format!("bad {what} in row {}", idx + 1));
        let l: usize = cols[0].trim().parse().map_err(|_| bad("l"))?;
        let i: usize = cols[1].trim().parse().map_err(|_| bad("i"))?;
        if l >= l_steps || i >= fleet.n {
            return Err(ScenarioError::Config(format!(
                "row {} indexes (l={l}, i={i}) outside {l_steps} steps x {} elements",
                idx + 1,
                fleet.n
            )));
        }
        p_c[i][l] = cols[2].trim().parse().map_err(|_| bad("p_c_kw"))?;
        p_d[i][l] = cols[3].trim().parse().map_err(|_| bad("p_d_kw"))?;
    }
    for i in 0..fleet.n {
        for l in 0..l_steps {
            if p_c[i][l].is_nan() || p_d[i][l].is_nan() {
                return Err(ScenarioError::Config(format!(
                    "dispatch csv missing entry for l={l}, i={i}"
                )));
            }
        }
    }
    Ok(simulate_fleet(fleet, grid, p_c, p_d)?)
}
