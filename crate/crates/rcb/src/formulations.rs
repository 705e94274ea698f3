//! Builders for the four composite dispatch models under either use-case
//! objective.
//!
//! All four share the composite storage dynamics; they differ in how they
//! treat simultaneous charging and discharging:
//!
//! * realizable composite (RCB): linear, cutting plane at `(N-1)/N` plus an
//!   energy buffer, every feasible schedule disaggregates admissibly;
//! * relaxed: linear, cutting plane at 1, no complementarity — an upper
//!   bound that may be unrealizable;
//! * MILP under equal power sharing: composite complementarity via one
//!   binary per step;
//! * MILP under unequal power sharing: element-wise variables and binaries
//!   at scheduler resolution.

use thiserror::Error;

use crate::problem::{Cmp, OptProblem, Sense, VarId};
use crate::types::{validate_fleet, CompositeSchedule, CoreError, FleetParams, TimeGrid};

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error(transparent)]
    Validation(#[from] CoreError),
    #[error("objective signal has {got} entries, expected k_steps = {expected}")]
    SignalLength { expected: usize, got: usize },
}

/// The model roster compared in the experiments. The robust envelope model
/// referenced alongside these in the literature is external and not built
/// here; reports leave a labelled slot for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rcb,
    Relaxed,
    MilpEqual,
    MilpUnequal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Rcb,
        ModelKind::Relaxed,
        ModelKind::MilpEqual,
        ModelKind::MilpUnequal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Rcb => "rcb",
            ModelKind::Relaxed => "relaxed",
            ModelKind::MilpEqual => "milp-equal",
            ModelKind::MilpUnequal => "milp-unequal",
        }
    }
}

/// Use-case objective over the scheduler horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Minimize sum |net - reference| via epigraph variables (pure LP).
    TrackingL1 { reference: Vec<f64> },
    /// Minimize sum (net - reference)^2 via residual variables carrying a
    /// diagonal quadratic objective.
    TrackingQp { reference: Vec<f64> },
    /// Maximize sum C[k] * (P_d[k] - P_c[k]); raw prices, no step-length
    /// factor. Metrics report the step-scaled value alongside.
    Revenue { prices: Vec<f64> },
}

impl Objective {
    pub fn signal(&self) -> &[f64] {
        match self {
            Objective::TrackingL1 { reference } | Objective::TrackingQp { reference } => reference,
            Objective::Revenue { prices } => prices,
        }
    }

    pub fn is_tracking(&self) -> bool {
        !matches!(self, Objective::Revenue { .. })
    }

    fn check_len(&self, k_steps: usize) -> Result<(), FormulationError> {
        if self.signal().len() != k_steps {
            return Err(FormulationError::SignalLength {
                expected: k_steps,
                got: self.signal().len(),
            });
        }
        Ok(())
    }
}

/// Worst-case one-step SOE divergence under the priority stack (kWh); the
/// buffer the realizable model keeps clear of the composite energy limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBuffer(pub f64);

impl EpsilonBuffer {
    pub fn kwh(&self) -> f64 {
        self.0
    }
}

/// `epsilon = delta_t_ctrl * (eta_c * P_c,max + P_d,max / eta_d)`.
pub fn epsilon(params: &crate::types::ElementParams, delta_t_ctrl_hours: f64) -> EpsilonBuffer {
    EpsilonBuffer(params.worst_step_spread_kwh(delta_t_ctrl_hours))
}

/// Element-major power values, `n` rows of `k_steps` entries.
pub type PowerMatrix = Vec<Vec<f64>>;

/// Variable handles of a built model, for extracting schedules from
/// solutions.
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub p_c: Vec<VarId>,
    pub p_d: Vec<VarId>,
    pub energy: Vec<VarId>,
    /// Per-element power variables (element-major), present only for the
    /// unequal-sharing MILP.
    pub element_p_c: Option<Vec<Vec<VarId>>>,
    pub element_p_d: Option<Vec<Vec<VarId>>>,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub kind: ModelKind,
    pub problem: OptProblem,
    pub vars: ModelVars,
}

/// Sub-0.1-mW magnitudes in solver output are numerical noise, not dispatch
/// decisions; they are snapped to exact zeros so downstream exact-sum checks
/// see the schedule the solver meant.
fn snap_power(v: f64) -> f64 {
    if v < 1e-7 && v > -1e-6 {
        0.0
    } else {
        v
    }
}

impl BuiltModel {
    /// Composite schedule from a solved assignment, with solver noise
    /// snapped to zero so the schedule type invariant holds.
    pub fn schedule(&self, assignment: &[f64]) -> Result<CompositeSchedule, CoreError> {
        let snap = |id: &VarId| snap_power(assignment[id.index()]);
        CompositeSchedule::new(
            self.vars.p_c.iter().map(snap).collect(),
            self.vars.p_d.iter().map(snap).collect(),
        )
    }

    /// Predicted composite energy trajectory (kWh), length `k_steps + 1`.
    pub fn energy_trajectory(&self, assignment: &[f64]) -> Vec<f64> {
        self.vars
            .energy
            .iter()
            .map(|id| assignment[id.index()])
            .collect()
    }

    /// Per-element scheduler-step powers (element-major `n x k`), when the
    /// model carries them.
    pub fn element_powers(&self, assignment: &[f64]) -> Option<(PowerMatrix, PowerMatrix)> {
        let pc = self.vars.element_p_c.as_ref()?;
        let pd = self.vars.element_p_d.as_ref()?;
        let take = |m: &Vec<Vec<VarId>>| {
            m.iter()
                .map(|row| {
                    row.iter()
                        .map(|id| snap_power(assignment[id.index()]).max(0.0))
                        .collect()
                })
                .collect()
        };
        Some((take(pc), take(pd)))
    }
}

/// Builds the requested model with the given objective.
pub fn build_model(
    kind: ModelKind,
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
) -> Result<BuiltModel, FormulationError> {
    match kind {
        ModelKind::Rcb => build_rcb(fleet, grid, objective),
        ModelKind::Relaxed => build_relaxed(fleet, grid, objective),
        ModelKind::MilpEqual => build_milp_equal(fleet, grid, objective),
        ModelKind::MilpUnequal => build_milp_unequal(fleet, grid, objective),
    }
}

struct CompositeCore {
    problem: OptProblem,
    p_c: Vec<VarId>,
    p_d: Vec<VarId>,
    energy: Vec<VarId>,
}

/// Composite variables, dynamics, and initial condition shared by every
/// model; energy bounds are passed in by the caller.
fn composite_core(
    name: &str,
    fleet: &FleetParams,
    grid: &TimeGrid,
    e_lower: f64,
    e_upper: f64,
) -> CompositeCore {
    let n = fleet.n as f64;
    let el = &fleet.element;
    let k_steps = grid.k_steps;
    let dt = grid.delta_t_sched;
    let mut problem = OptProblem::new(name, Sense::Minimize);

    let p_c: Vec<VarId> = (0..k_steps)
        .map(|k| {
            problem
                .add_continuous(format!("pc_{k}"), 0.0, n * el.p_c_max)
                .unwrap()
        })
        .collect();
    let p_d: Vec<VarId> = (0..k_steps)
        .map(|k| {
            problem
                .add_continuous(format!("pd_{k}"), 0.0, n * el.p_d_max)
                .unwrap()
        })
        .collect();
    let energy: Vec<VarId> = (0..=k_steps)
        .map(|k| {
            problem
                .add_continuous(format!("e_{k}"), e_lower, e_upper)
                .unwrap()
        })
        .collect();

    problem.add_constraint("init", vec![(energy[0], 1.0)], Cmp::Eq, fleet.total_e0());
    for k in 0..k_steps {
        problem.add_constraint(
            format!("dyn_{k}"),
            vec![
                (energy[k + 1], 1.0),
                (energy[k], -1.0),
                (p_c[k], -dt * el.eta_c),
                (p_d[k], dt / el.eta_d),
            ],
            Cmp::Eq,
            0.0,
        );
    }

    CompositeCore {
        problem,
        p_c,
        p_d,
        energy,
    }
}

fn add_cutting_plane(core: &mut CompositeCore, fleet: &FleetParams, rhs: f64) {
    let n = fleet.n as f64;
    for k in 0..core.p_c.len() {
        core.problem.add_constraint(
            format!("cut_{k}"),
            vec![
                (core.p_c[k], 1.0 / (n * fleet.element.p_c_max)),
                (core.p_d[k], 1.0 / (n * fleet.element.p_d_max)),
            ],
            Cmp::Le,
            rhs,
        );
    }
}

/// Realizable composite battery model: cutting plane at `(N-1)/N` and the
/// epsilon energy buffer. Requires a validated fleet; every feasible
/// schedule disaggregates admissibly under the priority stack.
pub fn build_rcb(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
) -> Result<BuiltModel, FormulationError> {
    objective.check_len(grid.k_steps)?;
    let eps = validate_fleet(fleet, grid)?;
    let n = fleet.n as f64;
    let mut core = composite_core(
        "rcb",
        fleet,
        grid,
        n * eps,
        n * (fleet.element.e_max - eps),
    );
    add_cutting_plane(&mut core, fleet, (n - 1.0) / n);
    let vars = attach_objective(&mut core, fleet, objective);
    Ok(BuiltModel {
        kind: ModelKind::Rcb,
        problem: core.problem,
        vars,
    })
}

/// Convex relaxation: complementarity dropped, cutting plane at 1.
pub fn build_relaxed(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
) -> Result<BuiltModel, FormulationError> {
    objective.check_len(grid.k_steps)?;
    let n = fleet.n as f64;
    let mut core = composite_core("relaxed", fleet, grid, 0.0, n * fleet.element.e_max);
    add_cutting_plane(&mut core, fleet, 1.0);
    let vars = attach_objective(&mut core, fleet, objective);
    Ok(BuiltModel {
        kind: ModelKind::Relaxed,
        problem: core.problem,
        vars,
    })
}

/// Composite MILP under equal power sharing: one binary per step forbids
/// simultaneous charging and discharging at the composite level.
pub fn build_milp_equal(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
) -> Result<BuiltModel, FormulationError> {
    objective.check_len(grid.k_steps)?;
    let n = fleet.n as f64;
    let el = fleet.element;
    let mut core = composite_core("milp_equal", fleet, grid, 0.0, n * el.e_max);
    for k in 0..grid.k_steps {
        let b = core.problem.add_binary(format!("b_{k}")).unwrap();
        // big-M at the tight physical bounds
        core.problem.add_constraint(
            format!("chg_{k}"),
            vec![(core.p_c[k], 1.0), (b, -n * el.p_c_max)],
            Cmp::Le,
            0.0,
        );
        core.problem.add_constraint(
            format!("dis_{k}"),
            vec![(core.p_d[k], 1.0), (b, n * el.p_d_max)],
            Cmp::Le,
            n * el.p_d_max,
        );
    }
    let vars = attach_objective(&mut core, fleet, objective);
    Ok(BuiltModel {
        kind: ModelKind::MilpEqual,
        problem: core.problem,
        vars,
    })
}

/// Element-wise MILP at scheduler resolution: per-element powers, SOEs, and
/// complementarity binaries, coupled to the composite schedule.
pub fn build_milp_unequal(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
) -> Result<BuiltModel, FormulationError> {
    objective.check_len(grid.k_steps)?;
    let n = fleet.n as f64;
    let el = fleet.element;
    let k_steps = grid.k_steps;
    let dt = grid.delta_t_sched;
    let mut core = composite_core("milp_unequal", fleet, grid, 0.0, n * el.e_max);

    let mut element_p_c = Vec::with_capacity(fleet.n);
    let mut element_p_d = Vec::with_capacity(fleet.n);
    for i in 0..fleet.n {
        let pc_i: Vec<VarId> = (0..k_steps)
            .map(|k| {
                core.problem
                    .add_continuous(format!("pc_{i}_{k}"), 0.0, el.p_c_max)
                    .unwrap()
            })
            .collect();
        let pd_i: Vec<VarId> = (0..k_steps)
            .map(|k| {
                core.problem
                    .add_continuous(format!("pd_{i}_{k}"), 0.0, el.p_d_max)
                    .unwrap()
            })
            .collect();
        let e_i: Vec<VarId> = (0..=k_steps)
            .map(|k| {
                core.problem
                    .add_continuous(format!("e_{i}_{k}"), 0.0, el.e_max)
                    .unwrap()
            })
            .collect();
        core.problem
            .add_constraint(format!("init_{i}"), vec![(e_i[0], 1.0)], Cmp::Eq, fleet.e0[i]);
        for k in 0..k_steps {
            core.problem.add_constraint(
                format!("dyn_{i}_{k}"),
                vec![
                    (e_i[k + 1], 1.0),
                    (e_i[k], -1.0),
                    (pc_i[k], -dt * el.eta_c),
                    (pd_i[k], dt / el.eta_d),
                ],
                Cmp::Eq,
                0.0,
            );
            let b = core.problem.add_binary(format!("b_{i}_{k}")).unwrap();
            core.problem.add_constraint(
                format!("chg_{i}_{k}"),
                vec![(pc_i[k], 1.0), (b, -el.p_c_max)],
                Cmp::Le,
                0.0,
            );
            core.problem.add_constraint(
                format!("dis_{i}_{k}"),
                vec![(pd_i[k], 1.0), (b, el.p_d_max)],
                Cmp::Le,
                el.p_d_max,
            );
        }
        element_p_c.push(pc_i);
        element_p_d.push(pd_i);
    }

    // composite powers are the element sums
    for k in 0..k_steps {
        let mut terms_c = vec![(core.p_c[k], 1.0)];
        let mut terms_d = vec![(core.p_d[k], 1.0)];
        for i in 0..fleet.n {
            terms_c.push((element_p_c[i][k], -1.0));
            terms_d.push((element_p_d[i][k], -1.0));
        }
        core.problem
            .add_constraint(format!("agg_c_{k}"), terms_c, Cmp::Eq, 0.0);
        core.problem
            .add_constraint(format!("agg_d_{k}"), terms_d, Cmp::Eq, 0.0);
    }

    let mut vars = attach_objective(&mut core, fleet, objective);
    vars.element_p_c = Some(element_p_c);
    vars.element_p_d = Some(element_p_d);
    Ok(BuiltModel {
        kind: ModelKind::MilpUnequal,
        problem: core.problem,
        vars,
    })
}

fn attach_objective(core: &mut CompositeCore, fleet: &FleetParams, objective: &Objective) -> ModelVars {
    match objective {
        Objective::TrackingL1 { reference } => {
            tracking_l1_terms(&mut core.problem, &core.p_c, &core.p_d, reference, fleet)
        }
        Objective::TrackingQp { reference } => {
            tracking_qp_terms(&mut core.problem, &core.p_c, &core.p_d, reference, fleet)
        }
        Objective::Revenue { prices } => {
            revenue_terms(&mut core.problem, &core.p_c, &core.p_d, prices)
        }
    }
    ModelVars {
        p_c: core.p_c.clone(),
        p_d: core.p_d.clone(),
        energy: core.energy.clone(),
        element_p_c: None,
        element_p_d: None,
    }
}

fn residual_cap(fleet: &FleetParams, reference: &[f64]) -> f64 {
    let n = fleet.n as f64;
    let max_ref = reference.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    n * (fleet.element.p_c_max + fleet.element.p_d_max) + max_ref
}

/// Epigraph form of sum |net - ref|: `t_k >= +-(net - ref)`, minimize sum
/// t_k. Keeps every model a pure LP/MILP.
pub fn tracking_l1_terms(
    problem: &mut OptProblem,
    p_c: &[VarId],
    p_d: &[VarId],
    reference: &[f64],
    fleet: &FleetParams,
) {
    problem.sense = Sense::Minimize;
    let cap = residual_cap(fleet, reference);
    for (k, &r) in reference.iter().enumerate() {
        let t = problem
            .add_continuous(format!("t_{k}"), 0.0, cap)
            .unwrap();
        problem.set_objective(t, 1.0);
        problem.add_constraint(
            format!("l1p_{k}"),
            vec![(t, 1.0), (p_c[k], -1.0), (p_d[k], 1.0)],
            Cmp::Ge,
            -r,
        );
        problem.add_constraint(
            format!("l1n_{k}"),
            vec![(t, 1.0), (p_c[k], 1.0), (p_d[k], -1.0)],
            Cmp::Ge,
            r,
        );
    }
}

/// Residual form of sum (net - ref)^2: `r_k = net - ref` with a diagonal
/// quadratic objective on the residuals.
pub fn tracking_qp_terms(
    problem: &mut OptProblem,
    p_c: &[VarId],
    p_d: &[VarId],
    reference: &[f64],
    fleet: &FleetParams,
) {
    problem.sense = Sense::Minimize;
    let cap = residual_cap(fleet, reference);
    for (k, &r) in reference.iter().enumerate() {
        let res = problem
            .add_continuous(format!("r_{k}"), -cap, cap)
            .unwrap();
        problem.set_quadratic(res, 1.0);
        problem.add_constraint(
            format!("res_{k}"),
            vec![(res, 1.0), (p_c[k], -1.0), (p_d[k], 1.0)],
            Cmp::Eq,
            -r,
        );
    }
}

/// Revenue objective `max sum C[k] (P_d[k] - P_c[k])`, raw prices.
pub fn revenue_terms(problem: &mut OptProblem, p_c: &[VarId], p_d: &[VarId], prices: &[f64]) {
    problem.sense = Sense::Maximize;
    for (k, &c) in prices.iter().enumerate() {
        problem.set_objective(p_d[k], c);
        problem.set_objective(p_c[k], -c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{build_time_grid, reference_element, FleetParams};
    use approx::assert_abs_diff_eq;

    fn fleet(n: usize) -> FleetParams {
        FleetParams::uniform(n, reference_element(), 6.75).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        let el = reference_element();
        assert_abs_diff_eq!(epsilon(&el, 0.2).kwh(), 2.0026315789473684, epsilon = 1e-12);
        assert_abs_diff_eq!(epsilon(&el, 1.0).kwh(), 10.013157894736842, epsilon = 1e-12);
        // lossless symmetric case: 2 p dt
        let lossless = crate::types::ElementParams::new(1.0, 1.0, 4.0, 4.0, 10.0).unwrap();
        assert_abs_diff_eq!(epsilon(&lossless, 0.5).kwh(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rcb_cutting_plane_and_buffer() {
        let fleet = fleet(10);
        let grid = build_time_grid(0.2, 1, 3).unwrap();
        let obj = Objective::Revenue { prices: vec![1.0; 3] };
        let m = build_rcb(&fleet, &grid, &obj).unwrap();
        // cut rows present with rhs (n-1)/n
        let cut = m
            .problem
            .constraints()
            .iter()
            .find(|c| c.name == "cut_0")
            .unwrap();
        assert_abs_diff_eq!(cut.rhs, 0.9, epsilon = 1e-12);
        // energy bounds shrunk by n * epsilon
        let eps = epsilon(&fleet.element, 0.2).kwh();
        let e_var = &m.problem.vars()[m.vars.energy[0].index()];
        assert_abs_diff_eq!(e_var.lower, 10.0 * eps, epsilon = 1e-9);
        assert_abs_diff_eq!(e_var.upper, 10.0 * (13.5 - eps), epsilon = 1e-9);
        assert_eq!(m.problem.n_binaries(), 0);
    }

    #[test]
    fn rcb_buffer_infeasible_propagates() {
        let fleet = fleet(10);
        let grid = build_time_grid(1.0, 1, 3).unwrap();
        let obj = Objective::Revenue { prices: vec![1.0; 3] };
        assert!(matches!(
            build_rcb(&fleet, &grid, &obj),
            Err(FormulationError::Validation(
                CoreError::BufferInfeasible { .. }
            ))
        ));
    }

    #[test]
    fn relaxed_plane_at_one() {
        let fleet = fleet(10);
        let grid = build_time_grid(0.25, 1, 2).unwrap();
        let obj = Objective::Revenue { prices: vec![0.0, 0.0] };
        let m = build_relaxed(&fleet, &grid, &obj).unwrap();
        let cut = m
            .problem
            .constraints()
            .iter()
            .find(|c| c.name == "cut_1")
            .unwrap();
        assert_eq!(cut.rhs, 1.0);
        assert_eq!(m.problem.n_binaries(), 0);
    }

    #[test]
    fn milp_equal_has_k_binaries() {
        let fleet = fleet(4);
        let grid = build_time_grid(0.25, 1, 5).unwrap();
        let obj = Objective::TrackingL1 { reference: vec![0.0; 5] };
        let m = build_milp_equal(&fleet, &grid, &obj).unwrap();
        assert_eq!(m.problem.n_binaries(), 5);
    }

    #[test]
    fn milp_unequal_has_nk_binaries() {
        let fleet = fleet(3);
        let grid = build_time_grid(0.25, 1, 4).unwrap();
        let obj = Objective::Revenue { prices: vec![1.0; 4] };
        let m = build_milp_unequal(&fleet, &grid, &obj).unwrap();
        assert_eq!(m.problem.n_binaries(), 12);
        assert!(m.vars.element_p_c.is_some());
    }

    #[test]
    fn signal_length_mismatch_rejected() {
        let fleet = fleet(2);
        let grid = build_time_grid(0.25, 1, 4).unwrap();
        let obj = Objective::Revenue { prices: vec![1.0; 3] };
        assert!(matches!(
            build_relaxed(&fleet, &grid, &obj),
            Err(FormulationError::SignalLength { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn all_entries_finite() {
        let fleet = fleet(5);
        let grid = build_time_grid(0.25, 2, 6).unwrap();
        for kind in ModelKind::ALL {
            let m = build_model(
                kind,
                &fleet,
                &grid,
                &Objective::TrackingL1 {
                    reference: vec![1.5; 6],
                },
            )
            .unwrap();
            for c in m.problem.constraints() {
                assert!(c.rhs.is_finite());
                for &(_, w) in &c.terms {
                    assert!(w.is_finite());
                }
            }
            for v in m.problem.vars() {
                assert!(v.lower.is_finite() && v.upper.is_finite());
            }
        }
    }
}
