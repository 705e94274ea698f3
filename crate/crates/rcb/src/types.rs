//! Shared domain types and validation for the composite battery toolkit.
//!
//! Internal units are fixed: power in kW, energy in kWh, durations in hours.
//! File inputs declare their units in headers and are converted at the
//! boundary (see [`crate::signals`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for kW / kWh equality checks.
pub const ABS_TOL: f64 = 1e-9;
/// Relative slack for inequality feasibility checks.
pub const REL_TOL: f64 = 1e-6;

/// The one place that turns power (kW) times duration (h) into energy (kWh).
#[inline]
pub fn energy_kwh(power_kw: f64, hours: f64) -> f64 {
    power_kw * hours
}

/// Slack granted when checking `x <= bound`: absolute floor plus a relative
/// term so large bounds do not fail on representation noise.
#[inline]
pub fn ineq_slack(bound: f64) -> f64 {
    ABS_TOL.max(REL_TOL * bound.abs())
}

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "initial SOE spread {spread_kwh} kWh exceeds the energy buffer epsilon = {epsilon_kwh} kWh"
    )]
    SpreadTooLarge { spread_kwh: f64, epsilon_kwh: f64 },
    #[error(
        "energy buffer epsilon = {epsilon_kwh} kWh exceeds E_max/2 = {half_e_max_kwh} kWh; \
         increase the controller subdivision M to shrink the buffer"
    )]
    BufferInfeasible {
        epsilon_kwh: f64,
        half_e_max_kwh: f64,
    },
}

/// Physical limits and efficiencies shared by every element of a fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementParams {
    /// Charge efficiency (0 < eta_c <= 1).
    pub eta_c: f64,
    /// Discharge efficiency (0 < eta_d <= 1).
    pub eta_d: f64,
    /// Maximum charge power (kW, > 0).
    pub p_c_max: f64,
    /// Maximum discharge power (kW, > 0).
    pub p_d_max: f64,
    /// Energy capacity (kWh, > 0).
    pub e_max: f64,
}

impl ElementParams {
    pub fn new(
        eta_c: f64,
        eta_d: f64,
        p_c_max: f64,
        p_d_max: f64,
        e_max: f64,
    ) -> Result<Self, CoreError> {
        let p = Self {
            eta_c,
            eta_d,
            p_c_max,
            p_d_max,
            e_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let positive = [
            (self.eta_c, "eta_c"),
            (self.eta_d, "eta_d"),
            (self.p_c_max, "p_c_max"),
            (self.p_d_max, "p_d_max"),
            (self.e_max, "e_max"),
        ];
        for (v, name) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(CoreError::InvalidParams(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        for (v, name) in [(self.eta_c, "eta_c"), (self.eta_d, "eta_d")] {
            if v > 1.0 {
                return Err(CoreError::InvalidParams(format!(
                    "{name} must be <= 1, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Worst-case one-controller-step SOE spread growth (kWh): the buffer a
    /// composite schedule must keep clear of the element energy limits.
    pub fn worst_step_spread_kwh(&self, delta_t_ctrl_hours: f64) -> f64 {
        energy_kwh(
            self.eta_c * self.p_c_max + self.p_d_max / self.eta_d,
            delta_t_ctrl_hours,
        )
    }
}

/// Scheduler / controller step structure.
///
/// The scheduler runs `k_steps` steps of `delta_t_sched` hours; each is
/// subdivided into `m` controller steps of `delta_t_sched / m` hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Scheduler step length (hours).
    pub delta_t_sched: f64,
    /// Controller subdivision per scheduler step.
    pub m: usize,
    /// Number of scheduler steps.
    pub k_steps: usize,
}

/// Builds a validated [`TimeGrid`].
pub fn build_time_grid(delta_t_sched: f64, m: usize, k_steps: usize) -> Result<TimeGrid, CoreError> {
    if delta_t_sched <= 0.0 || !delta_t_sched.is_finite() {
        return Err(CoreError::InvalidGrid(format!(
            "scheduler step must be positive and finite, got {delta_t_sched}"
        )));
    }
    if m == 0 {
        return Err(CoreError::InvalidGrid("subdivision m must be >= 1".into()));
    }
    if k_steps == 0 {
        return Err(CoreError::InvalidGrid("k_steps must be >= 1".into()));
    }
    Ok(TimeGrid {
        delta_t_sched,
        m,
        k_steps,
    })
}

impl TimeGrid {
    /// Controller step length (hours).
    #[inline]
    pub fn delta_t_ctrl(&self) -> f64 {
        self.delta_t_sched / self.m as f64
    }

    /// Total controller steps `L = m * k_steps`.
    #[inline]
    pub fn l_steps(&self) -> usize {
        self.m * self.k_steps
    }

    /// Scheduler step owning controller step `l`.
    #[inline]
    pub fn scheduler_index(&self, l: usize) -> usize {
        l / self.m
    }
}

/// A fleet of `n` identical, independently controllable elements.
///
/// Homogeneity is by construction: a single [`ElementParams`] is shared by
/// all elements; only the initial SOEs may differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetParams {
    pub n: usize,
    pub element: ElementParams,
    /// Initial SOE per element (kWh), each within `[0, e_max]`.
    pub e0: Vec<f64>,
}

impl FleetParams {
    pub fn new(n: usize, element: ElementParams, e0: Vec<f64>) -> Result<Self, CoreError> {
        element.validate()?;
        if n == 0 {
            return Err(CoreError::InvalidParams("fleet must have n >= 1".into()));
        }
        if e0.len() != n {
            return Err(CoreError::InvalidParams(format!(
                "e0 has {} entries, expected n = {n}",
                e0.len()
            )));
        }
        for (i, &e) in e0.iter().enumerate() {
            if !e.is_finite() || e < 0.0 || e > element.e_max {
                return Err(CoreError::InvalidParams(format!(
                    "e0[{i}] = {e} outside [0, {}]",
                    element.e_max
                )));
            }
        }
        Ok(Self { n, element, e0 })
    }

    /// Fleet with every element starting at the same SOE.
    pub fn uniform(n: usize, element: ElementParams, e0: f64) -> Result<Self, CoreError> {
        Self::new(n, element, vec![e0; n])
    }

    /// Total initial stored energy (kWh).
    pub fn total_e0(&self) -> f64 {
        self.e0.iter().sum()
    }

    /// Largest pairwise difference of initial SOEs (kWh).
    pub fn initial_spread_kwh(&self) -> f64 {
        let max = self.e0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.e0.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Checks that a fleet can be dispatched under the priority stack on the
/// given grid: the initial SOE spread must fit inside the energy buffer and
/// the buffer must not swallow more than half the element capacity.
///
/// Returns the computed buffer epsilon (kWh) on success.
pub fn validate_fleet(params: &FleetParams, grid: &TimeGrid) -> Result<f64, CoreError> {
    let epsilon = params.element.worst_step_spread_kwh(grid.delta_t_ctrl());
    let half = params.element.e_max / 2.0;
    if epsilon > half + ineq_slack(half) {
        return Err(CoreError::BufferInfeasible {
            epsilon_kwh: epsilon,
            half_e_max_kwh: half,
        });
    }
    let spread = params.initial_spread_kwh();
    if spread > epsilon + ineq_slack(epsilon) {
        return Err(CoreError::SpreadTooLarge {
            spread_kwh: spread,
            epsilon_kwh: epsilon,
        });
    }
    Ok(epsilon)
}

/// Composite charge/discharge powers per scheduler step, both nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSchedule {
    pub p_c: Vec<f64>,
    pub p_d: Vec<f64>,
}

impl CompositeSchedule {
    pub fn new(p_c: Vec<f64>, p_d: Vec<f64>) -> Result<Self, CoreError> {
        if p_c.len() != p_d.len() {
            return Err(CoreError::InvalidParams(format!(
                "schedule length mismatch: {} charge vs {} discharge entries",
                p_c.len(),
                p_d.len()
            )));
        }
        for (k, (&c, &d)) in p_c.iter().zip(&p_d).enumerate() {
            if !c.is_finite() || !d.is_finite() || c < 0.0 || d < 0.0 {
                return Err(CoreError::InvalidParams(format!(
                    "schedule entries must be finite and nonnegative, got ({c}, {d}) at k = {k}"
                )));
            }
        }
        Ok(Self { p_c, p_d })
    }

    pub fn zeros(k_steps: usize) -> Self {
        Self {
            p_c: vec![0.0; k_steps],
            p_d: vec![0.0; k_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.p_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_c.is_empty()
    }

    /// Net power `P_c[k] - P_d[k]` (kW, charging positive).
    pub fn net(&self, k: usize) -> f64 {
        self.p_c[k] - self.p_d[k]
    }
}

/// Per-element controller-step powers and the resulting SOE trajectories.
///
/// `p_c` / `p_d` are `n` rows of `l_steps` entries; `soe` is `n` rows of
/// `l_steps + 1` entries whose column 0 is the initial SOE.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementDispatch {
    pub p_c: Vec<Vec<f64>>,
    pub p_d: Vec<Vec<f64>>,
    pub soe: Vec<Vec<f64>>,
}

impl ElementDispatch {
    pub fn n_elements(&self) -> usize {
        self.p_c.len()
    }

    pub fn l_steps(&self) -> usize {
        self.p_c.first().map_or(0, Vec::len)
    }

    /// Sum of element charge powers at controller step `l` (kW).
    pub fn total_charge(&self, l: usize) -> f64 {
        self.p_c.iter().map(|row| row[l]).sum()
    }

    /// Sum of element discharge powers at controller step `l` (kW).
    pub fn total_discharge(&self, l: usize) -> f64 {
        self.p_d.iter().map(|row| row[l]).sum()
    }

    /// Total stored energy across elements after controller step `l` (kWh);
    /// `l = 0` is the initial state.
    pub fn total_soe(&self, l: usize) -> f64 {
        self.soe.iter().map(|row| row[l]).sum()
    }
}

/// Constraint families checked by the admissibility verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintId {
    SoeBounds,
    PowerBounds,
    Complementarity,
    Aggregation,
    Dynamics,
}

impl std::fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConstraintId::SoeBounds => "soe-bounds",
            ConstraintId::PowerBounds => "power-bounds",
            ConstraintId::Complementarity => "complementarity",
            ConstraintId::Aggregation => "aggregation",
            ConstraintId::Dynamics => "dynamics",
        };
        f.write_str(s)
    }
}

/// One constraint violation; `element` is `None` for fleet-level checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub element: Option<usize>,
    pub step: usize,
    pub magnitude: f64,
}

/// Outcome of checking a dispatch against the element-wise constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Worst violation magnitude, 0.0 when admissible.
    pub fn max_magnitude(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.magnitude)
            .fold(0.0, f64::max)
    }
}

/// Table-I style parameters used across the test suites: 0.95 efficiencies,
/// 5 kW power limits, 13.5 kWh capacity.
pub fn reference_element() -> ElementParams {
    ElementParams {
        eta_c: 0.95,
        eta_d: 0.95,
        p_c_max: 5.0,
        p_d_max: 5.0,
        e_max: 13.5,
    }
}
