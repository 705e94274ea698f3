//! Feasible-region sampling for plotting: the per-step power polygon of a
//! model, the activation-count staircase it under-approximates, and the
//! reachable composite energy envelope over the horizon.

use crate::formulations::{FormulationError, ModelKind};
use crate::types::{validate_fleet, CoreError, FleetParams, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    /// Vertices of the model's per-step `(P_c, P_d)` power region.
    pub polygon: Vec<(f64, f64)>,
    /// Corner polyline of the activation-count staircase (the exact region
    /// the cutting plane restricts).
    pub staircase: Vec<(f64, f64)>,
    /// Min attainable composite energy per scheduler step, length `k + 1`.
    pub energy_min: Vec<f64>,
    /// Max attainable composite energy per scheduler step, length `k + 1`.
    pub energy_max: Vec<f64>,
}

/// Power polygon, staircase, and reachable energy envelope for a model.
pub fn feasible_region_samples(
    kind: ModelKind,
    fleet: &FleetParams,
    grid: &TimeGrid,
) -> Result<FeasibleRegion, FormulationError> {
    let n = fleet.n as f64;
    let el = &fleet.element;

    let polygon = match kind {
        // cutting plane with intercepts (N-1) * P_max
        ModelKind::Rcb => vec![
            (0.0, 0.0),
            ((n - 1.0) * el.p_c_max, 0.0),
            (0.0, (n - 1.0) * el.p_d_max),
        ],
        // relaxed plane with intercepts N * P_max
        ModelKind::Relaxed => vec![
            (0.0, 0.0),
            (n * el.p_c_max, 0.0),
            (0.0, n * el.p_d_max),
        ],
        // composite complementarity: the two axis segments
        ModelKind::MilpEqual => vec![
            (n * el.p_c_max, 0.0),
            (0.0, 0.0),
            (0.0, n * el.p_d_max),
        ],
        ModelKind::MilpUnequal => staircase_corners(fleet),
    };

    let (e_lo_cap, e_hi_cap, p_c_eff, p_d_eff) = match kind {
        ModelKind::Rcb => {
            let eps = validate_fleet(fleet, grid)?;
            (
                n * eps,
                n * (el.e_max - eps),
                (n - 1.0) * el.p_c_max,
                (n - 1.0) * el.p_d_max,
            )
        }
        _ => (0.0, n * el.e_max, n * el.p_c_max, n * el.p_d_max),
    };

    let e0 = fleet.total_e0();
    if e0 < e_lo_cap - 1e-9 || e0 > e_hi_cap + 1e-9 {
        return Err(FormulationError::Validation(CoreError::InvalidParams(
            format!("initial energy {e0} kWh outside the model bounds [{e_lo_cap}, {e_hi_cap}]"),
        )));
    }

    let dt = grid.delta_t_sched;
    let mut energy_min = Vec::with_capacity(grid.k_steps + 1);
    let mut energy_max = Vec::with_capacity(grid.k_steps + 1);
    energy_min.push(e0);
    energy_max.push(e0);
    for k in 0..grid.k_steps {
        let hi = (energy_max[k] + dt * el.eta_c * p_c_eff).min(e_hi_cap);
        let lo = (energy_min[k] - dt * p_d_eff / el.eta_d).max(e_lo_cap);
        energy_max.push(hi);
        energy_min.push(lo);
    }

    Ok(FeasibleRegion {
        polygon,
        staircase: staircase_corners(fleet),
        energy_min,
        energy_max,
    })
}

/// Boundary polyline of `{(P_c, P_d) : ceil(P_c/P_c,max) + ceil(P_d/P_d,max)
/// <= N}`, from the pure-discharge axis spike down to pure charge.
fn staircase_corners(fleet: &FleetParams) -> Vec<(f64, f64)> {
    let n = fleet.n;
    let (pc, pd) = (fleet.element.p_c_max, fleet.element.p_d_max);
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push((0.0, n as f64 * pd));
    for i in 1..=n {
        let y = (n - i) as f64 * pd;
        out.push(((i - 1) as f64 * pc, y));
        out.push((i as f64 * pc, y));
    }
    out
}
