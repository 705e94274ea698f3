//! Discrete-time simulation of the element fleet and admissibility checking.
//!
//! The simulator is the reference dynamics: SOE trajectories are computed by
//! iterating the one-step update from the initial SOEs, with no clamping.
//! Violations surface in [`check_admissibility`], not in the simulator.

use thiserror::Error;

use crate::types::{
    energy_kwh, ineq_slack, AdmissibilityReport, CompositeSchedule, ConstraintId, ElementDispatch,
    ElementParams, FleetParams, TimeGrid, Violation, ABS_TOL,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Maximum SOE spread `max_i E^i(l) - min_i E^i(l)` per controller step,
/// length `l_steps + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeSpreadTrace(pub Vec<f64>);

impl SoeSpreadTrace {
    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

/// One-step SOE update: charge adds `dt * eta_c * p_c`, discharge removes
/// `dt * p_d / eta_d`. Total on valid inputs; never clamps.
#[inline]
pub fn step_soe(e_kwh: f64, p_c_kw: f64, p_d_kw: f64, params: &ElementParams, dt_hours: f64) -> f64 {
    e_kwh + energy_kwh(params.eta_c * p_c_kw, dt_hours)
        - energy_kwh(p_d_kw / params.eta_d, dt_hours)
}

/// Simulates the fleet under the given per-element power matrices (`n` rows
/// of `l_steps` columns) and returns the dispatch with SOE trajectories.
pub fn simulate_fleet(
    fleet: &FleetParams,
    grid: &TimeGrid,
    p_c: Vec<Vec<f64>>,
    p_d: Vec<Vec<f64>>,
) -> Result<ElementDispatch, SimError> {
    let l_steps = grid.l_steps();
    check_matrix_dims(&p_c, fleet.n, l_steps, "charge")?;
    check_matrix_dims(&p_d, fleet.n, l_steps, "discharge")?;

    let dt = grid.delta_t_ctrl();
    let mut soe = Vec::with_capacity(fleet.n);
    for i in 0..fleet.n {
        let mut traj = Vec::with_capacity(l_steps + 1);
        traj.push(fleet.e0[i]);
        for l in 0..l_steps {
            let next = step_soe(traj[l], p_c[i][l], p_d[i][l], &fleet.element, dt);
            traj.push(next);
        }
        soe.push(traj);
    }
    Ok(ElementDispatch { p_c, p_d, soe })
}

fn check_matrix_dims(
    m: &[Vec<f64>],
    n: usize,
    l_steps: usize,
    what: &str,
) -> Result<(), SimError> {
    if m.len() != n {
        return Err(SimError::DimensionMismatch(format!(
            "{what} matrix has {} rows, expected {n}",
            m.len()
        )));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != l_steps {
            return Err(SimError::DimensionMismatch(format!(
                "{what} row {i} has {} entries, expected {l_steps}",
                row.len()
            )));
        }
    }
    Ok(())
}

/// Checks a dispatch against every element-wise constraint and the coupling
/// to the composite schedule. Returns a report instead of erroring so that
/// all violations are visible at once.
///
/// Checked per element and controller step: SOE within `[0, e_max]`, powers
/// within `[0, p_max]`, complementarity as `min(p_c, p_d) <= tol`, SOE
/// recursion consistency, and per-step power sums matching the composite
/// schedule of the owning scheduler step.
pub fn check_admissibility(
    fleet: &FleetParams,
    grid: &TimeGrid,
    dispatch: &ElementDispatch,
    composite: &CompositeSchedule,
) -> Result<AdmissibilityReport, SimError> {
    let l_steps = grid.l_steps();
    check_matrix_dims(&dispatch.p_c, fleet.n, l_steps, "charge")?;
    check_matrix_dims(&dispatch.p_d, fleet.n, l_steps, "discharge")?;
    check_matrix_dims(&dispatch.soe, fleet.n, l_steps + 1, "soe")?;
    if composite.len() != grid.k_steps {
        return Err(SimError::DimensionMismatch(format!(
            "composite schedule has {} steps, expected {}",
            composite.len(),
            grid.k_steps
        )));
    }

    let el = &fleet.element;
    let dt = grid.delta_t_ctrl();
    let mut violations = Vec::new();
    let mut push = |constraint, element, step, magnitude: f64| {
        violations.push(Violation {
            constraint,
            element,
            step,
            magnitude,
        });
    };

    for i in 0..fleet.n {
        let d0 = (dispatch.soe[i][0] - fleet.e0[i]).abs();
        if d0 > ABS_TOL {
            push(ConstraintId::Dynamics, Some(i), 0, d0);
        }
        for l in 0..l_steps {
            let (pc, pd) = (dispatch.p_c[i][l], dispatch.p_d[i][l]);
            if pc < -ineq_slack(el.p_c_max) || pc > el.p_c_max + ineq_slack(el.p_c_max) {
                push(
                    ConstraintId::PowerBounds,
                    Some(i),
                    l,
                    (-pc).max(pc - el.p_c_max),
                );
            }
            if pd < -ineq_slack(el.p_d_max) || pd > el.p_d_max + ineq_slack(el.p_d_max) {
                push(
                    ConstraintId::PowerBounds,
                    Some(i),
                    l,
                    (-pd).max(pd - el.p_d_max),
                );
            }
            let overlap = pc.min(pd);
            if overlap > ABS_TOL {
                push(ConstraintId::Complementarity, Some(i), l, overlap);
            }
            let e_next = dispatch.soe[i][l + 1];
            if e_next < -ineq_slack(el.e_max) || e_next > el.e_max + ineq_slack(el.e_max) {
                push(
                    ConstraintId::SoeBounds,
                    Some(i),
                    l + 1,
                    (-e_next).max(e_next - el.e_max),
                );
            }
            let recursed = step_soe(dispatch.soe[i][l], pc, pd, el, dt);
            let drift = (e_next - recursed).abs();
            if drift > ABS_TOL {
                push(ConstraintId::Dynamics, Some(i), l + 1, drift);
            }
        }
    }

    for l in 0..l_steps {
        let k = grid.scheduler_index(l);
        let dc = (dispatch.total_charge(l) - composite.p_c[k]).abs();
        if dc > ABS_TOL {
            push(ConstraintId::Aggregation, None, l, dc);
        }
        let dd = (dispatch.total_discharge(l) - composite.p_d[k]).abs();
        if dd > ABS_TOL {
            push(ConstraintId::Aggregation, None, l, dd);
        }
    }

    Ok(AdmissibilityReport::from_violations(violations))
}

/// Max-minus-min SOE across elements for every controller step.
pub fn soe_spread(dispatch: &ElementDispatch) -> SoeSpreadTrace {
    let cols = dispatch.soe.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(cols);
    for l in 0..cols {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &dispatch.soe {
            lo = lo.min(row[l]);
            hi = hi.max(row[l]);
        }
        out.push(hi - lo);
    }
    SoeSpreadTrace(out)
}

/// What a net-power realization had to clamp at a given controller step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaturationKind {
    PowerClamp,
    EnergyClamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationEvent {
    pub step: usize,
    pub kind: SaturationKind,
    /// Power shortfall against the requested net power (kW).
    pub magnitude: f64,
}

/// Result of implementing a composite schedule on one aggregate battery.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPowerRealization {
    /// Single-row dispatch of the aggregate battery (capacity and power
    /// limits scaled by the element count).
    pub dispatch: ElementDispatch,
    pub saturation: Vec<SaturationEvent>,
}

/// Implements `P_net[k] = P_c[k] - P_d[k]` on one aggregate battery of the
/// fleet's total size: charge when nonnegative, discharge otherwise.
///
/// Power is clamped to the aggregate power limit first, then cut further if
/// the step would leave `[0, N * e_max]`; every clamp is logged. This is the
/// open-loop realization used to measure how inadmissible schedules degrade,
/// so it records saturation instead of erroring.
pub fn realize_net_power(
    fleet: &FleetParams,
    grid: &TimeGrid,
    composite: &CompositeSchedule,
) -> Result<NetPowerRealization, SimError> {
    if composite.len() != grid.k_steps {
        return Err(SimError::DimensionMismatch(format!(
            "composite schedule has {} steps, expected {}",
            composite.len(),
            grid.k_steps
        )));
    }
    let n = fleet.n as f64;
    let agg = ElementParams {
        p_c_max: fleet.element.p_c_max * n,
        p_d_max: fleet.element.p_d_max * n,
        e_max: fleet.element.e_max * n,
        ..fleet.element
    };
    let dt = grid.delta_t_ctrl();
    let l_steps = grid.l_steps();

    let mut p_c = vec![0.0; l_steps];
    let mut p_d = vec![0.0; l_steps];
    let mut soe = Vec::with_capacity(l_steps + 1);
    soe.push(fleet.total_e0());
    let mut saturation = Vec::new();

    for l in 0..l_steps {
        let k = grid.scheduler_index(l);
        let net = composite.net(k);
        let e = soe[l];
        if net >= 0.0 {
            let mut p = net;
            if p > agg.p_c_max {
                p = agg.p_c_max;
                saturation.push(SaturationEvent {
                    step: l,
                    kind: SaturationKind::PowerClamp,
                    magnitude: net - p,
                });
            }
            let headroom = ((agg.e_max - e) / (dt * agg.eta_c)).max(0.0);
            if p > headroom {
                saturation.push(SaturationEvent {
                    step: l,
                    kind: SaturationKind::EnergyClamp,
                    magnitude: p - headroom,
                });
                p = headroom;
            }
            p_c[l] = p;
        } else {
            let want = -net;
            let mut p = want;
            if p > agg.p_d_max {
                p = agg.p_d_max;
                saturation.push(SaturationEvent {
                    step: l,
                    kind: SaturationKind::PowerClamp,
                    magnitude: want - p,
                });
            }
            let available = (e * agg.eta_d / dt).max(0.0);
            if p > available {
                saturation.push(SaturationEvent {
                    step: l,
                    kind: SaturationKind::EnergyClamp,
                    magnitude: p - available,
                });
                p = available;
            }
            p_d[l] = p;
        }
        soe.push(step_soe(e, p_c[l], p_d[l], &agg, dt));
    }

    Ok(NetPowerRealization {
        dispatch: ElementDispatch {
            p_c: vec![p_c],
            p_d: vec![p_d],
            soe: vec![soe],
        },
        saturation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{build_time_grid, reference_element, FleetParams};
    use approx::assert_abs_diff_eq;

    fn table_i() -> ElementParams {
        reference_element()
    }

    #[test]
    fn step_soe_charge() {
        let e = step_soe(5.0, 5.0, 0.0, &table_i(), 0.2);
        assert_abs_diff_eq!(e, 5.95, epsilon = 1e-12);
    }

    #[test]
    fn step_soe_discharge() {
        let e = step_soe(5.0, 0.0, 5.0, &table_i(), 0.2);
        assert_abs_diff_eq!(e, 5.0 - 1.0 / 0.95, epsilon = 1e-12);
    }

    #[test]
    fn step_soe_idle_holds() {
        assert_eq!(step_soe(5.0, 0.0, 0.0, &table_i(), 0.2), 5.0);
    }

    #[test]
    fn simulate_single_element_charging() {
        let fleet = FleetParams::uniform(1, table_i(), 0.0).unwrap();
        let grid = build_time_grid(0.2, 1, 2).unwrap();
        let d = simulate_fleet(&fleet, &grid, vec![vec![5.0, 5.0]], vec![vec![0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(d.soe[0][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.soe[0][1], 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(d.soe[0][2], 1.90, epsilon = 1e-12);
    }

    #[test]
    fn simulate_zero_powers_hold_soe() {
        let fleet = FleetParams::new(2, table_i(), vec![3.0, 7.0]).unwrap();
        let grid = build_time_grid(0.5, 2, 3).unwrap();
        let z = vec![vec![0.0; 6]; 2];
        let d = simulate_fleet(&fleet, &grid, z.clone(), z).unwrap();
        for l in 0..=6 {
            assert_eq!(d.soe[0][l], 3.0);
            assert_eq!(d.soe[1][l], 7.0);
        }
    }

    #[test]
    fn simulate_two_elements_opposite() {
        let fleet = FleetParams::new(2, table_i(), vec![0.0, 13.5]).unwrap();
        let grid = build_time_grid(0.2, 1, 1).unwrap();
        let d = simulate_fleet(
            &fleet,
            &grid,
            vec![vec![5.0], vec![0.0]],
            vec![vec![0.0], vec![5.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(d.soe[0][1], 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(d.soe[1][1], 13.5 - 1.0 / 0.95, epsilon = 1e-9);
    }

    #[test]
    fn simulate_rejects_bad_dims() {
        let fleet = FleetParams::uniform(2, table_i(), 1.0).unwrap();
        let grid = build_time_grid(0.2, 1, 2).unwrap();
        let err = simulate_fleet(&fleet, &grid, vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]; 2]);
        assert!(matches!(err, Err(SimError::DimensionMismatch(_))));
    }

    #[test]
    fn checker_flags_complementarity() {
        let fleet = FleetParams::uniform(2, table_i(), 5.0).unwrap();
        let grid = build_time_grid(0.2, 1, 1).unwrap();
        let mut p_c = vec![vec![0.0]; 2];
        let mut p_d = vec![vec![0.0]; 2];
        p_c[1][0] = 1.0;
        p_d[1][0] = 1.0;
        let d = simulate_fleet(&fleet, &grid, p_c, p_d).unwrap();
        let composite = CompositeSchedule::new(vec![1.0], vec![1.0]).unwrap();
        let report = check_admissibility(&fleet, &grid, &d, &composite).unwrap();
        assert!(!report.ok);
        let v: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.constraint == ConstraintId::Complementarity)
            .collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].element, Some(1));
        assert_eq!(v[0].step, 0);
    }

    #[test]
    fn checker_flags_soe_overflow() {
        let fleet = FleetParams::uniform(1, table_i(), 13.5).unwrap();
        let grid = build_time_grid(0.2, 1, 1).unwrap();
        let d = simulate_fleet(&fleet, &grid, vec![vec![5.0]], vec![vec![0.0]]).unwrap();
        let composite = CompositeSchedule::new(vec![5.0], vec![0.0]).unwrap();
        let report = check_admissibility(&fleet, &grid, &d, &composite).unwrap();
        assert!(!report.ok);
        let v: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.constraint == ConstraintId::SoeBounds)
            .collect();
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0].magnitude, 0.95, epsilon = 1e-12);
        assert_eq!(v[0].step, 1);
    }

    #[test]
    fn checker_flags_aggregation_mismatch() {
        let fleet = FleetParams::uniform(2, table_i(), 5.0).unwrap();
        let grid = build_time_grid(0.2, 1, 1).unwrap();
        let d = simulate_fleet(
            &fleet,
            &grid,
            vec![vec![2.0], vec![1.0]],
            vec![vec![0.0]; 2],
        )
        .unwrap();
        let composite = CompositeSchedule::new(vec![4.0], vec![0.0]).unwrap();
        let report = check_admissibility(&fleet, &grid, &d, &composite).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintId::Aggregation && v.magnitude == 1.0));
    }

    #[test]
    fn simulated_dispatch_never_violates_dynamics() {
        let fleet = FleetParams::new(3, table_i(), vec![2.0, 6.0, 11.0]).unwrap();
        let grid = build_time_grid(0.25, 2, 3).unwrap();
        let p_c = vec![
            vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0],
            vec![0.0; 6],
            vec![0.5; 6],
        ];
        let p_d = vec![
            vec![0.0; 6],
            vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0],
            vec![0.0; 6],
        ];
        let d = simulate_fleet(&fleet, &grid, p_c, p_d).unwrap();
        let composite = CompositeSchedule::new(
            vec![d.total_charge(0), d.total_charge(2), d.total_charge(4)],
            vec![d.total_discharge(0), d.total_discharge(2), d.total_discharge(4)],
        )
        .unwrap();
        // Power and aggregation are consistent by construction here, so only
        // dynamics is interesting: the simulator must agree with itself.
        let report = check_admissibility(&fleet, &grid, &d, &composite).unwrap();
        assert!(!report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintId::Dynamics));
    }

    #[test]
    fn spread_trace_basics() {
        let fleet = FleetParams::new(2, table_i(), vec![0.0, 13.5]).unwrap();
        let grid = build_time_grid(0.2, 1, 1).unwrap();
        let z = vec![vec![0.0]; 2];
        let d = simulate_fleet(&fleet, &grid, z.clone(), z).unwrap();
        let trace = soe_spread(&d);
        assert_eq!(trace.0, vec![13.5, 13.5]);

        let fleet = FleetParams::uniform(3, table_i(), 4.0).unwrap();
        let grid = build_time_grid(0.2, 1, 2).unwrap();
        let p = vec![vec![2.0, 2.0]; 3];
        let d = simulate_fleet(&fleet, &grid, p, vec![vec![0.0, 0.0]; 3]).unwrap();
        let trace = soe_spread(&d);
        assert!(trace.max() < 1e-12);
    }

    #[test]
    fn net_power_cancellation_is_idle() {
        let fleet = FleetParams::uniform(4, table_i(), 6.0).unwrap();
        let grid = build_time_grid(0.25, 1, 3).unwrap();
        let composite = CompositeSchedule::new(vec![3.0; 3], vec![3.0; 3]).unwrap();
        let r = realize_net_power(&fleet, &grid, &composite).unwrap();
        assert!(r.saturation.is_empty());
        for l in 0..=3 {
            assert_abs_diff_eq!(r.dispatch.soe[0][l], 24.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn net_power_pure_charge_matches_fleet_sim() {
        let fleet = FleetParams::uniform(2, table_i(), 1.0).unwrap();
        let grid = build_time_grid(0.2, 1, 2).unwrap();
        let composite = CompositeSchedule::new(vec![6.0, 4.0], vec![0.0, 0.0]).unwrap();
        let r = realize_net_power(&fleet, &grid, &composite).unwrap();
        assert!(r.saturation.is_empty());
        // same aggregate energy as an equal-sharing fleet simulation
        let d = simulate_fleet(
            &fleet,
            &grid,
            vec![vec![3.0, 2.0]; 2],
            vec![vec![0.0, 0.0]; 2],
        )
        .unwrap();
        for l in 0..=2 {
            assert_abs_diff_eq!(r.dispatch.soe[0][l], d.total_soe(l), epsilon = 1e-9);
        }
    }

    #[test]
    fn net_power_clamps_and_logs() {
        // one element nearly full: further charging must clamp at capacity
        let fleet = FleetParams::uniform(1, table_i(), 13.0).unwrap();
        let grid = build_time_grid(1.0, 1, 2).unwrap();
        let composite = CompositeSchedule::new(vec![5.0, 5.0], vec![0.0, 0.0]).unwrap();
        let r = realize_net_power(&fleet, &grid, &composite).unwrap();
        assert!(r
            .saturation
            .iter()
            .any(|s| s.kind == SaturationKind::EnergyClamp));
        assert_abs_diff_eq!(r.dispatch.soe[0][2], 13.5, epsilon = 1e-9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// The SOE update is affine in the powers: scaling both powers
            /// scales the energy delta.
            #[test]
            fn step_soe_affine_in_powers(
                e in 0.0f64..13.5,
                p_c in 0.0f64..5.0,
                p_d in 0.0f64..5.0,
                a in 0.0f64..3.0,
            ) {
                let el = table_i();
                let delta = step_soe(e, p_c, p_d, &el, 0.2) - e;
                let scaled = step_soe(e, a * p_c, a * p_d, &el, 0.2) - e;
                prop_assert!((scaled - a * delta).abs() <= 1e-9);
            }

            /// When element powers sum to the composite powers, the summed
            /// element SOE follows the composite dynamics exactly.
            #[test]
            fn aggregation_matches_composite_dynamics(
                shares in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3),
                p_c in 0.0f64..10.0,
                p_d in 0.0f64..10.0,
            ) {
                let el = table_i();
                let n = shares.len();
                let fleet = FleetParams::uniform(n, el, 6.0).unwrap();
                let grid = build_time_grid(0.2, 1, 1).unwrap();
                // normalize shares so element powers sum to the composite
                let (sc, sd): (f64, f64) = (
                    shares.iter().map(|s| s.0).sum(),
                    shares.iter().map(|s| s.1).sum(),
                );
                let pc_rows: Vec<Vec<f64>> = shares
                    .iter()
                    .map(|s| vec![if sc > 0.0 { p_c * s.0 / sc } else { 0.0 }])
                    .collect();
                let pd_rows: Vec<Vec<f64>> = shares
                    .iter()
                    .map(|s| vec![if sd > 0.0 { p_d * s.1 / sd } else { 0.0 }])
                    .collect();
                let total_c: f64 = pc_rows.iter().map(|r| r[0]).sum();
                let total_d: f64 = pd_rows.iter().map(|r| r[0]).sum();
                let d = simulate_fleet(&fleet, &grid, pc_rows, pd_rows).unwrap();
                let composite_next = d.total_soe(0)
                    + 0.2 * (el.eta_c * total_c - total_d / el.eta_d);
                prop_assert!((d.total_soe(1) - composite_next).abs() <= 1e-9);
            }
        }

        /// Relaxed-model prediction is a lower bound on the realized SOE:
        /// the prediction pays both conversion losses even when the net
        /// realization only pays one of them.
        #[test]
        fn relaxed_soe_prediction_is_lower_bound() {
            let fleet = FleetParams::uniform(3, table_i(), 6.75).unwrap();
            let grid = build_time_grid(0.25, 1, 16).unwrap();
            let schedules =
                crate::oracle::sample_relaxed_simultaneous(&fleet, &grid, 40, 11).unwrap();
            let el = &fleet.element;
            for s in &schedules {
                let r = realize_net_power(&fleet, &grid, s).unwrap();
                let mut predicted = fleet.total_e0();
                for k in 0..grid.k_steps {
                    predicted += 0.25 * (el.eta_c * s.p_c[k] - s.p_d[k] / el.eta_d);
                    let realized = r.dispatch.soe[0][k + 1];
                    assert!(
                        predicted <= realized + 1e-9,
                        "predicted {predicted} above realized {realized} at k={k}"
                    );
                }
            }
        }
    }
}
