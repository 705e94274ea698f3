//! Priority stack controller: SOE-sorted greedy disaggregation of a
//! composite schedule into per-element controller-step powers.
//!
//! Elements with the lowest SOE charge first; elements with the highest SOE
//! discharge first. Per step and direction, at most one element carries a
//! partial load; all others sit at zero or the power limit, so element
//! complementarity holds by construction.

use thiserror::Error;

use crate::sim::step_soe;
use crate::types::{CompositeSchedule, ElementDispatch, ElementParams, FleetParams, TimeGrid};

#[derive(Debug, Error, PartialEq)]
pub enum PscError {
    #[error(
        "activation overlap at controller step {step}: {n_c} charging + {n_d} discharging \
         exceeds {n} elements (composite schedule violates the cutting plane)"
    )]
    Overlap {
        step: usize,
        n_c: usize,
        n_d: usize,
        n: usize,
    },
    #[error("schedule has {got} steps, expected {expected}")]
    ScheduleLength { got: usize, expected: usize },
}

/// Elements activated for charging / discharging at one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationCounts {
    pub n_c: usize,
    pub n_d: usize,
}

/// Ceiling of `p / p_max` with ratios within 1e-9 of an integer snapped to
/// that integer, so exact multiples never activate a phantom extra element.
fn ceil_activation(p_kw: f64, p_max_kw: f64) -> usize {
    debug_assert!(p_kw >= 0.0 && p_max_kw > 0.0);
    let ratio = p_kw / p_max_kw;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Number of elements the stack activates for the given composite powers.
pub fn activation_counts(p_c_kw: f64, p_d_kw: f64, params: &ElementParams) -> ActivationCounts {
    ActivationCounts {
        n_c: ceil_activation(p_c_kw, params.p_c_max),
        n_d: ceil_activation(p_d_kw, params.p_d_max),
    }
}

/// Disaggregates one controller step given the current element SOEs.
///
/// Sorting is ascending by SOE with ties broken by ascending element index.
/// The `n_c - 1` lowest elements charge at `p_c_max` and the next one takes
/// the remainder; discharge is assigned symmetrically from the top of the
/// stack. Assigned powers sum to the composite powers exactly and no
/// element receives both.
pub fn disaggregate_step(
    soes: &[f64],
    p_c_kw: f64,
    p_d_kw: f64,
    params: &ElementParams,
) -> Result<(Vec<f64>, Vec<f64>), PscError> {
    let n = soes.len();
    let counts = activation_counts(p_c_kw, p_d_kw, params);
    if counts.n_c + counts.n_d > n {
        return Err(PscError::Overlap {
            step: 0,
            n_c: counts.n_c,
            n_d: counts.n_d,
            n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| soes[a].total_cmp(&soes[b]).then(a.cmp(&b)));

    let mut out_c = vec![0.0; n];
    let mut out_d = vec![0.0; n];
    assign_from_stack(&order, counts.n_c, p_c_kw, params.p_c_max, &mut out_c, false);
    assign_from_stack(&order, counts.n_d, p_d_kw, params.p_d_max, &mut out_d, true);
    Ok((out_c, out_d))
}

/// Gives `count - 1` elements the full limit and the last activated element
/// the remainder. `from_top` walks the stack from the highest SOE downward
/// (discharge side); otherwise from the lowest upward (charge side). The
/// partially loaded element is always the one nearest the middle of the
/// stack, keeping assignments monotone in SOE.
fn assign_from_stack(
    order: &[usize],
    count: usize,
    total_kw: f64,
    limit_kw: f64,
    out: &mut [f64],
    from_top: bool,
) {
    if count == 0 {
        return;
    }
    let remainder = total_kw - (count - 1) as f64 * limit_kw;
    for rank in 0..count {
        let idx = if from_top {
            order[order.len() - 1 - rank]
        } else {
            order[rank]
        };
        out[idx] = if rank + 1 == count { remainder } else { limit_kw };
    }
}

/// Runs the priority stack over a whole composite schedule: per controller
/// step, re-sort by current SOE, assign powers, then advance every element.
pub fn disaggregate_schedule(
    fleet: &FleetParams,
    grid: &TimeGrid,
    composite: &CompositeSchedule,
) -> Result<ElementDispatch, PscError> {
    if composite.len() != grid.k_steps {
        return Err(PscError::ScheduleLength {
            got: composite.len(),
            expected: grid.k_steps,
        });
    }
    let n = fleet.n;
    let l_steps = grid.l_steps();
    let dt = grid.delta_t_ctrl();

    let mut p_c = vec![Vec::with_capacity(l_steps); n];
    let mut p_d = vec![Vec::with_capacity(l_steps); n];
    let mut soe: Vec<Vec<f64>> = fleet
        .e0
        .iter()
        .map(|&e| {
            let mut t = Vec::with_capacity(l_steps + 1);
            t.push(e);
            t
        })
        .collect();
    let mut current: Vec<f64> = fleet.e0.clone();

    for l in 0..l_steps {
        let k = grid.scheduler_index(l);
        let (step_c, step_d) = disaggregate_step(
            &current,
            composite.p_c[k],
            composite.p_d[k],
            &fleet.element,
        )
        .map_err(|e| match e {
            PscError::Overlap { n_c, n_d, n, .. } => PscError::Overlap { step: l, n_c, n_d, n },
            other => other,
        })?;
        for i in 0..n {
            current[i] = step_soe(current[i], step_c[i], step_d[i], &fleet.element, dt);
            p_c[i].push(step_c[i]);
            p_d[i].push(step_d[i]);
            soe[i].push(current[i]);
        }
    }

    Ok(ElementDispatch { p_c, p_d, soe })
}
