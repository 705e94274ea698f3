//! Independent ground truth for tiny instances: exhaustive dispatch
//! enumeration and randomized feasible-schedule generators.
//!
//! Nothing here touches the formulations or the solving backends; candidate
//! dispatches are simulated with the element simulator and scored directly,
//! so these results certify the main pipeline from the outside.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::formulations::Objective;
use crate::sim::step_soe;
use crate::types::{validate_fleet, CompositeSchedule, CoreError, FleetParams, TimeGrid};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Validation(#[from] CoreError),
}

const MAX_JOINT_CANDIDATES: u128 = 20_000_000;

/// Best admissible dispatch found by exhaustive enumeration, with powers at
/// scheduler resolution (element-major `n x k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceDispatch {
    pub value: f64,
    pub element_p_c: Vec<Vec<f64>>,
    pub element_p_d: Vec<Vec<f64>>,
    pub composite: CompositeSchedule,
}

/// Power levels enumerated per direction: multiples of `resolution` up to
/// and including the limit.
fn power_levels(p_max: f64, resolution: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut p = resolution;
    while p < p_max - 1e-12 {
        v.push(p);
        p += resolution;
    }
    v.push(p_max);
    v
}

/// Per-step options for one element: idle, charge at a grid level, or
/// discharge at a grid level. Complementarity is combinatorial here.
fn step_options(fleet: &FleetParams, resolution: f64) -> Vec<(f64, f64)> {
    let mut opts = vec![(0.0, 0.0)];
    for c in power_levels(fleet.element.p_c_max, resolution) {
        opts.push((c, 0.0));
    }
    for d in power_levels(fleet.element.p_d_max, resolution) {
        opts.push((0.0, d));
    }
    opts
}

/// Exhaustive search over per-element, per-scheduler-step power grids with
/// complementarity enforced combinatorially.
///
/// Revenue objectives separate across elements, so each element is
/// enumerated independently; tracking objectives couple elements through
/// the net power and are enumerated jointly (hence the tight size limits).
pub fn brute_force_dispatch(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
    resolution: f64,
) -> Result<BruteForceDispatch, OracleError> {
    if fleet.n > 3 {
        return Err(OracleError::TooLarge(format!(
            "{} elements exceed the 3-element oracle limit",
            fleet.n
        )));
    }
    if grid.k_steps > 4 {
        return Err(OracleError::TooLarge(format!(
            "{} scheduler steps exceed the 4-step oracle limit",
            grid.k_steps
        )));
    }
    if objective.signal().len() != grid.k_steps {
        return Err(OracleError::Validation(CoreError::InvalidParams(
            "objective signal length does not match the grid".into(),
        )));
    }
    let opts = step_options(fleet, resolution);
    match objective {
        Objective::Revenue { prices } => Ok(revenue_separable(fleet, grid, prices, &opts)),
        _ => joint_enumeration(fleet, grid, objective, &opts),
    }
}

/// Revenue separates per element: enumerate each element's sequence space
/// and sum the per-element optima.
fn revenue_separable(
    fleet: &FleetParams,
    grid: &TimeGrid,
    prices: &[f64],
    opts: &[(f64, f64)],
) -> BruteForceDispatch {
    let k_steps = grid.k_steps;
    let dt = grid.delta_t_sched;
    let el = &fleet.element;

    let best_for_e0 = |e0: f64| -> (f64, Vec<usize>) {
        let mut best = (f64::NEG_INFINITY, vec![0usize; k_steps]);
        let mut seq = vec![0usize; k_steps];
        loop {
            let mut e = e0;
            let mut feasible = true;
            let mut value = 0.0;
            for (k, &s) in seq.iter().enumerate() {
                let (pc, pd) = opts[s];
                e = step_soe(e, pc, pd, el, dt);
                if e < -1e-9 || e > el.e_max + 1e-9 {
                    feasible = false;
                    break;
                }
                value += prices[k] * (pd - pc);
            }
            if feasible && value > best.0 {
                best = (value, seq.clone());
            }
            if !advance(&mut seq, opts.len()) {
                break;
            }
        }
        best
    };

    let per_element: Vec<(f64, Vec<usize>)> = fleet.e0.par_iter().map(|&e0| best_for_e0(e0)).collect();

    let mut element_p_c = Vec::with_capacity(fleet.n);
    let mut element_p_d = Vec::with_capacity(fleet.n);
    let mut value = 0.0;
    for (v, seq) in &per_element {
        value += v;
        element_p_c.push(seq.iter().map(|&s| opts[s].0).collect());
        element_p_d.push(seq.iter().map(|&s| opts[s].1).collect());
    }
    let composite = composite_of(&element_p_c, &element_p_d, k_steps);
    BruteForceDispatch {
        value,
        element_p_c,
        element_p_d,
        composite,
    }
}

/// Joint enumeration over all element-step slots for coupled objectives.
fn joint_enumeration(
    fleet: &FleetParams,
    grid: &TimeGrid,
    objective: &Objective,
    opts: &[(f64, f64)],
) -> Result<BruteForceDispatch, OracleError> {
    let slots = fleet.n * grid.k_steps;
    let candidates = (opts.len() as u128).pow(slots as u32);
    if candidates > MAX_JOINT_CANDIDATES {
        return Err(OracleError::TooLarge(format!(
            "{candidates} joint candidates exceed the {MAX_JOINT_CANDIDATES} budget"
        )));
    }

    let k_steps = grid.k_steps;
    let dt = grid.delta_t_sched;
    let el = fleet.element;
    let n = fleet.n;

    // slot layout: element-major, seq[i * k_steps + k]
    let evaluate = |seq: &[usize]| -> Option<f64> {
        for i in 0..n {
            let mut e = fleet.e0[i];
            for k in 0..k_steps {
                let (pc, pd) = opts[seq[i * k_steps + k]];
                e = step_soe(e, pc, pd, &el, dt);
                if e < -1e-9 || e > el.e_max + 1e-9 {
                    return None;
                }
            }
        }
        let mut value = 0.0;
        for k in 0..k_steps {
            let mut net = 0.0;
            for i in 0..n {
                let (pc, pd) = opts[seq[i * k_steps + k]];
                net += pc - pd;
            }
            value += match objective {
                Objective::TrackingL1 { reference } => (net - reference[k]).abs(),
                Objective::TrackingQp { reference } => (net - reference[k]).powi(2),
                Objective::Revenue { .. } => unreachable!("handled separably"),
            };
        }
        Some(value)
    };

    // parallelize over the first slot's option
    let best = (0..opts.len())
        .into_par_iter()
        .map(|first| {
            let mut seq = vec![0usize; slots];
            seq[0] = first;
            let mut best: Option<(f64, Vec<usize>)> = None;
            loop {
                if let Some(v) = evaluate(&seq) {
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, seq.clone()));
                    }
                }
                if !advance(&mut seq[1..], opts.len()) {
                    break;
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, b) => b,
                (a, None) => a,
                (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            },
        );

    let (value, seq) = best.ok_or_else(|| {
        OracleError::Validation(CoreError::InvalidParams(
            "no admissible dispatch on the enumeration grid".into(),
        ))
    })?;
    let mut element_p_c = Vec::with_capacity(n);
    let mut element_p_d = Vec::with_capacity(n);
    for i in 0..n {
        element_p_c.push((0..k_steps).map(|k| opts[seq[i * k_steps + k]].0).collect());
        element_p_d.push((0..k_steps).map(|k| opts[seq[i * k_steps + k]].1).collect());
    }
    let composite = composite_of(&element_p_c, &element_p_d, k_steps);
    Ok(BruteForceDispatch {
        value,
        element_p_c,
        element_p_d,
        composite,
    })
}

fn composite_of(pc: &[Vec<f64>], pd: &[Vec<f64>], k_steps: usize) -> CompositeSchedule {
    let sum = |m: &[Vec<f64>], k: usize| m.iter().map(|row| row[k]).sum::<f64>();
    CompositeSchedule {
        p_c: (0..k_steps).map(|k| sum(pc, k)).collect(),
        p_d: (0..k_steps).map(|k| sum(pd, k)).collect(),
    }
}

/// Odometer increment; returns false when the sequence wraps around.
fn advance(seq: &mut [usize], base: usize) -> bool {
    for slot in seq.iter_mut() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

const SAMPLE_ATTEMPTS: usize = 10_000;

/// Draws composite schedules uniformly from the realizable-model constraint
/// set: per step, sample the cutting-plane simplex, then keep the energy
/// trajectory inside the buffered bounds by rejection with a midpoint
/// rescale fallback. Deterministic per seed.
pub fn sample_rcb_feasible(
    fleet: &FleetParams,
    grid: &TimeGrid,
    count: usize,
    seed: u64,
) -> Result<Vec<CompositeSchedule>, OracleError> {
    let eps = validate_fleet(fleet, grid)?;
    let n = fleet.n as f64;
    let bounds = (n * eps, n * (fleet.element.e_max - eps));
    sample_schedules(fleet, grid, count, seed, (n - 1.0) / n, bounds, false)
}

/// Draws relaxed-feasible schedules with strictly positive charge and
/// discharge in every step (the simultaneous-operation regime).
pub fn sample_relaxed_simultaneous(
    fleet: &FleetParams,
    grid: &TimeGrid,
    count: usize,
    seed: u64,
) -> Result<Vec<CompositeSchedule>, OracleError> {
    let n = fleet.n as f64;
    let bounds = (0.0, n * fleet.element.e_max);
    sample_schedules(fleet, grid, count, seed, 1.0, bounds, true)
}

fn sample_schedules(
    fleet: &FleetParams,
    grid: &TimeGrid,
    count: usize,
    seed: u64,
    plane_rhs: f64,
    (e_lo, e_hi): (f64, f64),
    strictly_positive: bool,
) -> Result<Vec<CompositeSchedule>, OracleError> {
    let e0 = fleet.total_e0();
    if e0 < e_lo - 1e-9 || e0 > e_hi + 1e-9 {
        return Err(OracleError::Validation(CoreError::InvalidParams(format!(
            "initial energy {e0} kWh outside the sampled model's bounds [{e_lo}, {e_hi}]"
        ))));
    }
    let n = fleet.n as f64;
    let el = &fleet.element;
    let dt = grid.delta_t_sched;
    let cap_c = plane_rhs * n * el.p_c_max;
    let cap_d = plane_rhs * n * el.p_d_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);

    for _ in 0..count {
        let mut p_c = Vec::with_capacity(grid.k_steps);
        let mut p_d = Vec::with_capacity(grid.k_steps);
        let mut e = e0;
        for _ in 0..grid.k_steps {
            let mut unit = draw_simplex(&mut rng);
            let mut accepted = None;
            for _ in 0..SAMPLE_ATTEMPTS {
                let (pc, pd) = (unit.0 * cap_c, unit.1 * cap_d);
                let next = e + dt * (el.eta_c * pc - pd / el.eta_d);
                if next >= e_lo && next <= e_hi {
                    accepted = Some((pc, pd, next));
                    break;
                }
                unit = draw_simplex(&mut rng);
            }
            let (pc, pd, next) = match accepted {
                Some(hit) => hit,
                None => rescale_to_midpoint(unit, cap_c, cap_d, e, (e_lo, e_hi), dt, el),
            };
            if strictly_positive && (pc <= 0.0 || pd <= 0.0) {
                // re-orient the drift instead of zeroing the pair: swap the
                // simplex coordinates so the step moves back toward the
                // interior, then shrink to fit
                let swapped = (unit.1, unit.0);
                let (pc2, pd2, next2) =
                    rescale_to_midpoint(swapped, cap_c, cap_d, e, (e_lo, e_hi), dt, el);
                p_c.push(pc2);
                p_d.push(pd2);
                e = next2;
                continue;
            }
            p_c.push(pc);
            p_d.push(pd);
            e = next;
        }
        out.push(CompositeSchedule { p_c, p_d });
    }
    Ok(out)
}

/// Uniform draw from the unit simplex `{u, v >= 0, u + v <= 1}`.
fn draw_simplex(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (u, v): (f64, f64) = (rng.gen(), rng.gen());
    if u + v > 1.0 {
        (1.0 - u, 1.0 - v)
    } else {
        (u, v)
    }
}

/// Shrinks the sampled pair along the ray toward zero power until the step
/// lands as close to the midpoint of the energy band as the ray allows.
fn rescale_to_midpoint(
    unit: (f64, f64),
    cap_c: f64,
    cap_d: f64,
    e: f64,
    (e_lo, e_hi): (f64, f64),
    dt: f64,
    el: &crate::types::ElementParams,
) -> (f64, f64, f64) {
    let (pc_full, pd_full) = (unit.0 * cap_c, unit.1 * cap_d);
    let drift = dt * (el.eta_c * pc_full - pd_full / el.eta_d);
    if drift.abs() < 1e-12 {
        return (pc_full, pd_full, e + drift);
    }
    let mid = 0.5 * (e_lo + e_hi);
    let gamma = ((mid - e) / drift).clamp(0.0, 1.0);
    let (pc, pd) = (gamma * pc_full, gamma * pd_full);
    (pc, pd, e + dt * (el.eta_c * pc - pd / el.eta_d))
}
