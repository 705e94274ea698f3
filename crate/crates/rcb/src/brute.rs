//! Exhaustive-search backend for tiny problems: enumerate binary patterns
//! and grid-search the remaining continuous variables.
//!
//! Variables pinned by a chain of equality rows (one new variable per row)
//! are derived instead of enumerated, so dynamics-style recursions do not
//! blow up the grid. Exact on problems whose optima lie on the grid.

use rayon::prelude::*;

use crate::problem::{Cmp, OptProblem, Sense, Solution, SolveStatus, VarKind};
use crate::solver::SolveError;

const MAX_BINARY_PATTERNS: usize = 1 << 12;
const MAX_FREE_VARS: usize = 12;
const MAX_GRID_POINTS: u128 = 20_000_000;
const FEAS_TOL: f64 = 1e-9;

/// Variable roles after equality elimination.
struct Plan {
    binaries: Vec<usize>,
    free: Vec<usize>,
    /// (variable, equality row) in propagation order: when every other
    /// variable of the row is known, the variable follows from the row.
    derived: Vec<(usize, usize)>,
    /// rows not used for elimination, re-checked numerically
    residual_rows: Vec<usize>,
}

fn plan_elimination(problem: &OptProblem) -> Plan {
    let n = problem.n_vars();
    let binaries: Vec<usize> = (0..n)
        .filter(|&i| problem.vars()[i].kind == VarKind::Binary)
        .collect();
    let mut known = vec![false; n];
    for &b in &binaries {
        known[b] = true;
    }

    let mut derived = Vec::new();
    let mut free = Vec::new();
    let mut used_row = vec![false; problem.constraints().len()];
    loop {
        // propagate: an equality row with exactly one unknown derives it
        loop {
            let mut progress = false;
            for (r, c) in problem.constraints().iter().enumerate() {
                if used_row[r] || c.cmp != Cmp::Eq {
                    continue;
                }
                let unknown: Vec<usize> = c
                    .terms
                    .iter()
                    .filter(|(id, coeff)| !known[id.index()] && *coeff != 0.0)
                    .map(|(id, _)| id.index())
                    .collect();
                if unknown.len() == 1 {
                    derived.push((unknown[0], r));
                    known[unknown[0]] = true;
                    used_row[r] = true;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        // still-undetermined variables must be enumerated; free the one
        // with the tightest box first so dispatch-style problems enumerate
        // element powers and derive energies and aggregates
        let next_free = (0..n)
            .filter(|&i| !known[i])
            .min_by(|&a, &b| {
                let range = |i: usize| problem.vars()[i].upper - problem.vars()[i].lower;
                range(a).total_cmp(&range(b)).then(a.cmp(&b))
            });
        match next_free {
            Some(i) => {
                free.push(i);
                known[i] = true;
            }
            None => break,
        }
    }

    let residual_rows: Vec<usize> = (0..problem.constraints().len())
        .filter(|&r| !used_row[r])
        .collect();
    Plan {
        binaries,
        free,
        derived,
        residual_rows,
    }
}

fn grid_values(lower: f64, upper: f64, resolution: f64) -> Result<Vec<f64>, SolveError> {
    if !lower.is_finite() || !upper.is_finite() {
        return Err(SolveError::TooLarge(
            "grid search requires finite variable bounds".into(),
        ));
    }
    let mut values = Vec::new();
    let mut v = lower;
    while v < upper - 1e-12 {
        values.push(v);
        v += resolution;
    }
    values.push(upper);
    Ok(values)
}

/// Enumerates all binary patterns and grid points of the free continuous
/// variables, propagating equality-derived variables, and returns the best
/// feasible assignment.
pub fn solve_bruteforce(problem: &OptProblem, resolution: f64) -> Result<Solution, SolveError> {
    assert!(resolution > 0.0, "resolution must be positive");
    let started = std::time::Instant::now();
    let plan = plan_elimination(problem);

    if plan.binaries.len() > 12 {
        return Err(SolveError::TooLarge(format!(
            "{} binary variables exceed the 2^12 pattern budget",
            plan.binaries.len()
        )));
    }
    if plan.free.len() > MAX_FREE_VARS {
        return Err(SolveError::TooLarge(format!(
            "{} free continuous variables after elimination (limit {MAX_FREE_VARS})",
            plan.free.len()
        )));
    }

    let grids: Vec<Vec<f64>> = plan
        .free
        .iter()
        .map(|&i| grid_values(problem.vars()[i].lower, problem.vars()[i].upper, resolution))
        .collect::<Result<_, _>>()?;
    let patterns = 1usize << plan.binaries.len();
    let mut total: u128 = patterns as u128;
    for g in &grids {
        total = total.saturating_mul(g.len() as u128);
    }
    if patterns > MAX_BINARY_PATTERNS || total > MAX_GRID_POINTS {
        return Err(SolveError::TooLarge(format!(
            "{total} candidate points exceed the {MAX_GRID_POINTS} budget"
        )));
    }

    let best = (0..patterns)
        .into_par_iter()
        .map(|pattern| {
            let mut x = vec![0.0; problem.n_vars()];
            for (bit, &b) in plan.binaries.iter().enumerate() {
                x[b] = ((pattern >> bit) & 1) as f64;
            }
            search_grid(problem, &plan, &grids, &mut x)
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, b) => b,
                (a, None) => a,
                (Some((va, xa)), Some((vb, xb))) => {
                    let a_better = match problem.sense {
                        Sense::Minimize => va <= vb,
                        Sense::Maximize => va >= vb,
                    };
                    Some(if a_better { (va, xa) } else { (vb, xb) })
                }
            },
        );

    Ok(match best {
        Some((value, assignment)) => Solution {
            status: SolveStatus::Optimal,
            objective: Some(value),
            assignment: Some(assignment),
            wall_time: started.elapsed(),
            mip_gap: None,
        },
        None => Solution {
            status: SolveStatus::Infeasible,
            objective: None,
            assignment: None,
            wall_time: started.elapsed(),
            mip_gap: None,
        },
    })
}

fn search_grid(
    problem: &OptProblem,
    plan: &Plan,
    grids: &[Vec<f64>],
    x: &mut [f64],
) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut indices = vec![0usize; plan.free.len()];
    loop {
        for (slot, &var) in plan.free.iter().enumerate() {
            x[var] = grids[slot][indices[slot]];
        }
        if propagate_and_check(problem, plan, x) {
            let value = problem.eval_objective(x);
            let better = match &best {
                None => true,
                Some((bv, _)) => match problem.sense {
                    Sense::Minimize => value < *bv,
                    Sense::Maximize => value > *bv,
                },
            };
            if better {
                best = Some((value, x.to_vec()));
            }
        }
        // odometer over the free-variable grids
        let mut slot = 0;
        loop {
            if slot == plan.free.len() {
                return best;
            }
            indices[slot] += 1;
            if indices[slot] < grids[slot].len() {
                break;
            }
            indices[slot] = 0;
            slot += 1;
        }
        if plan.free.is_empty() {
            return best;
        }
    }
}

fn propagate_and_check(problem: &OptProblem, plan: &Plan, x: &mut [f64]) -> bool {
    for &(var, row) in &plan.derived {
        let c = &problem.constraints()[row];
        let mut acc = 0.0;
        let mut coeff = 0.0;
        for &(id, w) in &c.terms {
            if id.index() == var {
                coeff = w;
            } else {
                acc += w * x[id.index()];
            }
        }
        x[var] = (c.rhs - acc) / coeff;
        let v = &problem.vars()[var];
        if x[var] < v.lower - FEAS_TOL - 1e-9 * v.lower.abs()
            || x[var] > v.upper + FEAS_TOL + 1e-9 * v.upper.abs()
        {
            return false;
        }
    }
    for &r in &plan.residual_rows {
        let c = &problem.constraints()[r];
        let lhs: f64 = c.terms.iter().map(|&(id, w)| w * x[id.index()]).sum();
        let slack = FEAS_TOL * (1.0 + c.rhs.abs());
        let ok = match c.cmp {
            Cmp::Le => lhs <= c.rhs + slack,
            Cmp::Ge => lhs >= c.rhs - slack,
            Cmp::Eq => (lhs - c.rhs).abs() <= slack,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Cmp, OptProblem, Sense};

    #[test]
    fn min_over_unit_box() {
        let mut p = OptProblem::new("b1", Sense::Minimize);
        let x = p.add_continuous("x", 0.0, 1.0).unwrap();
        let y = p.add_continuous("y", 0.0, 1.0).unwrap();
        p.set_objective(x, 1.0);
        p.set_objective(y, 1.0);
        let s = solve_bruteforce(&p, 0.5).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective.unwrap(), 0.0);
    }

    #[test]
    fn one_binary_toggle() {
        // max 2b - x with x >= b: best is b = 1, x = 1, value 1
        let mut p = OptProblem::new("b2", Sense::Maximize);
        let x = p.add_continuous("x", 0.0, 2.0).unwrap();
        let b = p.add_binary("b").unwrap();
        p.set_objective(x, -1.0);
        p.set_objective(b, 2.0);
        p.add_constraint("c", vec![(x, 1.0), (b, -1.0)], Cmp::Ge, 0.0);
        let s = solve_bruteforce(&p, 0.5).unwrap();
        assert_eq!(s.objective.unwrap(), 1.0);
    }

    #[test]
    fn equality_chain_is_derived_not_enumerated() {
        // e1 = e0 + 0.5 x with e0 fixed by an equality; only x is free
        let mut p = OptProblem::new("b3", Sense::Maximize);
        let x = p.add_continuous("x", 0.0, 4.0).unwrap();
        let e0 = p.add_continuous("e0", 0.0, 10.0).unwrap();
        let e1 = p.add_continuous("e1", 0.0, 3.0).unwrap();
        p.add_constraint("init", vec![(e0, 1.0)], Cmp::Eq, 2.0);
        p.add_constraint("dyn", vec![(e1, 1.0), (e0, -1.0), (x, -0.5)], Cmp::Eq, 0.0);
        p.set_objective(x, 1.0);
        // e1 <= 3 limits x to 2
        let s = solve_bruteforce(&p, 0.25).unwrap();
        assert_eq!(s.objective.unwrap(), 2.0);
        let a = s.assignment.unwrap();
        assert_eq!(a[e0.index()], 2.0);
        assert_eq!(a[e1.index()], 3.0);
        assert_eq!(a[x.index()], 2.0);
    }

    #[test]
    fn infeasible_reported() {
        let mut p = OptProblem::new("b4", Sense::Minimize);
        let x = p.add_continuous("x", 0.0, 1.0).unwrap();
        p.add_constraint("c", vec![(x, 1.0)], Cmp::Ge, 5.0);
        let s = solve_bruteforce(&p, 0.5).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn too_large_rejected() {
        let mut p = OptProblem::new("b5", Sense::Minimize);
        for i in 0..16 {
            let v = p.add_continuous(format!("x{i}"), 0.0, 1.0).unwrap();
            p.set_objective(v, 1.0);
        }
        assert!(matches!(
            solve_bruteforce(&p, 0.01),
            Err(SolveError::TooLarge(_))
        ));
    }
}
