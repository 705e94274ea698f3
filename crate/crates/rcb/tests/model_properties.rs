//! Cross-module properties that need a real solve: restriction orderings,
//! feasible-set nesting, objective edge cases, and backend agreement.

use rcb::brute::solve_bruteforce;
use rcb::formulations::{build_model, ModelKind, Objective};
use rcb::oracle::brute_force_dispatch;
use rcb::problem::SolveStatus;
use rcb::solver::{solve, solve_external, SolverConfig};
use rcb::types::{build_time_grid, reference_element, FleetParams, TimeGrid};

fn table_i_fleet(n: usize) -> FleetParams {
    FleetParams::uniform(n, reference_element(), 6.75).unwrap()
}

fn optimal_value(kind: ModelKind, fleet: &FleetParams, grid: &TimeGrid, obj: &Objective) -> f64 {
    let built = build_model(kind, fleet, grid, obj).unwrap();
    let s = solve(&built.problem).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal, "{kind:?} not optimal");
    s.objective.unwrap()
}

#[test]
fn revenue_restriction_chain() {
    // maximization: RCB (M=1) <= MILP-unequal <= Relaxed, and
    // MILP-equal <= MILP-unequal
    let fleet = table_i_fleet(3);
    let grid = build_time_grid(0.25, 1, 4).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.04, -0.01, 0.08, 0.02],
    };
    let rcb = optimal_value(ModelKind::Rcb, &fleet, &grid, &obj);
    let unequal = optimal_value(ModelKind::MilpUnequal, &fleet, &grid, &obj);
    let equal = optimal_value(ModelKind::MilpEqual, &fleet, &grid, &obj);
    let relaxed = optimal_value(ModelKind::Relaxed, &fleet, &grid, &obj);
    assert!(rcb <= unequal + 1e-6, "rcb {rcb} > unequal {unequal}");
    assert!(unequal <= relaxed + 1e-6, "unequal {unequal} > relaxed {relaxed}");
    assert!(equal <= unequal + 1e-6, "equal {equal} > unequal {unequal}");
}

#[test]
fn rcb_objective_improves_with_m() {
    let fleet = table_i_fleet(5);
    let grid_of = |m| build_time_grid(0.25, m, 8).unwrap();
    let obj = Objective::Revenue {
        prices: rcb::signals::two_peak_prices(8, 0.25),
    };
    let v1 = optimal_value(ModelKind::Rcb, &fleet, &grid_of(1), &obj);
    let v5 = optimal_value(ModelKind::Rcb, &fleet, &grid_of(5), &obj);
    let v10 = optimal_value(ModelKind::Rcb, &fleet, &grid_of(10), &obj);
    assert!(v1 <= v5 + 1e-9);
    assert!(v5 <= v10 + 1e-9);
}

#[test]
fn unequal_sharing_strictly_beats_equal_when_dissipation_helps() {
    // three elements near full, reference demands more charging than fits:
    // element-wise complementarity lets one element dissipate while the
    // others absorb, which the composite-equal model cannot express
    let fleet = FleetParams::uniform(3, reference_element(), 10.0).unwrap();
    let grid = build_time_grid(1.0, 1, 3).unwrap();
    let obj = Objective::TrackingL1 {
        reference: vec![6.0, 6.0, 6.0],
    };
    let equal = optimal_value(ModelKind::MilpEqual, &fleet, &grid, &obj);
    let unequal = optimal_value(ModelKind::MilpUnequal, &fleet, &grid, &obj);
    assert!(
        unequal + 0.5 < equal,
        "expected a strict gap, got equal {equal} vs unequal {unequal}"
    );
}

#[test]
fn single_element_equal_and_unequal_coincide() {
    let fleet = table_i_fleet(1);
    let grid = build_time_grid(0.25, 1, 3).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.05, -0.02, 0.08],
    };
    let equal = optimal_value(ModelKind::MilpEqual, &fleet, &grid, &obj);
    let unequal = optimal_value(ModelKind::MilpUnequal, &fleet, &grid, &obj);
    assert!((equal - unequal).abs() <= 1e-6 * (1.0 + equal.abs()));
}

#[test]
fn rcb_cut_plane_approaches_relaxed_plane_for_large_fleets() {
    let fleet = table_i_fleet(1000);
    let grid = build_time_grid(0.25, 10, 2).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.05, 0.05],
    };
    let built = rcb::build_rcb(&fleet, &grid, &obj).unwrap();
    let cut = built
        .problem
        .constraints()
        .iter()
        .find(|c| c.name == "cut_0")
        .unwrap();
    assert!((cut.rhs - 0.999).abs() < 1e-12);
    assert!(cut.rhs < 1.0);
}

#[test]
fn zero_reference_tracking_is_free() {
    let fleet = table_i_fleet(4);
    let grid = build_time_grid(0.25, 1, 3).unwrap();
    let obj = Objective::TrackingL1 {
        reference: vec![0.0; 3],
    };
    for kind in ModelKind::ALL {
        let v = optimal_value(kind, &fleet, &grid, &obj);
        assert!(v.abs() < 1e-7, "{kind:?} cost {v}");
    }
}

#[test]
fn constant_price_discharges_from_the_top() {
    // start at the upper buffer bound: charging strictly loses money, so
    // the optimum is discharge-only
    let el = reference_element();
    let grid = build_time_grid(0.25, 1, 2).unwrap();
    let eps = rcb::formulations::epsilon(&el, 0.25).kwh();
    let fleet = FleetParams::uniform(2, el, el.e_max - eps).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.05, 0.05],
    };
    let built = rcb::build_rcb(&fleet, &grid, &obj).unwrap();
    let s = solve(&built.problem).unwrap();
    let schedule = built.schedule(s.assignment.as_ref().unwrap()).unwrap();
    for k in 0..2 {
        assert!(schedule.p_c[k] < 1e-7, "charging at k={k}");
        assert!(schedule.p_d[k] > 0.1, "not discharging at k={k}");
    }
}

#[test]
fn negative_prices_make_simultaneous_operation_optimal() {
    // negative price pays for net consumption; at the top of the energy
    // band the only way to consume is to dissipate through both directions
    let el = reference_element();
    let grid = build_time_grid(0.25, 1, 1).unwrap();
    let eps = rcb::formulations::epsilon(&el, 0.25).kwh();
    let fleet = FleetParams::uniform(4, el, el.e_max - eps).unwrap();
    let obj = Objective::Revenue { prices: vec![-0.05] };
    let built = rcb::build_rcb(&fleet, &grid, &obj).unwrap();
    let s = solve(&built.problem).unwrap();
    let schedule = built.schedule(s.assignment.as_ref().unwrap()).unwrap();
    assert!(
        schedule.p_c[0] > 0.1 && schedule.p_d[0] > 0.1,
        "expected simultaneous operation, got ({}, {})",
        schedule.p_c[0],
        schedule.p_d[0]
    );
    assert!(s.objective.unwrap() > 0.0);
}

#[test]
fn single_element_rcb_is_forced_idle() {
    let fleet = table_i_fleet(1);
    let grid = build_time_grid(0.25, 1, 3).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.1, 0.2, 0.3],
    };
    let built = rcb::build_rcb(&fleet, &grid, &obj).unwrap();
    let s = solve(&built.problem).unwrap();
    let schedule = built.schedule(s.assignment.as_ref().unwrap()).unwrap();
    for k in 0..3 {
        assert!(schedule.p_c[k].abs() < 1e-9);
        assert!(schedule.p_d[k].abs() < 1e-9);
    }
}

#[test]
fn relaxed_boundary_point_is_feasible() {
    // P_c = P_d = N * P_max / 2 sits exactly on the relaxed plane
    let fleet = table_i_fleet(4);
    let grid = build_time_grid(0.05, 1, 1).unwrap();
    let p = 4.0 * 5.0 / 2.0;
    let built = rcb::build_relaxed(
        &fleet,
        &grid,
        &Objective::TrackingL1 { reference: vec![0.0] },
    )
    .unwrap();
    // fix both powers at the boundary via additional equalities and check
    // feasibility of the resulting LP
    let mut problem = built.problem.clone();
    problem.add_constraint(
        "fix_c",
        vec![(built.vars.p_c[0], 1.0)],
        rcb::problem::Cmp::Eq,
        p,
    );
    problem.add_constraint(
        "fix_d",
        vec![(built.vars.p_d[0], 1.0)],
        rcb::problem::Cmp::Eq,
        p,
    );
    let s = solve(&problem).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
}

#[test]
fn external_and_bruteforce_backends_agree() {
    // tiny revenue MILPs: |external - bruteforce| bounded by the grid
    // resolution times the objective's total coefficient mass
    for (n, k, prices) in [
        (1usize, 2usize, vec![0.06, -0.02]),
        (2, 1, vec![0.05]),
        (1, 1, vec![-0.04]),
    ] {
        let fleet = table_i_fleet(n);
        let grid = build_time_grid(0.25, 1, k).unwrap();
        let obj = Objective::Revenue { prices: prices.clone() };
        let built = build_model(ModelKind::MilpUnequal, &fleet, &grid, &obj).unwrap();
        let external = solve(&built.problem).unwrap();
        assert_eq!(external.status, SolveStatus::Optimal);
        let resolution = 1.25;
        let brute = solve_bruteforce(&built.problem, resolution).unwrap();
        assert_eq!(brute.status, SolveStatus::Optimal);

        let coeff_mass: f64 = built.problem.objective_coeffs().iter().map(|c| c.abs()).sum();
        let tol = resolution * coeff_mass;
        let (e, b) = (external.objective.unwrap(), brute.objective.unwrap());
        // grid points are feasible, so brute force can never beat the solver
        assert!(b <= e + 1e-6, "brute {b} beat external {e}");
        assert!(e - b <= tol, "gap {} above Lipschitz bound {tol}", e - b);

        // status soundness: the optimal assignment satisfies the problem
        let x = external.assignment.as_ref().unwrap();
        assert!(built.problem.max_violation(x) <= 1e-6 * 40.0);
    }
}

#[test]
fn dispatch_oracle_matches_problem_bruteforce() {
    // the dispatch-space oracle and the OptProblem-space grid search see
    // the same instance through independent encodings
    let fleet = table_i_fleet(2);
    let grid = build_time_grid(0.25, 1, 1).unwrap();
    let prices = vec![0.05];
    let obj = Objective::Revenue { prices: prices.clone() };
    let oracle = brute_force_dispatch(&fleet, &grid, &obj, 1.25).unwrap();
    let built = build_model(ModelKind::MilpUnequal, &fleet, &grid, &obj).unwrap();
    let brute = solve_bruteforce(&built.problem, 1.25).unwrap();
    assert!((oracle.value - brute.objective.unwrap()).abs() <= 1e-9);
}

#[test]
fn mps_route_solves_identically() {
    let fleet = table_i_fleet(2);
    let grid = build_time_grid(0.25, 1, 2).unwrap();
    let obj = Objective::Revenue {
        prices: vec![0.05, 0.01],
    };
    let built = build_model(ModelKind::MilpEqual, &fleet, &grid, &obj).unwrap();
    let via_lp = solve(&built.problem).unwrap();
    // reparse through the MPS writer and solve the recovered problem
    let text = rcb::mps_format::write_mps(&built.problem).unwrap();
    let recovered = rcb::mps_format::parse_mps(&text).unwrap();
    let via_mps = solve(&recovered).unwrap();
    assert!((via_lp.objective.unwrap() - via_mps.objective.unwrap()).abs() < 1e-6);
}

#[test]
fn rcb_tracking_smoke_through_problem_file() {
    let fleet = table_i_fleet(2);
    let grid = build_time_grid(0.05, 1, 2).unwrap();
    let obj = Objective::TrackingL1 {
        reference: vec![3.0, -2.0],
    };
    let built = rcb::build_rcb(&fleet, &grid, &obj).unwrap();
    let s = solve_external(&built.problem, &SolverConfig::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    // the reference is well inside the cutting plane: exact tracking
    assert!(s.objective.unwrap() < 1e-7);
}
