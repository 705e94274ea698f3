//! Solver-agnostic LP / MILP description consumed by the solving backends.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("invalid bounds for {name}: [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("duplicate variable name {0}")]
    DuplicateName(String),
}

/// Handle to a variable of the problem that minted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Linear (optionally diagonally quadratic) optimization problem.
///
/// Variables keep declaration order; that order is the canonical ordering
/// used by the file writers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptProblem {
    pub name: String,
    pub sense: Sense,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    /// Linear objective coefficient per variable.
    objective: Vec<f64>,
    /// Diagonal quadratic objective coefficient per variable (`q * x^2`).
    quadratic: Vec<f64>,
}

impl OptProblem {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            quadratic: Vec::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<VarId, ProblemError> {
        let name = name.into();
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(ProblemError::InvalidBounds { name, lower, upper });
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(ProblemError::BinaryBounds(name));
        }
        if self.vars.iter().any(|v| v.name == name) {
            return Err(ProblemError::DuplicateName(name));
        }
        self.vars.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        self.objective.push(0.0);
        self.quadratic.push(0.0);
        Ok(VarId(self.vars.len() - 1))
    }

    /// Convenience: continuous variable.
    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ProblemError> {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    /// Convenience: binary variable with bounds [0, 1].
    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ProblemError> {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Adds a linear constraint. Panics if a term references a variable this
    /// problem did not mint; that is a caller bug, not an input condition.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        cmp: Cmp,
        rhs: f64,
    ) {
        for &(id, coeff) in &terms {
            assert!(
                id.0 < self.vars.len(),
                "constraint references undeclared variable index {}",
                id.0
            );
            assert!(coeff.is_finite(), "non-finite constraint coefficient");
        }
        assert!(rhs.is_finite(), "non-finite constraint rhs");
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            cmp,
            rhs,
        });
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    /// Sets the diagonal quadratic coefficient `q` of `q * x^2`; must be
    /// nonnegative to keep minimization convex.
    pub fn set_quadratic(&mut self, var: VarId, coeff: f64) {
        assert!(coeff >= 0.0, "quadratic objective must be convex");
        self.quadratic[var.0] = coeff;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn quadratic_coeffs(&self) -> &[f64] {
        &self.quadratic
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn has_quadratic(&self) -> bool {
        self.quadratic.iter().any(|&q| q != 0.0)
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Objective value of an assignment (linear plus diagonal quadratic).
    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self.quadratic.iter().zip(x).map(|(q, v)| q * v * v).sum();
        lin + quad
    }

    /// Largest constraint or bound violation of an assignment (0.0 when
    /// feasible); used to re-check solver output against our own tolerance.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
            if v.kind == VarKind::Binary {
                worst = worst.max((xv - xv.round()).abs());
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(id, coeff)| coeff * x[id.0]).sum();
            let defect = match c.cmp {
                Cmp::Le => lhs - c.rhs,
                Cmp::Ge => c.rhs - lhs,
                Cmp::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(defect);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    BackendError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::BackendError => "backend-error",
        };
        f.write_str(s)
    }
}

/// Solver outcome. `assignment` is present iff the status is `Optimal` or
/// `TimeLimit` with an incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub assignment: Option<Vec<f64>>,
    pub wall_time: std::time::Duration,
    pub mip_gap: Option<f64>,
}

impl Solution {
    pub fn value(&self, var: VarId) -> Option<f64> {
        self.assignment.as_ref().map(|x| x[var.0])
    }

    pub fn values(&self, vars: &[VarId]) -> Option<Vec<f64>> {
        self.assignment
            .as_ref()
            .map(|x| vars.iter().map(|v| x[v.0]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_eval() {
        let mut p = OptProblem::new("toy", Sense::Minimize);
        let x = p.add_continuous("x", 0.0, 1.0).unwrap();
        let y = p.add_continuous("y", 0.0, 2.0).unwrap();
        p.set_objective(x, 1.0);
        p.set_objective(y, -1.0);
        p.add_constraint("c0", vec![(x, 1.0), (y, 1.0)], Cmp::Le, 2.5);
        assert_eq!(p.eval_objective(&[1.0, 2.0]), -1.0);
        assert_eq!(p.max_violation(&[1.0, 1.5]), 0.0);
        assert!(p.max_violation(&[1.0, 2.0]) > 0.4);
    }

    #[test]
    fn rejects_bad_bounds() {
        let mut p = OptProblem::new("toy", Sense::Minimize);
        assert!(matches!(
            p.add_continuous("x", 1.0, 0.0),
            Err(ProblemError::InvalidBounds { .. })
        ));
        assert!(matches!(
            p.add_var("b", -0.5, 1.0, VarKind::Binary),
            Err(ProblemError::BinaryBounds(_))
        ));
        p.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(matches!(
            p.add_continuous("x", 0.0, 1.0),
            Err(ProblemError::DuplicateName(_))
        ));
    }

    #[test]
    #[should_panic(expected = "undeclared variable")]
    fn rejects_foreign_var_id() {
        let mut a = OptProblem::new("a", Sense::Minimize);
        let x = a.add_continuous("x", 0.0, 1.0).unwrap();
        let y = a.add_continuous("y", 0.0, 1.0).unwrap();
        let mut b = OptProblem::new("b", Sense::Minimize);
        let _bx = b.add_continuous("x", 0.0, 1.0).unwrap();
        // y's index does not exist in b
        b.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Cmp::Le, 1.0);
    }

    #[test]
    fn binary_roundness_checked_in_violation() {
        let mut p = OptProblem::new("toy", Sense::Minimize);
        p.add_binary("b").unwrap();
        assert!(p.max_violation(&[0.4]) > 0.3);
        assert_eq!(p.max_violation(&[1.0]), 0.0);
    }
}
