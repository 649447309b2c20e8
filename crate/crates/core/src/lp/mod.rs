//! Dense linear programs and a self-contained simplex solver.
//!
//! Every mechanism program is materialized as a [`LinearProgram`] with named
//! variables and constraints; [`solve`] returns a basic (vertex) optimum
//! together with shadow prices for every constraint.

mod dual;
mod simplex;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dual::build_dual;
pub use simplex::{restrict_and_vertex, solve, solve_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// Lower bound of a variable; upper bounds are expressed as constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            variables: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable with objective coefficient `cost`; returns its index.
    /// Existing constraints are padded with a zero coefficient.
    pub fn add_variable(&mut self, name: impl Into<String>, bound: Bound, cost: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            bound,
        });
        self.objective.push(cost);
        for c in &mut self.constraints {
            c.coeffs.push(0.0);
        }
        self.variables.len() - 1
    }

    /// Adds a constraint from sparse `(variable, coefficient)` terms.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(usize, f64)],
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut coeffs = vec![0.0; self.variables.len()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds a variable with its coefficients in existing rows given sparsely.
    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        bound: Bound,
        cost: f64,
        terms: &[(usize, f64)],
    ) -> usize {
        let j = self.add_variable(name, bound, cost);
        for &(i, a) in terms {
            self.constraints[i].coeffs[j] += a;
        }
        j
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    /// Checks row lengths and name uniqueness.
    pub fn check(&self) -> Result<()> {
        let n = self.variables.len();
        if self.objective.len() != n {
            return Err(Error::InvalidInput("objective length mismatch".into()));
        }
        if let Some(c) = self.constraints.iter().find(|c| c.coeffs.len() != n) {
            return Err(Error::InvalidInput(format!(
                "constraint {} has {} coefficients, expected {n}",
                c.name,
                c.coeffs.len()
            )));
        }
        let mut seen = HashMap::new();
        for v in &self.variables {
            if seen.insert(v.name.as_str(), ()).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate variable {}",
                    v.name
                )));
            }
        }
        seen.clear();
        for c in &self.constraints {
            if seen.insert(c.name.as_str(), ()).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate constraint {}",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.objective, x)
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs = crate::linalg::dot(&c.coeffs, x);
            match c.relation {
                Relation::Le => (lhs - c.rhs).max(0.0),
                Relation::Ge => (c.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.variables.iter().zip(x).map(|(v, &xj)| match v.bound {
            Bound::NonNegative => (-xj).max(0.0),
            Bound::Free => 0.0,
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Writes the program in a plain-text row format for external cross-checks.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, coeffs: &[f64]| {
            let mut first = true;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 {
                    "-"
                } else if first {
                    ""
                } else {
                    "+"
                };
                let _ = write!(out, " {sign} {:.17e} {}", a.abs(), self.variables[j].name);
                first = false;
            }
            if first {
                out.push_str(" 0");
            }
        };
        let _ = writeln!(
            out,
            "{}",
            match self.sense {
                Sense::Maximize => "maximize",
                Sense::Minimize => "minimize",
            }
        );
        out.push_str("  obj:");
        term(&mut out, &self.objective);
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let _ = write!(out, "  {}:", c.name);
            term(&mut out, &c.coeffs);
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {:.17e}", c.rhs);
        }
        out.push_str("bounds\n");
        for v in &self.variables {
            match v.bound {
                Bound::NonNegative => {
                    let _ = writeln!(out, "  {} >= 0", v.name);
                }
                Bound::Free => {
                    let _ = writeln!(out, "  {} free", v.name);
                }
            }
        }
        out.push_str("end\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver tolerances and pivoting limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub duality_tol: f64,
    /// Pivots priced by most-negative reduced cost before switching to Bland's rule.
    pub dantzig_pivots: usize,
    pub max_pivots: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            duality_tol: 1e-7,
            dantzig_pivots: 5_000,
            max_pivots: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: Status,
    /// One value per variable (empty unless optimal).
    pub primal: Vec<f64>,
    /// Shadow price ∂objective/∂rhs for each constraint (empty unless optimal).
    pub dual: Vec<f64>,
    pub objective: f64,
    /// Indices of constraints active at the returned vertex.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

impl LpSolution {
    pub(crate) fn not_optimal(status: Status, pivots: usize) -> Self {
        Self {
            status,
            primal: Vec::new(),
            dual: Vec::new(),
            objective: match status {
                Status::Unbounded => f64::INFINITY,
                _ => f64::NAN,
            },
            basis: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, lp: &LinearProgram, name: &str) -> Option<f64> {
        lp.variables
            .iter()
            .position(|v| v.name == name)
            .map(|j| self.primal[j])
    }

    pub fn dual_of(&self, lp: &LinearProgram, name: &str) -> Option<f64> {
        lp.constraints
            .iter()
            .position(|c| c.name == name)
            .map(|i| self.dual[i])
    }

    /// Σ_i y_i b_i.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        lp.constraints
            .iter()
            .zip(&self.dual)
            .map(|(c, y)| c.rhs * y)
            .sum()
    }

    /// Largest |y_i · slack_i| over constraints plus largest
    /// |x_j · reduced cost_j| over variables.
    pub fn complementary_slackness(&self, lp: &LinearProgram) -> f64 {
        let rows = lp.constraints.iter().zip(&self.dual).map(|(c, y)| {
            let slack = crate::linalg::dot(&c.coeffs, &self.primal) - c.rhs;
            (slack * y).abs()
        });
        let cols = (0..lp.n_vars()).map(|j| {
            let aty: f64 = lp
                .constraints
                .iter()
                .zip(&self.dual)
                .map(|(c, y)| c.coeffs[j] * y)
                .sum();
            ((lp.objective[j] - aty) * self.primal[j]).abs()
        });
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Active constraint normals plus tight variable bounds, as rows over the
    /// original variables; a vertex has full column rank here.
    pub fn active_rows(&self, lp: &LinearProgram, tol: f64) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = self
            .basis
            .iter()
            .map(|&i| lp.constraints[i].coeffs.clone())
            .collect();
        for (j, v) in lp.variables.iter().enumerate() {
            if v.bound == Bound::NonNegative && self.primal[j].abs() <= tol {
                let mut e = vec![0.0; lp.n_vars()];
                e[j] = 1.0;
                rows.push(e);
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_pads_rows() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_variable("x", Bound::NonNegative, 1.0);
        lp.add_constraint("cap", &[(x, 1.0)], Relation::Le, 3.0);
        let y = lp.add_variable("y", Bound::Free, 0.0);
        assert_eq!(lp.constraints[0].coeffs, vec![1.0, 0.0]);
        assert_eq!(y, 1);
        assert!(lp.check().is_ok());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_variable("x", Bound::NonNegative, 1.0);
        lp.add_variable("x", Bound::NonNegative, 1.0);
        assert!(lp.check().is_err());
    }

    #[test]
    fn dump_lists_every_row() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_variable("x", Bound::NonNegative, 1.0);
        lp.add_constraint("cap", &[(x, 1.0)], Relation::Le, 3.0);
        let text = lp.dump();
        assert!(text.starts_with("maximize"));
        assert!(text.contains("cap:"));
        assert!(text.contains("x >= 0"));
    }
}
