//! Tagged linear programs and the solvers that consume them.
//!
//! Problems are stated as
//!
//! ```text
//! min  cᵀx + offset
//! s.t. A_eq x  = b_eq
//!      A_ub x <= b_ub
//!      l <= x <= u
//! ```
//!
//! Dual conventions used throughout: `eq_duals[i] = ∂f*/∂b_eq[i]` (free sign)
//! and `ub_duals[i] = -∂f*/∂b_ub[i] >= 0`.

mod brute;
mod export;
mod kkt;
mod lu;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_VARS};
pub use export::write_lp_format;
pub use kkt::{check_kkt, KktReport};
pub use simplex::SimplexSolver;

/// Identifier attached to every row and column, e.g. `BALANCE(12)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub family: String,
    pub index: Vec<usize>,
}

impl Tag {
    pub fn new(family: impl Into<String>, index: &[usize]) -> Self {
        Tag { family: family.into(), index: index.to_vec() }
    }

    pub fn is(&self, family: &str) -> bool {
        self.family == family
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if !self.index.is_empty() {
            write!(f, "(")?;
            for (k, i) in self.index.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{i}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// One sparse constraint row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub tag: Tag,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_tags: Vec<Tag>,
    pub eq_rows: Vec<Row>,
    pub ub_rows: Vec<Row>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a column with bounds `[lower, upper]` and returns its index.
    pub fn add_var(&mut self, tag: Tag, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_tags.push(tag);
        self.objective.len() - 1
    }

    pub fn add_eq(&mut self, tag: Tag, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.eq_rows.push(Row { tag, coeffs, rhs });
        self.eq_rows.len() - 1
    }

    pub fn add_ub(&mut self, tag: Tag, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.ub_rows.push(Row { tag, coeffs, rhs });
        self.ub_rows.len() - 1
    }

    /// Checks dimensions, finiteness and tag uniqueness.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_tags.len() != n {
            return Err(LpError::InvalidProblem("bound/tag vectors do not match the number of variables".into()));
        }
        if !self.offset.is_finite() {
            return Err(LpError::InvalidProblem("objective offset is not finite".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::InvalidProblem(format!(
                    "objective coefficient of {} is not finite",
                    self.var_tags[j]
                )));
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::InvalidProblem(format!("invalid bounds [{l}, {u}] on {}", self.var_tags[j])));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for row in self.eq_rows.iter().chain(self.ub_rows.iter()) {
            if !row.rhs.is_finite() {
                return Err(LpError::InvalidProblem(format!("rhs of {} is not finite", row.tag)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(LpError::InvalidProblem(format!("bad coefficient ({j}, {a}) in row {}", row.tag)));
                }
            }
            if !seen.insert(&row.tag) {
                return Err(LpError::InvalidProblem(format!("duplicate row tag {}", row.tag)));
            }
        }
        Ok(())
    }

    pub fn eq_row_index(&self, tag: &Tag) -> Option<usize> {
        self.eq_rows.iter().position(|r| &r.tag == tag)
    }

    /// `cᵀx + offset`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub phase1_iterations: usize,
    pub refactorizations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub ub_duals: Vec<f64>,
    /// Reduced costs `c - A_eqᵀy + A_ubᵀλ`.
    pub reduced_costs: Vec<f64>,
    /// Objective including the constant offset.
    pub objective: f64,
    pub stats: SolveStats,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn non_optimal(status: LpStatus, stats: SolveStats) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            eq_duals: Vec::new(),
            ub_duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            stats,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance on the (internally normalised) objective.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// `None` picks a limit from the problem size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before Bland's rule takes over.
    pub bland_after: usize,
    pub refactor_every: usize,
    pub scale: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
            bland_after: 100,
            refactor_every: 100,
            scale: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("problem with {vars} variables exceeds the brute-force limit of {limit}")]
    DimensionTooLarge { vars: usize, limit: usize },
    #[error("backend `{0}` does not return equality-row duals")]
    BackendLacksDuals(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub returns_duals: bool,
}

/// Anything that can solve an [`LpProblem`] and report duals.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    fn solve(&self, problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError>;
}

/// A backend that passed registration (i.e. it reports duals).
pub struct Backend(Box<dyn SolverBackend>);

impl Backend {
    pub fn register(backend: Box<dyn SolverBackend>) -> Result<Self, LpError> {
        if !backend.capabilities().returns_duals {
            return Err(LpError::BackendLacksDuals(backend.name().to_string()));
        }
        Ok(Backend(backend))
    }

    pub fn bundled() -> Self {
        Backend(Box::new(SimplexSolver))
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn solve(&self, problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
        self.0.solve(problem, opts)
    }
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Backend").field(&self.0.name()).finish()
    }
}

/// Solves with the bundled simplex solver.
pub fn solve(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    SimplexSolver.solve(problem, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NoDuals;

    impl SolverBackend for NoDuals {
        fn name(&self) -> &str {
            "no-duals"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities { returns_duals: false }
        }
        fn solve(&self, _: &LpProblem, _: &SolverOptions) -> Result<LpSolution, LpError> {
            unreachable!()
        }
    }

    #[test]
    fn backend_without_duals_is_rejected() {
        let err = Backend::register(Box::new(NoDuals)).unwrap_err();
        assert_eq!(err, LpError::BackendLacksDuals("no-duals".into()));
        assert_eq!(Backend::register(Box::new(SimplexSolver)).unwrap().name(), "bundled-simplex");
    }

    #[test]
    fn duplicate_tags_rejected() {
        let mut p = LpProblem::new();
        let x = p.add_var(Tag::new("x", &[]), 1.0, 0.0, f64::INFINITY);
        p.add_ub(Tag::new("r", &[0]), vec![(x, 1.0)], 1.0);
        p.add_eq(Tag::new("r", &[0]), vec![(x, 1.0)], 1.0);
        assert!(matches!(p.validate(), Err(LpError::InvalidProblem(_))));
    }

    #[test]
    fn tag_display() {
        assert_eq!(Tag::new("GENLIM", &[1, 7]).to_string(), "GENLIM(1,7)");
        assert_eq!(Tag::new("BUDGET", &[]).to_string(), "BUDGET");
    }
}
