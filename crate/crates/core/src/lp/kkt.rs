//! First-order optimality diagnostics for an (LP, solution) pair.

use serde::{Deserialize, Serialize};

use super::{LpProblem, LpSolution};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest violation of a row or a variable bound.
    pub max_primal_residual: f64,
    /// Largest sign violation among `≤`-row duals and reduced costs.
    pub max_dual_residual: f64,
    /// Largest complementary-slackness product.
    pub max_cs_violation: f64,
    /// Primal objective minus dual objective.
    pub duality_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl KktReport {
    pub fn relative_gap(&self) -> f64 {
        self.duality_gap.abs() / (1.0 + self.primal_objective.abs())
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_primal_residual <= tol
            && self.max_dual_residual <= tol
            && self.max_cs_violation <= tol
            && self.relative_gap() <= tol
    }
}

/// Computes residuals from scratch; reduced costs are re-derived from the
/// duals rather than read from the solution.
pub fn check_kkt(problem: &LpProblem, sol: &LpSolution) -> KktReport {
    let n = problem.num_vars();
    let x = &sol.x;
    if x.len() != n || sol.eq_duals.len() != problem.eq_rows.len() || sol.ub_duals.len() != problem.ub_rows.len() {
        return KktReport {
            max_primal_residual: f64::INFINITY,
            max_dual_residual: f64::INFINITY,
            max_cs_violation: f64::INFINITY,
            duality_gap: f64::INFINITY,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
        };
    }
    let mut rep = KktReport::default();
    let mut reduced = problem.objective.clone();
    let mut dual_obj = problem.offset;

    for (row, &y) in problem.eq_rows.iter().zip(&sol.eq_duals) {
        let ax: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        rep.max_primal_residual = rep.max_primal_residual.max((ax - row.rhs).abs());
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y;
        }
        dual_obj += row.rhs * y;
    }
    for (row, &lam) in problem.ub_rows.iter().zip(&sol.ub_duals) {
        let ax: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let slack = row.rhs - ax;
        rep.max_primal_residual = rep.max_primal_residual.max((-slack).max(0.0));
        rep.max_dual_residual = rep.max_dual_residual.max((-lam).max(0.0));
        rep.max_cs_violation = rep.max_cs_violation.max((lam * slack).abs());
        for &(j, a) in &row.coeffs {
            reduced[j] += a * lam;
        }
        dual_obj -= row.rhs * lam;
    }
    for j in 0..n {
        let (l, u, d) = (problem.lower[j], problem.upper[j], reduced[j]);
        rep.max_primal_residual = rep.max_primal_residual.max((l - x[j]).max(0.0)).max((x[j] - u).max(0.0));
        let dp = d.max(0.0);
        let dm = (-d).max(0.0);
        if dp > 0.0 {
            if l.is_finite() {
                dual_obj += dp * l;
                rep.max_cs_violation = rep.max_cs_violation.max((dp * (x[j] - l)).abs());
            } else {
                rep.max_dual_residual = rep.max_dual_residual.max(dp);
            }
        }
        if dm > 0.0 {
            if u.is_finite() {
                dual_obj -= dm * u;
                rep.max_cs_violation = rep.max_cs_violation.max((dm * (u - x[j])).abs());
            } else {
                rep.max_dual_residual = rep.max_dual_residual.max(dm);
            }
        }
    }
    rep.primal_objective = problem.objective_value(x);
    rep.dual_objective = dual_obj;
    rep.duality_gap = rep.primal_objective - dual_obj;
    rep
}

#[cfg(test)]
mod tests {
    use super::super::{solve, LpStatus, SolverOptions, Tag};
    use super::*;

    /// min 2a + 3b s.t. a + b = 4, a ≤ 1 (as a row). Optimum a=1, b=3;
    /// y = 3, λ = 1.
    fn hand_pair() -> (LpProblem, LpSolution) {
        let mut p = LpProblem::new();
        let a = p.add_var(Tag::new("a", &[]), 2.0, 0.0, f64::INFINITY);
        let b = p.add_var(Tag::new("b", &[]), 3.0, 0.0, f64::INFINITY);
        p.add_eq(Tag::new("bal", &[]), vec![(a, 1.0), (b, 1.0)], 4.0);
        p.add_ub(Tag::new("cap", &[]), vec![(a, 1.0)], 1.0);
        let s = LpSolution {
            status: LpStatus::Optimal,
            x: vec![1.0, 3.0],
            eq_duals: vec![3.0],
            ub_duals: vec![1.0],
            reduced_costs: vec![0.0, 0.0],
            objective: 11.0,
            stats: Default::default(),
        };
        (p, s)
    }

    #[test]
    fn hand_built_optimal_pair_is_clean() {
        let (p, s) = hand_pair();
        let r = check_kkt(&p, &s);
        assert!(r.within(1e-9), "{r:?}");
        assert_eq!(r.duality_gap, 0.0);
    }

    #[test]
    fn perturbed_primal_shows_column_norm_residual() {
        let (p, mut s) = hand_pair();
        s.x[0] += 1e-3;
        let r = check_kkt(&p, &s);
        // Column of `a` has unit entries in both rows.
        assert!((r.max_primal_residual - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn sign_flipped_dual_is_flagged() {
        let (p, mut s) = hand_pair();
        s.ub_duals[0] = -1.0;
        let r = check_kkt(&p, &s);
        assert!(r.max_dual_residual > 0.5);
    }

    #[test]
    fn solver_output_passes() {
        let (p, _) = hand_pair();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(check_kkt(&p, &s).within(1e-9));
    }
}
