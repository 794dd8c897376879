//! Exhaustive vertex enumeration; a test oracle for tiny LPs.

use super::{LpError, LpProblem, LpSolution, LpStatus, SolveStats};

pub const BRUTE_FORCE_MAX_VARS: usize = 10;

/// Artificial box used to detect unboundedness: the LP is unbounded iff
/// doubling the box improves the optimum.
const BOX: f64 = 1e6;

struct Constraint {
    a: Vec<f64>,
    rhs: f64,
    /// Equalities must be active at every candidate vertex.
    equality: bool,
    kind: Kind,
}

#[derive(Clone, Copy)]
enum Kind {
    Eq(usize),
    Ub(usize),
    Lower(usize),
    Upper(usize),
    Box,
}

/// Solves `a x = b` (n × n) by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

type Vertex = (f64, Vec<f64>, Vec<usize>);

fn build_constraints(problem: &LpProblem, box_size: f64) -> Vec<Constraint> {
    let n = problem.num_vars();
    let dense = |coeffs: &[(usize, f64)]| {
        let mut a = vec![0.0; n];
        for &(j, v) in coeffs {
            a[j] += v;
        }
        a
    };
    let mut cons = Vec::new();
    for (i, r) in problem.eq_rows.iter().enumerate() {
        cons.push(Constraint { a: dense(&r.coeffs), rhs: r.rhs, equality: true, kind: Kind::Eq(i) });
    }
    for (i, r) in problem.ub_rows.iter().enumerate() {
        cons.push(Constraint { a: dense(&r.coeffs), rhs: r.rhs, equality: false, kind: Kind::Ub(i) });
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        // Written as ≤ rows: -x ≤ -l and x ≤ u.
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        if problem.lower[j].is_finite() {
            cons.push(Constraint { a: neg, rhs: -problem.lower[j], equality: false, kind: Kind::Lower(j) });
        } else {
            cons.push(Constraint { a: neg, rhs: box_size, equality: false, kind: Kind::Box });
        }
        if problem.upper[j].is_finite() {
            cons.push(Constraint { a: e, rhs: problem.upper[j], equality: false, kind: Kind::Upper(j) });
        } else {
            cons.push(Constraint { a: e, rhs: box_size, equality: false, kind: Kind::Box });
        }
    }
    cons
}

fn best_vertex(problem: &LpProblem, cons: &[Constraint], feas_tol: f64, visited: &mut usize) -> Option<Vertex> {
    let n = problem.num_vars();
    let mut best: Option<Vertex> = None;
    combinations(cons.len(), n, |set| {
        *visited += 1;
        let a: Vec<Vec<f64>> = set.iter().map(|&k| cons[k].a.clone()).collect();
        let b: Vec<f64> = set.iter().map(|&k| cons[k].rhs).collect();
        let Some(x) = solve_dense(a, b) else { return };
        for c in cons {
            let ax: f64 = c.a.iter().zip(&x).map(|(a, v)| a * v).sum();
            let viol = if c.equality { (ax - c.rhs).abs() } else { ax - c.rhs };
            if viol > feas_tol {
                return;
            }
        }
        let obj: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let improves = match &best {
            None => true,
            Some((bo, _, _)) => obj < bo - 1e-12 * (1.0 + bo.abs()),
        };
        if improves {
            best = Some((obj, x, set.to_vec()));
        }
    });
    best
}

/// Enumerates every vertex of the feasible region (intersected with a large
/// box) and returns the best one, with duals from its active set.
pub fn brute_force_solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(LpError::DimensionTooLarge { vars: n, limit: BRUTE_FORCE_MAX_VARS });
    }
    let n_eq = problem.eq_rows.len();
    let cons = build_constraints(problem, BOX);
    let scale = 1.0 + cons.iter().filter(|c| !matches!(c.kind, Kind::Box)).fold(0.0f64, |acc, c| acc.max(c.rhs.abs()));
    let feas_tol = 1e-9 * scale;
    let mut visited = 0usize;

    if n == 0 {
        let stats = SolveStats::default();
        let feasible = cons.iter().all(|c| if c.equality { c.rhs.abs() <= feas_tol } else { c.rhs >= -feas_tol });
        if !feasible {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, stats));
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: vec![],
            eq_duals: vec![0.0; n_eq],
            ub_duals: vec![0.0; problem.ub_rows.len()],
            reduced_costs: vec![],
            objective: problem.offset,
            stats,
        });
    }

    let best = best_vertex(problem, &cons, feas_tol, &mut visited);
    let Some((obj, x, set)) = best else {
        let stats = SolveStats { iterations: visited, ..Default::default() };
        return Ok(LpSolution::non_optimal(LpStatus::Infeasible, stats));
    };
    if set.iter().any(|&k| matches!(cons[k].kind, Kind::Box)) {
        let wider = build_constraints(problem, 2.0 * BOX);
        if let Some((obj2, _, _)) = best_vertex(problem, &wider, feas_tol, &mut visited) {
            if obj2 < obj - 1e-6 * (1.0 + obj.abs()) {
                let stats = SolveStats { iterations: visited, ..Default::default() };
                return Ok(LpSolution::non_optimal(LpStatus::Unbounded, stats));
            }
        }
    }
    let stats = SolveStats { iterations: visited, ..Default::default() };

    // Multipliers: Σ_k w_k a_k = c over the active set.
    let at: Vec<Vec<f64>> = (0..n).map(|j| set.iter().map(|&k| cons[k].a[j]).collect()).collect();
    let w = solve_dense(at, problem.objective.clone()).unwrap_or_else(|| vec![0.0; n]);
    let mut eq_duals = vec![0.0; n_eq];
    let mut ub_duals = vec![0.0; problem.ub_rows.len()];
    let mut reduced = vec![0.0; n];
    for (&k, &wk) in set.iter().zip(&w) {
        match cons[k].kind {
            Kind::Eq(i) => eq_duals[i] += wk,
            Kind::Ub(i) => ub_duals[i] -= wk,
            Kind::Lower(j) => reduced[j] -= wk,
            Kind::Upper(j) => reduced[j] += wk,
            Kind::Box => {}
        }
    }
    let objective = problem.objective_value(&x);
    Ok(LpSolution { status: LpStatus::Optimal, x, eq_duals, ub_duals, reduced_costs: reduced, objective, stats })
}
