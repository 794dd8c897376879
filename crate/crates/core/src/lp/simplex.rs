//! Bundled two-phase bounded-variable revised simplex.
//!
//! Every row gets a logical column (`[0, 0]` for equalities, `[0, ∞)` for
//! `≤` rows). Rows whose logical cannot absorb the initial residual get an
//! artificial column; phase 1 minimises their sum. Pricing is Dantzig on the
//! scaled problem, the ratio test is Harris' two-pass variant, and Bland's
//! rule takes over after a run of degenerate pivots.

use super::lu::BasisFactor;
use super::{Capabilities, LpError, LpProblem, LpSolution, LpStatus, SolveStats, SolverBackend, SolverOptions};

const NIL: usize = usize::MAX;

/// The bundled solver backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimplexSolver;

impl SolverBackend for SimplexSolver {
    fn name(&self) -> &str {
        "bundled-simplex"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { returns_duals: true }
    }

    fn solve(&self, problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
        problem.validate()?;
        let mut s = Simplex::new(problem, opts);
        s.run()
    }
}

struct Simplex<'a> {
    problem: &'a LpProblem,
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    // Scaled structural columns, CSC.
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
    // Basis state.
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    x: Vec<f64>,
    factor: Option<BasisFactor>,
    stats: SolveStats,
    max_iter: usize,
    // Scratch.
    y: Vec<f64>,
    alpha: Vec<f64>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

fn pow2_round(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        1.0
    } else {
        2f64.powi(v.log2().round() as i32)
    }
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem, opts: &'a SolverOptions) -> Self {
        let n = problem.num_vars();
        let meq = problem.eq_rows.len();
        let m = meq + problem.ub_rows.len();
        let rows: Vec<&super::Row> = problem.eq_rows.iter().chain(&problem.ub_rows).collect();

        // Geometric scaling in powers of two.
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        if opts.scale {
            for _ in 0..6 {
                for (i, row) in rows.iter().enumerate() {
                    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                    for &(j, a) in &row.coeffs {
                        let v = (a * col_scale[j]).abs();
                        if v > 0.0 {
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    if hi > 0.0 {
                        row_scale[i] = pow2_round(1.0 / (lo * hi).sqrt());
                    }
                }
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![0.0f64; n];
                for (i, row) in rows.iter().enumerate() {
                    for &(j, a) in &row.coeffs {
                        let v = (a * row_scale[i]).abs();
                        if v > 0.0 {
                            lo[j] = lo[j].min(v);
                            hi[j] = hi[j].max(v);
                        }
                    }
                }
                for j in 0..n {
                    if hi[j] > 0.0 {
                        col_scale[j] = pow2_round(1.0 / (lo[j] * hi[j]).sqrt());
                    }
                }
            }
        }

        let mut counts = vec![0usize; n + 1];
        for row in &rows {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fillp = counts;
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        // Merge duplicate (row, column) entries by summing.
        let mut last_seen: Vec<usize> = vec![NIL; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                let v = a * row_scale[i] * col_scale[j];
                if last_seen[j] != NIL && col_row[last_seen[j]] == i {
                    col_val[last_seen[j]] += v;
                    continue;
                }
                let k = fillp[j];
                col_row[k] = i;
                col_val[k] = v;
                last_seen[j] = k;
                fillp[j] += 1;
            }
        }
        // Compact in case of merged duplicates.
        let (col_start, col_row, col_val) = {
            let mut cs = vec![0usize; n + 1];
            let mut cr = Vec::with_capacity(nnz);
            let mut cv = Vec::with_capacity(nnz);
            for j in 0..n {
                for k in col_start[j]..fillp[j] {
                    cr.push(col_row[k]);
                    cv.push(col_val[k]);
                }
                cs[j + 1] = cr.len();
            }
            (cs, cr, cv)
        };

        let mut cost: Vec<f64> = (0..n).map(|j| problem.objective[j] * col_scale[j]).collect();
        // Normalise by the geometric midpoint of the cost range so neither
        // end falls below the pricing tolerance.
        let (cmin, cmax) = cost
            .iter()
            .filter(|c| **c != 0.0)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.abs()), hi.max(c.abs())));
        let cost_scale = if cmax == 0.0 { 1.0 } else { pow2_round((cmin * cmax).sqrt()) };
        for c in cost.iter_mut() {
            *c /= cost_scale;
        }
        cost.extend(std::iter::repeat_n(0.0, m));

        let mut lower: Vec<f64> = (0..n).map(|j| problem.lower[j] / col_scale[j]).collect();
        let mut upper: Vec<f64> = (0..n).map(|j| problem.upper[j] / col_scale[j]).collect();
        for i in 0..m {
            lower.push(0.0);
            upper.push(if i < meq { 0.0 } else { f64::INFINITY });
        }
        let b: Vec<f64> = rows.iter().enumerate().map(|(i, r)| r.rhs * row_scale[i]).collect();

        let max_iter = opts.max_iterations.unwrap_or(20 * (m + n) + 10_000);

        Simplex {
            problem,
            opts,
            m,
            n,
            col_start,
            col_row,
            col_val,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lower,
            upper,
            cost,
            b,
            row_scale,
            col_scale,
            cost_scale,
            basis: Vec::new(),
            pos_of: Vec::new(),
            x: Vec::new(),
            factor: None,
            stats: SolveStats::default(),
            max_iter,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    fn total(&self) -> usize {
        self.n + self.m + self.art_row.len()
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let a = j - self.n - self.m;
            f(self.art_row[a], self.art_sign[a]);
        }
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else if j < self.n + self.m {
            y[j - self.n]
        } else {
            let a = j - self.n - self.m;
            self.art_sign[a] * y[self.art_row[a]]
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        self.for_col(j, |i, a| v.push((i, a)));
        v
    }

    fn initial_value(l: f64, u: f64) -> f64 {
        if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    /// Crash basis of logicals, artificials where needed.
    fn init_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.x = (0..n + m).map(|j| Self::initial_value(self.lower[j], self.upper[j])).collect();
        let mut r = self.b.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    r[self.col_row[k]] -= self.col_val[k] * xj;
                }
            }
        }
        self.basis = vec![NIL; m];
        for i in 0..m {
            let lj = n + i;
            let tol = self.opts.feasibility_tol;
            if r[i] >= self.lower[lj] - tol && r[i] <= self.upper[lj] + tol {
                self.basis[i] = lj;
                self.x[lj] = r[i];
            } else {
                self.x[lj] = 0.0;
                let sign = if r[i] > 0.0 { 1.0 } else { -1.0 };
                self.art_row.push(i);
                self.art_sign.push(sign);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.cost.push(0.0);
                self.x.push(r[i].abs());
                self.basis[i] = n + m + self.art_row.len() - 1;
            }
        }
        self.pos_of = vec![NIL; self.total()];
        for (p, &j) in self.basis.iter().enumerate() {
            self.pos_of[j] = p;
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        self.stats.refactorizations += 1;
        for _attempt in 0..3 {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
            match BasisFactor::new(self.m, &cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    self.recompute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    // Swap dependent columns for logicals of uncovered rows.
                    for (&p, &row) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.basis[p];
                        self.pos_of[old] = NIL;
                        let (l, u) = (self.lower[old], self.upper[old]);
                        let v = self.x[old];
                        self.x[old] = if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
                            l
                        } else if u.is_finite() {
                            u
                        } else {
                            0.0
                        };
                        let lj = self.n + row;
                        if self.pos_of[lj] != NIL {
                            return Err(LpError::NumericalFailure("singular basis could not be repaired".into()));
                        }
                        self.basis[p] = lj;
                        self.pos_of[lj] = p;
                    }
                }
            }
        }
        Err(LpError::NumericalFailure("repeatedly singular basis".into()))
    }

    fn recompute_basic_values(&mut self) {
        let mut r = self.b.clone();
        for j in 0..self.total() {
            if self.pos_of[j] == NIL {
                let xj = self.x[j];
                if xj != 0.0 {
                    if j < self.n {
                        for k in self.col_start[j]..self.col_start[j + 1] {
                            r[self.col_row[k]] -= self.col_val[k] * xj;
                        }
                    } else if j < self.n + self.m {
                        r[j - self.n] -= xj;
                    } else {
                        let a = j - self.n - self.m;
                        r[self.art_row[a]] -= self.art_sign[a] * xj;
                    }
                }
            }
        }
        self.factor.as_mut().unwrap().ftran(&mut r);
        for p in 0..self.m {
            self.x[self.basis[p]] = r[p];
        }
    }

    fn compute_duals(&mut self, costs: &[f64]) {
        let mut y = std::mem::take(&mut self.y);
        for p in 0..self.m {
            y[p] = costs[self.basis[p]];
        }
        self.factor.as_mut().unwrap().btran(&mut y);
        self.y = y;
    }

    fn run_phase(&mut self, costs: &[f64], phase1: bool) -> Result<PhaseEnd, LpError> {
        let tol_d = self.opts.optimality_tol;
        let tol_p = self.opts.feasibility_tol;
        let piv_tol = self.opts.pivot_tol;
        let mut degenerate_run = 0usize;
        loop {
            if self.stats.iterations >= self.max_iter {
                return Err(LpError::IterationLimit(self.stats.iterations));
            }
            let needs_refactor = match &self.factor {
                None => true,
                Some(f) => {
                    f.num_updates() >= self.opts.refactor_every
                        || f.fill() > 4 * (self.m + 2 * self.col_row.len()) + 1000
                }
            };
            if needs_refactor {
                self.refactor()?;
            }
            self.compute_duals(costs);
            let bland = degenerate_run >= self.opts.bland_after;

            // Pricing.
            let mut entering = NIL;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..self.total() {
                if self.pos_of[j] != NIL {
                    continue;
                }
                let (l, u) = (self.lower[j], self.upper[j]);
                if l == u {
                    continue;
                }
                let d = costs[j] - self.dot_col(j, &self.y);
                let xj = self.x[j];
                let can_up = xj < u;
                let can_down = xj > l;
                let (score, dj) = if d < -tol_d && can_up {
                    (-d, 1.0)
                } else if d > tol_d && can_down {
                    (d, -1.0)
                } else {
                    continue;
                };
                if bland {
                    entering = j;
                    dir = dj;
                    break;
                }
                if score > best {
                    best = score;
                    entering = j;
                    dir = dj;
                }
            }
            if entering == NIL {
                return Ok(PhaseEnd::Optimal);
            }

            // Column of the entering variable in terms of the basis.
            let q = entering;
            let mut alpha = std::mem::take(&mut self.alpha);
            alpha.iter_mut().for_each(|v| *v = 0.0);
            self.for_col(q, |i, a| alpha[i] += a);
            self.factor.as_mut().unwrap().ftran(&mut alpha);

            // Ratio test. Basic value at position p moves by -dir*alpha[p]*theta.
            let range = self.upper[q] - self.lower[q];
            let mut leave = NIL;
            let mut theta;
            if bland {
                theta = f64::INFINITY;
                for p in 0..self.m {
                    let rate = -dir * alpha[p];
                    let j = self.basis[p];
                    let t = if rate > piv_tol && self.upper[j].is_finite() {
                        (self.upper[j] - self.x[j]) / rate
                    } else if rate < -piv_tol && self.lower[j].is_finite() {
                        (self.x[j] - self.lower[j]) / -rate
                    } else {
                        continue;
                    };
                    let t = t.max(0.0);
                    if t < theta - 1e-12 || (t <= theta + 1e-12 && leave != NIL && j < self.basis[leave]) {
                        theta = t;
                        leave = p;
                    }
                }
                if range <= theta {
                    leave = NIL;
                    theta = range;
                }
            } else {
                let mut theta_max = f64::INFINITY;
                for p in 0..self.m {
                    let rate = -dir * alpha[p];
                    let j = self.basis[p];
                    let t = if rate > piv_tol && self.upper[j].is_finite() {
                        (self.upper[j] + tol_p - self.x[j]) / rate
                    } else if rate < -piv_tol && self.lower[j].is_finite() {
                        (self.x[j] - self.lower[j] + tol_p) / -rate
                    } else {
                        continue;
                    };
                    theta_max = theta_max.min(t);
                }
                if range <= theta_max {
                    theta = range;
                } else {
                    let mut best_piv = 0.0;
                    theta = f64::INFINITY;
                    for p in 0..self.m {
                        let rate = -dir * alpha[p];
                        let j = self.basis[p];
                        let t = if rate > piv_tol && self.upper[j].is_finite() {
                            (self.upper[j] - self.x[j]) / rate
                        } else if rate < -piv_tol && self.lower[j].is_finite() {
                            (self.x[j] - self.lower[j]) / -rate
                        } else {
                            continue;
                        };
                        if t <= theta_max && alpha[p].abs() > best_piv {
                            best_piv = alpha[p].abs();
                            leave = p;
                            theta = t.max(0.0);
                        }
                    }
                }
            }
            if theta == f64::INFINITY {
                self.alpha = alpha;
                if phase1 {
                    return Err(LpError::NumericalFailure("unbounded direction in phase 1".into()));
                }
                return Ok(PhaseEnd::Unbounded);
            }

            self.stats.iterations += 1;
            if phase1 {
                self.stats.phase1_iterations += 1;
            }
            if theta < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            // Primal update.
            if theta != 0.0 {
                for p in 0..self.m {
                    if alpha[p] != 0.0 {
                        self.x[self.basis[p]] -= dir * theta * alpha[p];
                    }
                }
            }
            if leave == NIL {
                // Bound flip.
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            } else {
                self.x[q] += dir * theta;
                let out = self.basis[leave];
                let rate = -dir * alpha[leave];
                self.x[out] = if rate > 0.0 { self.upper[out] } else { self.lower[out] };
                self.pos_of[out] = NIL;
                self.basis[leave] = q;
                self.pos_of[q] = leave;
                if alpha[leave].abs() < piv_tol {
                    self.factor = None;
                } else {
                    self.factor.as_mut().unwrap().update(leave, &alpha);
                }
            }
            self.alpha = alpha;
        }
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        self.init_basis();
        let n_art = self.art_row.len();
        if n_art > 0 {
            let mut c1 = vec![0.0; self.total()];
            for a in 0..n_art {
                c1[self.n + self.m + a] = 1.0;
            }
            self.run_phase(&c1, true)?;
            // Refresh values before judging feasibility.
            self.refactor()?;
            let infeas: f64 = (0..n_art).map(|a| self.x[self.n + self.m + a]).sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeas > self.opts.feasibility_tol * scale {
                return Ok(LpSolution::non_optimal(LpStatus::Infeasible, self.stats.clone()));
            }
            for a in 0..n_art {
                let j = self.n + self.m + a;
                self.upper[j] = 0.0;
                if self.pos_of[j] == NIL {
                    self.x[j] = 0.0;
                }
            }
        }
        let costs = self.cost.clone();
        let costs: Vec<f64> =
            costs.into_iter().chain(std::iter::repeat_n(0.0, self.art_row.len())).take(self.total()).collect();
        // Each pass ends with a fresh factorisation; stop once pricing on it
        // finds nothing to do.
        loop {
            let before = self.stats.iterations;
            if let PhaseEnd::Unbounded = self.run_phase(&costs, false)? {
                return Ok(LpSolution::non_optimal(LpStatus::Unbounded, self.stats.clone()));
            }
            self.refactor()?;
            if self.stats.iterations == before {
                break;
            }
        }
        self.compute_duals(&costs);
        Ok(self.extract())
    }

    fn extract(&self) -> LpSolution {
        let p = self.problem;
        let meq = p.eq_rows.len();
        let mut x: Vec<f64> = (0..self.n).map(|j| self.x[j] * self.col_scale[j]).collect();
        // Snap values within tolerance of their bounds.
        for j in 0..self.n {
            let (l, u) = (p.lower[j], p.upper[j]);
            let tol = 1e-11 * (1.0 + x[j].abs());
            if (x[j] - l).abs() <= tol {
                x[j] = l;
            } else if (x[j] - u).abs() <= tol {
                x[j] = u;
            }
        }
        let y: Vec<f64> = (0..self.m).map(|i| self.y[i] * self.row_scale[i] * self.cost_scale).collect();
        let eq_duals = y[..meq].to_vec();
        let ub_duals: Vec<f64> = y[meq..].iter().map(|v| -v).collect();
        let mut reduced = p.objective.clone();
        for (i, row) in p.eq_rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced[j] -= a * eq_duals[i];
            }
        }
        for (i, row) in p.ub_rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced[j] += a * ub_duals[i];
            }
        }
        let objective = p.objective_value(&x);
        LpSolution {
            status: LpStatus::Optimal,
            x,
            eq_duals,
            ub_duals,
            reduced_costs: reduced,
            objective,
            stats: self.stats.clone(),
        }
    }
}
