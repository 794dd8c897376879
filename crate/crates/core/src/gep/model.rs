use serde::{Deserialize, Serialize};

use super::{aggregate_inputs, Aggregation, GepError, GepSolution, MarginalCostSeries, SystemSpec, TimeSeriesTable};
use crate::lp::{self, LpProblem, LpSolution, LpStatus, SolverOptions, Tag};

pub const BALANCE: &str = "BALANCE";
pub const GENLIM: &str = "GENLIM";
pub const SOC: &str = "SOC";
pub const BUDGET: &str = "BUDGET";

/// Column indices of each decision variable family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub horizon: usize,
    pub weights: Vec<f64>,
    /// `None` for capacity-fixed dispatch models.
    pub x: Option<Vec<usize>>,
    pub p: Vec<Vec<usize>>,
    pub p_c: Vec<Vec<usize>>,
    pub p_d: Vec<Vec<usize>>,
    pub e: Vec<Vec<usize>>,
    pub e_ns: Vec<usize>,
    pub o: Option<Vec<usize>>,
    /// Equality-row index of each balance row.
    pub balance_rows: Vec<usize>,
}

/// An LP together with the layout needed to decode its solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GepModel {
    pub lp: LpProblem,
    pub layout: ModelLayout,
    /// Capacities held fixed (dispatch models only).
    pub x_fixed: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolvedModel {
    pub lp: LpSolution,
    pub solution: GepSolution,
}

impl GepModel {
    /// Solves with the bundled simplex; anything but an optimum is an error.
    pub fn solve(&self, opts: &SolverOptions) -> Result<SolvedModel, GepError> {
        let lp_sol = lp::solve(&self.lp, opts)?;
        if lp_sol.status != LpStatus::Optimal {
            return Err(GepError::NotOptimal(lp_sol.status));
        }
        let solution = self.decode(&lp_sol)?;
        Ok(SolvedModel { lp: lp_sol, solution })
    }

    pub fn decode(&self, sol: &LpSolution) -> Result<GepSolution, GepError> {
        if sol.x.len() != self.lp.num_vars() {
            return Err(GepError::ShapeMismatch(format!(
                "solution has {} values for {} variables",
                sol.x.len(),
                self.lp.num_vars()
            )));
        }
        let l = &self.layout;
        let take = |cols: &Vec<usize>| cols.iter().map(|&j| sol.x[j]).collect::<Vec<f64>>();
        let x = match (&l.x, &self.x_fixed) {
            (Some(cols), _) => take(cols),
            (None, Some(fixed)) => fixed.clone(),
            (None, None) => unreachable!("dispatch model without fixed capacities"),
        };
        Ok(GepSolution {
            x,
            p: l.p.iter().map(take).collect(),
            p_c: l.p_c.iter().map(take).collect(),
            p_d: l.p_d.iter().map(take).collect(),
            e: l.e.iter().map(take).collect(),
            e_ns: take(&l.e_ns),
            o: l.o.as_ref().map(take).unwrap_or_else(|| vec![0.0; l.horizon]),
            objective: sol.objective,
        })
    }

    /// Balance duals divided by the representative weights, i.e. money per
    /// MWh of one original step.
    pub fn marginal_costs(&self, sol: &LpSolution) -> Result<MarginalCostSeries, GepError> {
        let raw = extract_marginal_costs(&self.lp, sol)?;
        Ok(MarginalCostSeries { values: raw.values.iter().zip(&self.layout.weights).map(|(v, w)| v / w).collect() })
    }
}

/// Duals of the `BALANCE(r)` rows in index order: the change of the optimal
/// objective per unit increase of the row's demand.
pub fn extract_marginal_costs(problem: &LpProblem, sol: &LpSolution) -> Result<MarginalCostSeries, GepError> {
    if sol.status != LpStatus::Optimal {
        return Err(GepError::NotOptimal(sol.status));
    }
    if sol.eq_duals.len() != problem.eq_rows.len() {
        return Err(GepError::ShapeMismatch("dual vector does not match the equality rows".into()));
    }
    let mut rows: Vec<(usize, f64)> = problem
        .eq_rows
        .iter()
        .zip(&sol.eq_duals)
        .filter(|(r, _)| r.tag.is(BALANCE))
        .map(|(r, &y)| (r.tag.index.first().copied().unwrap_or(0), y))
        .collect();
    if rows.is_empty() {
        return Err(GepError::MissingTag(BALANCE.into()));
    }
    rows.sort_by_key(|r| r.0);
    Ok(MarginalCostSeries { values: rows.into_iter().map(|r| r.1).collect() })
}

/// Shared builder: `weights` are the representative multiplicities (all 1
/// for the full-scale model); `x_fixed` turns capacities into constants.
fn build(spec: &SystemSpec, ts: &TimeSeriesTable, weights: &[f64], x_fixed: Option<&[f64]>) -> GepModel {
    let h = ts.horizon();
    let ng = spec.generators.len();
    let ns = spec.storages.len();
    let dt = spec.delta;
    let inf = f64::INFINITY;
    let mut lp = LpProblem::new();

    let x = match x_fixed {
        Some(_) => None,
        None => Some(
            (0..ng).map(|g| lp.add_var(Tag::new("x", &[g]), spec.generators[g].c_inv, 0.0, inf)).collect::<Vec<_>>(),
        ),
    };
    let p: Vec<Vec<usize>> = (0..ng)
        .map(|g| {
            let gen = &spec.generators[g];
            (0..h)
                .map(|r| {
                    let ub = match x_fixed {
                        Some(xf) => ts.capacity_factors[g][r] * xf[g],
                        None => inf,
                    };
                    lp.add_var(Tag::new("p", &[g, r]), weights[r] * dt * gen.c_op, 0.0, ub)
                })
                .collect()
        })
        .collect();
    let p_c: Vec<Vec<usize>> = (0..ns)
        .map(|s| (0..h).map(|r| lp.add_var(Tag::new("p_c", &[s, r]), 0.0, 0.0, spec.storages[s].p_c_max)).collect())
        .collect();
    let p_d: Vec<Vec<usize>> = (0..ns)
        .map(|s| {
            let st = &spec.storages[s];
            (0..h).map(|r| lp.add_var(Tag::new("p_d", &[s, r]), weights[r] * dt * st.c_d, 0.0, st.p_d_max)).collect()
        })
        .collect();
    let e: Vec<Vec<usize>> = (0..ns)
        .map(|s| {
            let st = &spec.storages[s];
            (0..=h)
                .map(|r| {
                    // Cyclic boundary: initial and final state pinned to E_min.
                    let ub = if r == 0 || r == h { st.e_min } else { st.e_max };
                    lp.add_var(Tag::new("e", &[s, r]), 0.0, st.e_min, ub)
                })
                .collect()
        })
        .collect();
    let e_ns: Vec<usize> =
        (0..h).map(|r| lp.add_var(Tag::new("e_ns", &[r]), weights[r] * spec.c_ns, 0.0, inf)).collect();
    let o = spec.market_participation.then(|| {
        (0..h).map(|r| lp.add_var(Tag::new("o", &[r]), -weights[r] * ts.price[r], 0.0, inf)).collect::<Vec<_>>()
    });

    let mut balance_rows = Vec::with_capacity(h);
    for r in 0..h {
        let mut coeffs: Vec<(usize, f64)> = (0..ng).map(|g| (p[g][r], dt)).collect();
        for s in 0..ns {
            coeffs.push((p_d[s][r], dt));
            coeffs.push((p_c[s][r], -dt));
        }
        coeffs.push((e_ns[r], 1.0));
        if let Some(o) = &o {
            coeffs.push((o[r], -1.0));
        }
        balance_rows.push(lp.add_eq(Tag::new(BALANCE, &[r]), coeffs, ts.demand[r]));
    }
    for s in 0..ns {
        let st = &spec.storages[s];
        for r in 0..h {
            let k = dt * weights[r];
            lp.add_eq(
                Tag::new(SOC, &[s, r]),
                vec![(e[s][r + 1], 1.0), (e[s][r], -1.0), (p_c[s][r], -st.eta_c * k), (p_d[s][r], k / st.eta_d)],
                0.0,
            );
        }
    }
    match (&x, x_fixed) {
        (Some(x), _) => {
            for g in 0..ng {
                for r in 0..h {
                    lp.add_ub(Tag::new(GENLIM, &[g, r]), vec![(p[g][r], 1.0), (x[g], -ts.capacity_factors[g][r])], 0.0);
                }
            }
            lp.add_ub(Tag::new(BUDGET, &[]), (0..ng).map(|g| (x[g], spec.generators[g].c_inv)).collect(), spec.budget);
        }
        (None, Some(xf)) => {
            lp.offset = (0..ng).map(|g| spec.generators[g].c_inv * xf[g]).sum();
        }
        (None, None) => unreachable!(),
    }

    GepModel {
        lp,
        layout: ModelLayout { horizon: h, weights: weights.to_vec(), x, p, p_c, p_d, e, e_ns, o, balance_rows },
        x_fixed: x_fixed.map(<[f64]>::to_vec),
    }
}

pub fn build_full_model(spec: &SystemSpec, ts: &TimeSeriesTable) -> Result<GepModel, GepError> {
    ts.check_against(spec)?;
    Ok(build(spec, ts, &vec![1.0; ts.horizon()], None))
}

/// Aggregated model over representative steps. `ts_hat` must already be
/// aggregated (see [`aggregate_inputs`]).
pub fn build_aggregated_model(
    spec: &SystemSpec,
    ts_hat: &TimeSeriesTable,
    agg: &Aggregation,
) -> Result<GepModel, GepError> {
    ts_hat.check_against(spec)?;
    if ts_hat.horizon() != agg.len() {
        return Err(GepError::InvalidAggregation(format!(
            "aggregated series has {} steps but the aggregation has {} groups",
            ts_hat.horizon(),
            agg.len()
        )));
    }
    Ok(build(spec, ts_hat, &agg.weights(), None))
}

/// Convenience: aggregate the inputs and build in one go.
pub fn build_aggregated_from_full(
    spec: &SystemSpec,
    ts: &TimeSeriesTable,
    agg: &Aggregation,
) -> Result<GepModel, GepError> {
    let ts_hat = aggregate_inputs(ts, agg)?;
    build_aggregated_model(spec, &ts_hat, agg)
}

/// Full-horizon operation with capacities held at `x_fixed`; the investment
/// cost is carried as the LP's constant offset.
pub fn build_dispatch_model(spec: &SystemSpec, ts: &TimeSeriesTable, x_fixed: &[f64]) -> Result<GepModel, GepError> {
    ts.check_against(spec)?;
    if x_fixed.len() != spec.generators.len() {
        return Err(GepError::ShapeMismatch(format!(
            "{} fixed capacities for {} generators",
            x_fixed.len(),
            spec.generators.len()
        )));
    }
    if let Some(g) = x_fixed.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(GepError::ShapeMismatch(format!("fixed capacity of generator {g} is negative")));
    }
    let cost: f64 = spec.generators.iter().zip(x_fixed).map(|(g, x)| g.c_inv * x).sum();
    if cost > spec.budget + 1e-9 * (1.0 + spec.budget) {
        return Err(GepError::BudgetViolated { cost, budget: spec.budget });
    }
    Ok(build(spec, ts, &vec![1.0; ts.horizon()], Some(x_fixed)))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{evaluate_aggregated_objective, evaluate_full_objective};
    use super::*;
    use crate::lp::check_kkt;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn row_and_column_counts() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![]);
        let ts = series(vec![vec![1.0, 1.0]], vec![10.0, 20.0]);
        let m = build_full_model(&s, &ts).unwrap();
        assert_eq!(m.lp.num_vars(), 5);
        assert_eq!(m.lp.eq_rows.len(), 2);
        assert_eq!(m.lp.ub_rows.len(), 3);
        assert_eq!(m.lp.ub_rows.iter().filter(|r| r.tag.is(GENLIM)).count(), 2);
        assert_eq!(m.lp.ub_rows.iter().filter(|r| r.tag.is(BUDGET)).count(), 1);
    }

    #[test]
    fn single_step_storage_round_trip() {
        let s = spec(vec![thermal(130.0, 0.0)], vec![battery(4.0)]);
        let ts = series(vec![vec![1.0]], vec![10.0]);
        let m = build_full_model(&s, &ts).unwrap();
        let sol = m.solve(&opts()).unwrap().solution;
        assert_eq!(sol.e[0], vec![0.0, 0.0]);
        let lhs = 0.9 * sol.p_c[0][0];
        let rhs = sol.p_d[0][0] / 0.9;
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_serves_demand_with_ns() {
        let mut s = spec(vec![thermal(130.0, 1e5)], vec![]);
        s.budget = 0.0;
        let ts = series(vec![vec![1.0; 3]], vec![10.0, 0.0, 5.0]);
        let solved = build_full_model(&s, &ts).unwrap().solve(&opts()).unwrap();
        assert!(solved.solution.x[0].abs() < 1e-12);
        assert!((solved.lp.objective - 5000.0 * 15.0).abs() < 1e-6);
    }

    #[test]
    fn identity_aggregation_reproduces_full_model() {
        let s = spec(vec![thermal(130.0, 1e5), pv(1.0, 8e4)], vec![battery(4.0)]);
        let ts = series(vec![vec![1.0; 3], vec![0.0, 0.7, 0.3]], vec![10.0, 12.0, 8.0]);
        let full = build_full_model(&s, &ts).unwrap();
        let agg = Aggregation::identity(3);
        let ts_hat = aggregate_inputs(&ts, &agg).unwrap();
        let aggm = build_aggregated_model(&s, &ts_hat, &agg).unwrap();
        assert_eq!(full.lp, aggm.lp);
    }

    #[test]
    fn weight_scales_operational_cost() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![battery(4.0)]);
        let ts = series(vec![vec![1.0; 3]], vec![5.0; 3]);
        let agg = Aggregation::new(3, vec![vec![0, 1, 2]]).unwrap();
        let m = build_aggregated_from_full(&s, &ts, &agg).unwrap();
        let j = m.layout.p[0][0];
        assert_eq!(m.lp.objective[j], 3.0 * 1.0 * 130.0);
    }

    #[test]
    fn soc_increment_uses_weight() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![battery(4.0)]);
        let ts = series(vec![vec![1.0; 2]], vec![5.0; 2]);
        let agg = Aggregation::new(2, vec![vec![0, 1]]).unwrap();
        let m = build_aggregated_from_full(&s, &ts, &agg).unwrap();
        let row = m.lp.eq_rows.iter().find(|r| r.tag == Tag::new(SOC, &[0, 0])).unwrap();
        let pc = m.layout.p_c[0][0];
        let coeff = row.coeffs.iter().find(|c| c.0 == pc).unwrap().1;
        // e_1 - e_0 = 0.9 * 1 * 2 * p_c  → increment 1.8 MWh per MW charged.
        assert!((-coeff - 1.8).abs() < 1e-15);
    }

    #[test]
    fn dispatch_at_optimum_matches() {
        let s = spec(vec![thermal(130.0, 1e3), pv(1.0, 8e2)], vec![battery(4.0)]);
        let ts =
            series(vec![vec![1.0; 6], vec![0.0, 0.2, 0.8, 0.9, 0.3, 0.0]], vec![40.0, 50.0, 60.0, 55.0, 45.0, 42.0]);
        let full = build_full_model(&s, &ts).unwrap().solve(&opts()).unwrap();
        let disp = build_dispatch_model(&s, &ts, &full.solution.x).unwrap().solve(&opts()).unwrap();
        assert!((disp.lp.objective - full.lp.objective).abs() <= 1e-7 * full.lp.objective.abs());
        // Restricting to zero capacity can only cost more.
        let zero = build_dispatch_model(&s, &ts, &[0.0, 0.0]).unwrap().solve(&opts()).unwrap();
        assert!(zero.lp.objective >= full.lp.objective);
    }

    #[test]
    fn dispatch_zero_capacity_is_all_ns() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![]);
        let ts = series(vec![vec![1.0; 3]], vec![10.0, 20.0, 5.0]);
        let d = build_dispatch_model(&s, &ts, &[0.0]).unwrap().solve(&opts()).unwrap();
        assert!((d.lp.objective - 5000.0 * 35.0).abs() < 1e-6);
    }

    #[test]
    fn dispatch_over_budget() {
        let mut s = spec(vec![thermal(130.0, 1e5)], vec![]);
        s.budget = 1e6;
        let ts = series(vec![vec![1.0; 2]], vec![1.0, 1.0]);
        assert!(matches!(build_dispatch_model(&s, &ts, &[11.0]), Err(GepError::BudgetViolated { .. })));
    }

    #[test]
    fn marginal_cost_of_cheap_generation() {
        // Capacity is set by step 0; steps 1, 2 have slack so their dual is C_g.
        let s = spec(vec![thermal(130.0, 1e3)], vec![]);
        let ts = series(vec![vec![1.0; 3]], vec![50.0, 20.0, 30.0]);
        let m = build_full_model(&s, &ts).unwrap();
        let solved = m.solve(&opts()).unwrap();
        let mu = extract_marginal_costs(&m.lp, &solved.lp).unwrap();
        assert!((mu.values[1] - 130.0).abs() < 1e-9);
        assert!((mu.values[2] - 130.0).abs() < 1e-9);
        assert!((mu.values[0] - 1130.0).abs() < 1e-9);
    }

    #[test]
    fn marginal_cost_with_unserved_energy() {
        let mut s = spec(vec![thermal(130.0, 1e5)], vec![]);
        s.budget = 1e6; // 10 MW at most
        let ts = series(vec![vec![1.0; 2]], vec![15.0, 5.0]);
        let m = build_full_model(&s, &ts).unwrap();
        let solved = m.solve(&opts()).unwrap();
        assert!(solved.solution.e_ns[0] > 1.0);
        let mu = m.marginal_costs(&solved.lp).unwrap();
        assert!((mu.values[0] - 5000.0).abs() < 1e-9);
        assert!(check_kkt(&m.lp, &solved.lp).within(1e-6));
    }

    #[test]
    fn missing_balance_tags() {
        let mut p = LpProblem::new();
        p.add_var(Tag::new("x", &[]), 1.0, 0.0, 1.0);
        let sol = lp::solve(&p, &opts()).unwrap();
        assert_eq!(extract_marginal_costs(&p, &sol), Err(GepError::MissingTag(BALANCE.into())));
    }

    #[test]
    fn solver_objective_matches_formula() {
        let mut s = spec(vec![thermal(130.0, 1e3), pv(2.5, 8e2)], vec![battery(4.0)]);
        s.market_participation = true;
        let mut ts = series(vec![vec![1.0; 5], vec![0.1, 0.5, 0.9, 0.4, 0.0]], vec![30.0, 35.0, 20.0, 40.0, 45.0]);
        ts.price = vec![40.0, 10.0, 5.0, 90.0, 150.0];
        let full = build_full_model(&s, &ts).unwrap();
        let solved = full.solve(&opts()).unwrap();
        let f = evaluate_full_objective(&s, &ts, &solved.solution).unwrap();
        assert!((f - solved.lp.objective).abs() <= 1e-9 * f.abs());

        let agg = Aggregation::from_block_lengths(&[2, 3]).unwrap();
        let ts_hat = aggregate_inputs(&ts, &agg).unwrap();
        let am = build_aggregated_model(&s, &ts_hat, &agg).unwrap();
        let asol = am.solve(&opts()).unwrap();
        let fa = evaluate_aggregated_objective(&s, &ts_hat, &agg, &asol.solution).unwrap();
        assert!((fa - asol.lp.objective).abs() <= 1e-9 * fa.abs());
    }
}
