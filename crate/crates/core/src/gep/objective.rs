use super::{Aggregation, GepError, GepSolution, SystemSpec, TimeSeriesTable};

fn check_shape(spec: &SystemSpec, h: usize, sol: &GepSolution) -> Result<(), GepError> {
    let ng = spec.generators.len();
    let ns = spec.storages.len();
    let ok = sol.x.len() == ng
        && sol.p.len() == ng
        && sol.p.iter().all(|v| v.len() == h)
        && sol.p_d.len() == ns
        && sol.p_d.iter().all(|v| v.len() == h)
        && sol.p_c.len() == ns
        && sol.p_c.iter().all(|v| v.len() == h)
        && sol.e_ns.len() == h
        && sol.o.len() == h;
    if ok {
        Ok(())
    } else {
        Err(GepError::ShapeMismatch(format!("solution does not match {ng} generators, {ns} storages and {h} steps")))
    }
}

fn weighted_objective(spec: &SystemSpec, ts: &TimeSeriesTable, weights: &[f64], sol: &GepSolution) -> f64 {
    let dt = spec.delta;
    let inv: f64 = spec.generators.iter().zip(&sol.x).map(|(g, x)| g.c_inv * x).sum();
    let mut ops = 0.0;
    for (r, &w) in weights.iter().enumerate() {
        let mut step = 0.0;
        for (g, gen) in spec.generators.iter().enumerate() {
            step += dt * gen.c_op * sol.p[g][r];
        }
        for (s, st) in spec.storages.iter().enumerate() {
            step += dt * st.c_d * sol.p_d[s][r];
        }
        step += spec.c_ns * sol.e_ns[r];
        if spec.market_participation {
            step -= ts.price[r] * sol.o[r];
        }
        ops += w * step;
    }
    inv + ops
}

/// Full-scale objective: investment plus operating cost of every step.
pub fn evaluate_full_objective(spec: &SystemSpec, ts: &TimeSeriesTable, sol: &GepSolution) -> Result<f64, GepError> {
    check_shape(spec, ts.horizon(), sol)?;
    Ok(weighted_objective(spec, ts, &vec![1.0; ts.horizon()], sol))
}

/// Aggregated objective: operating terms multiplied by the group weights.
pub fn evaluate_aggregated_objective(
    spec: &SystemSpec,
    ts_hat: &TimeSeriesTable,
    agg: &Aggregation,
    sol: &GepSolution,
) -> Result<f64, GepError> {
    if ts_hat.horizon() != agg.len() {
        return Err(GepError::ShapeMismatch(format!("{} aggregated steps for {} groups", ts_hat.horizon(), agg.len())));
    }
    check_shape(spec, agg.len(), sol)?;
    Ok(weighted_objective(spec, ts_hat, &agg.weights(), sol))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn zero_solution_costs_nothing() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![battery(4.0)]);
        let ts = series(vec![vec![1.0; 4]], vec![1.0; 4]);
        let z = GepSolution::zeros(&s, 4);
        assert_eq!(evaluate_full_objective(&s, &ts, &z).unwrap(), 0.0);
    }

    #[test]
    fn weighted_single_step() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![]);
        let ts_hat = series(vec![vec![1.0]], vec![5.0]);
        let agg = Aggregation::new(2, vec![vec![0, 1]]).unwrap();
        let mut sol = GepSolution::zeros(&s, 1);
        sol.x[0] = 10.0;
        sol.p[0][0] = 5.0;
        let f = evaluate_aggregated_objective(&s, &ts_hat, &agg, &sol).unwrap();
        assert_eq!(f, 1_001_300.0);
    }

    #[test]
    fn shape_mismatch() {
        let s = spec(vec![thermal(130.0, 1e5)], vec![]);
        let ts = series(vec![vec![1.0; 4]], vec![1.0; 4]);
        let z = GepSolution::zeros(&s, 3);
        assert!(matches!(evaluate_full_objective(&s, &ts, &z), Err(GepError::ShapeMismatch(_))));
    }
}
