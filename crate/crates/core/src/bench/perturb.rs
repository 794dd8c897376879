use rand::Rng;

use super::{factor_column, BenchError};
use crate::gep::{SystemSpec, TimeSeriesTable};
use crate::seed::{derive_seed, rng};

/// Multiplies every cell of the selected columns by an i.i.d. factor drawn
/// uniformly from `[lo, hi]`, then re-clips capacity factors to `[0, 1]`
/// (and prices below `c_ns` when market participation is on).
///
/// Column names follow the CSV schema: `F_<gen>`, `D`, `price`.
pub fn perturb(
    ts: &TimeSeriesTable,
    spec: &SystemSpec,
    columns: &[String],
    interval: (f64, f64),
    seed: u64,
) -> Result<TimeSeriesTable, BenchError> {
    let (lo, hi) = interval;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(BenchError::Invalid(format!("noise interval [{lo}, {hi}] must satisfy 0 < lo <= hi")));
    }
    let mut out = ts.clone();
    for name in columns {
        let index = spec.generators.iter().position(|g| factor_column(&g.name) == *name);
        let (stream, cells, clip): (u64, &mut Vec<f64>, (f64, f64)) = match (index, name.as_str()) {
            (Some(g), _) => (10 + g as u64, &mut out.capacity_factors[g], (0.0, 1.0)),
            (None, "D") => (1, &mut out.demand, (0.0, f64::INFINITY)),
            (None, "price") => {
                let cap = if spec.market_participation { spec.c_ns * (1.0 - 1e-9) } else { f64::INFINITY };
                (2, &mut out.price, (f64::NEG_INFINITY, cap))
            }
            _ => return Err(BenchError::Invalid(format!("unknown column {name:?}"))),
        };
        let mut r = rng(derive_seed(seed, stream));
        for v in cells.iter_mut() {
            let factor = if lo == hi { lo } else { r.random_range(lo..=hi) };
            *v = (*v * factor).clamp(clip.0, clip.1);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::fixtures::*;

    fn inputs() -> (SystemSpec, TimeSeriesTable) {
        let s = spec(vec![thermal(130.0, 1e5), pv(1.0, 8e4)], vec![]);
        let ts = series(vec![vec![1.0; 5], vec![0.0, 0.2, 0.5, 0.9, 1.0]], vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        (s, ts)
    }

    #[test]
    fn unit_interval_is_identity() {
        let (s, ts) = inputs();
        let cols = vec!["F_pv".to_string(), "D".to_string()];
        assert_eq!(perturb(&ts, &s, &cols, (1.0, 1.0), 5).unwrap(), ts);
    }

    #[test]
    fn factors_within_interval_and_clipped() {
        let (s, ts) = inputs();
        let out = perturb(&ts, &s, &["F_pv".into(), "D".into()], (0.8, 1.2), 5).unwrap();
        for (a, b) in ts.demand.iter().zip(&out.demand) {
            assert!(*b >= 0.8 * a - 1e-12 && *b <= 1.2 * a + 1e-12);
        }
        for (a, b) in ts.capacity_factors[1].iter().zip(&out.capacity_factors[1]) {
            assert!(*b <= 1.0 && *b >= 0.8 * a - 1e-12 && *b <= (1.2 * a).min(1.0) + 1e-12);
        }
        assert_eq!(out.capacity_factors[0], ts.capacity_factors[0]);
    }

    #[test]
    fn scenarios_differ() {
        let (s, ts) = inputs();
        let cols = vec!["D".to_string()];
        let a = perturb(&ts, &s, &cols, (0.8, 1.2), 1).unwrap();
        let b = perturb(&ts, &s, &cols, (0.8, 1.2), 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.horizon(), b.horizon());
        assert_eq!(a, perturb(&ts, &s, &cols, (0.8, 1.2), 1).unwrap());
    }

    #[test]
    fn rejects_unknown_column_and_bad_interval() {
        let (s, ts) = inputs();
        assert!(perturb(&ts, &s, &["F_wind".into()], (0.8, 1.2), 1).is_err());
        assert!(perturb(&ts, &s, &["D".into()], (1.2, 0.8), 1).is_err());
        assert!(perturb(&ts, &s, &["D".into()], (0.0, 0.8), 1).is_err());
    }
}
