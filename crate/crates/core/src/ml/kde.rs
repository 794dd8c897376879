use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, MlError};
use crate::seed::rng;

/// Gaussian product-kernel density over the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub training: FeatureMatrix,
    /// Per-column bandwidth; zero for constant columns.
    pub bandwidths: Vec<f64>,
}

/// Scott's rule `h_j = σ_j · n^(−1/(d+4))` with the population standard
/// deviation.
pub fn fit_kde(features: &FeatureMatrix) -> Result<KdeModel, MlError> {
    let n = features.num_rows();
    let d = features.num_cols();
    if n < 2 {
        return Err(MlError::EmptyInput(format!("KDE needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(MlError::EmptyInput("KDE needs at least one column".into()));
    }
    let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    let bandwidths = (0..d)
        .map(|j| {
            let col = features.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt() * factor
            } else {
                0.0
            }
        })
        .collect();
    Ok(KdeModel { training: features.clone(), bandwidths })
}

/// Draws `k` rows: a uniformly chosen training row plus per-column Gaussian
/// noise of scale `h_j`, clipped to the column bounds.
pub fn sample_kde(model: &KdeModel, k: usize, seed: u64) -> FeatureMatrix {
    let mut r = rng(seed);
    let n = model.training.num_rows();
    let rows = (0..k)
        .map(|_| {
            let base = &model.training.rows[r.random_range(0..n)];
            base.iter()
                .zip(&model.bandwidths)
                .zip(&model.training.bounds)
                .map(|((&v, &h), &(lo, hi))| {
                    let z: f64 = r.sample(StandardNormal);
                    (v + h * z).clamp(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
                })
                .collect()
        })
        .collect();
    FeatureMatrix { names: model.training.names.clone(), bounds: model.training.bounds.clone(), rows }
}

impl KdeModel {
    /// Density at `point`, ignoring zero-bandwidth columns.
    pub fn density(&self, point: &[f64]) -> f64 {
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let sum: f64 = self
            .training
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(point)
                    .zip(&self.bandwidths)
                    .filter(|(_, &h)| h > 0.0)
                    .map(|((&c, &x), &h)| (-0.5 * ((x - c) / h).powi(2)).exp() / (h * norm))
                    .product::<f64>()
            })
            .sum();
        sum / self.training.num_rows() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[Vec<f64>]) -> FeatureMatrix {
        let n = cols[0].len();
        FeatureMatrix {
            names: (0..cols.len()).map(|j| format!("c{j}")).collect(),
            bounds: vec![(None, None); cols.len()],
            rows: (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
        }
    }

    #[test]
    fn scott_rule_two_points() {
        let m = fit_kde(&matrix(&[vec![0.0, 1.0]])).unwrap();
        let expected = 0.5 * 2f64.powf(-0.2);
        assert!((m.bandwidths[0] - expected).abs() < 1e-15);
        assert!((m.bandwidths[0] - 0.4353).abs() < 1e-4);
    }

    #[test]
    fn constant_column_reproduced() {
        let m = fit_kde(&matrix(&[vec![3.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]])).unwrap();
        assert_eq!(m.bandwidths[0], 0.0);
        let s = sample_kde(&m, 50, 9);
        assert!(s.rows.iter().all(|r| r[0] == 3.0));
    }

    #[test]
    fn zero_bandwidth_samples_training_rows() {
        let m = fit_kde(&matrix(&[vec![1.0, 2.0, 3.0]])).unwrap();
        let m = KdeModel { bandwidths: vec![0.0], ..m };
        let s = sample_kde(&m, 20, 1);
        assert!(s.rows.iter().all(|r| [1.0, 2.0, 3.0].contains(&r[0])));
    }

    #[test]
    fn density_integrates_to_one() {
        let m = fit_kde(&matrix(&[vec![0.0, 0.3, 1.0, 2.5]])).unwrap();
        let h = m.bandwidths[0];
        let (a, b) = (-6.0 * h, 2.5 + 6.0 * h);
        let steps = 20_000;
        let dx = (b - a) / steps as f64;
        let integral: f64 = (0..steps).map(|i| m.density(&[a + (i as f64 + 0.5) * dx]) * dx).sum();
        assert!((integral - 1.0).abs() < 1e-2, "{integral}");
    }

    #[test]
    fn clipping_and_determinism() {
        let mut fm = matrix(&[vec![0.0, 0.05, 0.95, 1.0], vec![0.0, 1.0, 0.0, 2.0]]);
        fm.bounds = vec![(Some(0.0), Some(1.0)), (Some(0.0), None)];
        let m = fit_kde(&fm).unwrap();
        let a = sample_kde(&m, 500, 42);
        assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r[0]) && r[1] >= 0.0));
        assert_eq!(a, sample_kde(&m, 500, 42));
        assert_ne!(a, sample_kde(&m, 500, 43));
    }

    #[test]
    fn sample_means_within_clt_bound() {
        let col: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let fm = matrix(&[col.clone()]);
        let m = fit_kde(&fm).unwrap();
        let mean = col.iter().sum::<f64>() / 200.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 200.0;
        // Sample variance is the data variance plus the kernel variance.
        let sd = (var + m.bandwidths[0].powi(2)).sqrt();
        for seed in 0..20 {
            let s = sample_kde(&m, 500, seed);
            let sm = s.column(0).iter().sum::<f64>() / 500.0;
            assert!((sm - mean).abs() <= 3.0 * sd / 500f64.sqrt(), "seed {seed}: {sm} vs {mean}");
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(fit_kde(&matrix(&[vec![1.0]])), Err(MlError::EmptyInput(_))));
    }
}
