use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, MlError};
use crate::gep::{build_full_model, SystemSpec};
use crate::lp::SolverOptions;

/// Class id ↔ marginal-cost value mapping.
///
/// Values are keyed by rounding to `10^-DECIMALS` money/MWh; ids ascend with
/// the key and each class is represented by the mean of its raw members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDictionary {
    pub keys: Vec<i64>,
    pub values: Vec<f64>,
}

const DECIMALS: i32 = 4;

fn key(v: f64) -> i64 {
    (v * 10f64.powi(DECIMALS)).round() as i64
}

impl LabelDictionary {
    /// Discretises `duals` and returns the dictionary with one label per input.
    pub fn from_values(duals: &[f64]) -> (LabelDictionary, Vec<usize>) {
        let mut keys: Vec<i64> = duals.iter().map(|&v| key(v)).collect();
        keys.sort_unstable();
        keys.dedup();
        let labels: Vec<usize> = duals.iter().map(|&v| keys.binary_search(&key(v)).expect("key present")).collect();
        let mut sums = vec![0.0; keys.len()];
        let mut counts = vec![0usize; keys.len()];
        for (&v, &c) in duals.iter().zip(&labels) {
            sums[c] += v;
            counts[c] += 1;
        }
        let values = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        (LabelDictionary { keys, values }, labels)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn value(&self, class: usize) -> f64 {
        self.values[class]
    }

    /// Class whose rounded key matches `v`, if any.
    pub fn class_of(&self, v: f64) -> Option<usize> {
        self.keys.binary_search(&key(v)).ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub dictionary: LabelDictionary,
    /// Capacities of the reduced solve, MW.
    pub x_tilde: Vec<f64>,
}

/// Solves the full-scale model over the sampled rows, taken as one
/// chronological block in sample order, and labels each row with its
/// discretised balance dual.
pub fn build_training_labels(spec: &SystemSpec, sampled: &FeatureMatrix) -> Result<TrainingSet, MlError> {
    if sampled.num_rows() == 0 {
        return Err(MlError::EmptyInput("no sampled rows".into()));
    }
    let ts = sampled.to_series(spec)?;
    let model = build_full_model(spec, &ts)?;
    let solved = model.solve(&SolverOptions::default())?;
    let mu = model.marginal_costs(&solved.lp)?;
    let (dictionary, labels) = LabelDictionary::from_values(&mu.values);
    Ok(TrainingSet {
        features: sampled.clone(),
        labels,
        dictionary,
        x_tilde: solved.solution.x.iter().map(|v| v.max(0.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::fixtures::*;

    #[test]
    fn rounding_and_representatives() {
        let (d, l) = LabelDictionary::from_values(&[130.00001, 5000.0, 129.99999, 1.0]);
        assert_eq!(d.len(), 3);
        assert_eq!(l, vec![1, 2, 1, 0]);
        assert!((d.value(1) - 130.0).abs() < 1e-12);
        for c in 0..d.len() {
            assert_eq!(d.class_of(d.value(c)), Some(c));
        }
        assert_eq!(d.class_of(77.0), None);
    }

    #[test]
    fn single_step_label_is_operating_cost() {
        let s = spec(vec![thermal(130.0, 0.0)], vec![]);
        let fm = FeatureMatrix::from_series(&s, &series(vec![vec![1.0]], vec![10.0])).unwrap();
        let t = build_training_labels(&s, &fm).unwrap();
        assert_eq!(t.labels, vec![0]);
        assert!((t.dictionary.value(0) - 130.0).abs() < 1e-9);
        assert!(t.x_tilde[0] >= 10.0 - 1e-9);
    }

    #[test]
    fn identical_rows_single_class() {
        let s = spec(vec![thermal(130.0, 0.0)], vec![]);
        let fm = FeatureMatrix::from_series(&s, &series(vec![vec![1.0; 6]], vec![7.0; 6])).unwrap();
        let t = build_training_labels(&s, &fm).unwrap();
        assert_eq!(t.dictionary.len(), 1);
    }

    #[test]
    fn budget_respected() {
        let mut s = spec(vec![thermal(130.0, 100.0)], vec![]);
        s.budget = 500.0;
        let fm = FeatureMatrix::from_series(&s, &series(vec![vec![1.0; 3]], vec![10.0; 3])).unwrap();
        let t = build_training_labels(&s, &fm).unwrap();
        assert!(100.0 * t.x_tilde[0] <= 500.0 * (1.0 + 1e-9));
        assert!((t.dictionary.value(0) - 5000.0).abs() < 1e-6);
    }
}
