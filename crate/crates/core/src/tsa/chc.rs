use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{FeatureSeries, ProtectedSet, TsaError};

const NIL: usize = usize::MAX;

/// One agglomeration step: the cluster starting at `right_start` was folded
/// into its left neighbour starting at `left_start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left_start: usize,
    pub right_start: usize,
    pub dissimilarity: f64,
}

/// Merge history over the clustering domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub horizon: usize,
    /// Unprotected steps, ascending.
    pub domain: Vec<usize>,
    pub merges: Vec<Merge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Contiguous groups in chronological order.
    pub groups: Vec<Vec<usize>>,
    pub tree: ClusterTree,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    d: f64,
    left: usize,
    right: usize,
    v_left: u32,
    v_right: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed so the max-heap pops the smallest distance, then the earliest pair.
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then(other.left.cmp(&self.left))
    }
}

fn distance(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x / na - y / nb).powi(2)).sum::<f64>().sqrt()
}

fn domain_and_runs(horizon: usize, protected: &ProtectedSet) -> (Vec<usize>, usize) {
    let mask = protected.mask(horizon);
    let domain: Vec<usize> = (0..horizon).filter(|&t| !mask[t]).collect();
    let runs = domain.iter().enumerate().filter(|&(i, &t)| i == 0 || domain[i - 1] + 1 != t).count();
    (domain, runs)
}

/// Chronological hierarchical clustering with centroid linkage.
///
/// Starts from singletons over the unprotected steps and repeatedly merges
/// the adjacent pair whose mean feature vectors are closest (Euclidean),
/// never across a protected step, until `r_target` groups remain. Ties go to
/// the earliest pair.
pub fn chronological_cluster(
    features: &FeatureSeries,
    protected: &ProtectedSet,
    r_target: usize,
) -> Result<Clustering, TsaError> {
    features.validate()?;
    let horizon = features.len();
    if protected.steps.iter().any(|&t| t >= horizon) {
        return Err(TsaError::InvalidTarget("protected step outside the horizon".into()));
    }
    let (domain, runs) = domain_and_runs(horizon, protected);
    if r_target > domain.len() {
        return Err(TsaError::InvalidTarget(format!(
            "{r_target} groups requested from {} unprotected steps",
            domain.len()
        )));
    }
    if r_target < runs {
        return Err(TsaError::InfeasibleTarget { target: r_target, runs });
    }

    let mut end = vec![NIL; horizon];
    let mut next = vec![NIL; horizon];
    let mut prev = vec![NIL; horizon];
    let mut count = vec![0.0; horizon];
    let mut version = vec![0u32; horizon];
    let mut alive = vec![false; horizon];
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    for (i, &t) in domain.iter().enumerate() {
        end[t] = t;
        count[t] = 1.0;
        alive[t] = true;
        sums[t] = features.rows[t].clone();
        if i + 1 < domain.len() && domain[i + 1] == t + 1 {
            next[t] = t + 1;
            prev[t + 1] = t;
        }
    }

    let mut heap = BinaryHeap::with_capacity(domain.len());
    let candidate = |l: usize, r: usize, sums: &[Vec<f64>], count: &[f64], version: &[u32]| Candidate {
        d: distance(&sums[l], count[l], &sums[r], count[r]),
        left: l,
        right: r,
        v_left: version[l],
        v_right: version[r],
    };
    for &t in &domain {
        if next[t] != NIL {
            heap.push(candidate(t, next[t], &sums, &count, &version));
        }
    }

    let mut merges = Vec::with_capacity(domain.len().saturating_sub(r_target));
    let mut groups = domain.len();
    while groups > r_target {
        let Some(c) = heap.pop() else { break };
        let (l, r) = (c.left, c.right);
        if !alive[l] || !alive[r] || next[l] != r || version[l] != c.v_left || version[r] != c.v_right {
            continue;
        }
        merges.push(Merge { left_start: l, right_start: r, dissimilarity: c.d });
        end[l] = end[r];
        count[l] += count[r];
        let right_sum = std::mem::take(&mut sums[r]);
        for (a, b) in sums[l].iter_mut().zip(&right_sum) {
            *a += b;
        }
        alive[r] = false;
        next[l] = next[r];
        if next[r] != NIL {
            prev[next[r]] = l;
        }
        version[l] += 1;
        groups -= 1;
        if prev[l] != NIL {
            heap.push(candidate(prev[l], l, &sums, &count, &version));
        }
        if next[l] != NIL {
            heap.push(candidate(l, next[l], &sums, &count, &version));
        }
    }

    let groups = domain.iter().filter(|&&t| alive[t]).map(|&t| (t..=end[t]).collect()).collect();
    Ok(Clustering { groups, tree: ClusterTree { horizon, domain, merges } })
}

impl ClusterTree {
    /// Groups after replaying only as many merges as needed to reach `r`.
    pub fn groups_at(&self, r: usize) -> Result<Vec<Vec<usize>>, TsaError> {
        let n = self.domain.len();
        let min = n - self.merges.len();
        if r < min || r > n {
            return Err(TsaError::InvalidTarget(format!("tree covers {min}..={n} groups, asked for {r}")));
        }
        let mut is_start = vec![true; self.horizon];
        for m in &self.merges[..n - r] {
            is_start[m.right_start] = false;
        }
        let mut groups: Vec<Vec<usize>> = Vec::with_capacity(r);
        for (i, &t) in self.domain.iter().enumerate() {
            let contiguous = i > 0 && self.domain[i - 1] + 1 == t;
            if is_start[t] || !contiguous {
                groups.push(vec![t]);
            } else {
                groups.last_mut().expect("a group is open").push(t);
            }
        }
        Ok(groups)
    }

    /// Replays the history from singletons and checks that every merge joins
    /// adjacent clusters and is minimal among the adjacent pairs at that
    /// point (up to `tol`).
    pub fn verify(&self, features: &FeatureSeries, tol: f64) -> Result<(), String> {
        let mut clusters: Vec<(usize, usize, Vec<f64>, f64)> =
            self.domain.iter().map(|&t| (t, t, features.rows[t].clone(), 1.0)).collect();
        for (k, m) in self.merges.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut chosen = None;
            for i in 0..clusters.len().saturating_sub(1) {
                let (a, b) = (&clusters[i], &clusters[i + 1]);
                if a.1 + 1 != b.0 {
                    continue;
                }
                let d = distance(&a.2, a.3, &b.2, b.3);
                best = best.min(d);
                if a.0 == m.left_start && b.0 == m.right_start {
                    chosen = Some((i, d));
                }
            }
            let Some((i, d)) = chosen else {
                return Err(format!("merge {k} does not join adjacent clusters"));
            };
            if d > best + tol {
                return Err(format!("merge {k} has dissimilarity {d}, minimum was {best}"));
            }
            let right = clusters.remove(i + 1);
            let left = &mut clusters[i];
            left.1 = right.1;
            for (a, b) in left.2.iter_mut().zip(&right.2) {
                *a += b;
            }
            left.3 += right.3;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(values: &[f64], protected: &[usize], r: usize) -> Result<Vec<Vec<usize>>, TsaError> {
        chronological_cluster(&FeatureSeries::from_values(values), &ProtectedSet { steps: protected.to_vec() }, r)
            .map(|c| c.groups)
    }

    #[test]
    fn plateaus_merge_first() {
        assert_eq!(cluster(&[1.0, 1.0, 5.0, 5.0], &[], 2).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(cluster(&[1.0, 2.0, 9.0], &[], 2).unwrap(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn protected_gap_splits_runs() {
        assert_eq!(cluster(&[1.0; 4], &[1], 2).unwrap(), vec![vec![0], vec![2, 3]]);
        assert!(matches!(cluster(&[1.0; 4], &[1], 1), Err(TsaError::InfeasibleTarget { target: 1, runs: 2 })));
        assert!(cluster(&[1.0; 4], &[], 5).is_err());
        assert_eq!(cluster(&[1.0; 2], &[0, 1], 0).unwrap(), Vec::<Vec<usize>>::new());
    }

    #[test]
    fn ties_merge_earliest_pair() {
        assert_eq!(cluster(&[0.0, 1.0, 2.0, 3.0], &[], 3).unwrap(), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn centroid_linkage() {
        // After {0,1} merge to mean 1, the pair with step 2 (value 3) is at
        // distance 2 while (2,3) is 2.5.
        let g = cluster(&[0.0, 2.0, 3.0, 5.5], &[], 2).unwrap();
        assert_eq!(g, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn tree_cut_matches_direct_runs() {
        let v: Vec<f64> = (0..40).map(|i| ((i * 7919) % 31) as f64).collect();
        let f = FeatureSeries::from_values(&v);
        let p = ProtectedSet { steps: vec![5, 17, 18, 30] };
        let low = chronological_cluster(&f, &p, 4).unwrap();
        low.tree.verify(&f, 1e-12).unwrap();
        for r in 4..=36 {
            let direct = chronological_cluster(&f, &p, r).unwrap().groups;
            assert_eq!(low.tree.groups_at(r).unwrap(), direct, "r = {r}");
        }
    }

    #[test]
    fn multi_feature_euclidean() {
        let f = FeatureSeries::from_columns(&[vec![0.0, 3.0, 3.0], vec![0.0, 4.0, 0.0]]).unwrap();
        let c = chronological_cluster(&f, &ProtectedSet::default(), 2).unwrap();
        // d(0,1) = 5, d(1,2) = 4.
        assert_eq!(c.groups, vec![vec![0], vec![1, 2]]);
        assert!((c.tree.merges[0].dissimilarity - 4.0).abs() < 1e-15);
    }
}
