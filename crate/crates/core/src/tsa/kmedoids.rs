use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{FeatureSeries, TsaError};
use crate::seed::rng;

const NIL: usize = usize::MAX;

/// Result of a k-medoids clustering; medoids ascend in time and `groups[i]`
/// holds the steps assigned to `medoids[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMedoids {
    pub medoids: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    pub cost: f64,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

struct State<'a> {
    x: &'a [Vec<f64>],
    medoids: Vec<usize>,
    nearest: Vec<usize>,
    d_nearest: Vec<f64>,
    second: Vec<usize>,
    d_second: Vec<f64>,
}

impl State<'_> {
    fn d(&self, a: usize, b: usize) -> f64 {
        l1(&self.x[a], &self.x[b])
    }

    fn rescan(&mut self, o: usize) {
        let (mut n, mut dn, mut s, mut ds) = (NIL, f64::INFINITY, NIL, f64::INFINITY);
        for (i, &m) in self.medoids.iter().enumerate() {
            let d = self.d(o, m);
            if d < dn {
                (s, ds) = (n, dn);
                (n, dn) = (i, d);
            } else if d < ds {
                (s, ds) = (i, d);
            }
        }
        self.nearest[o] = n;
        self.d_nearest[o] = dn;
        self.second[o] = s;
        self.d_second[o] = ds;
    }

    /// Replaces medoid slot `i` by point `c`, updating the caches.
    fn swap(&mut self, i: usize, c: usize) {
        self.medoids[i] = c;
        for o in 0..self.x.len() {
            if self.nearest[o] == i || self.second[o] == i {
                self.rescan(o);
                continue;
            }
            let d = self.d(o, c);
            if d < self.d_nearest[o] {
                self.second[o] = self.nearest[o];
                self.d_second[o] = self.d_nearest[o];
                self.nearest[o] = i;
                self.d_nearest[o] = d;
            } else if d < self.d_second[o] {
                self.second[o] = i;
                self.d_second[o] = d;
            }
        }
    }

    fn removal_loss(&self) -> Vec<f64> {
        let mut loss = vec![0.0; self.medoids.len()];
        for o in 0..self.x.len() {
            if self.d_second[o].is_finite() {
                loss[self.nearest[o]] += self.d_second[o] - self.d_nearest[o];
            }
        }
        loss
    }
}

/// PAM-style k-medoids under the L1 distance.
///
/// Initialisation is a seeded greedy build that scores candidates on random
/// subsamples; the swap phase then applies every improving (medoid, point)
/// exchange until none remains.
pub fn kmedoids_cluster(features: &FeatureSeries, r_target: usize, seed: u64) -> Result<KMedoids, TsaError> {
    features.validate()?;
    let n = features.len();
    if r_target == 0 || r_target > n {
        return Err(TsaError::InvalidTarget(format!("{r_target} medoids for {n} points")));
    }
    let x = &features.rows;
    let mut r = rng(seed);

    // Greedy build on subsamples.
    let mut medoids = Vec::with_capacity(r_target);
    let mut is_medoid = vec![false; n];
    let mut d_near = vec![f64::INFINITY; n];
    let sub = (10 + (n as f64).sqrt().ceil() as usize).min(n);
    while medoids.len() < r_target {
        let pool: Vec<usize> = (0..n).filter(|&i| !is_medoid[i]).collect();
        let cand: Vec<usize> = sample(&mut r, pool.len(), sub.min(pool.len())).into_iter().map(|k| pool[k]).collect();
        let eval: Vec<usize> = sample(&mut r, n, sub).into_vec();
        let mut best = (f64::INFINITY, NIL);
        for &c in &cand {
            let gain: f64 = eval
                .iter()
                .map(|&o| {
                    let d = l1(&x[o], &x[c]);
                    if d_near[o].is_finite() {
                        (d - d_near[o]).min(0.0)
                    } else {
                        d
                    }
                })
                .sum();
            if gain < best.0 || (gain == best.0 && c < best.1) {
                best = (gain, c);
            }
        }
        let c = best.1;
        is_medoid[c] = true;
        medoids.push(c);
        for o in 0..n {
            d_near[o] = d_near[o].min(l1(&x[o], &x[c]));
        }
    }

    let mut st = State {
        x,
        medoids,
        nearest: vec![NIL; n],
        d_nearest: vec![0.0; n],
        second: vec![NIL; n],
        d_second: vec![0.0; n],
    };
    for o in 0..n {
        st.rescan(o);
    }

    // Eager swap passes.
    let k = r_target;
    let mut loss = st.removal_loss();
    let mut last_swap = NIL;
    let mut c = 0;
    let mut steps_without_swap = 0;
    while steps_without_swap < n {
        if c == last_swap {
            break;
        }
        if !is_medoid[c] {
            let mut delta = loss.clone();
            let mut shared = 0.0;
            for o in 0..n {
                let d = st.d(o, c);
                if d < st.d_nearest[o] {
                    shared += d - st.d_nearest[o];
                    if st.d_second[o].is_finite() {
                        delta[st.nearest[o]] += st.d_nearest[o] - st.d_second[o];
                    }
                } else if !st.d_second[o].is_finite() {
                    delta[st.nearest[o]] += d - st.d_nearest[o];
                } else if d < st.d_second[o] {
                    delta[st.nearest[o]] += d - st.d_second[o];
                }
            }
            let (mut bi, mut bv) = (0, f64::INFINITY);
            for (i, &v) in delta.iter().enumerate() {
                if v < bv {
                    (bi, bv) = (i, v);
                }
            }
            let change = bv + shared;
            let scale = 1.0 + st.d_nearest.iter().sum::<f64>().abs();
            if k < n && change < -1e-12 * scale {
                is_medoid[st.medoids[bi]] = false;
                is_medoid[c] = true;
                st.swap(bi, c);
                loss = st.removal_loss();
                last_swap = c;
                steps_without_swap = 0;
            } else {
                steps_without_swap += 1;
            }
        } else {
            steps_without_swap += 1;
        }
        c = (c + 1) % n;
    }

    // Assignment, medoids ordered by time; ties go to the earlier medoid.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| st.medoids[i]);
    let medoids: Vec<usize> = order.iter().map(|&i| st.medoids[i]).collect();
    let mut groups = vec![Vec::new(); k];
    let mut cost = 0.0;
    for o in 0..n {
        let mut best = (f64::INFINITY, 0);
        for (slot, &m) in medoids.iter().enumerate() {
            let d = if o == m { -1.0 } else { l1(&x[o], &x[m]) };
            if d < best.0 {
                best = (d, slot);
            }
        }
        groups[best.1].push(o);
        cost += best.0.max(0.0);
    }
    Ok(KMedoids { medoids, groups, cost })
}
