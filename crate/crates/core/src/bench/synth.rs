//! Deterministic synthetic inputs standing in for measured hourly data.
//!
//! With `h = t·Δ` hours, hour-of-day `τ = h mod 24` and day `d = ⌊h/24⌋`:
//!
//! * solar: `F = S(d) · max(0, sin(π(τ−6)/12)) · (1 − 0.6·c_t)` for
//!   `6 ≤ τ ≤ 18`, else 0, with `S(d) = 0.75 + 0.25·cos(2π(d−172)/365)` and
//!   cloudiness `c_t = σ(z_t)`, `z_t = 0.95·z_{t−1} + 0.3·ε_t`;
//! * wind: `F = σ(−0.9 + z_t)`, `z_t = 0.97·z_{t−1} + 0.25·ε_t`;
//! * demand: `D = Δ·D̄·(1 + a_d·sin(2π(τ−9)/24) + a_e·exp(−(τ−19)²/4))·k(d)·(1 + s·ε_t)`
//!   with `k(d) = 1 − a_w` on days 5 and 6 of each week and 1 otherwise;
//! * price: `π = p₀ + p₁·(D/Δ − D̄ − Σ_VRE 0.5·D̄·F)/D̄ + 5·ε_t`, clamped to
//!   `[0, π_max]`.
//!
//! `σ` is the logistic function and `ε_t` are i.i.d. standard normal draws
//! from one ChaCha8 stream per column.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gep::{SystemSpec, TimeSeriesTable};
use crate::seed::{derive_seed, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Solar,
    Wind,
    /// Constant 1.0 (dispatchable generators).
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Per-generator profile; `None` infers from the generator (non-VRE →
    /// constant, name containing "wind" → wind, other VRE → solar).
    pub profiles: Option<Vec<Profile>>,
    /// Mean demand, MW.
    pub demand_mean: f64,
    pub daily_amplitude: f64,
    pub evening_peak: f64,
    pub weekend_dip: f64,
    pub demand_noise: f64,
    pub price_base: f64,
    pub price_slope: f64,
    pub price_max: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            profiles: None,
            demand_mean: 500.0,
            daily_amplitude: 0.15,
            evening_peak: 0.12,
            weekend_dip: 0.1,
            demand_noise: 0.03,
            price_base: 80.0,
            price_slope: 60.0,
            price_max: 400.0,
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SyntheticSpec {
    pub fn profiles_for(&self, spec: &SystemSpec) -> Vec<Profile> {
        if let Some(p) = &self.profiles {
            return p.clone();
        }
        spec.generators
            .iter()
            .map(|g| {
                if !g.is_vre {
                    Profile::Constant
                } else if g.name.to_ascii_lowercase().contains("wind") {
                    Profile::Wind
                } else {
                    Profile::Solar
                }
            })
            .collect()
    }
}

/// Generates a `t`-step table for `spec`'s generators.
pub fn generate_synthetic(gen: &SyntheticSpec, spec: &SystemSpec, t: usize, seed: u64) -> TimeSeriesTable {
    let dt = spec.delta;
    let hour = |k: usize| k as f64 * dt;
    let profiles = gen.profiles_for(spec);
    let normals = |stream: u64| -> Vec<f64> {
        let mut r = rng(derive_seed(seed, stream));
        (0..t).map(|_| StandardNormal.sample(&mut r)).collect()
    };

    let mut factors = Vec::with_capacity(profiles.len());
    for (g, prof) in profiles.iter().enumerate() {
        let eps = normals(100 + g as u64);
        let col = match prof {
            Profile::Constant => vec![1.0; t],
            Profile::Solar => {
                let mut z = 0.0;
                (0..t)
                    .map(|k| {
                        z = 0.95 * z + 0.3 * eps[k];
                        let h = hour(k);
                        let tau = h % 24.0;
                        let day = (h / 24.0).floor();
                        if !(6.0..=18.0).contains(&tau) {
                            return 0.0;
                        }
                        let season = 0.75 + 0.25 * (2.0 * std::f64::consts::PI * (day - 172.0) / 365.0).cos();
                        let sun = (std::f64::consts::PI * (tau - 6.0) / 12.0).sin().max(0.0);
                        (season * sun * (1.0 - 0.6 * logistic(z))).clamp(0.0, 1.0)
                    })
                    .collect()
            }
            Profile::Wind => {
                let mut z = 0.0;
                (0..t)
                    .map(|k| {
                        z = 0.97 * z + 0.25 * eps[k];
                        logistic(-0.9 + z).clamp(0.0, 1.0)
                    })
                    .collect()
            }
        };
        factors.push(col);
    }

    let eps_d = normals(1);
    let demand: Vec<f64> = (0..t)
        .map(|k| {
            let h = hour(k);
            let tau = h % 24.0;
            let day = (h / 24.0).floor() as u64;
            let shape = 1.0
                + gen.daily_amplitude * (2.0 * std::f64::consts::PI * (tau - 9.0) / 24.0).sin()
                + gen.evening_peak * (-(tau - 19.0).powi(2) / 4.0).exp();
            let week = if day % 7 >= 5 { 1.0 - gen.weekend_dip } else { 1.0 };
            (dt * gen.demand_mean * shape * week * (1.0 + gen.demand_noise * eps_d[k])).max(0.0)
        })
        .collect();

    let eps_p = normals(2);
    let price: Vec<f64> = (0..t)
        .map(|k| {
            let vre: f64 = profiles
                .iter()
                .zip(&factors)
                .filter(|(p, _)| **p != Profile::Constant)
                .map(|(_, f)| 0.5 * gen.demand_mean * f[k])
                .sum();
            let net = (demand[k] / dt - gen.demand_mean - vre) / gen.demand_mean;
            let cap = gen.price_max.min(spec.c_ns * (1.0 - 1e-9));
            (gen.price_base + gen.price_slope * net + 5.0 * eps_p[k]).clamp(0.0, cap)
        })
        .collect();

    TimeSeriesTable { capacity_factors: factors, demand, price }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::{GeneratorSpec, SystemSpec};

    fn spec() -> SystemSpec {
        SystemSpec {
            generators: vec![
                GeneratorSpec { name: "thermal".into(), c_op: 130.0, c_inv: 1e5, is_vre: false },
                GeneratorSpec { name: "pv".into(), c_op: 1.0, c_inv: 8e4, is_vre: true },
                GeneratorSpec { name: "wind".into(), c_op: 2.5, c_inv: 8e4, is_vre: true },
            ],
            storages: vec![],
            c_ns: 5000.0,
            budget: 3e8,
            delta: 1.0,
            market_participation: true,
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let s = spec();
        let a = generate_synthetic(&SyntheticSpec::default(), &s, 500, 11);
        let b = generate_synthetic(&SyntheticSpec::default(), &s, 500, 11);
        assert_eq!(a, b);
        assert!(a.check_against(&s).is_ok());
        assert_ne!(a, generate_synthetic(&SyntheticSpec::default(), &s, 500, 12));
    }

    #[test]
    fn solar_dark_at_night() {
        let s = spec();
        let ts = generate_synthetic(&SyntheticSpec::default(), &s, 24 * 14, 3);
        for k in 0..ts.horizon() {
            let tau = k % 24;
            if !(6..=18).contains(&tau) {
                assert_eq!(ts.capacity_factors[1][k], 0.0, "step {k}");
            }
        }
        assert!(ts.capacity_factors[0].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn full_year_statistics() {
        let s = spec();
        let ts = generate_synthetic(&SyntheticSpec::default(), &s, 8736, 2024);
        for g in 1..3 {
            let mean = ts.capacity_factors[g].iter().sum::<f64>() / 8736.0;
            assert!((0.1..=0.4).contains(&mean), "generator {g} mean {mean}");
        }
        let dmean = ts.demand.iter().sum::<f64>() / 8736.0;
        assert!((dmean - 500.0).abs() < 50.0);
    }
}
