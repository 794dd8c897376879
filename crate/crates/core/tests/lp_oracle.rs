use mcb_tsa::lp::{brute_force_solve, check_kkt, solve, LpProblem, LpStatus, SolverOptions, Tag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random LP with ≤ 6 variables built around a known feasible point, so
/// most instances are feasible; some are unbounded.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(1..=6);
    let n_eq = rng.random_range(0..=2.min(n));
    let n_ub = rng.random_range(1..=4);
    let mut p = LpProblem::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    for j in 0..n {
        let upper = if rng.random_bool(0.5) { x0[j] + rng.random_range(0.0..4.0) } else { f64::INFINITY };
        let cost = rng.random_range(-5.0..5.0f64).round();
        p.add_var(Tag::new("v", &[j]), cost, 0.0, upper);
    }
    let row = |rng: &mut ChaCha8Rng| -> (Vec<(usize, f64)>, f64) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                let a = rng.random_range(-4i32..=4) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let ax: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        (coeffs, ax)
    };
    for i in 0..n_eq {
        let (c, ax) = row(rng);
        p.add_eq(Tag::new("e", &[i]), c, ax);
    }
    for i in 0..n_ub {
        let (c, ax) = row(rng);
        let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) };
        p.add_ub(Tag::new("u", &[i]), c, ax + slack);
    }
    p
}

#[test]
fn bundled_solver_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut optimal = 0;
    for k in 0..500 {
        let p = random_lp(&mut rng);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let b = brute_force_solve(&p).unwrap();
        assert_eq!(s.status, b.status, "instance {k}: {p:?}");
        if s.status == LpStatus::Optimal {
            optimal += 1;
            assert!(
                (s.objective - b.objective).abs() <= 1e-8 * (1.0 + b.objective.abs()),
                "instance {k}: simplex {} vs brute {}",
                s.objective,
                b.objective
            );
            let r = check_kkt(&p, &s);
            assert!(r.relative_gap() <= 1e-7, "instance {k}: {r:?}");
            assert!(r.max_primal_residual <= 1e-6 && r.max_cs_violation <= 1e-6, "{r:?}");
        }
    }
    assert!(optimal > 300, "only {optimal} optimal instances");
}
