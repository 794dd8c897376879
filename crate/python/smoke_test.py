"""Smoke test for the mcb_tsa_py extension module.

Build the module first (see README), then run: python python/smoke_test.py
"""

import math
import mcb_tsa_py as m


def main():
    spec = m.SystemSpec.reference("pv", 4.0).with_investment_scale(72 / 8736)
    assert spec.generator_names == ["thermal", "pv"]
    ts = m.TimeSeries.synthetic(spec, 72, seed=3)
    assert ts.horizon == 72 and len(ts.capacity_factors) == 2

    full = m.solve_full(spec, ts)
    assert len(full["x"]) == 2 and len(full["mu"]) == 72

    lb, ub, _ = m.compute_bounds(spec, ts, m.Aggregation.identity(72))
    assert math.isclose(lb, full["objective"], rel_tol=1e-7)
    assert math.isclose(ub, full["objective"], rel_tol=1e-7)

    coarse = m.Aggregation.from_block_lengths([24, 24, 24])
    lb, ub, _ = m.compute_bounds(spec, ts, coarse)
    assert lb <= full["objective"] * (1 + 1e-6) and full["objective"] <= ub * (1 + 1e-6)

    groups = m.chronological_cluster([[1.0], [1.0], [5.0], [5.0]], 2)
    assert groups == [[0, 1], [2, 3]]
    medoids, _ = m.kmedoids([[0.0], [0.1], [9.0], [9.2]], 2, seed=1)
    assert len(medoids) == 2

    est = m.estimate(spec, ts, k=30, n_trees=5, max_depth=5, seed=1)
    assert len(est["mu"]) == 72

    cfg = m.AlgorithmConfig(method="input-chc", r0=12, delta_r=12, r_max=72, n_top=4)
    run = m.run(spec, ts, cfg)
    assert run["iterations"][-1]["eps_percent"] >= -1e-6

    try:
        m.AlgorithmConfig(method="unknown")
    except ValueError:
        pass
    else:
        raise AssertionError("bad method accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
