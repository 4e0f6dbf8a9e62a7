"""Smoke test for the copeq extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import math

import copeq


def main():
    # rank transform and Spearman's rho
    data = [[1.0, 2.0], [2.0, 1.0], [3.0, 5.0], [4.0, 4.0], [5.0, 3.0]]
    assert copeq.pseudo_observations(data)[0] == [0.2, 0.4]
    assert abs(copeq.spearman_rho(data) - 0.6) < 1e-12

    assert copeq.enumerate_shell(3, 2) == [[2, 1], [1, 2]]
    assert copeq.pair_rank(2, 3, 3) == 3

    spec = copeq.CopulaSpec("clayton", 0.5, 3)
    a, b = spec.sample(300, seed=1), spec.sample(300, seed=2)
    assert len(a) == 300 and len(a[0]) == 3
    assert spec.sample(10, seed=5) == spec.sample(10, seed=5)

    same = copeq.ksample_test([a, a])
    assert same.statistic == 0.0 and same.p_value == 1.0 and same.degenerate

    cfg = copeq.TestConfig(alpha=2.0)
    res = copeq.ksample_test([a, b], cfg)
    assert 0.0 <= res.p_value <= 1.0
    assert math.isclose(res.p_value, math.erfc(math.sqrt(res.statistic / 2)), rel_tol=1e-12, abs_tol=1e-300)

    iris = copeq.iris()
    labels = [label for label, _ in iris]
    assert labels == ["setosa", "versicolor", "virginica"]
    rows = [r for _, r in iris]
    avg = copeq.TestConfig(ties="average")
    tuned = copeq.tune_alpha(rows, avg, n_reps=20, seed=0)
    cfg = copeq.TestConfig(alpha=tuned.alpha_hat, ties="average")
    res = copeq.ksample_test(rows, cfg)
    assert res.reject and res.p_value < 1e-6, res
    pv = copeq.pairwise_anova(rows, cfg)
    assert pv[1][2] > 0.05 and pv[0][1] < 1e-4
    part = copeq.cluster_copulas(rows, cfg)
    assert part.canonical() == [[0], [1, 2]], part
    retuned = copeq.cluster_copulas(rows, cfg, retune=True)
    assert retuned.canonical() == [[0], [1, 2]], retuned
    assert all(len(t) == 6 for t in retuned.trail)

    try:
        copeq.TestConfig(level=2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("level outside (0, 1) accepted")

    print("ok:", res)


if __name__ == "__main__":
    main()
