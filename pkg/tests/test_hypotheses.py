import json
import math

import numpy as np
import pytest

from smoothpa import Example, Hypothesis, mle_oracle, offline_best_loss
from smoothpa.errors import ConfigError
from smoothpa.hypotheses import (ComparatorTracker, RegionCounts, RegionFamily,
                                 count_regions, evaluate, examples_to_counts,
                                 mle_from_counts, region_losses_from_counts)

LN2 = math.log(2.0)


def brute_force_best_loss(xs, ys, family, step=1e-3):
    """Exhaustive region x theta-grid search, independent of the k/n formula."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    with np.errstate(divide="ignore"):
        lg = np.log(grid)
        lg1 = np.log(1.0 - grid)

    def side_min(n, k):
        # k*ln(theta) + (n-k)*ln(1-theta), honoring 0*ln 0 = 0 at the edges
        ll = np.zeros_like(grid)
        if k > 0:
            ll = ll + k * lg
        if n - k > 0:
            ll = ll + (n - k) * lg1
        return -np.max(ll)

    best = np.inf
    for bm in family.bitmaps:
        inside = bm[xs]
        n0, k0 = int(inside.sum()), int(ys[inside].sum())
        n1, k1 = len(xs) - n0, int(ys.sum()) - k0
        best = min(best, side_min(n0, k0) + side_min(n1, k1))
    return best


def test_evaluate_membership_cases():
    fam = RegionFamily.explicit(4, [[0, 1], []])
    assert evaluate(fam, Hypothesis(0, 0.2, 0.9), 0) == 0.2
    assert evaluate(fam, Hypothesis(0, 0.2, 0.9), 3) == 0.9
    assert evaluate(fam, Hypothesis(1, 0.123, 0.7), 3) == 0.7  # empty region


def test_evaluate_threshold_membership():
    fam = RegionFamily.threshold_grid(10)
    assert evaluate(fam, Hypothesis(5, 0.3, 0.6), 5) == 0.3
    assert evaluate(fam, Hypothesis(5, 0.3, 0.6), 6) == 0.6
    with pytest.raises(ValueError):
        evaluate(fam, Hypothesis(5, 0.3, 0.6), 10)


def test_count_regions_empty_and_full():
    full = np.ones(8, dtype=bool)
    assert count_regions(full, []) == RegionCounts(0, 0, 0, 0)
    data = [Example(3, 1), Example(3, 1), Example(3, 0)]
    assert count_regions(full, data) == RegionCounts(3, 2, 0, 0)


def test_count_regions_random_vs_recount():
    rng = np.random.default_rng(0)
    bm = rng.random(12) < 0.5
    data = [Example(int(rng.integers(12)), int(rng.integers(2))) for _ in range(20)]
    got = count_regions(bm, data)
    n0 = sum(1 for e in data if bm[e.x])
    k0 = sum(1 for e in data if bm[e.x] and e.y == 1)
    n1 = sum(1 for e in data if not bm[e.x])
    k1 = sum(1 for e in data if not bm[e.x] and e.y == 1)
    assert got == RegionCounts(n0, k0, n1, k1)


def test_mle_single_region_family_defaults():
    fam = RegionFamily.explicit(5, [range(5)])
    data = [Example(1, 1), Example(2, 1), Example(3, 0)]
    h = mle_oracle(data, fam)
    assert h.region_index == 0
    assert h.theta0 == pytest.approx(2.0 / 3.0)
    assert h.theta1 == 0.5  # empty outside defaults to 1/2


def test_mle_empty_data_tiebreak():
    fam = RegionFamily.threshold_grid(6)
    assert mle_oracle([], fam) == Hypothesis(0, 0.5, 0.5)


def test_mle_matches_bruteforce_grid_fine():
    rng = np.random.default_rng(42)
    fam = RegionFamily.threshold_grid(8)
    xs = rng.integers(0, 8, size=15)
    ys = rng.integers(0, 2, size=15)
    data = list(zip(xs.tolist(), ys.tolist()))
    got = offline_best_loss(data, fam)
    oracle = brute_force_best_loss(xs, ys, fam, step=1e-4)
    assert got <= oracle + 1e-3
    assert got == pytest.approx(oracle, abs=1e-3)


def test_mle_loss_below_theta_grid_everywhere():
    rng = np.random.default_rng(7)
    for _ in range(25):
        u = int(rng.integers(2, 33))
        fam = RegionFamily.threshold_grid(u)
        n = int(rng.integers(0, 21))
        xs = rng.integers(0, u, size=n)
        ys = rng.integers(0, 2, size=n)
        got = offline_best_loss(list(zip(xs.tolist(), ys.tolist())), fam)
        assert got <= brute_force_best_loss(xs, ys, fam, step=1e-3) + 1e-3


def test_offline_best_loss_examples():
    fam = RegionFamily.threshold_grid(4)
    all_ones = [Example(i % 4, 1) for i in range(6)]
    assert offline_best_loss(all_ones, fam) == pytest.approx(0.0, abs=1e-12)
    single = RegionFamily.explicit(4, [range(4)])
    assert offline_best_loss([Example(2, 1), Example(2, 0)], single) == pytest.approx(2 * LN2)


def test_offline_best_loss_monotone_in_prefix():
    rng = np.random.default_rng(3)
    fam = RegionFamily.threshold_grid(16)
    xs = rng.integers(0, 16, size=40)
    ys = rng.integers(0, 2, size=40)
    prev = 0.0
    tracker = ComparatorTracker(fam)
    for t in range(40):
        cur = offline_best_loss(list(zip(xs[: t + 1].tolist(), ys[: t + 1].tolist())), fam)
        assert cur >= prev - 1e-12
        assert tracker.update(int(xs[t]), int(ys[t])) == pytest.approx(cur, abs=1e-9)
        prev = cur


def test_threshold_fast_path_equals_generic_scan():
    rng = np.random.default_rng(11)
    for _ in range(10):
        u = int(rng.integers(2, 40))
        fam = RegionFamily.threshold_grid(u)
        xs = rng.integers(0, u, size=int(rng.integers(1, 60)))
        ys = rng.integers(0, 2, size=len(xs))
        cnt, pos = examples_to_counts((xs, ys), u)
        fast = region_losses_from_counts(cnt, pos, fam)
        slow = region_losses_from_counts(cnt, pos, fam, force_generic=True)
        assert np.allclose(fast, slow, atol=1e-9)
        assert int(np.argmin(fast)) == int(np.argmin(slow))
        h, loss = mle_from_counts(cnt, pos, fam)
        assert loss == pytest.approx(float(fast.min()), abs=1e-9)


def test_family_json_roundtrip():
    fam = RegionFamily.threshold_grid(12)
    back = RegionFamily.from_json(fam.to_json())
    assert back.kind == "threshold_grid" and back.universe.size == 12
    obj = json.loads(fam.to_json())
    assert obj == {"kind": "threshold_grid", "size": 12}

    fam2 = RegionFamily.explicit(5, [[0, 2], [1, 3, 4]])
    back2 = RegionFamily.from_json(fam2.to_json())
    assert np.array_equal(back2.bitmaps, fam2.bitmaps)
    obj2 = json.loads(fam2.to_json())
    assert obj2["kind"] == "explicit" and obj2["regions"] == [[0, 2], [1, 3, 4]]


def test_family_json_errors():
    with pytest.raises(ConfigError):
        RegionFamily.from_json("not json")
    with pytest.raises(ConfigError):
        RegionFamily.from_json(json.dumps({"kind": "mystery"}))
    with pytest.raises(ConfigError):
        RegionFamily.from_json(json.dumps({"kind": "threshold_grid"}))
