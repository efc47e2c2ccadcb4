"""Region-indexed two-parameter hypothesis classes and the empirical-loss oracle.

A hypothesis f = (A, theta0, theta1) predicts theta0 on contexts inside region A
and theta1 outside. Families are finite lists of candidate regions: either the
threshold grid {x <= a} or an explicit list of subsets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import xlogy

from .core import ContextUniverse, Example
from .errors import ConfigError

THRESHOLD_GRID = "threshold_grid"
EXPLICIT = "explicit"


class RegionFamily:
    """Finite list of candidate regions over a finite universe.

    kind is "threshold_grid" (region a is {x : x <= a}, one per grid point,
    totally ordered by inclusion) or "explicit" (arbitrary subsets stored as
    membership bitmaps).
    """

    def __init__(self, universe: ContextUniverse, kind: str,
                 bitmaps: Optional[np.ndarray] = None):
        self.universe = universe
        self.kind = kind
        self._bitmaps = bitmaps

    @classmethod
    def threshold_grid(cls, size: int) -> "RegionFamily":
        return cls(ContextUniverse(size), THRESHOLD_GRID)

    @classmethod
    def explicit(cls, size: int, regions: Sequence[Sequence[int]]) -> "RegionFamily":
        if len(regions) == 0:
            raise ValueError("explicit family needs at least one region")
        bitmaps = np.zeros((len(regions), size), dtype=bool)
        for i, ids in enumerate(regions):
            ids = np.asarray(list(ids), dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= size):
                raise ValueError(f"region {i} has context ids outside [0, {size})")
            bitmaps[i, ids] = True
        return cls(ContextUniverse(size), EXPLICIT, bitmaps)

    def __len__(self) -> int:
        if self.kind == THRESHOLD_GRID:
            return self.universe.size
        return self._bitmaps.shape[0]

    @property
    def bitmaps(self) -> np.ndarray:
        """(num_regions, U) boolean membership matrix; built lazily for grids."""
        if self._bitmaps is None:
            u = self.universe.size
            self._bitmaps = np.arange(u)[None, :] <= np.arange(u)[:, None]
        return self._bitmaps

    def to_json(self) -> str:
        if self.kind == THRESHOLD_GRID:
            return json.dumps({"kind": THRESHOLD_GRID, "size": self.universe.size})
        regions = [sorted(int(x) for x in np.flatnonzero(row)) for row in self.bitmaps]
        return json.dumps({"kind": EXPLICIT, "size": self.universe.size, "regions": regions})

    @classmethod
    def from_json(cls, text: str) -> "RegionFamily":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"family: invalid JSON ({e})") from None
        return cls.from_spec(obj)

    @classmethod
    def from_spec(cls, obj: dict) -> "RegionFamily":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError("family.kind: missing")
        kind = obj["kind"]
        if kind == THRESHOLD_GRID:
            if "size" not in obj:
                raise ConfigError("family.size: missing")
            return cls.threshold_grid(int(obj["size"]))
        if kind == EXPLICIT:
            if "regions" not in obj:
                raise ConfigError("family.regions: missing")
            size = int(obj.get("size") or (max((max(r) for r in obj["regions"] if r), default=0) + 1))
            return cls.explicit(size, obj["regions"])
        raise ConfigError(f"family.kind: unknown kind {kind!r}")


@dataclass(frozen=True)
class Hypothesis:
    region_index: int
    theta0: float
    theta1: float


class RegionCounts(NamedTuple):
    """Sample and positive-label counts inside (n0, k0) and outside (n1, k1) a region."""

    n0: int
    k0: int
    n1: int
    k1: int


def evaluate(family: RegionFamily, h: Hypothesis, x: int) -> float:
    """Predicted probability of label 1 at context x: theta0 inside A, theta1 outside."""
    if not 0 <= x < family.universe.size:
        raise ValueError(f"context {x} outside universe")
    if family.kind == THRESHOLD_GRID:
        inside = x <= h.region_index
    else:
        inside = bool(family.bitmaps[h.region_index, x])
    return h.theta0 if inside else h.theta1


def count_regions(region_bitmap: np.ndarray, data: Sequence[Example]) -> RegionCounts:
    """Exact (n0, k0, n1, k1) counts of `data` split by membership in the region."""
    n0 = k0 = n1 = k1 = 0
    for x, y in data:
        if region_bitmap[x]:
            n0 += 1
            k0 += y
        else:
            n1 += 1
            k1 += y
    return RegionCounts(n0, k0, n1, k1)


def _nll(n, k):
    """Minimized negative log-likelihood n*H(k/n) for Bernoulli counts, 0 ln 0 = 0."""
    return xlogy(n, n) - xlogy(k, k) - xlogy(n - k, n - k)


def examples_to_counts(data: Sequence[Example] | tuple[np.ndarray, np.ndarray],
                       size: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-context totals (cnt) and positive-label totals (pos) from an example multiset.

    Accepts a list of examples or an (xs, ys) pair of arrays.
    """
    if (isinstance(data, tuple) and len(data) == 2
            and isinstance(data[0], (np.ndarray, list))):
        xs, ys = np.asarray(data[0], dtype=np.int64), np.asarray(data[1], dtype=np.int64)
    else:
        xs = np.fromiter((e[0] for e in data), dtype=np.int64, count=len(data))
        ys = np.fromiter((e[1] for e in data), dtype=np.int64, count=len(data))
    cnt = np.bincount(xs, minlength=size).astype(np.float64)
    pos = np.bincount(xs[ys == 1], minlength=size).astype(np.float64)
    return cnt, pos


def region_losses_from_counts(cnt: np.ndarray, pos: np.ndarray, family: RegionFamily,
                              force_generic: bool = False) -> np.ndarray:
    """Per-region minimized log-loss. Threshold grids use one prefix-sum pass
    unless force_generic asks for the bitmap scan (the two must agree)."""
    total_n = cnt.sum()
    total_k = pos.sum()
    if family.kind == THRESHOLD_GRID and not force_generic:
        n0 = np.cumsum(cnt)
        k0 = np.cumsum(pos)
    else:
        bm = family.bitmaps
        n0 = bm @ cnt
        k0 = bm @ pos
    n1 = total_n - n0
    k1 = total_k - k0
    return _nll(n0, k0) + _nll(n1, k1)


def mle_from_counts(cnt: np.ndarray, pos: np.ndarray,
                    family: RegionFamily) -> tuple[Hypothesis, float]:
    """Loss-minimizing hypothesis from per-context count arrays, plus its loss.

    Per region the optimal theta_j is the empirical frequency k_j/n_j (1/2 when
    the side is empty); ties between regions break to the lowest index.
    """
    losses = region_losses_from_counts(cnt, pos, family)
    idx = int(np.argmin(losses))
    if family.kind == THRESHOLD_GRID:
        n0 = float(cnt[: idx + 1].sum())
        k0 = float(pos[: idx + 1].sum())
    else:
        row = family.bitmaps[idx]
        n0 = float(cnt[row].sum())
        k0 = float(pos[row].sum())
    n1 = float(cnt.sum() - n0)
    k1 = float(pos.sum() - k0)
    theta0 = k0 / n0 if n0 > 0 else 0.5
    theta1 = k1 / n1 if n1 > 0 else 0.5
    return Hypothesis(idx, theta0, theta1), float(losses[idx])


def mle_oracle(data, family: RegionFamily) -> Hypothesis:
    """Empirical-loss minimizer over (region, theta0, theta1). Empty data allowed."""
    cnt, pos = examples_to_counts(data, family.universe.size)
    return mle_from_counts(cnt, pos, family)[0]


def offline_best_loss(data, family: RegionFamily) -> float:
    """Cumulative log-loss of the best fixed hypothesis on the full sequence."""
    cnt, pos = examples_to_counts(data, family.universe.size)
    return mle_from_counts(cnt, pos, family)[1]


class ComparatorTracker:
    """Incremental offline-best loss over growing prefixes of one trajectory."""

    def __init__(self, family: RegionFamily):
        self.family = family
        u = family.universe.size
        self.cnt = np.zeros(u)
        self.pos = np.zeros(u)

    def update(self, x: int, y: int) -> float:
        """Account for one more example and return the best loss on the prefix so far."""
        self.cnt[x] += 1
        self.pos[x] += y
        return float(region_losses_from_counts(self.cnt, self.pos, self.family).min())
