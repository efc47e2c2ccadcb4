"""Probability-assignment strategies: FTPL over an MLE oracle, the exact Bayes
mixture over an epsilon-cover of regions, the KT add-beta rule, and the uniform
baseline.

Mixture bookkeeping lives entirely in the log domain. The per-region marginal
of a label prefix under the uniform (theta0, theta1) prior factorizes into two
Beta integrals B(k, n) = 1/((n+1) * binom(n, k)), so sequential predictions are
the add-one Laplace rule per region side, reweighted by the region marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import ContextUniverse
from .errors import ConfigError, NumericalAssertionError
from .hypotheses import (RegionFamily, Hypothesis, THRESHOLD_GRID, evaluate,
                         examples_to_counts, mle_from_counts)


def laplace_integral_log(k: int, n: int) -> float:
    """ln of the Beta integral over [0,1] of t^k (1-t)^(n-k), via log-gamma.

    Equals -ln(n+1) - ln binom(n, k).
    """
    if k < 0 or n < 0 or k > n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return float(-math.log(n + 1) - log_binom)


def kt_predict(labels: Sequence[int], beta: float = 0.5) -> float:
    """Add-beta sequential probability of the next label being 1.

    beta = 1/2 is the KT estimator; beta = 1 the Laplace rule.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    s = float(sum(labels))
    t = len(labels)
    return (s + beta) / (t + 2.0 * beta)


def region_distance(bm1: np.ndarray, bm2: np.ndarray) -> float:
    """Disagreement probability under the uniform base measure (normalized Hamming)."""
    return float(np.mean(bm1 != bm2))


def epsilon_cover(family: RegionFamily, eps: float) -> np.ndarray:
    """Region indices covering the family within distance eps under the base measure.

    Threshold grids take every ceil(eps*U)-th threshold plus the last one,
    giving at most ceil(1/eps) + 1 elements. Explicit families use a greedy
    farthest-point sweep seeded at region 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = len(family)
    if eps >= 1.0 or m == 1:
        return np.array([0], dtype=np.int64)
    u = family.universe.size
    if family.kind == THRESHOLD_GRID:
        stride = max(1, int(math.ceil(eps * u)))
        idx = list(range(0, u, stride))
        if idx[-1] != u - 1:
            idx.append(u - 1)
        return np.asarray(idx, dtype=np.int64)
    bm = family.bitmaps.astype(np.float64)
    centers = [0]

    def dist_to(c):
        row = bm[c]
        return np.mean(np.abs(bm - row[None, :]), axis=1)
    nearest = dist_to(0)
    while nearest.max() > eps:
        j = int(np.argmax(nearest))
        centers.append(j)
        nearest = np.minimum(nearest, dist_to(j))
    return np.sort(np.asarray(centers, dtype=np.int64))


@dataclass
class MixtureState:
    """Sufficient statistics of the uniform mixture over cover regions.

    Per element i: counts n[i, j], k[i, j] on side j (0 inside, 1 outside) and
    the log marginal ln[B(k0, n0) * B(k1, n1)] of the labels seen so far.
    """

    cover: np.ndarray
    member: np.ndarray
    n: np.ndarray
    k: np.ndarray
    log_marginal: np.ndarray

    @property
    def size(self) -> int:
        return len(self.cover)

    @property
    def log_normalizer(self) -> float:
        """ln q(y_1:t || x_1:t): log-sum-exp of element marginals minus ln m."""
        return float(logsumexp(self.log_marginal) - math.log(self.size))


def init_mixture_state(family: RegionFamily, cover: Sequence[int]) -> MixtureState:
    cover = np.asarray(cover, dtype=np.int64)
    if cover.size == 0:
        raise ValueError("cover must be nonempty")
    member = family.bitmaps[cover]
    m = cover.size
    return MixtureState(
        cover=cover,
        member=member,
        n=np.zeros((m, 2)),
        k=np.zeros((m, 2)),
        log_marginal=np.zeros(m),
    )


def _side_counts(state: MixtureState, x: int) -> tuple[np.ndarray, np.ndarray]:
    inside = state.member[:, x]
    n_j = np.where(inside, state.n[:, 0], state.n[:, 1])
    k_j = np.where(inside, state.k[:, 0], state.k[:, 1])
    return n_j, k_j


def mixture_predict(state: MixtureState, x: int) -> float:
    """Posterior-weighted add-one rule: sum_i w_i (k_j + 1)/(n_j + 2) on x's side.

    The per-element factor is the exact ratio of consecutive Beta integrals, so
    the sequential products telescope to the joint mixture probability.
    """
    n_j, k_j = _side_counts(state, x)
    w = np.exp(state.log_marginal - logsumexp(state.log_marginal))
    q1 = float(w @ ((k_j + 1.0) / (n_j + 2.0)))
    # Laplace factors are interior, so the mixture is too
    return min(max(q1, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))


def mixture_update(state: MixtureState, x: int, y: int) -> MixtureState:
    """Account one observation: bump counts on x's side, shift log marginals by
    the log Laplace factor of the realized label."""
    inside = state.member[:, x]
    n_j, k_j = _side_counts(state, x)
    if y == 1:
        delta = np.log((k_j + 1.0) / (n_j + 2.0))
    else:
        delta = np.log((n_j - k_j + 1.0) / (n_j + 2.0))
    rows = np.arange(state.size)
    col = np.where(inside, 0, 1)
    n = state.n.copy()
    k = state.k.copy()
    n[rows, col] += 1.0
    k[rows, col] += float(y)
    return MixtureState(state.cover, state.member, n, k, state.log_marginal + delta)


def mixture_log_marginal_from_scratch(state: MixtureState) -> np.ndarray:
    """Recompute each element's log marginal from its counts (oracle for tests)."""
    out = np.empty(state.size)
    for i in range(state.size):
        out[i] = (laplace_integral_log(int(state.k[i, 0]), int(state.n[i, 0]))
                  + laplace_integral_log(int(state.k[i, 1]), int(state.n[i, 1])))
    return out


@dataclass(frozen=True)
class FtplConfig:
    """FTPL knobs: Poisson rate of hallucinated samples and truncation level."""

    n: float
    alpha: float

    def __post_init__(self):
        if self.n < 0:
            raise ConfigError(f"ftpl.n: {self.n} must be >= 0")
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"ftpl.alpha: {self.alpha} outside (0, 1/2)")


def truncation_range(alpha: float) -> tuple[float, float]:
    """Closed range of predictions emitted through the (f + alpha)/(1 + 2 alpha) map."""
    return alpha / (1.0 + 2.0 * alpha), (1.0 + alpha) / (1.0 + 2.0 * alpha)


@dataclass(frozen=True)
class TruncatedClassView:
    """A hypothesis seen through the truncation map, keeping predictions interior."""

    alpha: float
    hypothesis: Hypothesis

    def predict(self, family: RegionFamily, x: int) -> float:
        return (evaluate(family, self.hypothesis, x) + self.alpha) / (1.0 + 2.0 * self.alpha)


def _ftpl_predict_from_counts(cnt: np.ndarray, pos: np.ndarray, config: FtplConfig,
                              family: RegionFamily, universe: ContextUniverse,
                              rng: np.random.Generator, x_t: int) -> float:
    u = universe.size
    n_hal = int(rng.poisson(config.n))
    if n_hal > 0:
        hx = rng.integers(0, u, size=n_hal)
        hy = rng.integers(0, 2, size=n_hal)
        cnt = cnt + np.bincount(hx, minlength=u)
        pos = pos + np.bincount(hx[hy == 1], minlength=u)
    h, _ = mle_from_counts(cnt, pos, family)
    q = (evaluate(family, h, x_t) + config.alpha) / (1.0 + 2.0 * config.alpha)
    lo, hi = truncation_range(config.alpha)
    if not lo <= q <= hi:
        raise NumericalAssertionError(f"FTPL prediction {q} escaped [{lo}, {hi}]")
    return q


def ftpl_step(history_xs: Sequence[int], history_ys: Sequence[int], config: FtplConfig,
              family: RegionFamily, universe: ContextUniverse,
              rng: np.random.Generator, x_t: int) -> float:
    """One FTPL prediction: refit the oracle on history plus Poisson(n) fresh
    hallucinated uniform samples, then truncate the fitted value at x_t."""
    xs = np.asarray(history_xs, dtype=np.int64)
    ys = np.asarray(history_ys, dtype=np.int64)
    cnt, pos = examples_to_counts((xs, ys), universe.size)
    return _ftpl_predict_from_counts(cnt, pos, config, family, universe, rng, x_t)


class UniformLearner:
    """Baseline assigning 1/2 always; per-round loss is exactly ln 2."""

    name = "uniform"

    def reset(self, universe: ContextUniverse, rng: np.random.Generator) -> None:
        pass

    def predict(self, x: int) -> float:
        return 0.5

    def update(self, x: int, y: int) -> None:
        pass


class KtLearner:
    """Context-oblivious add-beta estimator over the label stream."""

    def __init__(self, beta: float = 0.5):
        if beta <= 0:
            raise ConfigError(f"kt.beta: {beta} must be positive")
        self.beta = beta
        self.name = f"kt(beta={beta:g})"

    def reset(self, universe: ContextUniverse, rng: np.random.Generator) -> None:
        self._ones = 0
        self._rounds = 0

    def predict(self, x: int) -> float:
        return (self._ones + self.beta) / (self._rounds + 2.0 * self.beta)

    def update(self, x: int, y: int) -> None:
        self._ones += y
        self._rounds += 1


class MixtureLearner:
    """Uniform Bayes mixture over an epsilon-cover of the region family."""

    def __init__(self, family: RegionFamily, eps: float):
        self.family = family
        self.eps = eps
        self.cover = epsilon_cover(family, eps)
        self.name = f"vc_mixture(eps={eps:g})"
        self.state: Optional[MixtureState] = None

    def reset(self, universe: ContextUniverse, rng: np.random.Generator) -> None:
        if universe.size != self.family.universe.size:
            raise ConfigError("learner.vc_mixture: family universe mismatch")
        self.state = init_mixture_state(self.family, self.cover)

    def predict(self, x: int) -> float:
        return mixture_predict(self.state, x)

    def update(self, x: int, y: int) -> None:
        self.state = mixture_update(self.state, x, y)


class FtplLearner:
    """Follow-the-perturbed-leader over the MLE oracle with truncated output."""

    def __init__(self, config: FtplConfig, family: RegionFamily):
        self.config = config
        self.family = family
        self.name = f"ftpl(n={config.n:g},alpha={config.alpha:g})"

    def reset(self, universe: ContextUniverse, rng: np.random.Generator) -> None:
        self.universe = universe
        self.rng = rng
        u = universe.size
        self._cnt = np.zeros(u)
        self._pos = np.zeros(u)

    def predict(self, x: int) -> float:
        return _ftpl_predict_from_counts(self._cnt, self._pos, self.config,
                                         self.family, self.universe, self.rng, x)

    def update(self, x: int, y: int) -> None:
        self._cnt[x] += 1.0
        self._pos[x] += y


def default_ftpl_tuning(T: int, sigma: float) -> tuple[float, float]:
    """Rate/truncation pair n = round(T^{4/5} / sqrt(sigma)), alpha = 1/T."""
    return float(round(T ** 0.8 / math.sqrt(sigma))), 1.0 / T


def learner_from_spec(spec: dict, family: RegionFamily, universe: ContextUniverse,
                      T: int, sigma: float):
    """Instantiate a learner from its JSON spec.

    {"uniform": {}}, {"kt": {"beta": 0.5}}, {"vc_mixture": {"eps": ...}} with
    eps defaulting to sigma/T^2, or {"ftpl": {"n": ..., "alpha": ...}} with both
    defaulting to the T^{4/5}-style tuning.
    """
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("learner: must be an object with exactly one kind key")
    kind, params = next(iter(spec.items()))
    if not isinstance(params, dict):
        raise ConfigError(f"learner.{kind}: parameters must be an object")
    if kind == "uniform":
        return UniformLearner()
    if kind == "kt":
        return KtLearner(float(params.get("beta", 0.5)))
    if kind == "vc_mixture":
        eps = params.get("eps")
        if eps is None:
            eps = sigma / float(T) ** 2
        return MixtureLearner(family, float(eps))
    if kind == "ftpl":
        n_def, alpha_def = default_ftpl_tuning(T, sigma)
        n = float(params.get("n", n_def))
        alpha = float(params.get("alpha", alpha_def))
        return FtplLearner(FtplConfig(n, alpha), family)
    raise ConfigError(f"learner: unknown kind {kind!r}")
