"""Sigma-smooth context distributions, adaptive context rules, and label strategies.

A distribution over the finite universe is sigma-smooth (w.r.t. the uniform base
measure) iff every atom carries mass at most 1/(sigma*U); on finite universes the
singleton bound is equivalent to the all-measurable-sets condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ContextUniverse, GameHistory
from .errors import ConfigError, SmoothnessError
from .hypotheses import Hypothesis, RegionFamily, evaluate

SUM_TOL = 1e-12
MASS_TOL = 1e-12


def validate_smooth(pmf: np.ndarray, sigma: float) -> tuple[bool, Optional[int]]:
    """Check sigma-smoothness of a pmf; on failure return the first offending index.

    Passing requires nonnegative entries summing to 1 within 1e-12 and
    max_x pmf(x) <= 1/(sigma*U) + 1e-12.
    """
    pmf = np.asarray(pmf, dtype=np.float64)
    if not 0.0 < sigma <= 1.0:
        return False, None
    if pmf.ndim != 1 or pmf.size == 0:
        return False, None
    neg = np.flatnonzero(pmf < 0.0)
    if neg.size:
        return False, int(neg[0])
    if abs(float(pmf.sum()) - 1.0) > SUM_TOL:
        return False, None
    cap = 1.0 / (sigma * pmf.size) + MASS_TOL
    over = np.flatnonzero(pmf > cap)
    if over.size:
        return False, int(over[0])
    return True, None


@dataclass(frozen=True)
class SmoothDistribution:
    """A pmf over the universe certified sigma-smooth at construction time."""

    pmf: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "pmf", np.asarray(self.pmf, dtype=np.float64))
        ok, idx = validate_smooth(self.pmf, self.sigma)
        if not ok:
            where = f" at index {idx}" if idx is not None else ""
            raise SmoothnessError(
                f"pmf is not {self.sigma}-smooth{where} "
                f"(cap 1/(sigma*U) = {1.0 / (self.sigma * max(len(self.pmf), 1)):.6g})"
            )

    @classmethod
    def uniform(cls, size: int, sigma: float = 1.0) -> "SmoothDistribution":
        return cls(np.full(size, 1.0 / size), sigma)

    @classmethod
    def uniform_on(cls, size: int, support: Sequence[int], sigma: float) -> "SmoothDistribution":
        support = np.asarray(support, dtype=np.int64)
        pmf = np.zeros(size)
        pmf[support] = 1.0 / support.size
        return cls(pmf, sigma)


def min_support_size(sigma: float, size: int) -> int:
    """Smallest subset size ceil(sigma*U) on which a uniform pmf is sigma-smooth."""
    return int(math.ceil(sigma * size - 1e-12))


def greedy_label(q1: float) -> int:
    """Per-round loss-maximizing label: the side the learner considers less likely.

    Ties at q1 = 1/2 resolve to 0 for determinism.
    """
    return 0 if q1 >= 0.5 else 1


def realizable_label(family: RegionFamily, f_star: Hypothesis, x: int,
                     rng: np.random.Generator) -> int:
    """Draw y ~ Bernoulli(f*(x))."""
    return int(rng.random() < evaluate(family, f_star, x))


class StaticSubsetRule:
    """Context rule: uniform on a fixed subset of the universe."""

    tag = "static"

    def __init__(self, subset: Optional[Sequence[int]] = None):
        self.subset = None if subset is None else np.asarray(subset, dtype=np.int64)

    def reset(self, universe: ContextUniverse, sigma: float) -> None:
        k = min_support_size(sigma, universe.size)
        if self.subset is None:
            self._set = np.arange(k)
        else:
            self._set = self.subset

    def observe(self, x: int, q: float, y: int) -> None:
        pass

    def target_set(self, history: GameHistory) -> np.ndarray:
        return self._set


class AdaptiveExtremenessRule:
    """Context rule concentrating where the learner's last prediction was most extreme.

    Tracks the most recent prediction per context (1/2 before any visit) and
    proposes the ceil(sigma*U) contexts with the largest |q - 1/2|, a heuristic
    stress rule with no optimality claim. Ties break to the lowest context id.
    """

    tag = "adaptive"

    def reset(self, universe: ContextUniverse, sigma: float) -> None:
        self._k = min_support_size(sigma, universe.size)
        self._last_q = np.full(universe.size, 0.5)

    def observe(self, x: int, q: float, y: int) -> None:
        self._last_q[x] = q

    def target_set(self, history: GameHistory) -> np.ndarray:
        extremeness = np.abs(self._last_q - 0.5)
        order = np.argsort(-extremeness, kind="stable")
        return np.sort(order[: self._k])


class GreedyLabelRule:
    tag = "greedy"

    def reset(self, universe, rng, family=None):
        pass

    def label(self, history: GameHistory, x: int, q: float) -> int:
        return greedy_label(q)


class RealizableLabelRule:
    """Labels drawn from a fixed hypothesis: y ~ Bernoulli(f*(x))."""

    tag = "realizable"

    def __init__(self, f_star: Hypothesis):
        self.f_star = f_star

    def reset(self, universe, rng, family=None):
        if family is None:
            raise ConfigError("adversary.label: realizable rule needs a hypothesis family")
        self._rng = rng
        self._family = family

    def label(self, history: GameHistory, x: int, q: float) -> int:
        return realizable_label(self._family, self.f_star, x, self._rng)


class FixedSequenceLabelRule:
    """Labels replayed from a fixed list; raises if the game outruns it."""

    tag = "fixed_sequence"

    def __init__(self, labels: Sequence[int]):
        self.labels = [int(v) for v in labels]
        if any(v not in (0, 1) for v in self.labels):
            raise ConfigError("adversary.labels: entries must be 0 or 1")

    def reset(self, universe, rng, family=None):
        pass

    def label(self, history: GameHistory, x: int, q: float) -> int:
        t = len(history)
        if t >= len(self.labels):
            raise ConfigError(f"adversary.labels: exhausted after {len(self.labels)} rounds")
        return self.labels[t]


class AdversaryPolicy:
    """Adaptive context rule plus label rule, owning per-trajectory RNG.

    Every emitted distribution is validated sigma-smooth on construction, so a
    violation anywhere in a run surfaces as SmoothnessError.
    """

    def __init__(self, context_rule, label_rule, sigma: float, name: str = ""):
        if not 0.0 < sigma <= 1.0:
            raise ConfigError(f"adversary.sigma: {sigma} outside (0, 1]")
        self.context_rule = context_rule
        self.label_rule = label_rule
        self.sigma = sigma
        self.name = name or f"subset_uniform[{context_rule.tag}]+{label_rule.tag}"
        self.family: Optional[RegionFamily] = None

    def reset(self, universe: ContextUniverse, rng: np.random.Generator) -> None:
        self.universe = universe
        self.context_rule.reset(universe, self.sigma)
        self.label_rule.reset(universe, rng, family=self.family)

    def context_distribution(self, history: GameHistory) -> SmoothDistribution:
        subset = np.asarray(self.context_rule.target_set(history), dtype=np.int64)
        k = min_support_size(self.sigma, self.universe.size)
        if subset.size < k:
            raise SmoothnessError(
                f"target set of size {subset.size} below minimum {k} for sigma={self.sigma}")
        return SmoothDistribution.uniform_on(self.universe.size, subset, self.sigma)

    def label(self, history: GameHistory, x: int, q: float) -> int:
        return self.label_rule.label(history, x, q)

    def observe(self, x: int, q: float, y: int) -> None:
        self.context_rule.observe(x, q, y)


def subset_smooth_adversary(sigma: float, target_set_rule=None, label_rule=None,
                            rule: str = "static",
                            subset: Optional[Sequence[int]] = None) -> AdversaryPolicy:
    """Maximally concentrated smooth adversary: uniform on a history-dependent subset.

    target_set_rule may be any object with reset/observe/target_set; otherwise
    `rule` selects the built-in static or adaptive rule. Sets smaller than
    ceil(sigma*U) are rejected at emission time.
    """
    if target_set_rule is None:
        if rule == "static":
            target_set_rule = StaticSubsetRule(subset)
        elif rule == "adaptive":
            target_set_rule = AdaptiveExtremenessRule()
        else:
            raise ConfigError(f"adversary.rule: unknown rule {rule!r}")
    if label_rule is None:
        label_rule = GreedyLabelRule()
    return AdversaryPolicy(target_set_rule, label_rule, sigma)


def adversary_from_spec(spec: dict, sigma: Optional[float] = None,
                        family: Optional[RegionFamily] = None) -> AdversaryPolicy:
    """Build a policy from the JSON adversary spec.

    Context side: {"context": "subset_uniform", "sigma": 0.1, "rule": "static|adaptive"}.
    Label side: {"label": "greedy" | "realizable" | "fixed_sequence", ...}.
    An explicit `sigma` argument (e.g. a sweep cell value) overrides the spec's.
    """
    if not isinstance(spec, dict):
        raise ConfigError("adversary: must be an object")
    context = spec.get("context", "subset_uniform")
    if context != "subset_uniform":
        raise ConfigError(f"adversary.context: unknown kind {context!r}")
    sig = sigma if sigma is not None else spec.get("sigma")
    if sig is None:
        raise ConfigError("adversary.sigma: missing")
    rule = spec.get("rule", "static")

    label_kind = spec.get("label", "greedy")
    if label_kind == "greedy":
        label_rule = GreedyLabelRule()
    elif label_kind == "realizable":
        fs = spec.get("f_star")
        if not isinstance(fs, dict):
            raise ConfigError("adversary.f_star: required for realizable labels")
        label_rule = RealizableLabelRule(Hypothesis(
            int(fs.get("region_index", 0)), float(fs["theta0"]), float(fs["theta1"])))
    elif label_kind == "fixed_sequence":
        if "labels" not in spec:
            raise ConfigError("adversary.labels: required for fixed_sequence")
        label_rule = FixedSequenceLabelRule(spec["labels"])
    else:
        raise ConfigError(f"adversary.label: unknown kind {label_kind!r}")

    policy = subset_smooth_adversary(float(sig), label_rule=label_rule, rule=rule,
                                     subset=spec.get("set"))
    policy.family = family
    return policy
