"""Executable analysis quantities: chi-square stability of the perturbed-leader
count vector, Monte Carlo Rademacher complexity, the composite regret-bound
evaluator, and the exact NML (stochastic-complexity) value on fixed contexts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .adversary import SmoothDistribution
from .hypotheses import Hypothesis, RegionFamily

LOG_ZERO = -1e300


@dataclass(frozen=True)
class ChiSquareReport:
    closed_form: float
    bound: float
    brute_force: Optional[float] = None
    discarded: float = 0.0


def chi_square_closed_form(target: SmoothDistribution, n_rate: float) -> tuple[float, float]:
    """Collision form (2U/n) * sum_x D(x)^2 of the one-step chi-square divergence,
    together with its smoothness bound 2/(sigma*n)."""
    if n_rate <= 0:
        raise ValueError("n_rate must be positive")
    u = len(target.pmf)
    value = float(2.0 * u / n_rate * np.sum(target.pmf ** 2))
    bound = 2.0 / (target.sigma * n_rate)
    return value, bound


def chi_square_bruteforce(target: SmoothDistribution, n_rate: float,
                          tail_cutoff: float = 1e-12,
                          max_cells: float = 2e8) -> tuple[float, float]:
    """Chi-square divergence by explicit enumeration of hallucination count vectors.

    Enumerates all ``{n_y(x)}`` with every coordinate in the per-coordinate
    Poisson(n/2U) support above ``tail_cutoff``. P is the product Poisson law;
    Q is the mixture over x* ~ D of P with the (x*, y=1) coordinate shifted up
    by one (label rule y(x) == 1, which the closed form is independent of).
    Returns (sum_S Q^2/P - 1, truncation diagnostic: P-mass plus Q-mass lost).
    """
    if n_rate <= 0:
        raise ValueError("n_rate must be positive")
    if not 0.0 < tail_cutoff < 1.0:
        raise ValueError("tail_cutoff must be in (0, 1)")
    u = len(target.pmf)
    lam = n_rate / (2.0 * u)
    if math.exp(-lam) <= tail_cutoff:
        raise ValueError(f"cutoff {tail_cutoff:g} empties the support at rate {lam:g}")
    pm = [math.exp(-lam)]
    while pm[-1] > tail_cutoff and len(pm) < 500:
        pm.append(pm[-1] * lam / len(pm))
    while len(pm) > 1 and pm[-1] <= tail_cutoff:
        pm.pop()
    pm = np.asarray(pm)
    k_sup = len(pm)
    if k_sup ** (2 * u) > max_cells:
        raise ValueError(
            f"enumeration of {k_sup}^{2 * u} count vectors exceeds {max_cells:g} cells")

    # Axes: (x, y=0) for x = 0..U-1 then (x, y=1); axis 0 is (0, 0) so the
    # mixture ratio, which only touches y=1 coordinates, is constant along it.
    rest_axes = 2 * u - 1
    shape = (k_sup,) * rest_axes

    def axis_vec(pos: int, vec: np.ndarray) -> np.ndarray:
        s = [1] * rest_axes
        s[pos] = k_sup
        return vec.reshape(s)

    p_rest = np.ones(shape)
    for a in range(rest_axes):
        p_rest = p_rest * axis_vec(a, pm)

    # per-coordinate shifted/unshifted pmf ratio; a zero count cannot be shifted into
    ratio = np.zeros(k_sup)
    ratio[1:] = pm[:-1] / pm[1:]
    mix_ratio = np.zeros(shape)
    for x in range(u):
        mix_ratio = mix_ratio + target.pmf[x] * axis_vec(u + x - 1, ratio)

    chi_acc = 0.0
    p_mass = 0.0
    q_mass = 0.0
    for c0 in range(k_sup):
        p_grid = pm[c0] * p_rest
        chi_acc += float(np.sum(p_grid * mix_ratio * mix_ratio))
        p_mass += float(p_grid.sum())
        q_mass += float(np.sum(p_grid * mix_ratio))
    discarded = (1.0 - p_mass) + (1.0 - q_mass)
    return chi_acc - 1.0, discarded


def chi_square_report(target: SmoothDistribution, n_rate: float,
                      tail_cutoff: float = 1e-12, brute: bool = True) -> ChiSquareReport:
    closed, bound = chi_square_closed_form(target, n_rate)
    if not brute:
        return ChiSquareReport(closed, bound)
    bf, discarded = chi_square_bruteforce(target, n_rate, tail_cutoff)
    return ChiSquareReport(closed, bound, bf, discarded)


@dataclass(frozen=True)
class RademacherEstimate:
    mean: float
    stderr: float


def rademacher_estimate(family: RegionFamily, alpha: float, sample_size: int,
                        mc_rounds: int, rng: np.random.Generator) -> RademacherEstimate:
    """Monte Carlo Rademacher complexity of the truncated two-parameter class.

    Candidate sample sets are mc_rounds uniform draws plus the full-universe
    repeat pattern; one shared batch of mc_rounds sign vectors scores them all
    (common random numbers) and the hardest set wins. For each sign vector the
    supremum over hypotheses is exact: by linearity in (theta0, theta1) the
    optimum sits at an endpoint, so sup = max over regions of
    max(0, S_in) + max(0, S_out), then pushed through the truncation's affine map.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    if mc_rounds < 1:
        raise ValueError("mc_rounds must be >= 1")
    u = family.universe.size
    bm = family.bitmaps.astype(np.float64)
    t = sample_size

    candidates = [np.tile(np.arange(u), (t + u - 1) // u)[:t]]
    for _ in range(mc_rounds):
        candidates.append(rng.integers(0, u, size=t))
    eps = rng.integers(0, 2, size=(mc_rounds, t)) * 2.0 - 1.0
    totals = eps.sum(axis=1)

    best = RademacherEstimate(-np.inf, 0.0)
    for xs in candidates:
        onehot = np.zeros((t, u))
        onehot[np.arange(t), xs] = 1.0
        sign_sums = eps @ onehot                      # per-context signed counts
        s_in = sign_sums @ bm.T
        s_out = totals[:, None] - s_in
        sup_raw = np.max(np.maximum(s_in, 0.0) + np.maximum(s_out, 0.0), axis=1)
        sup = (sup_raw + alpha * totals) / ((1.0 + 2.0 * alpha) * t)
        mean = float(sup.mean())
        if mean > best.mean:
            best = RademacherEstimate(mean, float(sup.std(ddof=1) / math.sqrt(len(sup)))
                                      if len(sup) > 1 else 0.0)
    return best


@dataclass(frozen=True)
class BoundInputs:
    """Inputs to the composite FTPL regret bound.

    rad maps a (real) sample size to a Rademacher complexity value for the
    truncated class. With m set, the inner bracket is evaluated at that block
    size; with m None it is minimized over a 32-point log grid in [1, n].
    """

    n_rate: float
    alpha: float
    sigma: float
    T: int
    rad: Callable[[float], float]
    m: Optional[float] = None

    def __post_init__(self):
        if self.n_rate <= 0 or self.T <= 0:
            raise ValueError("n_rate and T must be positive")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must be in (0, 1/2)")
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError("sigma must be in (0, 1]")
        if self.m is not None and not 0.0 < self.m <= self.n_rate:
            raise ValueError("m must be in (0, n_rate]")


def theorem_bound(inputs: BoundInputs) -> float:
    """Evaluate n ln(1/a) + aT + T sqrt(ln(1/a)/(sigma n)) plus T times the
    best inner bracket (1/a) rad(n/m) + n(1-sigma)^m ln(1/a)/m + e^{-n/8}."""
    n, alpha, sigma, t = inputs.n_rate, inputs.alpha, inputs.sigma, inputs.T
    la = math.log(1.0 / alpha)
    base = n * la + alpha * t + t * math.sqrt(la / (sigma * n))

    def bracket(m: float) -> float:
        return (inputs.rad(n / m) / alpha
                + n * (1.0 - sigma) ** m * la / m
                + math.exp(-n / 8.0))

    if inputs.m is not None:
        inner = bracket(inputs.m)
    else:
        grid = np.unique(np.geomspace(1.0, n, 32))
        inner = min(bracket(float(m)) for m in grid)
    return base + t * inner


def nml_value(family: RegionFamily, hypotheses: Sequence[Hypothesis],
              contexts: Sequence[int], max_horizon: int = 22,
              max_hypotheses: int = 10_000) -> float:
    """ln sum over label sequences of the best in-class likelihood on fixed contexts.

    This is the log normalizer of the normalized-maximum-likelihood assignment,
    hence the exact fixed-horizon minimax regret against the finite class. The
    value is permutation invariant in the contexts; they are canonically sorted
    so the computed float is exactly invariant too.
    """
    xs = np.sort(np.asarray(contexts, dtype=np.int64))
    t = xs.size
    n_hyp = len(hypotheses)
    if t < 1 or t > max_horizon:
        raise ValueError(f"horizon {t} outside [1, {max_horizon}]")
    if n_hyp < 1 or n_hyp > max_hypotheses:
        raise ValueError(f"hypothesis count {n_hyp} outside [1, {max_hypotheses}]")
    bm = family.bitmaps
    p1 = np.empty((n_hyp, t))
    for i, h in enumerate(hypotheses):
        inside = bm[h.region_index, xs]
        p1[i] = np.where(inside, h.theta0, h.theta1)
    l1 = np.where(p1 > 0.0, np.log(np.maximum(p1, 1e-320)), LOG_ZERO)
    l0 = np.where(p1 < 1.0, np.log(np.maximum(1.0 - p1, 1e-320)), LOG_ZERO)
    diff = l1 - l0                         # (n_hyp, t)
    base = l0.sum(axis=1)                  # (n_hyp,)

    total = 2 ** t
    chunk = max(1, min(65536, int(2e7 / max(n_hyp, 1))))
    maxima = np.empty(total)
    powers = np.arange(t, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((idx[:, None] >> powers[None, :]) & 1).astype(np.float64)
        scores = bits @ diff.T + base[None, :]
        maxima[start:start + len(idx)] = scores.max(axis=1)
    return float(logsumexp(maxima))
