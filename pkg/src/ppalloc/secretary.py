"""Single-item secretary selection under partially predictable arrivals.

OSA_gamma rejects the first floor(gamma n) arrivals while recording their best
revenue, then takes the first later arrival at least that good.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from ._rng import ARRIVALS, INSTANCE, as_generator, trial_rng
from .arrival import sample_assignment


@dataclass(frozen=True, eq=False)
class SecretaryInstance:
    revenues: np.ndarray

    def __post_init__(self):
        vals = np.array(self.revenues, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a secretary instance needs at least two customers")
        if np.any(vals <= 0):
            raise ValueError("revenues must be positive")
        if np.unique(vals).size != vals.size:
            raise ValueError("revenues must be distinct")
        vals.setflags(write=False)
        object.__setattr__(self, "revenues", vals)

    @property
    def n(self) -> int:
        return self.revenues.size


@dataclass(frozen=True)
class OsaParams:
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def observe_len(self, n: int) -> int:
        return int(math.floor(self.gamma * n + 1e-9))


def osa_select(arrivals: np.ndarray, gamma: float) -> int | None:
    """Index of the customer OSA_gamma picks from a realized order, or None."""
    arrivals = np.asarray(arrivals, dtype=float)
    g = OsaParams(gamma).observe_len(arrivals.size)
    v_max = arrivals[:g].max() if g > 0 else 0.0
    later = np.flatnonzero(arrivals[g:] >= v_max)
    return None if later.size == 0 else g + int(later[0])


def _realize(inst: SecretaryInstance, p: float, rng: np.random.Generator) -> np.ndarray:
    members, images = sample_assignment(inst.n, p, rng)
    origin = np.arange(inst.n)
    origin[images] = members
    return inst.revenues[origin]


def run_osa(inst: SecretaryInstance, gamma: float, p: float, seed=None) -> bool:
    """One realization; True iff the selected customer has the top revenue."""
    arrivals = _realize(inst, p, as_generator(seed))
    pick = osa_select(arrivals, gamma)
    return pick is not None and arrivals[pick] == arrivals.max()


def asymptotic_success(gamma: float, p: float) -> float:
    """Large-n success probability of OSA_gamma against the worst adversary."""
    if not 0.0 < gamma < 1.0 or not 0.0 < p <= 1.0:
        raise ValueError(f"need 0 < gamma < 1 and 0 < p <= 1, got gamma={gamma}, p={p}")
    x = gamma * p
    return x * math.log(1.0 / (x + 1.0 - p))


def _stationarity(gamma: float, p: float) -> float:
    x = gamma * p + 1.0 - p
    return math.log(x) + gamma * p / x


def optimal_gamma(p: float, tol: float = 1e-10) -> float:
    """Observation fraction maximizing :func:`asymptotic_success`.

    The root of the first-order condition is found by bisection after checking
    on a fine grid that the condition changes sign exactly once on (0, 1).
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if tol > 1e-6:
        raise ValueError("tol must be at most 1e-6")
    eps = 1e-9
    grid = np.linspace(eps, 1 - eps, 4001)
    x = grid * p + 1.0 - p
    vals = np.log(x) + grid * p / x
    flips = np.count_nonzero(np.diff(np.sign(vals)) != 0)
    if flips != 1:
        raise RuntimeError(f"expected one sign change of the optimality condition at p={p}, saw {flips}")
    root = bisect(_stationarity, eps, 1 - eps, args=(p,), xtol=1e-15, maxiter=200)
    if abs(_stationarity(root, p)) > tol:
        raise RuntimeError(f"bisection residual above {tol} at p={p}")
    return float(root)


def randomized_lower_bound(gamma1: float, gamma2: float, q: float, p: float) -> float:
    """Guarantee of running OSA_gamma1 with probability q and OSA_gamma2 otherwise."""
    if not 0.0 < gamma1 < gamma2 < 1.0:
        raise ValueError(f"need 0 < gamma1 < gamma2 < 1, got {gamma1}, {gamma2}")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    s1 = asymptotic_success(gamma1, p)
    s2 = asymptotic_success(gamma2, p)
    bonus = min((1 - q) * p * (1 - p) * (1 - gamma2),
                q * (1 - p) * (gamma2 - gamma1) / (1 - gamma1) * s1)
    return q * s1 + (1 - q) * s2 + bonus


def adversarial_secretary_instance(n: int, gamma: float) -> SecretaryInstance:
    """Order on which OSA_gamma does no better than its asymptotic guarantee.

    The best customer comes first. The k-th best sits at position
    floor(gamma n) + k - 1 for k >= 2, and the leftover ranks fill positions
    2..floor(gamma n) in decreasing revenue. Revenue of rank k is n - k + 1.
    """
    g = OsaParams(gamma).observe_len(n)
    if g < 1:
        raise ValueError(f"floor(gamma * n) must be at least 1, got gamma={gamma}, n={n}")
    rank_at = np.empty(n, dtype=np.int64)
    rank_at[0] = 1
    rank_at[g:] = np.arange(2, n - g + 2)
    rank_at[1:g] = np.arange(n - g + 2, n + 1)
    return SecretaryInstance(n - rank_at + 1.0)


def uniform_adversary_instance(n: int, rng=None) -> SecretaryInstance:
    """Ranks in a uniformly random initial order."""
    return SecretaryInstance(as_generator(rng).permutation(n) + 1.0)


def estimate_success(inst_or_generator: SecretaryInstance | Callable[[np.random.Generator], SecretaryInstance],
                     gamma: float, p: float, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo success rate with a normal-approximation 95% half-width.

    A callable is invoked once per trial with that trial's instance generator.
    """
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    OsaParams(gamma)
    hits = 0
    for t in range(trials):
        inst = inst_or_generator if isinstance(inst_or_generator, SecretaryInstance) \
            else inst_or_generator(trial_rng(seed, t, INSTANCE))
        hits += run_osa(inst, gamma, p, trial_rng(seed, t, ARRIVALS))
    est = hits / trials
    return est, 1.96 * math.sqrt(est * (1 - est) / trials)
