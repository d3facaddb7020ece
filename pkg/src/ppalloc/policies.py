"""Offline optimum, online policies, and the step-by-step simulator.

Policies are batched state machines: one instance drives ``B`` independent
realizations in lock-step, one column of arrivals per step. A batch of one is
the ordinary single-run case. Policies see the step index, the arriving kinds
and the remaining inventory; they never see stochastic-group labels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import POLICY, as_generator, trial_rng
from .arrival import Realization, Slot

_EMPTY, _T1, _T2 = int(Slot.EMPTY), int(Slot.TYPE1), int(Slot.TYPE2)

# Thresholds such as floor(0.3 * 10) must not lose a unit to representation error.
_FLOOR_SLACK = 1e-9


def _floor(x):
    return np.floor(np.asarray(x, dtype=float) + _FLOOR_SLACK)


class ContractViolation(RuntimeError):
    """A policy tried something the simulator forbids (e.g. selling from empty stock)."""


@dataclass(frozen=True)
class MarketParams:
    b: int
    n: int
    a: float
    p: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"horizon n must be >= 3, got {self.n}")
        if not 1 <= self.b <= self.n:
            raise ValueError(f"inventory b must satisfy 1 <= b <= n, got b={self.b}, n={self.n}")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


def opt_offline(n1: int, n2: int, b: int, a: float) -> float:
    """Clairvoyant revenue: every Type-1 first, then Type-2 into leftover stock."""
    if min(n1, n2, b) < 0:
        raise ValueError("counts must be non-negative")
    return min(b, n1) + a * min(n2, max(b - n1, 0))


class Policy:
    """Base class. Subclasses implement :meth:`decide`.

    ``decide`` must return a boolean accept mask and update internal counters
    for the accepted rows. It is called once per step for the whole batch;
    rows whose arrival is EMPTY must come back ``False``.
    """

    name = "policy"
    split_counters = False

    def __init__(self, params: MarketParams):
        self.params = params
        self.q1 = self.q2 = None

    def reset(self, batch: int, rngs: Sequence[np.random.Generator] | None = None) -> None:
        self.q1 = np.zeros(batch, dtype=np.int64)
        self.q2 = np.zeros(batch, dtype=np.int64)

    def decide(self, step: int, kinds: np.ndarray, inventory: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _commit(self, kinds, acc1, acc2) -> np.ndarray:
        self.q1 += acc1
        self.q2 += acc2
        return acc1 | acc2

    def state(self) -> dict:
        """Counters and parameters as plain Python values (for golden traces)."""
        out = {"name": self.name, "params": vars(self.params).copy()}
        for key in ("q1", "q2", "q2e", "q2f", "o1", "o2"):
            val = getattr(self, key, None)
            if val is not None:
                out[key] = val.tolist()
        return out


class AcceptAll(Policy):
    name = "accept-all"

    def decide(self, step, kinds, inventory):
        avail = inventory > 0
        return self._commit(kinds, (kinds == _T1) & avail, (kinds == _T2) & avail)


class RejectAll(Policy):
    name = "reject-all"

    def decide(self, step, kinds, inventory):
        return np.zeros(kinds.shape, dtype=bool)


class BallQueyranne(Policy):
    """Fixed booking limit: Type-2 accepted while fewer than floor(b / (2 - a)) were."""

    name = "ball"

    def __init__(self, params):
        super().__init__(params)
        self.limit = int(_floor(params.b / (2 - params.a)))

    def decide(self, step, kinds, inventory):
        avail = inventory > 0
        acc1 = (kinds == _T1) & avail
        acc2 = (kinds == _T2) & avail & (self.q2 < self.limit)
        return self._commit(kinds, acc1, acc2)


class UniformRate(Policy):
    """Random-order style baseline: keep total sales at or below floor(lambda * b).

    Type-1 customers are always served while stock remains; the rate cap
    only gates Type-2.
    """

    name = "uniform"

    def decide(self, step, kinds, inventory):
        avail = inventory > 0
        cap = (step * self.params.b) // self.params.n
        acc1 = (kinds == _T1) & avail
        acc2 = (kinds == _T2) & avail & (self.q1 + self.q2 < cap)
        return self._commit(kinds, acc1, acc2)


class Alg1(Policy):
    """Non-adaptive policy: an evolving threshold floor(lambda p b) shared with
    Type-1 sales, backed by a fixed Type-2 quota floor(theta b),
    theta = (1 - p) / (2 - a). The evolving rule is tried first."""

    name = "alg1"
    split_counters = True

    def __init__(self, params):
        super().__init__(params)
        if params.p >= 1:
            raise ValueError("alg1 needs p < 1")
        self.theta = (1 - params.p) / (2 - params.a)
        self.fixed_limit = int(_floor(self.theta * params.b))
        self.q2e = self.q2f = None

    def reset(self, batch, rngs=None):
        super().reset(batch, rngs)
        self.q2e = np.zeros(batch, dtype=np.int64)
        self.q2f = np.zeros(batch, dtype=np.int64)

    def evolving_limit(self, step: int) -> int:
        prm = self.params
        return int(_floor(step * prm.p * prm.b / prm.n))

    def decide(self, step, kinds, inventory):
        avail = inventory > 0
        acc1 = (kinds == _T1) & avail
        t2 = (kinds == _T2) & avail
        by_evolving = t2 & (self.q1 + self.q2e < self.evolving_limit(step))
        by_fixed = t2 & ~by_evolving & (self.q2f < self.fixed_limit)
        self.q2e += by_evolving
        self.q2f += by_fixed
        return self._commit(kinds, acc1, by_evolving | by_fixed)


def u_bounds(o1, o2, lam, params: MarketParams, delta: float):
    """Data-driven upper bounds ``(u1, u12)`` on n1 and n1 + n2.

    Both equal ``b`` while ``lam < delta``. Works elementwise on arrays.
    """
    o1 = np.asarray(o1, dtype=float)
    o2 = np.asarray(o2, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p, n, b = params.p, params.n, params.b
    if p <= 0:
        raise ValueError("u-bounds need p > 0")
    early = lam < delta
    with np.errstate(all="ignore"):
        tail = (1 - lam) * (1 - p) * n
        denom = 1 - p + lam * p
        u1 = np.minimum(o1 / (lam * p), (o1 + tail) / denom)
        s = o1 + o2
        u12 = np.minimum(s / (lam * p), (s + tail) / denom)
    u1 = np.where(early, float(b), u1)
    u12 = np.where(early, float(b), u12)
    if u1.ndim == 0:
        return float(u1), float(u12)
    return u1, u12


class Alg2(Policy):
    """Adaptive policy targeting ratio ``c``.

    Type-2 is accepted when the observed prefix implies total demand below b
    (u12 < b), otherwise while q2 <= floor(phi b + c (b - u1)^+), with
    phi = (1 - c) / (1 - a). The first condition is tried first.
    """

    name = "alg2"

    def __init__(self, params, c: float):
        super().__init__(params)
        if not 0 <= c < 1:
            raise ValueError(f"alg2 needs 0 <= c < 1, got {c}")
        if params.p <= 0:
            raise ValueError("alg2 is undefined at p = 0; use alg1 or ball instead")
        self.c = c
        self.phi = (1 - c) / (1 - params.a)
        self.delta = self.phi * params.b / params.n
        self.o1 = self.o2 = None

    def reset(self, batch, rngs=None):
        super().reset(batch, rngs)
        self.o1 = np.zeros(batch, dtype=np.int64)
        self.o2 = np.zeros(batch, dtype=np.int64)

    def threshold(self, u1):
        b = self.params.b
        return _floor(self.phi * b + self.c * np.maximum(b - np.asarray(u1, dtype=float), 0.0))

    def decide(self, step, kinds, inventory):
        prm = self.params
        is1 = kinds == _T1
        is2 = kinds == _T2
        self.o1 += is1
        self.o2 += is2
        u1, u12 = u_bounds(self.o1, self.o2, np.full(kinds.shape, step / prm.n), prm, self.delta)
        avail = inventory > 0
        acc1 = is1 & avail
        t2 = is2 & avail
        acc2 = t2 & ((u12 < prm.b) | (self.q2 <= self.threshold(u1)))
        return self._commit(kinds, acc1, acc2)


class Mixture(Policy):
    """Flip a weighted coin once per run and delegate every decision to the winner."""

    name = "mixture"

    def __init__(self, components: Sequence[tuple[Policy, float]], seed: int = 0):
        if not components:
            raise ValueError("mixture needs at least one component")
        weights = np.array([w for _, w in components], dtype=float)
        if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must be non-negative and sum to 1, got {weights.tolist()}")
        params = components[0][0].params
        super().__init__(params)
        self.components = [pol for pol, _ in components]
        self.cum_weights = np.cumsum(weights)
        self.seed = seed
        self.choices = None

    def reset(self, batch, rngs=None):
        super().reset(batch, rngs)
        if rngs is None:
            rngs = [trial_rng(self.seed, i, POLICY) for i in range(batch)]
        draws = np.array([as_generator(r).random() for r in rngs])
        self.choices = np.minimum(np.searchsorted(self.cum_weights, draws, side="right"),
                                  len(self.components) - 1)
        for comp in self.components:
            comp.reset(batch, rngs)

    def decide(self, step, kinds, inventory):
        accept = np.zeros(kinds.shape, dtype=bool)
        for idx, comp in enumerate(self.components):
            mine = self.choices == idx
            acc = comp.decide(step, kinds, inventory)
            accept |= acc & mine
        return self._commit(kinds, accept & (kinds == _T1), accept & (kinds == _T2))


def mixture_policy(components: Sequence[tuple[Policy, float]], seed: int = 0) -> Mixture:
    return Mixture(components, seed)


def alg1_policy(params: MarketParams) -> Alg1:
    return Alg1(params)


def alg2_policy(c: float, params: MarketParams) -> Alg2:
    return Alg2(params, c)


def ball_queyranne_policy(params: MarketParams) -> BallQueyranne:
    return BallQueyranne(params)


def uniform_rate_policy(params: MarketParams) -> UniformRate:
    return UniformRate(params)


# -- simulation -------------------------------------------------------------

@dataclass
class AllocationOutcome:
    revenue: float
    q1_final: int
    q2_final: int
    trajectory: list[dict] = field(default_factory=list)


@dataclass
class BatchOutcome:
    revenue: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


def simulate(policy: Policy, arrivals: np.ndarray, params: MarketParams,
             rngs: Sequence[np.random.Generator] | None = None, trace: list | None = None) -> BatchOutcome:
    """Run ``policy`` over every row of ``arrivals`` (shape ``(B, n)``).

    When ``trace`` is a list and ``B == 1`` one dict per step is appended to it.
    """
    arrivals = np.atleast_2d(arrivals)
    batch, n = arrivals.shape
    if n != params.n:
        raise ValueError(f"realization length {n} does not match n={params.n}")
    by_step = np.ascontiguousarray(arrivals.T)
    inventory = np.full(batch, params.b, dtype=np.int64)
    q1 = np.zeros(batch, dtype=np.int64)
    q2 = np.zeros(batch, dtype=np.int64)
    policy.reset(batch, rngs)
    for step in range(1, n + 1):
        kinds = by_step[step - 1]
        active = kinds != _EMPTY
        if active.any():
            accept = np.asarray(policy.decide(step, kinds, inventory), dtype=bool)
            if np.any(accept & ~active):
                raise ContractViolation(f"{policy.name} accepted an empty slot at step {step}")
            if np.any(accept & (inventory <= 0)):
                raise ContractViolation(f"{policy.name} accepted with no inventory left at step {step}")
            inventory -= accept
            q1 += accept & (kinds == _T1)
            q2 += accept & (kinds == _T2)
        else:
            accept = np.zeros(batch, dtype=bool)
        if trace is not None:
            trace.append(_trace_row(step, n, int(kinds[0]), bool(accept[0]), int(q1[0]), int(q2[0]),
                                    policy, int(inventory[0])))
    revenue = q1 + params.a * q2
    return BatchOutcome(revenue, q1, q2)


def _trace_row(step, n, kind, decision, q1, q2, policy, inventory):
    row = {"step": step, "lambda": step / n, "arrival_kind": kind, "decision": decision,
           "q1": q1, "q2e": None, "q2f": None, "q2": q2, "inventory_left": inventory}
    if policy.split_counters:
        row["q2e"] = int(policy.q2e[0])
        row["q2f"] = int(policy.q2f[0])
    return row


def run_policy(policy: Policy, r: Realization, params: MarketParams, rng=None) -> AllocationOutcome:
    """Single run with a full per-step trajectory."""
    if r.n != params.n:
        raise ValueError(f"realization has n={r.n} but params say n={params.n}")
    trace: list[dict] = []
    rngs = None if rng is None else [as_generator(rng)]
    out = simulate(policy, r.arrivals[None, :], params, rngs=rngs, trace=trace)
    return AllocationOutcome(float(out.revenue[0]), int(out.q1[0]), int(out.q2[0]), trace)


TRAJECTORY_COLUMNS = ("step", "lambda", "arrival_kind", "decision", "q1", "q2e", "q2f", "q2", "inventory_left")
_KIND_NAMES = {_EMPTY: "0", _T1: "1", _T2: "a"}


def trajectory_csv(outcome: AllocationOutcome) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for row in outcome.trajectory:
        writer.writerow([
            row["step"], f"{row['lambda']:.6g}", _KIND_NAMES[row["arrival_kind"]],
            "accept" if row["decision"] else "reject", row["q1"],
            "" if row["q2e"] is None else row["q2e"],
            "" if row["q2f"] is None else row["q2f"],
            row["q2"], row["inventory_left"],
        ])
    return buf.getvalue()
