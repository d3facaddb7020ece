"""Adversarial initial sequences and the partially predictable arrival process.

Every customer slot (empty slots included) joins the stochastic group
independently with probability ``p``; members are then re-ordered by a uniform
permutation among their own positions while everyone else keeps the
adversary's position.

Time is handled as an integer step ``i`` with ``lambda = i / n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from ._rng import as_generator


class Slot(IntEnum):
    EMPTY = 0
    TYPE1 = 1
    TYPE2 = 2


TOKEN_TO_SLOT = {"0": Slot.EMPTY, "1": Slot.TYPE1, "a": Slot.TYPE2}
SLOT_TO_TOKEN = {v: k for k, v in TOKEN_TO_SLOT.items()}


class InvalidInstanceError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InitialSequence:
    """The adversary's ordered slots plus the Type-2 revenue ``a``."""

    slots: np.ndarray
    a: float = 0.5

    def __post_init__(self):
        slots = np.asarray(self.slots, dtype=np.int8).ravel()
        if slots.size < 3:
            raise InvalidInstanceError(f"need n >= 3 slots, got {slots.size}")
        if slots.size and (slots.min() < 0 or slots.max() > 2):
            raise InvalidInstanceError("slot codes must be 0 (empty), 1 (type 1) or 2 (type 2)")
        if not 0.0 < self.a < 1.0:
            raise InvalidInstanceError(f"type-2 revenue must lie in (0, 1), got {self.a}")
        object.__setattr__(self, "slots", _frozen(slots))

    @property
    def n(self) -> int:
        return int(self.slots.size)

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.slots == Slot.TYPE1))

    @property
    def n2(self) -> int:
        return int(np.count_nonzero(self.slots == Slot.TYPE2))

    def eta(self, step: int) -> tuple[int, int]:
        """Type-1 and Type-2 counts among the first ``step`` slots."""
        if not 0 <= step <= self.n:
            raise ValueError(f"step must be in 0..{self.n}, got {step}")
        head = self.slots[:step]
        return int(np.count_nonzero(head == Slot.TYPE1)), int(np.count_nonzero(head == Slot.TYPE2))

    def revenues(self) -> np.ndarray:
        return np.array([0.0, 1.0, self.a])[self.slots]

    def tokens(self) -> str:
        return ",".join(SLOT_TO_TOKEN[Slot(int(s))] for s in self.slots)

    def __eq__(self, other):
        if not isinstance(other, InitialSequence):
            return NotImplemented
        return self.a == other.a and np.array_equal(self.slots, other.slots)

    def __hash__(self):
        return hash((self.a, self.slots.tobytes()))

    def __repr__(self):
        body = self.tokens() if self.n <= 24 else f"n={self.n}, n1={self.n1}, n2={self.n2}"
        return f"InitialSequence({body}, a={self.a})"


def _slot_from_token(tok) -> Slot:
    if isinstance(tok, Slot):
        return tok
    key = str(tok).strip()
    if key not in TOKEN_TO_SLOT:
        raise InvalidInstanceError(f"unknown slot token {tok!r}; expected one of 1, a, 0")
    return TOKEN_TO_SLOT[key]


def build_instance(pattern: str | Iterable, a: float = 0.5) -> InitialSequence:
    """Build a sequence from a token pattern such as ``"1,0,1,a,1,a,1,0"``."""
    if isinstance(pattern, str):
        tokens = [t for t in pattern.split(",")]
    else:
        tokens = list(pattern)
    return InitialSequence(np.array([_slot_from_token(t) for t in tokens], dtype=np.int8), a=a)


def blocks_instance(blocks: Sequence[tuple[str | Slot, int]], a: float = 0.5) -> InitialSequence:
    """Concatenate runs of identical slots, e.g. ``[("a", b), ("0", n - b)]``."""
    parts = []
    for tok, count in blocks:
        if count < 0:
            raise InvalidInstanceError(f"block counts must be non-negative, got {count}")
        parts.append(np.full(count, _slot_from_token(tok), dtype=np.int8))
    return InitialSequence(np.concatenate(parts) if parts else np.zeros(0, np.int8), a=a)


def counts_instance(n: int, n1: int, n2: int, a: float = 0.5, order: str = "type2-first", seed=None) -> InitialSequence:
    """Instance with prescribed counts.

    ``order`` is one of ``type1-first``, ``type2-first`` or ``shuffled`` (uses ``seed``).
    """
    if min(n1, n2) < 0 or n1 + n2 > n:
        raise InvalidInstanceError(f"counts n1={n1}, n2={n2} do not fit in n={n}")
    if order == "type1-first":
        inst = blocks_instance([("1", n1), ("a", n2), ("0", n - n1 - n2)], a)
    elif order == "type2-first":
        inst = blocks_instance([("a", n2), ("1", n1), ("0", n - n1 - n2)], a)
    elif order == "shuffled":
        slots = blocks_instance([("1", n1), ("a", n2), ("0", n - n1 - n2)], a).slots
        inst = InitialSequence(as_generator(seed).permutation(slots), a)
    else:
        raise ValueError(f"unknown order {order!r}")
    return inst


# -- instance file format ---------------------------------------------------

def format_instance(seq: InitialSequence) -> str:
    return f"n={seq.n} a={seq.a!r}\n{seq.tokens()}\n"


def parse_instance(text: str) -> InitialSequence:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise InvalidInstanceError("instance file needs a header line and one slot line")
    header = dict(item.split("=", 1) for item in lines[0].split())
    try:
        n = int(header["n"])
        a = float(header["a"])
    except (KeyError, ValueError) as exc:
        raise InvalidInstanceError(f"bad header {lines[0]!r}") from exc
    seq = build_instance(lines[1], a=a)
    if seq.n != n:
        raise InvalidInstanceError(f"header says n={n} but {seq.n} slots were given")
    return seq


def read_instance(path) -> InitialSequence:
    with open(path) as fh:
        return parse_instance(fh.read())


def write_instance(seq: InitialSequence, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_instance(seq))


# -- realizations -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StochasticAssignment:
    """Stochastic-group members (0-based, ascending) and their images under sigma.

    ``images[j]`` is where the customer initially at ``members[j]`` ends up.
    """

    n: int
    members: np.ndarray
    images: np.ndarray

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        images = np.asarray(self.images, dtype=np.int64)
        if members.shape != images.shape:
            raise ValueError("members and images must have equal length")
        if np.any(np.diff(members) <= 0):
            raise ValueError("members must be strictly increasing")
        if not np.array_equal(np.sort(images), members):
            raise ValueError("sigma must map the stochastic group onto itself")
        if members.size and (members[0] < 0 or members[-1] >= self.n):
            raise ValueError("member index out of range")
        object.__setattr__(self, "members", _frozen(members))
        object.__setattr__(self, "images", _frozen(images))

    def sigma(self, i: int) -> int:
        j = np.searchsorted(self.members, i)
        if j >= self.members.size or self.members[j] != i:
            raise KeyError(f"{i} is not in the stochastic group")
        return int(self.images[j])

    def member_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.members] = True
        return mask

    def origin(self) -> np.ndarray:
        """``origin[t]`` = initial position of whoever arrives at position ``t``."""
        origin = np.arange(self.n)
        origin[self.images] = self.members
        return origin


@dataclass(frozen=True, eq=False)
class Realization:
    """One sampled arrival sequence.

    ``assignment`` is oracle information; online policies are only ever handed
    ``arrivals``.
    """

    arrivals: np.ndarray
    assignment: StochasticAssignment
    source: InitialSequence

    @property
    def n(self) -> int:
        return self.source.n


def realize(seq: InitialSequence, members, images) -> Realization:
    """Apply an explicit stochastic assignment to ``seq``."""
    assignment = StochasticAssignment(seq.n, members, images)
    arrivals = seq.slots[assignment.origin()]
    return Realization(_frozen(arrivals), assignment, seq)


def sample_assignment(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli(p) membership over all n positions, then a Fisher-Yates shuffle
    of the member list. Returns ``(members, images)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    members = np.flatnonzero(rng.random(n) < p)
    images = members[rng.permutation(members.size)]
    return members, images


def sample_origin(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Fast path for simulators: ``(origin, member_mask)`` without validation."""
    members, images = sample_assignment(n, p, rng)
    origin = np.arange(n)
    origin[images] = members
    mask = np.zeros(n, dtype=bool)
    mask[members] = True
    return origin, mask


def sample_realization(seq: InitialSequence, p: float, seed=None) -> Realization:
    members, images = sample_assignment(seq.n, p, as_generator(seed))
    return realize(seq, members, images)


def sample_batch(seq: InitialSequence, p: float, rngs: Sequence[np.random.Generator]) -> tuple[np.ndarray, np.ndarray]:
    """Arrivals and member masks for one realization per generator, shape ``(B, n)``."""
    arrivals = np.empty((len(rngs), seq.n), dtype=np.int8)
    members = np.empty((len(rngs), seq.n), dtype=bool)
    for row, rng in enumerate(rngs):
        origin, mask = sample_origin(seq.n, p, rng)
        arrivals[row] = seq.slots[origin]
        members[row] = mask
    return arrivals, members


# -- observed counts and deterministic approximations -----------------------

def _check_step(step: int, n: int) -> None:
    if not 1 <= step <= n:
        raise ValueError(f"lambda * n must be an integer step in 1..{n}, got {step}")


def observed_counts(r: Realization, step: int) -> tuple[int, int]:
    """``(o1, o2)``: Type-1 and Type-2 arrivals among the first ``step`` positions."""
    _check_step(step, r.n)
    head = r.arrivals[:step]
    return int(np.count_nonzero(head == Slot.TYPE1)), int(np.count_nonzero(head == Slot.TYPE2))


def stochastic_observed_count(r: Realization, step: int, kind: Slot = Slot.TYPE2) -> int:
    """Arrivals of ``kind`` among the first ``step`` positions that belong to the stochastic group."""
    _check_step(step, r.n)
    in_s = r.assignment.member_mask()[:step]
    return int(np.count_nonzero((r.arrivals[:step] == kind) & in_s))


def deterministic_approx(seq: InitialSequence, p: float, step: int) -> tuple[float, float, float]:
    """``(o1~, o2~, o2S~)`` at ``lambda = step / n``."""
    if not 0 <= step <= seq.n:
        raise ValueError(f"step must be in 0..{seq.n}, got {step}")
    lam = step / seq.n
    eta1, eta2 = seq.eta(step)
    o1 = (1 - p) * eta1 + p * lam * seq.n1
    o2 = (1 - p) * eta2 + p * lam * seq.n2
    return o1, o2, p * lam * seq.n2


# -- concentration event ----------------------------------------------------

@dataclass(frozen=True)
class ConcentrationConstants:
    alpha: float = 10 + 2 * math.sqrt(6)
    k: float = 16.0
    eps_bar: float = 1 / 24

    def delta(self, b: float, n: int) -> float:
        return self.alpha * math.sqrt(b * math.log(n))


CONSTANTS = ConcentrationConstants()


def _prefix(mask: np.ndarray) -> np.ndarray:
    """Prefix sums along the last axis with a leading zero column (lambda = 0)."""
    out = np.zeros(mask.shape[:-1] + (mask.shape[-1] + 1,), dtype=np.int64)
    np.cumsum(mask, axis=-1, out=out[..., 1:])
    return out


def concentration_holds_batch(arrivals: np.ndarray, members: np.ndarray, seq: InitialSequence, p: float,
                              constants: ConcentrationConstants = CONSTANTS) -> np.ndarray:
    """Vectorized event check over realizations stacked as rows of ``arrivals``."""
    arrivals = np.atleast_2d(arrivals)
    members = np.atleast_2d(members)
    n, n1, n2 = seq.n, seq.n1, seq.n2
    holds = np.ones(arrivals.shape[0], dtype=bool)
    if p <= 0:
        return holds
    log_n = math.log(n)
    floor = constants.k / p**2 * log_n
    check1, check2 = n1 >= floor, n2 >= floor
    if not (check1 or check2):
        return holds

    lam = np.arange(n + 1) / n
    eta1 = _prefix(seq.slots == Slot.TYPE1)
    eta2 = _prefix(seq.slots == Slot.TYPE2)
    o1_t = (1 - p) * eta1 + p * lam * n1
    o2_t = (1 - p) * eta2 + p * lam * n2
    is1 = arrivals == Slot.TYPE1
    is2 = arrivals == Slot.TYPE2
    o1 = _prefix(is1)
    o2 = _prefix(is2)
    alpha = constants.alpha
    if check1:
        holds &= np.all(np.abs(o1 - o1_t) < alpha * math.sqrt(n1 * log_n), axis=1)
        holds &= np.all(np.abs(o1 + o2 - (o1_t + o2_t)) < alpha * math.sqrt((n1 + n2) * log_n), axis=1)
    if check2:
        bound = alpha * math.sqrt(n2 * log_n)
        holds &= np.all(np.abs(o2 - o2_t) < bound, axis=1)
        o2s = _prefix(is2 & members)
        holds &= np.all(np.abs(o2s - p * lam * n2) < bound, axis=1)
    return holds


def concentration_event_holds(r: Realization, p: float, constants: ConcentrationConstants = CONSTANTS) -> bool:
    return bool(concentration_holds_batch(r.arrivals, r.assignment.member_mask(), r.source, p, constants)[0])
