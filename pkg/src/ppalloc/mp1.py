"""Factor-revealing program for the adaptive policy's competitive ratio.

Variables are ``(lam, n1, n2, eta1, eta2)`` with horizon ``n`` and inventory
``b = kappa * n``. The objective and constraints are degree-1 homogeneous in
``(n1, n2, eta1, eta2, b, n)`` so the default normalization is ``n = 1``.

The solver is a pruned grid search followed by pattern-search refinement from
the best cells. It is deterministic and returns an approximate global minimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

# Slack on the u12 >= b constraint, relative to n.
U12_TOL = 1e-9
# Slack on the linear constraints, relative to n.
LIN_TOL = 1e-12


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mp1Params:
    a: float
    p: float
    kappa: float
    n: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.n <= 0:
            raise ValueError("n must be positive")

    @property
    def b(self) -> float:
        return self.kappa * self.n


@dataclass(frozen=True)
class Mp1Point:
    lam: float
    n1: float
    n2: float
    eta1: float
    eta2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.n1, self.n2, self.eta1, self.eta2])

    @classmethod
    def from_array(cls, x) -> "Mp1Point":
        return cls(*(float(v) for v in x))

    def scaled(self, t: float) -> "Mp1Point":
        return Mp1Point(self.lam, self.n1 * t, self.n2 * t, self.eta1 * t, self.eta2 * t)


@dataclass(frozen=True)
class Mp1Solution:
    c_star: float
    argmin: Mp1Point
    grid_value: float
    grid_resolution: int
    refinement_tolerance: float
    params: Mp1Params


def _tilde(lam, n1, n2, e1, e2, a, p, n):
    o1 = (1 - p) * e1 + p * n1 * lam
    o2 = (1 - p) * e2 + p * n2 * lam
    tail = (1 - lam) * (1 - p) * n
    denom = 1 - p + lam * p
    u1 = np.minimum(o1 / (lam * p), (o1 + tail) / denom)
    s = o1 + o2
    u12 = np.minimum(s / (lam * p), (s + tail) / denom)
    return o1, o2, u1, u12


def _objective(lam, n1, n2, e1, e2, a, p, n, b):
    o1, o2, u1, _ = _tilde(lam, n1, n2, e1, e2, a, p, n)
    num = a * (n2 - o2 + b / (1 - a)) + n1
    den = a * np.minimum(n1 + n2, b) + (1 - a) * n1 + a * a * b / (1 - a) + a * np.minimum(u1, b)
    return num / den


def _feasible(lam, n1, n2, e1, e2, a, p, n, b):
    _, _, _, u12 = _tilde(lam, n1, n2, e1, e2, a, p, n)
    tol = LIN_TOL * n
    return ((u12 >= b - U12_TOL * n)
            & (lam <= 1) & (lam > 0)
            & (n1 >= -tol) & (n2 >= -tol) & (e1 >= -tol) & (e2 >= -tol)
            & (e1 + e2 <= lam * n + tol)
            & (e1 <= n1 + tol) & (e2 <= n2 + tol)
            & (n1 <= b + tol)
            & (n1 + n2 <= n + tol)
            & (n1 + n2 <= e1 + e2 + (1 - lam) * n + tol))


def _penalized(lam, n1, n2, e1, e2, params: Mp1Params):
    args = (params.a, params.p, params.n, params.b)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = _objective(lam, n1, n2, e1, e2, *args)
        ok = _feasible(lam, n1, n2, e1, e2, *args)
    return np.where(ok, val, np.inf)


def _check_lambda(point: Mp1Point):
    if point.lam <= 0:
        raise ValueError(f"lambda must be positive, got {point.lam}")


def mp1_tilde(point: Mp1Point, params: Mp1Params) -> tuple[float, float, float, float]:
    """``(o1~, o2~, u1~, u12~)`` at ``point``."""
    _check_lambda(point)
    vals = _tilde(point.lam, point.n1, point.n2, point.eta1, point.eta2, params.a, params.p, params.n)
    return tuple(float(v) for v in vals)


def mp1_feasible(point: Mp1Point, params: Mp1Params) -> bool:
    if point.lam <= 0:
        return False
    return bool(_feasible(point.lam, point.n1, point.n2, point.eta1, point.eta2,
                          params.a, params.p, params.n, params.b))


def mp1_objective(point: Mp1Point, params: Mp1Params) -> float:
    _check_lambda(point)
    return float(_objective(point.lam, point.n1, point.n2, point.eta1, point.eta2,
                            params.a, params.p, params.n, params.b))


def mp1_lower_bound(a: float, p: float) -> float:
    """Ratio guaranteed by the non-adaptive policy, and a floor for c*."""
    if not 0.0 < a < 1.0 or not 0.0 <= p <= 1.0:
        raise ValueError(f"need 0 < a < 1 and 0 <= p <= 1, got a={a}, p={p}")
    return p + (1 - p) / (2 - a)


def _pairs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All (count, prefix-count) grid pairs with prefix <= count."""
    big, small = np.meshgrid(values, values, indexing="ij")
    keep = small <= big
    return big[keep], small[keep]


# Stencil {-1, 0, 1}^5 minus the origin.
_DIRECTIONS = np.array([d for d in itertools.product((-1, 0, 1), repeat=5) if any(d)], dtype=float)


def _refine(x0: np.ndarray, f0: float, params: Mp1Params, step: float, tol: float):
    n = params.n
    hi = np.array([1.0, params.b, n, params.b, n])
    lo = np.array([tol, 0.0, 0.0, 0.0, 0.0])
    x, fx = x0.copy(), f0
    scale = np.array([1.0, n, n, n, n])
    while step > tol:
        cand = np.clip(x + step * _DIRECTIONS * scale, lo, hi)
        vals = _penalized(*cand.T, params)
        i = int(np.argmin(vals))
        if vals[i] < fx - 1e-15:
            x, fx = cand[i], float(vals[i])
        else:
            step /= 2
    return x, fx


def solve_mp1(params: Mp1Params, grid_points_per_axis: int = 40, refine_tolerance: float = 1e-7,
              starts: int = 20) -> Mp1Solution:
    """Minimize the objective over the feasible region.

    The n1 and eta1 axes only span ``[0, b]`` since n1 <= b is a constraint.
    When ``b`` is small relative to ``n`` an extra fine band ``[0, 4b]`` is
    added to the n2 and eta2 axes where the minimizers of such instances sit.
    """
    G = grid_points_per_axis
    if G < 20:
        raise ValueError("grid_points_per_axis must be at least 20")
    if refine_tolerance > 1e-4 or refine_tolerance <= 0:
        raise ValueError("refine_tolerance must lie in (0, 1e-4]")
    n, b = params.n, params.b
    n1v, e1v = _pairs(np.linspace(0.0, b, G))
    axis2 = np.linspace(0.0, n, G)
    if 4 * b < n:
        axis2 = np.union1d(axis2, np.linspace(0.0, 4 * b, G))
    n2v, e2v = _pairs(axis2)

    cells = []
    for lam in np.linspace(1.0 / G, 1.0, G):
        vals = _penalized(lam, n1v[:, None], n2v[None, :], e1v[:, None], e2v[None, :], params)
        flat = vals.ravel()
        k = min(starts, flat.size - 1)
        for idx in np.argpartition(flat, k)[:k]:
            if np.isfinite(flat[idx]):
                r, c = divmod(int(idx), vals.shape[1])
                cells.append((float(flat[idx]), lam, n1v[r], n2v[c], e1v[r], e2v[c]))
    if not cells:
        raise SolverError(f"no feasible grid point for {params} at {G} points per axis")
    cells.sort()
    grid_value = cells[0][0]

    best_x, best_f = None, np.inf
    for f0, *x0 in cells[:starts]:
        x, fx = _refine(np.array(x0, dtype=float), f0, params, 1.0 / G, refine_tolerance)
        if fx < best_f:
            best_x, best_f = x, fx
    return Mp1Solution(best_f, Mp1Point.from_array(best_x), grid_value, G, refine_tolerance, params)
