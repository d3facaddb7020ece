"""Instance generators, Monte Carlo ratio estimates and the reproduction drivers."""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from ._rng import ARRIVALS, POLICY, trial_rng
from .arrival import (CONSTANTS, InitialSequence, blocks_instance, concentration_holds_batch,
                      sample_batch)
from .mp1 import Mp1Params, mp1_lower_bound, solve_mp1
from .policies import (AcceptAll, Alg1, Alg2, BallQueyranne, MarketParams, Mixture, Policy, RejectAll,
                       UniformRate, opt_offline, simulate)
from .secretary import asymptotic_success, optimal_gamma

POLICY_NAMES = ("alg1", "alg2", "ball", "uniform", "mixture", "accept-all", "reject-all")

# Trials per vectorized batch. Fixed so results never depend on the thread count.
CHUNK = 2500
# The adaptive policy needs c < 1.
C_CAP = 0.99


class DegenerateInstanceError(ValueError):
    """The offline optimum is zero, so no ratio exists."""


@dataclass(frozen=True)
class PolicySpec:
    """Names a policy; ``c`` is required for alg2.

    The mixture flips between Ball (weight 1 - p) and uniform-rate (weight p).
    """

    name: str
    c: float | None = None

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.name!r}; choose from {', '.join(POLICY_NAMES)}")
        if self.name == "alg2" and self.c is None:
            raise ValueError("alg2 needs a target ratio c")


def make_policy(spec: PolicySpec, params: MarketParams, seed: int = 0) -> Policy:
    if spec.name == "alg1":
        return Alg1(params)
    if spec.name == "alg2":
        return Alg2(params, spec.c)
    if spec.name == "ball":
        return BallQueyranne(params)
    if spec.name == "uniform":
        return UniformRate(params)
    if spec.name == "accept-all":
        return AcceptAll(params)
    if spec.name == "reject-all":
        return RejectAll(params)
    return Mixture([(BallQueyranne(params), 1 - params.p), (UniformRate(params), params.p)], seed)


def adaptive_c(a: float, p: float, kappa: float, grid_points: int = 40) -> float:
    """Target ratio for alg2: the program's optimum, capped below 1."""
    return min(solve_mp1(Mp1Params(a, p, kappa), grid_points).c_star, C_CAP)


@dataclass(frozen=True)
class RatioEstimate:
    mean_ratio: float
    ci_half_width_95: float
    trials: int
    opt_value: float


def _chunk_revenue(spec, seq, params, seed, start, stop):
    rngs = [trial_rng(seed, t, ARRIVALS) for t in range(start, stop)]
    arrivals, _ = sample_batch(seq, params.p, rngs)
    policy = make_policy(spec, params, seed)
    policy_rngs = [trial_rng(seed, t, POLICY) for t in range(start, stop)]
    return simulate(policy, arrivals, params, rngs=policy_rngs).revenue


def _chunks(trials: int, size: int = CHUNK):
    return [(s, min(s + size, trials)) for s in range(0, trials, size)]


def _run_chunks(fn, trials, threads, size=CHUNK):
    bounds = _chunks(trials, size)
    if threads <= 1 or len(bounds) == 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda se: fn(*se), bounds))


def estimate_ratio(policy_spec: PolicySpec, seq: InitialSequence, params: MarketParams, trials: int,
                   seed: int = 0, threads: int = 1) -> RatioEstimate:
    """Mean of ALG / OPT over fresh realizations, with a normal 95% half-width."""
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    if seq.n != params.n:
        raise ValueError(f"instance has n={seq.n} but params say n={params.n}")
    opt = opt_offline(seq.n1, seq.n2, params.b, params.a)
    if opt <= 0:
        raise DegenerateInstanceError("offline optimum is zero; the ratio is undefined")
    parts = _run_chunks(lambda s, e: _chunk_revenue(policy_spec, seq, params, seed, s, e), trials, threads)
    ratios = np.concatenate(parts) / opt
    half = 1.96 * float(np.std(ratios, ddof=1)) / math.sqrt(trials)
    return RatioEstimate(float(ratios.mean()), half, trials, float(opt))


# -- instances ----------------------------------------------------------------

def table2_instance(b: int, n: int, a: float = 0.5) -> InitialSequence:
    """b Type-2 customers followed by n - b empty slots."""
    if not 0 <= b <= n:
        raise ValueError(f"need 0 <= b <= n, got b={b}, n={n}")
    return blocks_instance([("a", b), ("0", n - b)], a)


def impossibility_pair(b: int, n: int, a: float) -> tuple[InitialSequence, InitialSequence]:
    """Two instances sharing a b-long Type-2 prefix; the second follows it with b Type-1."""
    if 2 * b > n:
        raise ValueError(f"need 2b <= n, got b={b}, n={n}")
    v = blocks_instance([("a", b), ("0", n - b)], a)
    w = blocks_instance([("a", b), ("1", b), ("0", n - 2 * b)], a)
    return v, w


def impossibility_bound(b: int, n: int, a: float, p: float) -> float:
    return p + (1 - p) / (2 - a) + 3 * p * b * b / n


@dataclass(frozen=True)
class UpperBoundCheck:
    min_ratio: float
    bound: float
    ci_half_width_95: float
    estimates: tuple[RatioEstimate, RatioEstimate]


def upper_bound_check(policy_spec: PolicySpec, b: int, n: int, a: float, p: float, trials: int,
                      seed: int = 0, threads: int = 1) -> UpperBoundCheck:
    """Worst ratio of ``policy_spec`` over the impossibility pair, next to the bound no policy beats."""
    params = MarketParams(b, n, a, p)
    ests = tuple(estimate_ratio(policy_spec, seq, params, trials, seed, threads)
                 for seq in impossibility_pair(b, n, a))
    worst = min(ests, key=lambda e: e.mean_ratio)
    return UpperBoundCheck(worst.mean_ratio, impossibility_bound(b, n, a, p), worst.ci_half_width_95, ests)


# -- reproduction drivers -------------------------------------------------------

def reproduce_figure2(a_list: Iterable[float], kappa_list: Iterable[float], p_grid: Iterable[float],
                      grid_points: int = 40) -> list[dict]:
    rows = []
    for a in a_list:
        for kappa in kappa_list:
            for p in p_grid:
                sol = solve_mp1(Mp1Params(a, p, kappa), grid_points)
                rows.append({"a": a, "kappa": kappa, "p": p, "c_star": sol.c_star,
                             "alg1_bound": mp1_lower_bound(a, p)})
    return rows


def table2_analytic(name: str, a: float, p: float, b: int, n: int) -> float:
    uniform = p + (b / n) * (1 - p)
    return {
        "ball": 1 / (2 - a),
        "uniform": uniform,
        "alg1": mp1_lower_bound(a, p),
        "alg2": 1.0,
        "mixture": (1 - p) / (2 - a) + p * uniform,
    }[name]


def reproduce_table2(a: float, p: float, b: int, n: int, trials: int, seed: int = 0, threads: int = 1,
                     c: float | None = None, grid_points: int = 40) -> list[dict]:
    """All baselines and both online policies on the Type-2-then-empty instance."""
    params = MarketParams(b, n, a, p)
    seq = table2_instance(b, n, a)
    if c is None:
        c = adaptive_c(a, p, b / n, grid_points)
    rows = []
    for name in ("ball", "uniform", "mixture", "alg1", "alg2"):
        spec = PolicySpec(name, c if name == "alg2" else None)
        est = estimate_ratio(spec, seq, params, trials, seed, threads)
        rows.append({"policy": name, "mean_ratio": est.mean_ratio, "ci_half_width": est.ci_half_width_95,
                     "analytic": table2_analytic(name, a, p, b, n), "c": c if name == "alg2" else None})
    return rows


def reproduce_bound61(a: float, p: float, n: int, trials: int, seed: int = 0, threads: int = 1,
                      b: int | None = None, c: float | None = None, grid_points: int = 40) -> list[dict]:
    """Impossibility-pair worst ratios for ball, alg1 and alg2 at b = floor(n^0.4) by default."""
    if b is None:
        b = int(math.floor(n ** 0.4))
    if c is None:
        c = adaptive_c(a, p, b / n, grid_points)
    rows = []
    for name in ("ball", "alg1", "alg2"):
        spec = PolicySpec(name, c if name == "alg2" else None)
        chk = upper_bound_check(spec, b, n, a, p, trials, seed, threads)
        rows.append({"policy": name, "b": b, "min_ratio": chk.min_ratio, "ci_half_width": chk.ci_half_width_95,
                     "bound": chk.bound, "ratio_v": chk.estimates[0].mean_ratio,
                     "ratio_w": chk.estimates[1].mean_ratio})
    return rows


def reproduce_table3(p_grid: Iterable[float]) -> list[dict]:
    rows = []
    for p in p_grid:
        g = optimal_gamma(p)
        rows.append({"p": p, "gamma_star": g, "success": asymptotic_success(g, p)})
    return rows


def empirical_concentration_rate(seq: InitialSequence, p: float, trials: int, seed: int = 0,
                                 threads: int = 1, chunk: int = 250) -> float:
    """Fraction of sampled realizations outside the concentration event."""
    def run(start, stop):
        rngs = [trial_rng(seed, t, ARRIVALS) for t in range(start, stop)]
        arrivals, members = sample_batch(seq, p, rngs)
        return np.count_nonzero(~concentration_holds_batch(arrivals, members, seq, p, CONSTANTS))
    return sum(_run_chunks(run, trials, threads, chunk)) / trials


# -- CSV output -------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def config_line(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str], config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write(config_line(config) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(col)) for col in columns) + "\n")
    return buf.getvalue()


def plot_data(rows: Sequence[dict], x: str, y: str, group: Sequence[str] = ()) -> str:
    """Whitespace-separated two-column blocks, one per group, blank-line separated."""
    blocks: dict[tuple, list[str]] = {}
    for row in rows:
        key = tuple(row[g] for g in group)
        blocks.setdefault(key, []).append(f"{_fmt(row[x])} {_fmt(row[y])}")
    out = []
    for key, lines in blocks.items():
        if group:
            out.append("# " + " ".join(f"{g}={_fmt(v)}" for g, v in zip(group, key)))
        out.extend(lines)
        out.append("")
    return "\n".join(out)
