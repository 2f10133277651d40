"""Essential limits at infinity on sampled data, with a point-fraction exceptional budget.

A limit L is certified at tolerance eps when some tail x > X_eps exists in
which at most a fraction ``delta`` of samples violate |f - L| < eps.  The
budget plays the part of the negligible exceptional set; by counting, the
union of two exceptional sets fits in the sum of their budgets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError

CONVERGES = "converges"
DIVERGES = "diverges"
INCONCLUSIVE = "inconclusive"

DEFAULT_EPSILONS = (0.1, 0.03, 0.01)
DEFAULT_DELTA = 0.005
MIN_SAMPLES = 1000


@dataclass
class SampledFunction:
    x: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.shape != self.values.shape or self.x.ndim != 1:
            raise ValueError("x and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("sample x must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample values must be finite")

    @classmethod
    def from_function(cls, fn, x, **metadata):
        x = np.asarray(x, dtype=float)
        return cls(x, np.asarray(fn(x), dtype=float), dict(metadata))

    def __len__(self):
        return self.x.size


@dataclass
class EpsilonLevel:
    epsilon: float
    X: float | None
    tail_start: int | None
    exceptional_count: int | None
    tail_size: int | None
    exceptional_fraction: float | None
    certified: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class EssLimResult:
    limit: float | None
    candidate: float
    epsilon_profile: list
    verdict: str
    delta: float

    def to_dict(self):
        return {
            "limit": self.limit,
            "candidate": self.candidate,
            "delta": self.delta,
            "verdict": self.verdict,
            "epsilon_profile": [lvl.to_dict() for lvl in self.epsilon_profile],
        }


def candidate_limit(values) -> float:
    """Median of the last decile of the samples."""
    v = np.asarray(values, dtype=float)
    k = max(1, v.size // 10)
    return float(np.median(v[-k:]))


def _certify(violations, delta, min_tail):
    """Earliest tail start whose violation fraction is within delta.

    Returns (start, count, size) or None; tails shorter than ``min_tail`` never certify.
    """
    n = violations.size
    suffix = np.cumsum(violations[::-1])[::-1]  # suffix[k] = violations in k..n-1
    sizes = n - np.arange(n)
    ok = (suffix <= delta * sizes + 1e-12) & (sizes >= min_tail)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return None
    k = int(idx[0])
    return k, int(suffix[k]), int(sizes[k])


def ess_lim(samples: SampledFunction, epsilons=DEFAULT_EPSILONS, delta: float = DEFAULT_DELTA,
            limit: float | None = None, min_tail_fraction: float = 0.1) -> EssLimResult:
    """Certify an essential limit of sampled data.

    ``limit`` overrides the candidate (median of the last decile).  Verdict
    is ``converges`` when every eps certifies, ``diverges`` when the largest
    eps fails, ``inconclusive`` otherwise.
    """
    if len(samples) < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {len(samples)}")
    eps = [float(e) for e in epsilons]
    if not eps or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be nonempty and strictly decreasing")
    if not 0.0 <= delta < 0.5:
        raise ValueError("delta must lie in [0, 0.5)")
    L = candidate_limit(samples.values) if limit is None else float(limit)
    dev = np.abs(samples.values - L)
    min_tail = max(1, math.ceil(min_tail_fraction * len(samples)))

    profile = []
    start_floor = 0
    for e in eps:
        viol = dev >= e
        found = _certify(viol, delta, min_tail)
        if found is None:
            profile.append(EpsilonLevel(e, None, None, None, None, None, False))
            continue
        k, _, _ = found
        # X_eps is nondecreasing as eps shrinks; a later start stays within budget
        k = max(k, start_floor)
        start_floor = k
        count = int(np.count_nonzero(viol[k:]))
        size = len(samples) - k
        profile.append(EpsilonLevel(e, float(samples.x[k]), k, count, size, count / size, True))

    certified = [lvl.certified for lvl in profile]
    if all(certified):
        verdict = CONVERGES
    elif not certified[0]:
        verdict = DIVERGES
    else:
        verdict = INCONCLUSIVE
    return EssLimResult(L if verdict == CONVERGES else None, L, profile, verdict, float(delta))


@dataclass
class CombineReport:
    f: EssLimResult
    g: EssLimResult
    sum: EssLimResult
    product: EssLimResult
    sum_error: float | None
    product_error: float | None
    sum_ok: bool
    product_ok: bool
    union_counts: list

    def to_dict(self):
        return {
            "f": self.f.to_dict(),
            "g": self.g.to_dict(),
            "sum": self.sum.to_dict(),
            "product": self.product.to_dict(),
            "sum_error": self.sum_error,
            "product_error": self.product_error,
            "sum_ok": self.sum_ok,
            "product_ok": self.product_ok,
            "union_counts": self.union_counts,
        }


def ess_lim_combine_check(samples_f: SampledFunction, samples_g: SampledFunction,
                          delta_f: float = DEFAULT_DELTA, delta_g: float | None = None,
                          epsilons=DEFAULT_EPSILONS) -> CombineReport:
    """Check that essential limits add and multiply, with budgets adding.

    The sum and product are certified at budget delta_f + delta_g.  For each
    eps the count of sum violations (at eps, against L_f + L_g) is compared
    with the union of the f- and g-violations at eps/2 on the same tail:
    the first never exceeds the second.
    """
    if not np.array_equal(samples_f.x, samples_g.x):
        raise ValueError("f and g must share the x grid")
    delta_g = delta_f if delta_g is None else delta_g
    rf = ess_lim(samples_f, epsilons, delta_f)
    rg = ess_lim(samples_g, epsilons, delta_g)
    x = samples_f.x
    s = SampledFunction(x, samples_f.values + samples_g.values, {"op": "sum"})
    p = SampledFunction(x, samples_f.values * samples_g.values, {"op": "product"})
    budget = min(delta_f + delta_g, 0.499)
    rs = ess_lim(s, epsilons, budget)
    rp = ess_lim(p, epsilons, budget)

    sum_error = product_error = None
    sum_ok = product_ok = False
    union = []
    if rf.verdict == CONVERGES and rg.verdict == CONVERGES:
        tol = float(epsilons[-1])
        if rs.verdict == CONVERGES:
            sum_error = abs(rs.limit - (rf.limit + rg.limit))
            sum_ok = sum_error < tol
        if rp.verdict == CONVERGES:
            product_error = abs(rp.limit - rf.limit * rg.limit)
            product_ok = product_error < tol * max(1.0, abs(rf.limit) + abs(rg.limit))
        target = rf.limit + rg.limit
        for e in epsilons:
            vf = np.abs(samples_f.values - rf.limit) >= e / 2
            vg = np.abs(samples_g.values - rg.limit) >= e / 2
            vs = np.abs(s.values - target) >= e
            union.append({
                "epsilon": float(e),
                "sum_violations": int(np.count_nonzero(vs)),
                "f_violations": int(np.count_nonzero(vf)),
                "g_violations": int(np.count_nonzero(vg)),
                "union_violations": int(np.count_nonzero(vf | vg)),
                "contained": bool(np.all(~vs | vf | vg)),
            })
    return CombineReport(rf, rg, rs, rp, sum_error, product_error, sum_ok, product_ok, union)


def telescoping_check(h, u: float, v: float, x, epsilons=DEFAULT_EPSILONS,
                      delta: float = DEFAULT_DELTA) -> dict:
    """Increments of h: ess-lim of h(x+u+v) - h(x) equals L_u + L_v."""
    x = np.asarray(x, dtype=float)
    hx = np.asarray(h(x), dtype=float)
    du = SampledFunction(x, np.asarray(h(x + u)) - hx, {"increment": u})
    dv = SampledFunction(x, np.asarray(h(x + v)) - hx, {"increment": v})
    duv = SampledFunction(x, np.asarray(h(x + u + v)) - hx, {"increment": u + v})
    ru, rv, ruv = (ess_lim(d, epsilons, delta) for d in (du, dv, duv))
    ok = all(r.verdict == CONVERGES for r in (ru, rv, ruv))
    err = abs(ruv.limit - (ru.limit + rv.limit)) if ok else None
    return {
        "L_u": ru.limit,
        "L_v": rv.limit,
        "L_uv": ruv.limit,
        "error": err,
        "ok": bool(ok and err < float(epsilons[-1])),
    }
