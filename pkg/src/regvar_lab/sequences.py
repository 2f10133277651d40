"""Divergent sequences, admissibility witnesses, Croftian hit counts and phi-dilations."""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, InsufficientDataError, NoBracketError

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"


def _farey_block(max_den: int) -> np.ndarray:
    """Reduced fractions p/q in [0, 1) with q <= max_den, ascending."""
    fracs = {Fraction(p, q) for q in range(1, max_den + 1) for p in range(q)}
    return np.array(sorted(float(f) for f in fracs))


@dataclass(frozen=True)
class SequenceSpec:
    """A named divergent sequence x_1, x_2, ... .

    Families: ``identity`` (n), ``log_ramp`` (beta log n), ``power_ramp``
    (n**alpha), ``rationals`` (reduced fractions with denominator <= max_den,
    ascending from 1), ``tabulated`` (explicit values).
    """

    family: str
    kind: str = MULTIPLICATIVE
    params: dict = field(default_factory=dict)
    length_hint: int = 1_000_000

    def __post_init__(self):
        if self.kind not in (ADDITIVE, MULTIPLICATIVE):
            raise ConfigError(f"sequence kind must be additive or multiplicative, got {self.kind!r}")
        if self.family not in ("identity", "log_ramp", "power_ramp", "rationals", "tabulated"):
            raise ConfigError(f"unknown sequence family {self.family!r}")

    @classmethod
    def identity(cls, kind=MULTIPLICATIVE, **kw):
        return cls("identity", kind, {}, **kw)

    @classmethod
    def log_ramp(cls, beta=1.0, kind=ADDITIVE, **kw):
        return cls("log_ramp", kind, {"beta": float(beta)}, **kw)

    @classmethod
    def power_ramp(cls, alpha, kind=MULTIPLICATIVE, **kw):
        return cls("power_ramp", kind, {"alpha": float(alpha)}, **kw)

    @classmethod
    def rationals(cls, max_den=8, kind=MULTIPLICATIVE, **kw):
        return cls("rationals", kind, {"max_den": int(max_den)}, **kw)

    @classmethod
    def tabulated(cls, values, kind=MULTIPLICATIVE):
        values = tuple(float(v) for v in values)
        return cls("tabulated", kind, {"values": values}, length_hint=len(values))

    def terms(self, n):
        """x_n at the (1-based) indices ``n``."""
        n = np.asarray(n)
        if np.any(n < 1):
            raise ValueError("sequence indices start at 1")
        fam, p = self.family, self.params
        if fam == "identity":
            return n.astype(float)
        if fam == "log_ramp":
            return p["beta"] * np.log(n.astype(float))
        if fam == "power_ramp":
            return n.astype(float) ** p["alpha"]
        if fam == "rationals":
            block = _farey_block(p["max_den"])
            q, r = np.divmod(n.astype(np.int64) - 1, block.size)
            return 1.0 + q + block[r]
        values = np.asarray(p["values"], dtype=float)
        if np.any(n > values.size):
            raise InsufficientDataError(f"tabulated sequence has only {values.size} terms")
        return values[n - 1]

    def generate(self, length: int) -> np.ndarray:
        return self.terms(np.arange(1, length + 1))

    def describe(self) -> dict:
        params = {k: v for k, v in self.params.items() if k != "values"}
        if self.family == "tabulated":
            params["length"] = len(self.params["values"])
        return {"family": self.family, "kind": self.kind, "params": params}


@dataclass
class AdmissibilityReport:
    passes: bool
    worst_gap: float
    worst_index: int
    divergence_witness: bool
    verdict: str


def admissibility_report(prefix, kind: str, n0: int, tol: float) -> AdmissibilityReport:
    """Finite-prefix witness for additive/multiplicative admissibility.

    ``prefix[k]`` is c_{k+1}; gaps are checked for n >= n0 (1-based).
    """
    c = np.asarray(prefix, dtype=float)
    if c.size < n0 + 2:
        raise InsufficientDataError(f"prefix of length {c.size} too short for n0={n0}")
    if kind == MULTIPLICATIVE:
        if np.any(c <= 0):
            raise ValueError("multiplicative admissibility needs strictly positive terms")
        gaps = np.abs(c[n0:] / c[n0 - 1 : -1] - 1.0)
    elif kind == ADDITIVE:
        gaps = np.abs(c[n0:] - c[n0 - 1 : -1])
    else:
        raise ValueError(f"unknown admissibility kind {kind!r}")
    k = int(np.argmax(gaps))
    worst = float(gaps[k])
    top = float(np.max(c))
    diverging = top > c[0] and top >= 10.0 * abs(c[0])
    passes = bool(worst < tol and diverging)
    verdict = "consistent with admissible" if passes else "not consistent with admissible"
    return AdmissibilityReport(passes, worst, n0 + k, bool(diverging), verdict)


@dataclass(frozen=True)
class PeriodicOpenSet:
    """Finite union of open intervals plus a periodically repeated open pattern.

    A point y belongs to the set if it lies in one of ``intervals``, or if
    y >= ``tail_start`` and (y mod ``period``) lies in one of ``pattern``.
    """

    pattern: tuple = ()
    period: Optional[float] = None
    tail_start: float = -math.inf
    intervals: tuple = ()

    @classmethod
    def half_line(cls, start=0.0):
        return cls(intervals=((float(start), math.inf),))

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        hit = np.zeros(y.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (y > a) & (y < b)
        if self.period:
            m = np.mod(y, self.period)
            tail = y >= self.tail_start
            for a, b in self.pattern:
                hit |= tail & (m > a) & (m < b)
        return hit


@dataclass
class HitReport:
    probe: float
    hit_indices: np.ndarray
    checkpoints: dict
    gap_stats: dict

    @property
    def hits(self) -> int:
        return int(self.hit_indices.size)

    def to_dict(self):
        return {
            "probe": self.probe,
            "hits": self.hits,
            "checkpoint_hits": {str(k): v for k, v in self.checkpoints.items()},
            "first_hits": self.hit_indices[:10].tolist(),
            "last_hit": int(self.hit_indices[-1]) if self.hits else None,
            "gap_stats": self.gap_stats,
        }


def probe_grid_points(interval, count: int) -> np.ndarray:
    """Cell-centred uniform grid; odd ``count`` puts a point at the midpoint."""
    a, b = interval
    if not b > a:
        raise ValueError("probe interval must be nondegenerate")
    if count < 1:
        raise ValueError("probe grid needs at least one point")
    return a + (np.arange(count) + 0.5) * (b - a) / count


def _gap_stats(idx: np.ndarray) -> dict:
    if idx.size < 2:
        return {"count": 0, "min": None, "max": None, "mean": None}
    g = np.diff(idx)
    return {"count": int(g.size), "min": int(g.min()), "max": int(g.max()), "mean": float(g.mean())}


def croft_hit_search(seq: SequenceSpec, interval, open_set: PeriodicOpenSet, N: int,
                     probe_grid: int = 101, checkpoints: Sequence[int] = ()) -> HitReport:
    """Probe x in the interval maximising #{n <= N : c_n + x in G}.

    Ties go to the smallest probe.  ``checkpoints`` record the winning
    probe's cumulative counts at smaller N.
    """
    c = seq.generate(N)
    best_x, best_idx = None, None
    for x in probe_grid_points(interval, probe_grid):
        idx = np.flatnonzero(open_set.contains(c + x)) + 1
        if best_idx is None or idx.size > best_idx.size:
            best_x, best_idx = float(x), idx
    counts = {int(k): int(np.searchsorted(best_idx, k, side="right")) for k in checkpoints}
    return HitReport(best_x, best_idx, counts, _gap_stats(best_idx))


def croft_hit_checkpoints(seq, interval, open_set, checkpoints, probe_grid=101):
    """Best-probe hit counts at each N in ``checkpoints`` (each optimised separately)."""
    checkpoints = sorted(int(k) for k in checkpoints)
    c = seq.generate(checkpoints[-1])
    best = {k: (-1, None) for k in checkpoints}
    for x in probe_grid_points(interval, probe_grid):
        idx = np.flatnonzero(open_set.contains(c + x)) + 1
        for k in checkpoints:
            count = int(np.searchsorted(idx, k, side="right"))
            if count > best[k][0]:
                best[k] = (count, float(x))
    return {k: {"hits": v[0], "probe": v[1]} for k, v in best.items()}


def phi_dilation(q, lam, s, phi):
    """h_q(s) = q + lam*phi(q) + s*phi(q + lam*phi(q)), i.e. (q o_phi lam) o_phi s."""
    q = float(q)
    inner = q + lam * phi(q)
    return inner + s * phi(inner)


def simplest_rational_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Rational with the smallest denominator in the open interval (lo, hi).

    Walks the continued-fraction expansions of both endpoints until they
    split; the result is the Stern-Brocot ancestor of the interval.
    """
    if not lo < hi:
        raise ValueError("empty interval")
    fl = math.floor(lo)
    if fl + 1 < hi:
        # an integer lies strictly inside; pick the one nearest zero-denominator-wise
        if lo < 0 < hi:
            return Fraction(0)
        cand = fl + 1 if lo >= 0 else math.ceil(hi) - 1
        return Fraction(cand)
    if lo < 0:
        return -simplest_rational_between(-hi, -lo)
    # lo and hi share the integer part fl (hi may equal fl + 1 exactly)
    frac_lo, frac_hi = lo - fl, hi - fl
    if frac_lo == 0:
        # interval (fl, fl + something): need 1/k < frac_hi with k minimal
        k = math.floor(1 / frac_hi) + 1
        return fl + Fraction(1, k)
    # recurse on reciprocals: (frac_lo, frac_hi) -> (1/frac_hi, 1/frac_lo)
    return fl + 1 / simplest_rational_between(1 / frac_hi, 1 / frac_lo)


def convergents(x: float, max_terms: int = 64):
    """Continued-fraction convergents p/q of ``x`` as Fractions."""
    p0, q0, p1, q1 = 0, 1, 1, 0
    r = Fraction(x)
    for _ in range(max_terms):
        a = math.floor(r)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield Fraction(p1, q1)
        frac = r - a
        if frac == 0:
            return
        r = 1 / frac


def best_rational(x: float, tol: float) -> Fraction:
    """Smallest-denominator rational strictly within ``tol`` of ``x``."""
    fx = Fraction(x)
    t = Fraction(tol)
    return simplest_rational_between(fx - t, fx + t)


@dataclass
class DilationSolution:
    q: Fraction
    x: float
    residual: float
    q_tol: float
    bracket: tuple
    minimal_feasible_b: float


def m_lambda(x, lam, phi):
    """phi(x + lam phi(x)) / (x + lam phi(x))."""
    inner = x + lam * phi(x)
    return phi(inner) / inner


def phi_dilation_solve(phi, lam: float, a_target: float, b_target: float,
                       q_tol: float = 1e-9, tol: float = 1e-6,
                       x_min: float = 1e-9, x_max: float = 1e15) -> DilationSolution:
    """Find rational q with h_q(a) = b up to ``tol``.

    Solves b/(x + lam phi(x)) = 1 + a m_lam(x), equivalently h_x(a) = b, for
    x by bracketing on [x_min, x_max], then replaces x by the simplest
    rational within q_tol (shrunk until the residual re-verifies below tol).
    """

    def excess(x):
        return phi_dilation(x, lam, a_target, phi) - b_target

    lo = x_min
    g_lo = excess(lo)
    if g_lo >= 0:
        raise NoBracketError(
            f"b={b_target} is not above h_x(a) at x={lo}; minimal feasible b is {g_lo + b_target}",
            minimal_feasible=g_lo + b_target,
        )
    hi = max(2.0 * lo, 1.0)
    while excess(hi) <= 0:
        hi *= 2.0
        if hi > x_max:
            raise NoBracketError(f"no sign change of h_x(a) - b below x={x_max}")
    x = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    step = max(abs(x), 1.0) * 1e-7
    slope = abs(excess(x + step) - excess(x - step)) / (2 * step)
    eff_tol = min(q_tol, tol / (4.0 * max(slope, 1e-300)))
    for _ in range(60):
        q = best_rational(x, eff_tol)
        residual = abs(excess(float(q)))
        if residual < tol:
            return DilationSolution(q, float(x), float(residual), float(eff_tol), (lo, hi),
                                    float(g_lo + b_target))
        eff_tol /= 4.0
    raise NoBracketError("could not rationalise the root within tolerance")


def parse_sequence(text: str, kind: str = MULTIPLICATIVE) -> SequenceSpec:
    """``identity``, ``log_ramp(beta)``, ``power_ramp(alpha)`` or ``rationals(max_den)``."""
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError:
        raise ConfigError(f"cannot parse sequence spec {text!r}") from None
    if isinstance(node, ast.Name):
        name, args = node.id, []
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name, args = node.func.id, node.args
    else:
        raise ConfigError(f"cannot parse sequence spec {text!r}")
    try:
        values = [float(ast.literal_eval(a)) for a in args]
    except (ValueError, SyntaxError):
        raise ConfigError(f"sequence parameters must be numbers in {text!r}") from None
    makers = {
        "identity": (0, lambda: SequenceSpec.identity(kind)),
        "log_ramp": (1, lambda b=1.0: SequenceSpec.log_ramp(b, kind)),
        "power_ramp": (1, lambda a=1.0: SequenceSpec.power_ramp(a, kind)),
        "rationals": (1, lambda d=8: SequenceSpec.rationals(int(d), kind)),
    }
    if name not in makers:
        raise ConfigError(f"unknown sequence family {name!r}")
    arity, make = makers[name]
    if len(values) > arity:
        raise ConfigError(f"{name} takes at most {arity} parameter(s)")
    return make(*values)
