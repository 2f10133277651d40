"""Kendall-type pipelines: recover the kernel K and index kappa from sequential limits.

Three modes share one machinery:

* ``karamata``: a_n f(lam x_n) -> g(lam); K(s) = g(s lam)/g(lam) = s^kappa.
* ``beurling``: a_n f(x_n o_phi t) -> g(t) with x o_phi t = x + t phi(x);
  K(s) = g(lam o_eta s)/g(lam) = (1 + rho s)^kappa.
* ``general``: [f(x_n o_phi t) - f(x_n)]/h(x_n) -> K(t), with the h-ratio
  limit r(t) and the Beurling-Goldie expansion K(u o v) = K(v) r(u) + K(u).

Arguments live in a Popa group G_r (r = inf for karamata, r = rho_hat of
phi otherwise).  The test set B is sampled on a lattice that is uniform in
the group's log-coordinate, so lattice index i composed with step j lands
exactly on index i + j; kernel estimates never interpolate.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import popa
from .equivarying import REJECTED, SN, estimate_rho
from .errors import (
    ConfigError,
    DegenerateKernelError,
    EmptyAnchorError,
    NonConvergenceError,
    TrivialKernelError,
)
from .functions import FunctionSpec
from .kernels import is_trivial
from .popa import INF, PopaParam
from .sequences import SequenceSpec

KARAMATA = "karamata"
BEURLING = "beurling"
GENERAL = "general"

TERMINAL = "terminal"
EXTRAPOLATE = "extrapolate"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("REGVAR_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class KendallSet:
    """The test set B: a closed base interval minus disjoint open holes."""

    lo: float
    hi: float
    holes: tuple = ()

    def __post_init__(self):
        holes = tuple(sorted((float(a), float(b)) for a, b in self.holes))
        object.__setattr__(self, "holes", holes)
        if not self.hi > self.lo:
            raise ConfigError("test set needs lo < hi")
        prev = self.lo
        for a, b in holes:
            if not (b > a and a >= prev and b <= self.hi):
                raise ConfigError(f"holes must be disjoint subintervals of [{self.lo}, {self.hi}]")
            prev = b
        if self.length <= 0:
            raise ConfigError("test set has no length left after removing holes")

    @property
    def length(self) -> float:
        return (self.hi - self.lo) - sum(b - a for a, b in self.holes)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        for a, b in self.holes:
            inside &= ~((x > a) & (x < b))
        return inside

    def component(self, x):
        """Index of the connected component containing x (-1 outside)."""
        x = np.asarray(x, dtype=float)
        comp = np.searchsorted(np.array([b for _, b in self.holes]), x, side="left")
        return np.where(self.contains(x), comp, -1)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "holes": [list(h) for h in self.holes]}


@dataclass
class KendallInput:
    f: FunctionSpec
    seq: SequenceSpec
    B: KendallSet
    a_policy: object = "reciprocal"
    mode: str = KARAMATA
    phi: Optional[FunctionSpec] = None
    h: Optional[FunctionSpec] = None

    def __post_init__(self):
        if self.mode not in (KARAMATA, BEURLING, GENERAL):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode in (BEURLING, GENERAL) and self.phi is None:
            raise ConfigError(f"{self.mode} mode needs phi")
        if self.mode == GENERAL and self.h is None:
            raise ConfigError("general mode needs h")
        if isinstance(self.a_policy, str) and self.a_policy not in ("reciprocal", "one"):
            raise ConfigError(f"unknown a_n policy {self.a_policy!r}")

    def normalizers(self, n, x):
        pol = self.a_policy
        if isinstance(pol, str):
            if pol == "one":
                return np.ones_like(x)
            fx = np.asarray(self.f(x), dtype=float)
            if self.mode == GENERAL:
                raise ConfigError("reciprocal normalisation is not defined in general mode")
            if np.any(fx <= 0):
                raise ConfigError("reciprocal policy needs f > 0 along the sequence")
            return 1.0 / fx
        if callable(pol):
            return np.asarray(pol(np.asarray(n, dtype=float)), dtype=float)
        arr = np.asarray(pol, dtype=float)
        return arr[np.asarray(n) - 1]

    def compose(self, x, lam):
        """x o lam: lam*x (karamata) or x + lam*phi(x)."""
        if self.mode == KARAMATA:
            return lam * x
        return x + lam * np.asarray(self.phi(x), dtype=float)

    def terms(self, n, x, a, lam, fx=None, hx=None):
        """The sequence whose limit defines g(lam)."""
        y = np.asarray(self.f(self.compose(x, lam)), dtype=float)
        if self.mode == GENERAL:
            if fx is None:
                fx = np.asarray(self.f(x), dtype=float)
            if hx is None:
                hx = np.asarray(self.h(x), dtype=float)
            return a * (y - fx) / hx
        return a * y


@dataclass
class _Window:
    """Index windows used for one sequential-limit sweep."""

    N: int
    tail: np.ndarray
    extrap: np.ndarray
    x_tail: np.ndarray
    x_extrap: np.ndarray
    a_tail: np.ndarray
    a_extrap: np.ndarray
    f_tail: Optional[np.ndarray] = None
    f_extrap: Optional[np.ndarray] = None
    h_tail: Optional[np.ndarray] = None
    h_extrap: Optional[np.ndarray] = None


def _window(inp: KendallInput, N: int, tail_fraction=0.1, span=10.0, points=64) -> _Window:
    if N < 20:
        raise ConfigError("N must be at least 20")
    k = max(2, int(math.floor(tail_fraction * N)))
    tail = np.arange(N - k + 1, N + 1)
    lo = max(1, int(N / span))
    extrap = np.unique(np.geomspace(lo, N, points).round().astype(np.int64))
    extrap = np.unique(np.concatenate([extrap, [N]]))
    x_tail, x_ex = inp.seq.terms(tail), inp.seq.terms(extrap)
    w = _Window(N, tail, extrap, x_tail, x_ex,
                inp.normalizers(tail, x_tail), inp.normalizers(extrap, x_ex))
    if inp.mode == GENERAL:
        w.f_tail, w.f_extrap = inp.f(x_tail), inp.f(x_ex)
        w.h_tail, w.h_extrap = inp.h(x_tail), inp.h(x_ex)
        if np.any(np.asarray(w.h_tail) <= 0) or np.any(np.asarray(w.h_extrap) <= 0):
            raise ConfigError("h must be positive along the sequence")
    return w


CORRECTION_FAMILIES = {
    "inv_log": lambda x: 1.0 / np.log(x),
    "inv_x": lambda x: 1.0 / x,
}


def extrapolate_limit(x, y, degree=2):
    """Limit of y_n by polynomial extrapolation in a correction variable u(x_n) -> 0.

    Two correction families compete: u = 1/log x, the natural scale of
    slowly varying corrections such as (log(lam x)/log x)^b, and u = 1/x for
    corrections decaying like a power.  The family with the smaller RMS fit
    residual wins and its fitted value at u = 0 is returned.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= math.e) or x.size <= degree + 1:
        return float(y[-1])
    best = None
    for u_of in CORRECTION_FAMILIES.values():
        u = u_of(x)
        scale = float(np.max(np.abs(u)))
        v = u / scale
        coef = np.polynomial.polynomial.polyfit(v, y, degree)
        resid = float(np.sqrt(np.mean((np.polynomial.polynomial.polyval(v, coef) - y) ** 2)))
        if best is None or resid < best[0]:
            best = (resid, float(coef[0]))
    return best[1]


def _limit_one(inp, w: _Window, lam, tol, rule):
    y_tail = inp.terms(w.tail, w.x_tail, w.a_tail, lam, w.f_tail, w.h_tail)
    terminal = float(y_tail[-1])
    if not np.all(np.isfinite(y_tail)):
        return terminal, math.inf, False
    osc = float(np.max(np.abs(y_tail - terminal)))
    converged = osc <= tol * max(1.0, abs(terminal))
    if rule == EXTRAPOLATE:
        y_ex = inp.terms(w.extrap, w.x_extrap, w.a_extrap, lam, w.f_extrap, w.h_extrap)
        value = extrapolate_limit(w.x_extrap, y_ex) if np.all(np.isfinite(y_ex)) else terminal
    else:
        value = terminal
    return value, osc, bool(converged)


def evaluate_limits(inp: KendallInput, points, N: int, tol: float = 1e-2,
                    limit_rule: str = EXTRAPOLATE, window: Optional[_Window] = None):
    """Sequential-limit estimates at arbitrary argument points.

    Returns (values, tail_oscillation, converged) arrays.
    """
    if limit_rule not in (TERMINAL, EXTRAPOLATE):
        raise ConfigError(f"unknown limit rule {limit_rule!r}")
    w = window or _window(inp, N)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    res = _pmap(lambda lam: _limit_one(inp, w, lam, tol, limit_rule), pts)
    vals = np.array([r[0] for r in res])
    osc = np.array([r[1] for r in res])
    conv = np.array([r[2] for r in res], dtype=bool)
    return vals, osc, conv


@dataclass
class Lattice:
    """Points L^{-1}(origin + i*step) of G_group, i = 0..count-1."""

    group: PopaParam
    origin: float
    step: float
    count: int
    bounds: Optional[tuple] = None

    def point(self, i):
        p = popa.from_log_coordinate(self.group, self.origin + np.asarray(i) * self.step)
        if self.bounds is not None:
            # endpoints must not round out of B
            p = popa._out(np.clip(p, *self.bounds))
        return p

    def shift(self, j):
        """Group element s_j with point(i) o s_j = point(i + j)."""
        return popa.from_log_coordinate(self.group, np.asarray(j) * self.step)

    def steps_for(self, s_values):
        """Lattice steps of the given group elements; error if off-lattice."""
        y = np.asarray(popa.log_coordinate(self.group, s_values), dtype=float) / self.step
        j = np.round(y)
        if np.any(np.abs(y - j) > 1e-6):
            raise ConfigError("s values must lie on the lattice (multiples of the step)")
        return j.astype(int)


def build_lattice(B: KendallSet, group, points: int = 201) -> Lattice:
    group = popa.as_param(group)
    lo, hi = popa.log_coordinate(group, [B.lo, B.hi])
    return Lattice(group, float(lo), float(hi - lo) / (points - 1), points, (float(B.lo), float(B.hi)))


@dataclass
class GHat:
    lattice: Lattice
    index: np.ndarray
    lam: np.ndarray
    value: np.ndarray
    oscillation: np.ndarray
    converged: np.ndarray

    def position(self):
        return {int(i): k for k, i in enumerate(self.index)}

    def to_dict(self):
        return {
            "lambda": self.lam.tolist(),
            "value": self.value.tolist(),
            "tail_oscillation": self.oscillation.tolist(),
            "converged": self.converged.tolist(),
        }


def sequential_limits(inp: KendallInput, lattice: Lattice, N: int, tol: float = 1e-2,
                      limit_rule: str = EXTRAPOLATE) -> GHat:
    """g_hat on the lattice points inside B.

    Each entry carries its tail oscillation max |y_n - y_N| over the last 10%
    of indices; entries above tol*max(1, |y_N|) are flagged non-convergent.
    Aborts when every non-identity point fails.
    """
    idx = np.arange(lattice.count)
    lam = np.asarray(lattice.point(idx), dtype=float)
    keep = inp.B.contains(lam)
    idx, lam = idx[keep], lam[keep]
    vals, osc, conv = evaluate_limits(inp, lam, N, tol, limit_rule)
    informative = ~np.isclose(lam, lattice.group.identity, rtol=0, atol=1e-12)
    if not np.any(conv & informative):
        worst = int(np.argmax(np.where(np.isfinite(osc), osc, -1.0)))
        raise NonConvergenceError(
            "no sequential limit converged on B",
            {"max_tail_oscillation": float(np.max(osc)), "at_lambda": float(lam[worst]),
             "tol": tol, "N": N},
        )
    return GHat(lattice, idx, lam, vals, osc, conv)


@dataclass
class KHat:
    steps: np.ndarray
    s: np.ndarray
    value: np.ndarray
    spread: np.ndarray
    anchors: np.ndarray
    group: PopaParam

    @property
    def feasible_window(self):
        return [float(self.s.min()), float(self.s.max())]

    def lookup(self):
        return {int(j): k for k, j in enumerate(self.steps)}

    def to_dict(self):
        return {
            "s": self.s.tolist(),
            "value": self.value.tolist(),
            "spread": self.spread.tolist(),
            "anchors": self.anchors.tolist(),
        }


def anchor_pairs(g: GHat, j: int):
    """Positions (k, k') in g of anchors lam_i and lam_{i+j}, both converged."""
    pos = g.position()
    pairs = [(pos[i], pos[i + j]) for i in g.index if (i + j) in pos]
    pairs = [(a, b) for a, b in pairs if g.converged[a] and g.converged[b]]
    if not pairs:
        return np.empty(0, int), np.empty(0, int)
    arr = np.array(pairs)
    return arr[:, 0], arr[:, 1]


def feasible_steps(g: GHat):
    span = int(g.index.max() - g.index.min())
    return [j for j in range(-span, span + 1) if anchor_pairs(g, j)[0].size]


def kernel_estimate(g: GHat, s_values=None, steps=None) -> KHat:
    """K_hat(s) = median over anchors of g(lam o s)/g(lam), with spread max/min - 1."""
    if s_values is not None:
        steps = g.lattice.steps_for(s_values)
    if steps is None:
        steps = feasible_steps(g)
    steps = [int(j) for j in steps]
    if not steps:
        raise EmptyAnchorError("no lattice step has a valid anchor", feasible_window=None)
    vals, spreads, counts = [], [], []
    for j in steps:
        a, b = anchor_pairs(g, j)
        if a.size == 0:
            fs = feasible_steps(g)
            window = [float(g.lattice.shift(min(fs))), float(g.lattice.shift(max(fs)))] if fs else None
            raise EmptyAnchorError(
                f"s = {float(g.lattice.shift(j))!r} has no anchor in B", feasible_window=window
            )
        ratios = g.value[b] / g.value[a]
        vals.append(float(np.median(ratios)))
        lo, hi = float(np.min(ratios)), float(np.max(ratios))
        spreads.append(hi / lo - 1.0 if lo > 0 else hi - lo)
        counts.append(int(a.size))
    steps_arr = np.array(steps)
    s = np.asarray(g.lattice.shift(steps_arr), dtype=float)
    return KHat(steps_arr, np.atleast_1d(s), np.array(vals), np.array(spreads),
                np.array(counts), g.lattice.group)


@dataclass
class IndexFit:
    kappa: float
    residual: float
    mult_residual: float
    points: int
    trivial: bool = False

    def to_dict(self):
        return dict(self.__dict__)


def _codomain_log(values, s_param: PopaParam):
    v = np.asarray(values, dtype=float)
    if s_param.is_infinite:
        if np.any(v <= 0):
            raise DegenerateKernelError("multiplicative kernel estimate is not positive")
        return np.log(v)
    if s_param.is_zero:
        return v
    return np.log1p(s_param.rho * v)


def fit_index(k: KHat, codomain=INF, trivial_tol: float = 1e-12) -> IndexFit:
    """Least-squares kappa in L_s(K(s)) = kappa * L_r(s), through the origin.

    r is the lattice group, s the codomain parameter (inf: ratio kernels).
    All-ones estimates give kappa = 0; any other {0, 1}-valued estimate is a
    trivial kernel and rejected.
    """
    codomain = popa.as_param(codomain)
    nz = k.steps != 0
    if np.count_nonzero(nz) < 3:
        raise ConfigError("index fit needs at least 3 non-identity kernel values")
    vals = k.value[nz]
    if is_trivial(vals, trivial_tol):
        if np.allclose(vals, 1.0, rtol=0, atol=trivial_tol) and codomain.is_infinite:
            mult = _mult_residual(k, codomain)
            return IndexFit(0.0, 0.0, mult, int(vals.size), trivial=True)
        raise TrivialKernelError("kernel estimate takes values only in {0, 1}")
    X = np.asarray(popa.log_coordinate(k.group, k.s[nz]), dtype=float)
    Y = _codomain_log(vals, codomain)
    kappa = float(np.dot(X, Y) / np.dot(X, X))
    resid = float(np.sqrt(np.mean((Y - kappa * X) ** 2)))
    return IndexFit(kappa, resid, _mult_residual(k, codomain), int(vals.size))


def _mult_residual(k: KHat, codomain: PopaParam) -> float:
    """max |K(s o t) - K(s) o_sigma K(t)| over table pairs with s o t in the table."""
    look = k.lookup()
    js = k.steps
    J1, J2 = np.meshgrid(js, js, indexing="ij")
    tot = (J1 + J2).ravel()
    present = np.array([t in look for t in tot])
    if not np.any(present):
        return 0.0
    a = np.array([look[int(j)] for j in J1.ravel()[present]])
    b = np.array([look[int(j)] for j in J2.ravel()[present]])
    c = np.array([look[int(t)] for t in tot[present]])
    ka, kb, kc = k.value[a], k.value[b], k.value[c]
    if codomain.is_infinite:
        rhs = ka * kb
    else:
        rhs = ka + kb * (1.0 + codomain.rho * ka)
    return float(np.max(np.abs(kc - rhs)))


@dataclass
class ResCFEReport:
    residual: float
    budget: float
    allowance: int
    per_s: list

    def to_dict(self):
        return {"residual": self.residual, "budget": self.budget, "allowance": self.allowance,
                "per_s": self.per_s}


def res_cfe_deviations(g: GHat, kappa: float, j: int):
    """Anchors lam and |g(lam o s)/(eta(s)^kappa g(lam)) - 1| for lattice step j."""
    a, b = anchor_pairs(g, j)
    scale = math.exp(kappa * j * g.lattice.step)
    dev = np.abs(g.value[b] / (scale * g.value[a]) - 1.0)
    return g.lam[a], dev


def res_cfe_check(g: GHat, kappa: float, budget: float = 0.02, steps=None, tol: float = 1e-2) -> ResCFEReport:
    """Restricted Cauchy equation residual with a per-s exceptional allowance.

    For each step the allowance is floor(budget * #lattice points in B)
    anchors; the residual is the largest deviation left after discarding
    that many, and the report keeps the maximum over s.
    """
    allowance = int(math.floor(budget * g.index.size + 1e-9))
    steps = feasible_steps(g) if steps is None else steps
    per_s, worst = [], 0.0
    for j in steps:
        if j == 0:
            continue
        lam, dev = res_cfe_deviations(g, kappa, j)
        if dev.size == 0:
            continue
        srt = np.sort(dev)[::-1]
        r = float(srt[allowance]) if allowance < srt.size else 0.0
        worst = max(worst, r)
        per_s.append({"s": float(g.lattice.shift(j)), "residual": r, "anchors": int(dev.size),
                      "exceptional": int(np.count_nonzero(dev > tol)), "passes": r < tol})
    return ResCFEReport(worst, float(budget), allowance, per_s)


@dataclass
class Segment:
    lo: float
    hi: float
    c: float
    points: int
    component: int

    def to_dict(self):
        return dict(self.__dict__)


def constancy_segments(g: GHat, B: KendallSet, kappa: float, tol: float = 1e-2):
    """Maximal runs on which g(lam)/eta(lam)^kappa is constant.

    Runs break at holes of B, at lattice gaps and where consecutive ratios
    jump by more than tol.
    """
    ok = g.converged & (g.value > 0)
    idx, lam, val = g.index[ok], g.lam[ok], g.value[ok]
    if idx.size == 0:
        return []
    powered = np.exp(kappa * np.asarray(popa.log_coordinate(g.lattice.group, lam), dtype=float))
    h = val / powered
    comp = B.component(lam)
    segs, start = [], 0
    for k in range(1, idx.size + 1):
        brk = (
            k == idx.size
            or comp[k] != comp[k - 1]
            or idx[k] != idx[k - 1] + 1
            or abs(h[k] / h[k - 1] - 1.0) > tol
        )
        if brk:
            segs.append(Segment(float(lam[start]), float(lam[k - 1]),
                                float(np.median(h[start:k])), int(k - start), int(comp[start])))
            start = k
    return segs


@dataclass
class UniformityProfile:
    N: list
    sup_deviation: list
    uniform: bool
    tol: float
    decreasing: bool = False

    def to_dict(self):
        return dict(self.__dict__)


def uct_diagnostic(inp: KendallInput, t_window, N_ladder: Sequence[int], t_points: int = 31,
                   reference=None, tol: float = 1e-2, limit_rule: str = EXTRAPOLATE) -> UniformityProfile:
    """sup over a compact t grid of |y_N(t) - g(t)| along a ladder of N.

    ``reference`` is the limit function (callable); by default the
    sequential-limit estimate at the largest N.  Uniform iff the profile is
    non-increasing and ends below tol; ``decreasing`` records the trend alone,
    which is all slowly converging inputs (log factors) can show at desk scale.
    """
    a, b = t_window
    ts = np.linspace(a, b, t_points)
    ts = ts[inp.B.contains(ts)] if inp.mode == KARAMATA else ts
    ladder = sorted(int(n) for n in N_ladder)
    if reference is None:
        ref, _, _ = evaluate_limits(inp, ts, ladder[-1], limit_rule=limit_rule)
    else:
        ref = np.asarray(reference(ts), dtype=float)
    sups = []
    for N in ladder:
        n = np.array([N])
        x = inp.seq.terms(n)
        an = inp.normalizers(n, x)
        fx = inp.f(x) if inp.mode == GENERAL else None
        hx = inp.h(x) if inp.mode == GENERAL else None
        y = np.array([inp.terms(n, x, an, t, fx, hx)[0] for t in ts])
        sups.append(float(np.max(np.abs(y - ref))))
    mono = all(q <= p * (1 + 1e-9) + 1e-15 for p, q in zip(sups, sups[1:]))
    return UniformityProfile(ladder, sups, bool(mono and sups[-1] < tol), tol, bool(mono))


@dataclass
class CorollaryReport:
    c_hat: float
    stabilizes: bool
    ratio_change: float
    trend_exponent: float
    profile: list

    def to_dict(self):
        return dict(self.__dict__)


def verify_corollary(inp: KendallInput, kappa_hat: float, ell: Optional[FunctionSpec] = None,
                     N: int = 1_000_000, tol: float = 0.02, points: int = 12) -> CorollaryReport:
    """Profile r_n = a_n x_n^kappa ell(x_n): constant c iff a_n ~ c x_n^-kappa / ell(x_n).

    With ``ell`` None the self-consistent choice ell = f / x^kappa is used.
    """
    n = np.unique(np.geomspace(max(1, N // 1000), N, points).round().astype(np.int64))
    n = np.unique(np.concatenate([n, [N // 2, N]]))
    x = inp.seq.terms(n)
    a = inp.normalizers(n, x)
    if ell is None:
        r = a * np.asarray(inp.f(x), dtype=float)
    else:
        r = a * x**kappa_hat * np.asarray(ell(x), dtype=float)
    half = int(np.searchsorted(n, N // 2))
    r_half, r_end = float(r[half]), float(r[-1])
    change = r_end / r_half - 1.0
    trend = math.log(r_end / r_half) / math.log(float(x[-1]) / float(x[half])) if r_half > 0 and r_end > 0 else math.nan
    profile = [{"n": int(k), "r": float(v)} for k, v in zip(n, r)]
    return CorollaryReport(r_end, bool(abs(change) < tol), float(change), float(trend), profile)


def argument_group(inp: KendallInput, tol: float = 1e-2):
    """The group of the argument variable, with the phi analysis if any."""
    if inp.mode == KARAMATA:
        return PopaParam(INF), None
    analysis = estimate_rho(inp.phi, tol=tol)
    if analysis.classification == REJECTED:
        raise NonConvergenceError("phi is not self-equivarying on the grid",
                                  {"phi": analysis.to_dict()})
    rho = 0.0 if analysis.classification == SN else max(analysis.rho_hat, 0.0)
    return PopaParam(rho), analysis


@dataclass
class ConvergenceReport:
    mode: str
    group: str
    g_hat: GHat
    K_hat: KHat
    fit: IndexFit
    c_hat: float
    rescfe: ResCFEReport
    segments: list
    triviality_flag: bool
    uniformity: Optional[UniformityProfile]
    phi: Optional[dict] = None
    nonconvergent: list = field(default_factory=list)

    @property
    def kappa_hat(self):
        return self.fit.kappa

    @property
    def mult_residual(self):
        return self.fit.mult_residual

    @property
    def rescfe_residual(self):
        return self.rescfe.residual

    @property
    def feasible_window(self):
        return self.K_hat.feasible_window

    def to_dict(self):
        return {
            "mode": self.mode,
            "argument_group": self.group,
            "g_hat": self.g_hat.to_dict(),
            "K_hat": self.K_hat.to_dict(),
            "kappa_hat": self.fit.kappa,
            "fit_residual": self.fit.residual,
            "c_hat": self.c_hat,
            "mult_residual": self.fit.mult_residual,
            "rescfe_residual": self.rescfe.residual,
            "rescfe": self.rescfe.to_dict(),
            "segments": [s.to_dict() for s in self.segments],
            "triviality_flag": self.triviality_flag,
            "uniformity_profile": self.uniformity.to_dict() if self.uniformity else None,
            "feasible_window": self.feasible_window,
            "phi_analysis": self.phi,
            "nonconvergent_lambda": self.nonconvergent,
        }


def run_kendall(inp: KendallInput, N: int = 1_000_000, lattice_points: int = 201,
                tol: float = 1e-2, budget: float = 0.02, limit_rule: str = EXTRAPOLATE,
                N_ladder: Sequence[int] = (), s_values=None) -> ConvergenceReport:
    """End-to-end karamata/beurling pipeline."""
    if inp.mode == GENERAL:
        raise ConfigError("use general_rv_estimate for general mode")
    group, analysis = argument_group(inp, tol)
    lattice = build_lattice(inp.B, group, lattice_points)
    g = sequential_limits(inp, lattice, N, tol, limit_rule)
    good = g.value[g.converged]
    trivial = is_trivial(good, 1e-9)
    if trivial and not np.allclose(good, 1.0, rtol=0, atol=1e-9):
        raise TrivialKernelError("g_hat takes values only in {0, 1}")
    k = kernel_estimate(g, s_values=s_values)
    fit = fit_index(k, INF)
    rescfe = res_cfe_check(g, fit.kappa, budget, tol=tol)
    segs = constancy_segments(g, inp.B, fit.kappa, tol)
    c_hat = max(segs, key=lambda s: s.points).c if segs else math.nan
    uni = None
    if N_ladder:
        uni = uct_diagnostic(inp, (inp.B.lo, inp.B.hi), N_ladder, tol=tol, limit_rule=limit_rule)
    nonconv = [float(v) for v in g.lam[~g.converged]]
    return ConvergenceReport(inp.mode, str(group), g, k, fit, c_hat, rescfe, segs,
                             bool(trivial or fit.trivial), uni,
                             analysis.to_dict() if analysis else None, nonconv)


@dataclass
class GeneralRVReport:
    t: np.ndarray
    K_hat: np.ndarray
    r_hat: np.ndarray
    rho_hat: float
    sigma_hat: float
    kappa_hat: float
    fit_residual: float
    bg_residual: float
    sigma_residual: float
    monotone: bool
    converged: np.ndarray
    uniformity: Optional[UniformityProfile] = None
    phi: Optional[dict] = None

    def to_dict(self):
        return {
            "t": self.t.tolist(),
            "K_hat": self.K_hat.tolist(),
            "r_hat": self.r_hat.tolist(),
            "rho_hat": self.rho_hat,
            "sigma_hat": self.sigma_hat,
            "kappa_hat": self.kappa_hat,
            "fit_residual": self.fit_residual,
            "bg_residual": self.bg_residual,
            "sigma_residual": self.sigma_residual,
            "monotone": self.monotone,
            "converged": self.converged.tolist(),
            "uniformity_profile": self.uniformity.to_dict() if self.uniformity else None,
            "phi_analysis": self.phi,
        }


def general_rv_estimate(inp: KendallInput, t_grid, N: int = 1_000_000, tol: float = 1e-2,
                        limit_rule: str = EXTRAPOLATE, sigma_snap: float = 1e-6,
                        N_ladder: Sequence[int] = ()) -> GeneralRVReport:
    """Differenced-RV pipeline: K_hat, r_hat, fitted sigma and the BG expansion check."""
    if inp.mode != GENERAL:
        raise ConfigError("general_rv_estimate needs general mode")
    group, analysis = argument_group(inp, tol)
    t = np.sort(np.asarray(t_grid, dtype=float))
    K, osc, conv = evaluate_limits(inp, t, N, tol, limit_rule)
    if not np.any(conv):
        raise NonConvergenceError("no difference quotient converged",
                                  {"max_tail_oscillation": float(np.max(osc))})
    ratio_inp = KendallInput(inp.h, inp.seq, inp.B, "reciprocal", BEURLING, inp.phi)
    r, r_osc, r_conv = evaluate_limits(ratio_inp, t, N, tol, limit_rule)
    if not np.all(r_conv):
        raise NonConvergenceError("h ratios do not converge (h-degeneracy)",
                                  {"max_tail_oscillation": float(np.max(r_osc))})

    # BG expansion on grid pairs: K(u o v) vs K(v) r(u) + K(u)
    U, V = np.meshgrid(t, t, indexing="ij")
    comp = np.asarray(popa.circle(group, U.ravel(), V.ravel()), dtype=float)
    K_comp, _, _ = evaluate_limits(inp, comp, N, tol, limit_rule)
    Ku, Kv, ru = np.repeat(K, t.size), np.tile(K, t.size), np.repeat(r, t.size)
    bg = float(np.max(np.abs(K_comp - (Kv * ru + Ku))))

    # sigma(w) = 1 + s w fitted to r(u) against K(u)
    nz = np.abs(K) > 1e-12
    if not np.any(nz):
        raise DegenerateKernelError("K_hat vanishes on the grid")
    s_hat = float(np.dot(K[nz], r[nz] - 1.0) / np.dot(K[nz], K[nz]))
    if abs(s_hat) < sigma_snap:
        s_hat = 0.0
    sigma_res = float(np.max(np.abs(1.0 + s_hat * K - r)))
    codomain = PopaParam(max(s_hat, 0.0))

    tt = t[nz]
    X = np.asarray(popa.log_coordinate(group, tt), dtype=float)
    Y = _codomain_log(K[nz], codomain)
    mask = X != 0
    kappa = float(np.dot(X[mask], Y[mask]) / np.dot(X[mask], X[mask]))
    fit_res = float(np.sqrt(np.mean((Y[mask] - kappa * X[mask]) ** 2)))
    d = np.diff(K)
    monotone = bool(np.all(d > 0) or np.all(d < 0))
    uni = None
    if N_ladder:
        uni = uct_diagnostic(inp, (float(t[0]), float(t[-1])), N_ladder, tol=tol,
                             limit_rule=limit_rule)
    return GeneralRVReport(t, K, r, float(group.rho) if not group.is_infinite else math.inf,
                           s_hat, kappa, fit_res, bg, sigma_res, monotone, conv, uni,
                           analysis.to_dict() if analysis else None)
