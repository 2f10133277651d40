"""Continuous solutions of the Beurling-Goldie equation K(u o_r v) = K(u) o_s K(v).

The nine (r, s) cells, with r, s each in {0, (0, inf), inf}::

            s = 0           s in (0, inf)           s = inf
    r = 0   k t             (exp(k t) - 1)/s        exp(k t)
    r       k log(1+rt)     ((1+rt)^k - 1)/s        (1+rt)^k
    r = inf k log t         (t^k - 1)/s             t^k

Equivalently K = L_s^{-1}(k L_r(t)) where L_p is the log-coordinate of G_p
(see :func:`regvar_lab.popa.log_coordinate`); ``kernel_eval_isomorphic``
evaluates that second form independently of the explicit table.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import popa
from .errors import DegenerateKernelError, DomainError
from .popa import PopaParam, as_param


class EquationClass(enum.Enum):
    CFE_ADDITIVE = "CFE_additive"
    CFE_MULTIPLICATIVE = "CFE_multiplicative"
    GOLDIE = "Goldie"
    CJ = "CJ"
    BG_GENERAL = "BG_general"
    GS = "GS"


def classify(r, s) -> EquationClass:
    r, s = as_param(r), as_param(s)
    if r.is_zero and s.is_zero:
        return EquationClass.CFE_ADDITIVE
    if r.is_infinite and s.is_infinite:
        return EquationClass.CFE_MULTIPLICATIVE
    if r.is_zero:
        return EquationClass.GOLDIE
    if s.is_infinite:
        return EquationClass.CJ
    return EquationClass.BG_GENERAL


@dataclass(frozen=True)
class KernelSpec:
    r: PopaParam
    s: PopaParam
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "r", as_param(self.r))
        object.__setattr__(self, "s", as_param(self.s))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def equation(self) -> EquationClass:
        return classify(self.r, self.s)

    @property
    def is_degenerate(self) -> bool:
        return self.kappa == 0.0

    def __call__(self, t):
        return kernel_eval(self, t)


def _check(spec: KernelSpec, t):
    t = np.asarray(t, dtype=float)
    if not np.all(popa.in_domain(spec.r, t)):
        raise DomainError(f"kernel argument must exceed {spec.r.boundary()} for r={spec.r}")
    return t


def kernel_eval(spec: KernelSpec, t):
    """Explicit table value K(t) for the cell (spec.r, spec.s) with index spec.kappa."""
    t = _check(spec, t)
    k, r, s = spec.kappa, spec.r, spec.s
    if r.is_zero:
        if s.is_zero:
            out = k * t
        elif s.is_infinite:
            out = np.exp(k * t)
        else:
            out = (np.exp(k * t) - 1.0) / s.rho
    elif r.is_infinite:
        if s.is_zero:
            out = k * np.log(t)
        elif s.is_infinite:
            out = t**k
        else:
            out = (t**k - 1.0) / s.rho
    else:
        base = 1.0 + r.rho * t
        if s.is_zero:
            out = k * np.log(base)
        elif s.is_infinite:
            out = base**k
        else:
            out = (base**k - 1.0) / s.rho
    return popa._out(np.asarray(out))


def kernel_eval_isomorphic(spec: KernelSpec, t):
    """K(t) as eta_s^{-1}(eta_r(t)^kappa), with exp/log standing in at 0 and inf."""
    t = _check(spec, t)
    r, s = spec.r, spec.s
    base = np.exp(t) if r.is_zero else np.asarray(popa.eta(r, t))
    powered = np.power(base, spec.kappa)
    if s.is_zero:
        out = np.log(powered)
    else:
        out = popa.eta_inverse(s, powered)
    return popa._out(np.asarray(out))


def bg_residual_fn(kernel, r, s, u, v):
    """|K(u o_r v) - K(u) o_s K(v)| for an arbitrary callable K."""
    r, s = as_param(r), as_param(s)
    lhs = np.asarray(kernel(popa.circle(r, u, v)), dtype=float)
    ku = np.asarray(kernel(u), dtype=float)
    kv = np.asarray(kernel(v), dtype=float)
    if s.is_infinite:
        rhs = ku * kv
    else:
        rhs = ku + kv * (1.0 + s.rho * ku)
    return popa._out(np.abs(lhs - rhs))


def bg_residual(spec: KernelSpec, u, v):
    return bg_residual_fn(spec, spec.r, spec.s, u, v)


def cj_residual(spec: KernelSpec, u, v):
    """|K(u o_r v) - K(u) K(v)|; only meaningful for the s = inf column."""
    if not spec.s.is_infinite:
        raise DomainError("the Chudziak-Jablonska residual needs s = inf")
    return bg_residual(spec, u, v)


def sigma_relation_check(spec: KernelSpec, u, step: float = 1e-6):
    """|sigma(K(u)) - r(u)| with sigma(w) = 1 + s w.

    r(u) is recovered numerically as the central difference quotient
    [K(u o w+) - K(u o w-)] / [K(w+) - K(w-)] with w+- = identity +- step.
    """
    if spec.s.is_infinite:
        raise DomainError("sigma relation is defined for finite s only")
    if spec.is_degenerate:
        raise DegenerateKernelError("kappa = 0: K is constant and not invertible")
    e = spec.r.identity
    w_plus, w_minus = e + step, e - step
    num = np.asarray(kernel_eval(spec, popa.circle(spec.r, u, w_plus))) - kernel_eval(
        spec, popa.circle(spec.r, u, w_minus)
    )
    den = kernel_eval(spec, w_plus) - kernel_eval(spec, w_minus)
    r_u = num / den
    sigma = 1.0 if spec.s.is_zero else 1.0 + spec.s.rho * np.asarray(kernel_eval(spec, u))
    return popa._out(np.abs(sigma - r_u))


def is_trivial(values, tol: float) -> bool:
    """True iff every value is within ``tol`` of 0 or of 1."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("is_trivial needs at least one value")
    return bool(np.all(np.minimum(np.abs(v), np.abs(v - 1.0)) <= tol))


_ROW_FORMULAS = {
    "zero": ("k*t", "(exp(k*t)-1)/s", "exp(k*t)"),
    "finite": ("k*log(1+r*t)", "((1+r*t)^k-1)/s", "(1+r*t)^k"),
    "inf": ("k*log(t)", "(t^k-1)/s", "t^k"),
}


def table_rows(kappa: float, t: float, r_finite: float = 1.0, s_finite: float = 1.0):
    """The 3x3 grid as a list of row dicts with formula and value per cell."""
    rows = []
    for r_key, r in (("zero", 0.0), ("finite", r_finite), ("inf", popa.INF)):
        cells = []
        for col, s in enumerate((0.0, s_finite, popa.INF)):
            spec = KernelSpec(r, s, kappa)
            try:
                value = float(kernel_eval(spec, t))
            except DomainError:
                value = None
            cells.append(
                {"s": str(spec.s), "formula": _ROW_FORMULAS[r_key][col], "value": value}
            )
        rows.append({"r": str(as_param(r)), "cells": cells})
    return rows


def format_table(kappa: float, t: float, r_finite: float = 1.0, s_finite: float = 1.0) -> str:
    """Plain-text dump of the kernel table, values with 12 significant digits."""
    rows = table_rows(kappa, t, r_finite, s_finite)
    header = [f"r \\ s", "s=0", f"s={s_finite!r}", "s=inf"]
    lines = [f"kappa={kappa!r} t={t!r}", " | ".join(header)]
    for row in rows:
        parts = [f"r={row['r']}"]
        for cell in row["cells"]:
            v = "undefined" if cell["value"] is None else format(cell["value"], ".12g")
            parts.append(f"{cell['formula']} = {v}")
        lines.append(" | ".join(parts))
    return "\n".join(lines)
