"""Popa circle groups G_rho built from the Golab-Schinzel solutions eta_rho.

For finite ``rho`` the operation is ``s o t = s + t * eta_rho(s)`` with
``eta_rho(t) = 1 + rho*t``; the group lives on ``{t : 1 + rho*t > 0}``.
``rho = 0`` is ordinary addition on the line.  ``rho = INF`` is a separate
state, not a float: its group is ``(0, inf)`` under multiplication.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, SingularityError


class _Infinity(enum.Enum):
    INF = "inf"

    def __repr__(self):
        return "INF"


INF = _Infinity.INF


@dataclass(frozen=True)
class PopaParam:
    """Parameter rho in [0, inf] selecting eta_rho and the operation o_rho."""

    rho: Union[float, _Infinity]

    def __post_init__(self):
        rho = self.rho
        if rho is INF:
            return
        if isinstance(rho, str):
            object.__setattr__(self, "rho", _parse_rho(rho))
            return
        rho = float(rho)
        if math.isinf(rho) and rho > 0:
            object.__setattr__(self, "rho", INF)
            return
        if not math.isfinite(rho) or rho < 0:
            raise DomainError(f"Popa parameter must lie in [0, inf], got {self.rho!r}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def infinity(cls) -> "PopaParam":
        return cls(INF)

    @property
    def is_infinite(self) -> bool:
        return self.rho is INF

    @property
    def is_zero(self) -> bool:
        return self.rho is not INF and self.rho == 0.0

    def boundary(self) -> float:
        """Left end of the group domain: -1/rho, -inf for rho=0, 0 for rho=inf."""
        if self.is_infinite:
            return 0.0
        if self.rho == 0.0:
            return -math.inf
        return -1.0 / self.rho

    @property
    def identity(self) -> float:
        return 1.0 if self.is_infinite else 0.0

    def __str__(self):
        return "inf" if self.is_infinite else repr(self.rho)


def _parse_rho(text: str):
    t = text.strip().lower()
    if t in ("inf", "infinity", "oo", "∞"):
        return INF
    value = float(t)
    if value < 0 or math.isnan(value):
        raise DomainError(f"Popa parameter must lie in [0, inf], got {text!r}")
    return INF if math.isinf(value) else value


def as_param(p) -> PopaParam:
    return p if isinstance(p, PopaParam) else PopaParam(p)


def _out(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def in_domain(param, t):
    """Boolean mask of membership in the positive branch of G_rho."""
    param = as_param(param)
    t = np.asarray(t, dtype=float)
    if param.is_infinite:
        return _out(np.isfinite(t) & (t > 0))
    if param.rho == 0.0:
        return _out(np.isfinite(t))
    return _out(np.isfinite(t) & (1.0 + param.rho * t > 0))


def _check_domain(param, *values):
    for v in values:
        if not np.all(in_domain(param, v)):
            raise DomainError(
                f"value outside the group domain (t > {param.boundary()}) for rho={param}"
            )


def eta(param, t):
    """eta_rho(t) = 1 + rho*t; for rho=inf the multiplicative convention eta(t)=t."""
    param = as_param(param)
    t = np.asarray(t, dtype=float)
    if param.is_infinite:
        if np.any(t <= 0):
            raise DomainError("eta_inf is only defined for t > 0")
        return _out(t.copy())
    return _out(1.0 + param.rho * t)


def circle(param, s, t):
    """The Popa circle operation s o_rho t."""
    param = as_param(param)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_domain(param, s, t)
    if param.is_infinite:
        return _out(s * t)
    return _out(s + t * (1.0 + param.rho * s))


def inverse(param, x):
    """Group inverse: -x/(1+rho*x) for finite rho, 1/x for rho=inf."""
    param = as_param(param)
    x = np.asarray(x, dtype=float)
    if param.is_infinite:
        if np.any(x == 0):
            raise SingularityError("0 has no inverse in the multiplicative group")
        return _out(1.0 / x)
    e = 1.0 + param.rho * x
    if np.any(e == 0):
        raise SingularityError(f"eta vanishes at x = {param.boundary()}; no inverse")
    return _out(-x / e)


def gs_residual(param, s, t):
    """|eta(s o t) - eta(s) eta(t)|, the Golab-Schinzel defect."""
    param = as_param(param)
    lhs = np.asarray(eta(param, circle(param, s, t)))
    return _out(np.abs(lhs - np.asarray(eta(param, s)) * eta(param, t)))


def eta_inverse(param, y):
    """Inverse *function* of eta_rho (not the group inverse): (y-1)/rho.

    Undefined for rho=0, where eta is constant.
    """
    param = as_param(param)
    y = np.asarray(y, dtype=float)
    if param.is_infinite:
        return _out(y.copy())
    if param.rho == 0.0:
        raise DomainError("eta_0 is constant and has no inverse function")
    return _out((y - 1.0) / param.rho)


def log_coordinate(param, t):
    """Isomorphism from G_rho onto (R, +): t, log(1+rho*t) or log t."""
    param = as_param(param)
    t = np.asarray(t, dtype=float)
    _check_domain(param, t)
    if param.is_infinite:
        return _out(np.log(t))
    if param.rho == 0.0:
        return _out(t.copy())
    return _out(np.log1p(param.rho * t))


def from_log_coordinate(param, y):
    """Inverse of :func:`log_coordinate`."""
    param = as_param(param)
    y = np.asarray(y, dtype=float)
    if param.is_infinite:
        return _out(np.exp(y))
    if param.rho == 0.0:
        return _out(y.copy())
    return _out(np.expm1(y) / param.rho)


def sample_group(param, size, rng, spread=1.0):
    """Random group elements whose log-coordinates are N(0, spread**2)."""
    return from_log_coordinate(param, rng.normal(0.0, spread, size=size))
