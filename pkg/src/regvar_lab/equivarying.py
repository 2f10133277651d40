"""Diagnostics for auxiliary functions phi: self-equivarying or self-neglecting?"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SE = "SE"
SN = "SN"
REJECTED = "rejected"

DEFAULT_X_GRID = tuple(10.0**k for k in range(1, 9))
DEFAULT_T_GRID = tuple(np.linspace(0.0, 3.0, 31))


def eta_empirical(phi, x, t):
    """phi(x + t phi(x)) / phi(x)."""
    px = np.asarray(phi(x), dtype=float)
    if np.any(px == 0):
        raise ZeroDivisionError("phi vanishes at x")
    return phi(x + np.asarray(t) * px) / px


@dataclass
class PhiAnalysis:
    rho_hat: float
    sup_deviation: float
    O_x_ratio: float
    classification: str
    rho_path: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rho_hat": self.rho_hat,
            "sup_deviation": self.sup_deviation,
            "O_x_ratio": self.O_x_ratio,
            "classification": self.classification,
            "converged": self.converged,
            "rho_path": self.rho_path,
            "deviations": self.deviations,
            "ratios": self.ratios,
            "notes": self.notes,
        }


def _slope_through_origin(t, y):
    return float(np.dot(t, y) / np.dot(t, t))


def estimate_rho(phi, x_grid=DEFAULT_X_GRID, t_grid=DEFAULT_T_GRID, tol: float = 1e-2,
                 window: int = 3) -> PhiAnalysis:
    """Fit eta_x(t) ~ 1 + rho t and classify phi.

    rho is the least-squares slope (through the origin) of eta_x(t) - 1 on t
    at the largest x; deviations are sup_t |eta_x(t) - (1 + rho t)| per x.
    Convergence needs, over the last ``window`` grid points, non-increasing
    deviations, per-x fitted slopes agreeing within ``tol``, and a final
    deviation below ``tol``.
    """
    xs = np.asarray(x_grid, dtype=float)
    ts = np.asarray(t_grid, dtype=float)
    if xs.size == 0 or ts.size == 0:
        raise ValueError("x and t grids must be nonempty")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x grid must be increasing")
    if not np.any(ts != 0):
        raise ValueError("t grid needs a nonzero point")

    etas = [np.asarray(eta_empirical(phi, x, ts), dtype=float) for x in xs]
    rhos = [_slope_through_origin(ts, e - 1.0) for e in etas]
    rho_hat = rhos[-1]
    devs = [float(np.max(np.abs(e - (1.0 + rho_hat * ts)))) for e in etas]
    ratios = [float(v) for v in np.asarray(phi(xs), dtype=float) / xs]

    w = min(window, xs.size)
    tail_dev = devs[-w:]
    tail_rho = rhos[-w:]
    notes = []
    dev_ok = all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(tail_dev, tail_dev[1:]))
    dev_ok = dev_ok and tail_dev[-1] < tol
    if not dev_ok:
        notes.append("eta_x does not settle onto 1 + rho t below tol")
    rho_ok = (max(tail_rho) - min(tail_rho)) < tol
    if not rho_ok:
        notes.append("fitted slope drifts across the last grid points")
    converged = bool(dev_ok and rho_ok)

    # boundedness of phi(x)/x: log-log trend over the tail must not be positive
    if w >= 2 and all(r > 0 for r in ratios[-w:]):
        trend = np.polyfit(np.log(xs[-w:]), np.log(ratios[-w:]), 1)[0]
    else:
        trend = 0.0
    bounded = bool(trend <= tol)
    if not bounded:
        notes.append(f"phi(x)/x grows along the grid (log-log trend {trend:.3g})")

    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    if not (converged and bounded):
        cls = REJECTED
    elif abs(rho_hat) < tol and decreasing:
        cls = SN
    else:
        cls = SE
    return PhiAnalysis(
        rho_hat=float(rho_hat),
        sup_deviation=float(max(devs)),
        O_x_ratio=float(max(ratios)),
        classification=cls,
        rho_path=[float(r) for r in rhos],
        deviations=devs,
        ratios=ratios,
        converged=converged,
        notes=notes,
    )
