"""Exact reference solutions.

* The isolated-zero-loop counterexample in the plane: switching costs
  ``phi = |x|^2 / 4`` for both modes, difference ``w`` (a piecewise quadratic)
  and a pair ``(u1, u2 = u1 - w)`` whose Hessians blow up like ``|ln r|`` at
  the origin.
* The one-dimensional oscillating costs whose round-trip gains form a
  divergent series.

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, laplacian, sample

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if not 0.0 < self.theta <= TWO_PI:
            raise ValueError("theta must lie in (0, 2*pi]")

    @classmethod
    def from_xy(cls, x: float, y: float) -> "PolarPoint":
        r, t = to_polar(x, y)
        return cls(float(r), float(t))


def to_polar(x, y):
    """``(r, theta)`` with theta mapped into ``(0, 2*pi]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.arctan2(y, x)
    t = np.where(t <= 0.0, t + TWO_PI, t)
    return np.hypot(x, y), t


def ce_phi(x, y):
    return (np.asarray(x) ** 2 + np.asarray(y) ** 2) / 4.0


def ce_w(x, y):
    """Quadrant-wise difference ``u1 - u2``; axis values by continuity."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q1 = (x >= 0) & (y >= 0)
    q3 = (x <= 0) & (y <= 0) & ~q1
    q2 = (x < 0) & (y > 0)
    out = np.where(q1, -(x * x + y * y) / 4.0, 0.0)
    out = np.where(q2, (x * x - y * y) / 4.0, out)
    out = np.where(q3, (x * x + y * y) / 4.0, out)
    out = np.where(~(q1 | q2 | q3), (y * y - x * x) / 4.0, out)
    return out[()] if out.ndim == 0 else out


def _log_harmonic(r, t):
    # Im(z^2 log z) with arg z in (0, 2*pi]; 0 at the origin by continuity
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    return r * r * (t * np.cos(2 * t) + lr * np.sin(2 * t))


def _u1_polar(r, t):
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    c2 = np.cos(2 * t)
    first = t <= math.pi / 2
    quad = np.where(first, -0.25 * r * r - r * r * c2 / 8.0, r * r * c2 / 8.0)
    out = quad - _log_harmonic(r, t) / (4.0 * math.pi)
    return np.where(r > 0, out, 0.0)


def ce_u1(p: PolarPoint) -> float:
    """Mode-1 value.  The origin returns 0 (its continuous value)."""
    return float(_u1_polar(p.r, p.theta))


def ce_u2(p: PolarPoint) -> float:
    x, y = p.r * math.cos(p.theta), p.r * math.sin(p.theta)
    return float(_u1_polar(p.r, p.theta) - ce_w(x, y))


def u1_xy(x, y):
    r, t = to_polar(x, y)
    out = _u1_polar(r, t)
    return out[()] if np.ndim(out) == 0 else out


def u2_xy(x, y):
    out = u1_xy(x, y) - ce_w(x, y)
    return out[()] if np.ndim(out) == 0 else out


def counterexample_spec(n: int):
    """Problem data on ``[-1, 1]^2`` with both costs ``phi`` and oracle boundary values."""
    from .switching import ProblemSpec

    return ProblemSpec(
        f1="0", f2="0", psi1="0.25*(x^2+y^2)", psi2="0.25*(x^2+y^2)",
        g1=u1_xy, g2=u2_xy, grid=GridSpec.square(n),
    )


def oracle_pair(grid: GridSpec):
    """Oracle fields sampled on a grid, packaged as a solution pair."""
    from .switching import SolutionPair

    return SolutionPair(sample(u1_xy, grid), sample(u2_xy, grid), method="closed-form")


def verify_counterexample(grid: GridSpec, rho_excl: float, tol: float, axis_margin: int = 2) -> dict:
    """Check the oracle pair against the discrete system away from its singular set.

    The checked nodes are interior, outside ``B_rho_excl(0)``, and at least
    ``axis_margin`` nodes from both coordinate axes (where the Hessian jumps).
    Residuals on the excluded band are reported but do not affect ``passed``.
    """
    if grid.xmin > -1 or grid.xmax < 1 or grid.ymin > -1 or grid.ymax < 1:
        raise ValueError("grid must cover [-1, 1]^2")
    if rho_excl < 4 * grid.h:
        raise ValueError(f"exclusion radius {rho_excl!r} is below 4h = {4 * grid.h!r}")
    X, Y = grid.mesh()
    u1 = sample(u1_xy, grid)
    u2 = sample(u2_xy, grid)
    phi = ce_phi(X, Y)
    w = ce_w(X, Y)
    neg_lap1 = -laplacian(u1).values
    neg_lap2 = -laplacian(u2).values
    theta1 = u1.values - u2.values + phi
    theta2 = u2.values - u1.values + phi
    eq1 = np.minimum(neg_lap1, theta1)
    eq2 = np.minimum(neg_lap2, theta2)
    eq3 = np.minimum(neg_lap1, neg_lap2)

    interior = grid.interior_mask()
    far_axes = (np.abs(X) >= axis_margin * grid.hx * (1 - 1e-9)) & (np.abs(Y) >= axis_margin * grid.hy * (1 - 1e-9))
    checked = interior & far_axes & (np.hypot(X, Y) > rho_excl)
    band = interior & ~checked & (np.hypot(X, Y) > rho_excl)
    q1 = (X > 0) & (Y > 0)
    q3 = (X < 0) & (Y < 0)
    off_axis = (X != 0) & (Y != 0)

    def mx(a, m):
        return float(np.max(np.abs(a[m]))) if m.any() else 0.0

    loop = 2.0 * phi
    report = {
        "n": [grid.nx, grid.ny],
        "h": grid.h,
        "rho_excl": rho_excl,
        "tol": tol,
        "checked_nodes": int(checked.sum()),
        "eq1_max": mx(eq1, checked),
        "eq2_max": mx(eq2, checked),
        "eq3_max": mx(eq3, checked),
        "q1_lap_u1_minus_1_max": mx(neg_lap1 - 1.0, checked & q1),
        "q1_theta1_max": mx(theta1, q1),
        "q3_theta2_max": mx(theta2, q3),
        "difference_minus_w_max": mx(u1.values - u2.values - w, off_axis),
        "axis_band_eq1_max": mx(eq1, band),
        "axis_band_eq2_max": mx(eq2, band),
        "zero_loop_nodes": int((loop[interior] <= 0.0).sum()),
        "zero_loop_interior_nodes": int(_zero_loop_interior(loop <= 0.0).sum()),
    }
    report["identity_ok"] = max(report["q1_theta1_max"], report["q3_theta2_max"],
                                report["difference_minus_w_max"]) <= 1e-12
    report["residual_ok"] = max(report["eq1_max"], report["eq2_max"], report["q1_lap_u1_minus_1_max"]) <= tol
    report["passed"] = bool(report["identity_ok"] and report["residual_ok"])
    return report


def _zero_loop_interior(zero: np.ndarray) -> np.ndarray:
    inner = np.zeros_like(zero)
    z = zero
    inner[1:-1, 1:-1] = (
        z[1:-1, 1:-1] & z[1:-1, 2:] & z[1:-1, :-2] & z[2:, 1:-1] & z[:-2, 1:-1]
        & z[2:, 2:] & z[2:, :-2] & z[:-2, 2:] & z[:-2, :-2]
    )
    return inner


def oracle_hessian_log_coefficient() -> float:
    """Leading ``|ln r|`` coefficient of the Frobenius norm of ``A_r = (D^2 u1)_r / 2``.

    Only the mixed second derivative of ``-(1/4pi) Im(z^2 log z)`` grows,
    as ``-(1/2pi) ln r``; it enters the Frobenius norm twice.
    """
    return math.sqrt(2.0) / (4.0 * math.pi)


# one-dimensional oscillating costs -------------------------------------------------

def example1_costs(x):
    """Switching costs ``(psi1, psi2)`` on ``(-1, 1)``.

    Both values are moved by at most a few ulps from the formulas so that
    ``psi1 + psi2`` rounds to exactly ``1 - |x|``.
    """
    x = float(x)
    if not abs(x) < 1.0:
        raise ValueError(f"costs are defined on (-1, 1) only, got x={x!r}")
    p = 1.0 - abs(x)
    c = math.cos(math.pi / p)
    psi1 = p * c
    # psi2 = p * (1 - c) = p - psi1 up to rounding; search a few ulps of psi1
    # (and of the difference) for a pair whose rounded sum is exactly p
    a_up = a_dn = psi1
    for _ in range(64):
        for a in (a_up, a_dn):
            b0 = p - a
            for b in (b0, math.nextafter(b0, math.inf), math.nextafter(b0, -math.inf)):
                if a + b == p:
                    return a, b
        a_up = math.nextafter(a_up, math.inf)
        a_dn = math.nextafter(a_dn, -math.inf)
    raise ArithmeticError(f"no exactly summing cost pair found near x={x!r}")


def _example1_arrays(x):
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    p1 = np.zeros(flat.shape)
    p2 = np.zeros(flat.shape)
    for k, xv in enumerate(flat):
        if abs(xv) < 1.0:
            p1[k], p2[k] = example1_costs(xv)
    return p1.reshape(x.shape), p2.reshape(x.shape)


def example1_spec(nx: int = 201):
    """Strip ``[-1, 1] x [-h, h]`` with three rows; data independent of ``y``.

    Costs take their limiting value 0 at ``x = +-1``.  Only the x-ends are
    Dirichlet boundary for this one-dimensional problem, so validate with
    ``boundary_axes="x"``.
    """
    from .switching import ProblemSpec

    h = 2.0 / (nx - 1)
    return ProblemSpec(
        f1="0", f2="0",
        psi1=lambda X, Y: _example1_arrays(X)[0],
        psi2=lambda X, Y: _example1_arrays(X)[1],
        g1="0", g2="0",
        grid=GridSpec(-1.0, 1.0, -h, h, nx, 3),
    )


def loop_gain(N: int) -> float:
    """Partial sum ``sum_{n<N} 1/(2n+1)`` of the gains from ``N`` switching round trips."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return math.fsum(1.0 / (2 * n + 1) for n in range(N))


__all__ = [
    "PolarPoint", "to_polar", "ce_phi", "ce_w", "ce_u1", "ce_u2", "u1_xy", "u2_xy",
    "counterexample_spec", "oracle_pair", "verify_counterexample", "example1_costs",
    "example1_spec", "loop_gain", "oracle_hessian_log_coefficient",
]
