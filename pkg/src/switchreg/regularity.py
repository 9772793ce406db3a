"""Blow-up diagnostics built on the Hessian fluctuation S(r) around a point."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._fit import DegenerateFitError, linear_fit, loglog_fit
from .grid import EmptyBallError, GridSpec, ScalarField, ball_slices, gradient, hessian, laplacian

EPS = float(np.finfo(float).eps)
MIN_NODES = 6
MIN_RADII = 4


class InsufficientNodesError(ValueError):
    pass


class BallOutOfDomainError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticPolynomial:
    """``p(x) = (x - x0).A.(x - x0) + b.(x - x0) + c``."""

    A: np.ndarray
    b: np.ndarray
    c: float
    center: tuple

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.shape != (2, 2) or A[0, 1] != A[1, 0]:
            raise ValueError("A must be a symmetric 2x2 matrix")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(2))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def __call__(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        A = self.A
        return A[0, 0] * dx * dx + 2 * A[0, 1] * dx * dy + A[1, 1] * dy * dy + self.b[0] * dx + self.b[1] * dy + self.c

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.A))


def _ball(field_: ScalarField, center, r):
    window, inside = ball_slices(field_.grid, center, r)
    return field_.values[window][inside], field_.mask[window][inside]


def fit_polynomial(u: ScalarField, center, r: float) -> QuadraticPolynomial:
    """Quadratic whose coefficients are ball averages of discrete derivatives of ``u`` around ``center``."""
    uxx, uxy, uyy = hessian(u)
    _, masked = _ball(uxx, center, r)
    if int((~masked).sum()) < MIN_NODES:
        raise InsufficientNodesError(
            f"ball of radius {r!r} at {tuple(center)!r} has {int((~masked).sum())} usable nodes, need {MIN_NODES}")
    gx, gy = gradient(u)

    def avg(f):
        vals, m = _ball(f, center, r)
        return float(np.mean(vals[~m]))

    off = 0.5 * avg(uxy)
    A = np.array([[0.5 * avg(uxx), off], [off, 0.5 * avg(uyy)]])
    return QuadraticPolynomial(A, np.array([avg(gx), avg(gy)]), avg(u), tuple(center))


def check_ball(grid: GridSpec, center, r: float) -> None:
    """Raise unless ``B_r(center)`` keeps one node clear of the boundary (Hessians are defined)."""
    cx, cy = float(center[0]), float(center[1])
    slack = 1e-12 * max(1.0, r)
    if (cx - r < grid.xmin + grid.hx - slack or cx + r > grid.xmax - grid.hx + slack
            or cy - r < grid.ymin + grid.hy - slack or cy + r > grid.ymax - grid.hy + slack):
        raise BallOutOfDomainError(f"ball of radius {r!r} at {(cx, cy)!r} leaves the grid interior")


def _fluctuation(u: ScalarField, center, r: float) -> float:
    """``r^-1 * || D^2_h u - (D^2_h u)_r ||_{L^2(B_r)}`` in the Frobenius sense.

    Deviations at the rounding level of the second differences are zeroed so
    that polynomials of degree two give exactly zero.
    """
    check_ball(u.grid, center, r)
    g = u.grid
    window, inside = ball_slices(g, center, r)
    umax = float(np.max(np.abs(u.values[window][inside]))) + 1.0
    noise = 64.0 * EPS * umax * (4.0 / g.hx**2 + 4.0 / g.hy**2)
    total = 0.0
    for comp, weight in zip(hessian(u), (1.0, 2.0, 1.0)):
        vals, masked = _ball(comp, center, r)
        if masked.any():
            raise BallOutOfDomainError(f"ball of radius {r!r} at {tuple(center)!r} meets masked nodes")
        dev = vals - vals.mean()
        dev[np.abs(dev) <= noise] = 0.0
        total += weight * float(np.sum(dev * dev))
    return math.sqrt(total * g.hx * g.hy) / r


def compute_S(pair, center, radii) -> list:
    """``S(r) = r^2 * max_i r^-1 ||D^2_h u_i - (D^2_h u_i)_r||_{L^2(B_r)}`` for each radius."""
    return [r * r * max(_fluctuation(pair.u1, center, r), _fluctuation(pair.u2, center, r)) for r in radii]


def fit_exponent(radii, values):
    """Log-log slope of ``values`` against ``radii`` with its R^2.

    Any zero value short-circuits to ``(inf, 1.0)``: the quantity vanishes
    faster than every power.
    """
    radii = [float(r) for r in radii]
    values = [float(v) for v in values]
    if len(radii) != len(values):
        raise ValueError("radii and values differ in length")
    if len(radii) < MIN_RADII:
        raise ValueError(f"need at least {MIN_RADII} radii, got {len(radii)}")
    if all(r == radii[0] for r in radii):
        raise DegenerateFitError("all radii are equal")
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise ValueError("values must be finite and non-negative")
    if any(v == 0.0 for v in values):
        return math.inf, 1.0
    return loglog_fit(radii, values)


def hessian_growth(pair, center, radii) -> dict:
    """Frobenius norms ``|A_r|`` (max over both modes) and the fit ``|A_r| = a |ln r| + b``."""
    for r in radii:
        check_ball(pair.grid, center, r)
    norms = [max(fit_polynomial(pair.u1, center, r).frobenius, fit_polynomial(pair.u2, center, r).frobenius)
             for r in radii]
    a, b, r2 = linear_fit([abs(math.log(r)) for r in radii], norms)
    return {"norms": norms, "a": a, "b": b, "r2": r2}


@dataclass(frozen=True)
class ClassifyThresholds:
    exponent_margin: float = 0.1
    s_r2_min: float = 0.95
    a_r2_min: float = 0.9
    a_tol: float | None = None  # None means 0.02 * scale
    bmo_constant: float = 10.0
    min_radius_factor: float = 8.0


def default_radii(grid: GridSpec) -> list:
    r0 = 0.25 * min(grid.xmax - grid.xmin, grid.ymax - grid.ymin) / 2.0
    return [r0 * 2.0**-k for k in range(1, 7)]


@dataclass(frozen=True)
class RegularityReport:
    center: tuple
    radii: list
    dropped_radii: list
    S: list
    S_exponent: float | None
    S_r2: float | None
    A_norms: list
    A_log_coefficient: float | None
    A_log_intercept: float | None
    A_r2: float | None
    classification: str
    alpha: float | None
    thresholds: dict
    a_tol: float
    bmo_bound: float
    bmo_ratios: list
    bmo_ok: bool
    secondary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["center"] = list(self.center)
        return out


def _classify(S_exp, S_r2, a, a_r2, a_tol, th: ClassifyThresholds):
    if S_exp is None or a is None:
        return "inconclusive", None
    m = th.exponent_margin
    if S_exp >= 2.0 + m and S_r2 >= th.s_r2_min and a <= a_tol:
        return "C2alpha", S_exp - 2.0
    if 2.0 - m <= S_exp <= 2.0 + m and a <= a_tol:
        return "C11", None
    if a > a_tol and a_r2 >= th.a_r2_min:
        return "log-singular", None
    return "inconclusive", None


def _ball_l2_full(u: ScalarField, center, r: float) -> float:
    vals, masked = _ball(u, center, r)
    vals = vals[~masked]
    return math.sqrt(float(np.sum(vals * vals)) * u.grid.hx * u.grid.hy)


def _secondary(pair, center, radii) -> dict:
    """Convergence of the lower-order coefficients and sup-norm deviation from the finest quadratic."""
    polys = [(fit_polynomial(pair.u1, center, r), fit_polynomial(pair.u2, center, r)) for r in radii]
    fine = polys[-1]
    grid = pair.grid
    X, Y = grid.mesh()
    b_dev, c_dev, sup_dev = [], [], []
    for r, (p1, p2) in zip(radii, polys):
        b_dev.append(max(float(np.linalg.norm(p1.b - fine[0].b)), float(np.linalg.norm(p2.b - fine[1].b))))
        c_dev.append(max(abs(p1.c - fine[0].c), abs(p2.c - fine[1].c)))
        window, inside = ball_slices(grid, center, r)
        sup = 0.0
        for u, p in ((pair.u1, fine[0]), (pair.u2, fine[1])):
            diff = u.values[window][inside] - p(X[window][inside], Y[window][inside])
            sup = max(sup, float(np.max(np.abs(diff))))
        sup_dev.append(sup)

    def fit(vals, rs):
        try:
            e, r2 = fit_exponent(rs, vals)
        except ValueError:
            return None, None
        return e, r2

    out = {"b_deviation": b_dev, "c_deviation": c_dev, "sup_deviation": sup_dev}
    out["b_exponent"], out["b_r2"] = fit(b_dev[:-1], radii[:-1])
    out["c_exponent"], out["c_r2"] = fit(c_dev[:-1], radii[:-1])
    out["sup_exponent"], out["sup_r2"] = fit(sup_dev, radii)
    return out


def classify_point(spec, pair, center, radii=None, thresholds: ClassifyThresholds | None = None) -> RegularityReport:
    """Regularity verdict at ``center`` from the decay of S(r) and the growth of ``|A_r|``.

    Radii not exceeding ``min_radius_factor * h`` are dropped; fewer than four
    remaining radii give ``inconclusive``.
    """
    th = thresholds or ClassifyThresholds()
    grid = pair.grid
    center = (float(center[0]), float(center[1]))
    radii = default_radii(grid) if radii is None else [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    cutoff = th.min_radius_factor * grid.h
    used = [r for r in radii if r > cutoff]
    dropped = [r for r in radii if r <= cutoff]
    a_tol = 0.02 * spec.scale if th.a_tol is None else float(th.a_tol)

    S = compute_S(pair, center, used)
    S_exp = S_r2 = a = b = a_r2 = None
    norms = []
    if used:
        g = hessian_growth(pair, center, used) if len(used) >= 2 else None
        if g is not None:
            norms, a, b, a_r2 = g["norms"], g["a"], g["b"], g["r2"]
    if len(used) >= MIN_RADII:
        S_exp, S_r2 = fit_exponent(used, S)
    else:
        a = None
    cls, alpha = _classify(S_exp, S_r2, a, a_r2, a_tol, th)

    d = spec.data
    lap_phi = max((d.f1 - d.f2 + laplacian(d.psi1)).max_abs(), (d.f2 - d.f1 + laplacian(d.psi2)).max_abs())
    r_big = max(used) if used else 0.0
    u_l2 = max(_ball_l2_full(pair.u1, center, r_big), _ball_l2_full(pair.u2, center, r_big)) if used else 0.0
    bound = th.bmo_constant * (lap_phi + u_l2)
    ratios = [s / (r * r) for s, r in zip(S, used)]
    secondary = _secondary(pair, center, used) if len(used) >= 2 else {}
    return RegularityReport(
        center=center, radii=used, dropped_radii=dropped, S=S, S_exponent=S_exp, S_r2=S_r2,
        A_norms=norms, A_log_coefficient=a, A_log_intercept=b, A_r2=a_r2,
        classification=cls, alpha=alpha, thresholds=asdict(th), a_tol=a_tol,
        bmo_bound=bound, bmo_ratios=ratios, bmo_ok=all(q <= bound for q in ratios),
        secondary=secondary,
    )


__all__ = [
    "QuadraticPolynomial", "RegularityReport", "ClassifyThresholds", "InsufficientNodesError",
    "BallOutOfDomainError", "DegenerateFitError", "EmptyBallError", "fit_polynomial", "compute_S",
    "fit_exponent", "hessian_growth", "classify_point", "default_radii", "check_ball",
]
