"""Scalar elliptic solvers: Dirichlet Poisson and the two-sided obstacle problem."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.fft import dstn, idstn
from numba import njit

from .grid import GridSpec, ScalarField, laplacian_values

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


class ConvergenceError(RuntimeError):
    pass


class InfeasibleObstaclesError(ValueError):
    pass


@dataclass(frozen=True)
class EllipticConfig:
    """Stopping rules for the elliptic solvers.

    ``tol`` is the relative residual threshold of the Poisson solve;
    ``comp_tol`` the (scale-relative) complementarity tolerance of the
    obstacle solver.  ``max_iter=None`` means ``200 * max(nx, ny)`` sweeps.
    """

    tol: float = 1e-10
    comp_tol: float = 1e-6
    max_iter: int | None = None
    omega: float = 1.8
    check_every: int = 10

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (0, 2)")
        if not self.tol > 0 or not self.comp_tol > 0:
            raise ValueError("tolerances must be positive")

    def sweeps(self, grid: GridSpec) -> int:
        return self.max_iter if self.max_iter is not None else 200 * max(grid.nx, grid.ny)


def optimal_omega(grid: GridSpec) -> float:
    """Classical optimal SOR factor for the five-point Laplacian on a rectangle."""
    mu = (math.cos(math.pi / (grid.nx - 1)) / grid.hx**2 + math.cos(math.pi / (grid.ny - 1)) / grid.hy**2) / (
        1.0 / grid.hx**2 + 1.0 / grid.hy**2
    )
    return 2.0 / (1.0 + math.sqrt(1.0 - mu * mu))


def _as_array(v, grid) -> np.ndarray:
    if isinstance(v, ScalarField):
        if v.grid != grid:
            raise ValueError("field grid does not match")
        return v.values
    a = np.asarray(v, dtype=float)
    return np.broadcast_to(a, grid.shape)


def interior_operator(grid: GridSpec) -> sp.csc_matrix:
    """``-Delta_h`` on interior unknowns (row-major, x fastest), Dirichlet folded out."""
    mx, my = grid.nx - 2, grid.ny - 2

    def second_diff(m, h):
        return sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h**2

    return (sp.kron(sp.identity(my), second_diff(mx, grid.hx)) + sp.kron(second_diff(my, grid.hy), sp.identity(mx))).tocsc()


def boundary_lift(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Contribution of boundary values to ``Delta_h`` at interior nodes."""
    v = np.zeros(grid.shape)
    v[0, :], v[-1, :], v[:, 0], v[:, -1] = g[0, :], g[-1, :], g[:, 0], g[:, -1]
    return laplacian_values(v, grid.hx, grid.hy)


def residual_floor(u: np.ndarray, grid: GridSpec) -> float:
    """Size of rounding noise in ``Delta_h u``; residual targets below it are unreachable."""
    return 64.0 * EPS * (float(np.max(np.abs(u))) + 1.0) * (2.0 / grid.hx**2 + 2.0 / grid.hy**2)


def _sine_solve(b: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply the inverse of the interior operator to ``b`` (shape ``(ny-2, nx-2)``).

    The five-point operator with Dirichlet ends is diagonal in the type-I sine
    basis, so the solve is exact up to rounding.
    """
    my, mx = b.shape
    lx = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, mx + 1) / (mx + 1))) / grid.hx**2
    ly = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, my + 1) / (my + 1))) / grid.hy**2
    bh = dstn(b, type=1, norm="ortho")
    return idstn(bh / (ly[:, None] + lx[None, :]), type=1, norm="ortho")


def solve_poisson(rhs, g, cfg: EllipticConfig | None = None, grid: GridSpec | None = None) -> ScalarField:
    """Solve ``-Delta_h u = rhs`` on the interior with ``u = g`` on the boundary.

    ``rhs`` and ``g`` may be fields or arrays of the grid's shape.  The system
    is solved by fast sine transforms with one refinement step; the residual is
    then checked against ``tol * (1 + |rhs|_inf)``.
    """
    cfg = cfg or EllipticConfig()
    grid = grid or (rhs.grid if isinstance(rhs, ScalarField) else g.grid)
    f = _as_array(rhs, grid)[1:-1, 1:-1]
    gb = _as_array(g, grid)
    b = f + boundary_lift(gb, grid)
    u = np.array(gb, dtype=float)
    u[1:-1, 1:-1] = _sine_solve(b, grid)
    r = f + laplacian_values(u, grid.hx, grid.hy)
    u[1:-1, 1:-1] += _sine_solve(r, grid)  # one refinement step
    res = float(np.max(np.abs(-laplacian_values(u, grid.hx, grid.hy) - f)))
    thresh = max(cfg.tol * (1.0 + float(np.max(np.abs(f)))), residual_floor(u, grid))
    if not res <= thresh:
        raise ConvergenceError(f"Poisson residual {res:.3e} exceeds {thresh:.3e}")
    return ScalarField(grid, u)


def coons_interpolant(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Transfinite (bilinearly blended) interpolation of the boundary values."""
    s = (grid.x - grid.xmin) / (grid.xmax - grid.xmin)
    t = (grid.y - grid.ymin) / (grid.ymax - grid.ymin)
    S, T = np.meshgrid(s, t, indexing="xy")
    left, right = g[:, :1], g[:, -1:]
    bottom, top = g[:1, :], g[-1:, :]
    u = (1 - S) * left + S * right + (1 - T) * bottom + T * top
    u -= (1 - S) * (1 - T) * g[0, 0] + S * (1 - T) * g[0, -1] + (1 - S) * T * g[-1, 0] + S * T * g[-1, -1]
    u[0, :], u[-1, :], u[:, 0], u[:, -1] = g[0, :], g[-1, :], g[:, 0], g[:, -1]
    return u


@njit(cache=True)
def _psor_sweeps(u, forcing, lower, upper, hx, hy, omega, nsweeps):
    ny, nx = u.shape
    cx = 1.0 / (hx * hx)
    cy = 1.0 / (hy * hy)
    diag = 2.0 * cx + 2.0 * cy
    for _ in range(nsweeps):
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                gs = (forcing[j, i] + cx * (u[j, i - 1] + u[j, i + 1]) + cy * (u[j - 1, i] + u[j + 1, i])) / diag
                v = u[j, i] + omega * (gs - u[j, i])
                if v < lower[j, i]:
                    v = lower[j, i]
                elif v > upper[j, i]:
                    v = upper[j, i]
                u[j, i] = v


def complementarity_residual(U, forcing, lower, upper, grid) -> np.ndarray:
    """Per-interior-node violation of the double-obstacle complementarity conditions.

    With ``r = -Delta_h U - forcing`` a node on an obstacle may carry a residual
    of the matching sign; elsewhere ``r`` must vanish.  The returned value is
    the smallest of the applicable gaps.
    """
    r = -laplacian_values(U, grid.hx, grid.hy) - forcing[1:-1, 1:-1]
    Ui = U[1:-1, 1:-1]
    out = np.abs(r)
    at_lo = Ui == lower[1:-1, 1:-1]
    at_hi = Ui == upper[1:-1, 1:-1]
    out = np.where(at_lo, np.minimum(out, np.maximum(-r, 0.0)), out)
    out = np.where(at_hi, np.minimum(out, np.maximum(r, 0.0)), out)
    return out


def solve_double_obstacle(forcing, lower, upper, g, cfg: EllipticConfig | None = None,
                          grid: GridSpec | None = None, initial=None, info: dict | None = None) -> ScalarField:
    """Projected SOR for ``lower <= U <= upper`` complementary to ``-Delta_h U = forcing``.

    Sweeps are lexicographic (row by row, x fastest), each node getting the
    SOR Poisson update followed by clamping.  Convergence is declared on the
    complementarity residual reaching ``comp_tol * scale``.  When ``info`` is
    given it receives the sweep count and final residual.
    """
    cfg = cfg or EllipticConfig()
    grid = grid or next(a.grid for a in (forcing, lower, upper, g) if isinstance(a, ScalarField))
    f = np.ascontiguousarray(_as_array(forcing, grid), dtype=float)
    lo = np.ascontiguousarray(_as_array(lower, grid), dtype=float)
    hi = np.ascontiguousarray(_as_array(upper, grid), dtype=float)
    gb = np.array(_as_array(g, grid), dtype=float)
    finite = lambda a: a[np.isfinite(a)]  # noqa: E731
    scale = 1.0 + max(float(np.max(np.abs(finite(a)), initial=0.0)) for a in (f[1:-1, 1:-1], lo, hi, gb * grid.boundary_mask()))
    bnd = grid.boundary_mask()
    if np.any(lo > hi):
        j, i = np.argwhere(lo > hi)[0]
        raise InfeasibleObstaclesError(f"lower > upper at node (i={i}, j={j}): {lo[j, i]!r} > {hi[j, i]!r}")
    slack = 8.0 * EPS * scale
    if np.any((gb[bnd] < lo[bnd] - slack) | (gb[bnd] > hi[bnd] + slack)):
        raise InfeasibleObstaclesError("boundary data lies outside [lower, upper]")

    if initial is None:
        u = coons_interpolant(gb, grid)
    else:
        u = np.array(_as_array(initial, grid), dtype=float)
    u[1:-1, 1:-1] = np.clip(u[1:-1, 1:-1], lo[1:-1, 1:-1], hi[1:-1, 1:-1])
    u[bnd] = gb[bnd]

    tolc = cfg.comp_tol * scale
    max_sweeps = cfg.sweeps(grid)
    done = 0
    res = math.inf
    while done < max_sweeps:
        n = min(cfg.check_every, max_sweeps - done)
        _psor_sweeps(u, f, lo, hi, grid.hx, grid.hy, cfg.omega, n)
        done += n
        res = float(np.max(complementarity_residual(u, f, lo, hi, grid)))
        if res <= tolc:
            log.debug("PSOR converged after %d sweeps (residual %.3e)", done, res)
            if info is not None:
                info.update(sweeps=done, residual=res)
            return ScalarField(grid, u)
    raise ConvergenceError(f"PSOR did not converge in {done} sweeps (residual {res:.3e} > {tolc:.3e})")
