"""Penalized (Newton + continuation) and minimal (double-obstacle) solvers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .._fit import loglog_fit
from ..expr import as_expression
from ..grid import GridSpec, ScalarField, laplacian_values, sample
from ..obstacle import (
    ConvergenceError,
    EllipticConfig,
    boundary_lift,
    coons_interpolant,
    interior_operator,
    residual_floor,
    solve_double_obstacle,
    solve_poisson,
)
from .pair import SolutionPair
from .penalty import PenaltyFunction
from .problem import ProblemSpec

log = logging.getLogger(__name__)


class JacobianSingularError(RuntimeError):
    """Newton matrix could not be factorised; use continuation in eps."""


class ContinuationError(RuntimeError):
    def __init__(self, eps: float, cause: Exception):
        super().__init__(f"solve failed at eps={eps!r}: {cause}")
        self.eps = eps


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_newton: int = 100
    max_halvings: int = 30
    penalty: PenaltyFunction = field(default_factory=PenaltyFunction)
    elliptic: EllipticConfig = field(default_factory=EllipticConfig)


def _interior(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a[1:-1, 1:-1]).ravel()


def _assemble(grid: GridSpec, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    u = np.array(g, dtype=float)
    u[1:-1, 1:-1] = x.reshape(grid.ny - 2, grid.nx - 2)
    return u


def _boundary_values(field_: ScalarField) -> np.ndarray:
    return field_.filled(0.0)


def solve_penalized(spec: ProblemSpec, eps: float, cfg: SolverConfig | None = None,
                    initial: SolutionPair | None = None) -> SolutionPair:
    """Damped Newton for the penalized pair of semilinear equations.

    Solves ``-Delta_h u_i + f_i + beta_eps(u_i - u_j + psi_i) = 0`` on the
    interior with ``u_i = g_i`` on the boundary.  Each Newton step is halved
    until the residual max-norm decreases.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    cfg = cfg or SolverConfig()
    pen = cfg.penalty
    grid = spec.grid
    d = spec.data
    g1, g2 = _boundary_values(d.g1), _boundary_values(d.g2)
    A = interior_operator(grid)
    lift1, lift2 = boundary_lift(g1, grid).ravel(), boundary_lift(g2, grid).ravel()
    f1, f2 = _interior(d.f1.values), _interior(d.f2.values)
    p1, p2 = _interior(d.psi1.values), _interior(d.psi2.values)
    if initial is None:
        x1, x2 = _interior(coons_interpolant(g1, grid)), _interior(coons_interpolant(g2, grid))
    else:
        x1, x2 = _interior(initial.u1.values).copy(), _interior(initial.u2.values).copy()
    m = x1.size

    def residual(x1, x2):
        r1 = A @ x1 - lift1 + f1 + pen.beta_eps(eps, x1 - x2 + p1)
        r2 = A @ x2 - lift2 + f2 + pen.beta_eps(eps, x2 - x1 + p2)
        return r1, r2

    r1, r2 = residual(x1, x2)
    res = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
    it = 0
    while True:
        floor = residual_floor(np.concatenate([x1, x2, g1.ravel(), g2.ravel()]), grid)
        thresh = max(cfg.tol * spec.scale, floor)
        if res <= thresh:
            break
        if it >= cfg.max_newton:
            raise ConvergenceError(f"Newton did not converge in {it} iterations at eps={eps!r} "
                                   f"(residual {res:.3e} > {thresh:.3e})")
        d1 = sp.diags(pen.dbeta_eps(eps, x1 - x2 + p1))
        d2 = sp.diags(pen.dbeta_eps(eps, x2 - x1 + p2))
        J = sp.bmat([[A + d1, -d1], [-d2, A + d2]], format="csc")
        try:
            step = spla.splu(J).solve(-np.concatenate([r1, r2]))
        except RuntimeError as exc:
            raise JacobianSingularError(f"Newton matrix singular at eps={eps!r}") from exc
        if not np.all(np.isfinite(step)):
            raise JacobianSingularError(f"Newton step not finite at eps={eps!r}")
        t = 1.0
        for _ in range(cfg.max_halvings + 1):
            y1, y2 = x1 + t * step[:m], x2 + t * step[m:]
            s1, s2 = residual(y1, y2)
            new = max(np.max(np.abs(s1)), np.max(np.abs(s2)))
            if new < res:
                break
            t *= 0.5
        else:
            raise ConvergenceError(f"line search failed at eps={eps!r} (residual {res:.3e})")
        x1, x2, r1, r2, res = y1, y2, s1, s2, new
        it += 1
        log.debug("eps=%g newton %d step %g residual %.3e", eps, it, t, res)

    u1 = ScalarField(grid, _assemble(grid, g1, x1))
    u2 = ScalarField(grid, _assemble(grid, g2, x2))
    return SolutionPair(u1, u2, method="penalized", eps_schedule=(float(eps),),
                        iterations=(it,), residuals={"joint": float(res)})


def continuation_solve(spec: ProblemSpec, schedule, cfg: SolverConfig | None = None,
                       initial: SolutionPair | None = None, keep_stages: bool = False):
    """Solve penalized problems along a decreasing eps schedule, warm-starting each.

    With ``keep_stages`` the list of all stage solutions is returned as well.
    """
    schedule = [float(e) for e in schedule]
    if not schedule or any(e <= 0 for e in schedule):
        raise ValueError("schedule must be a non-empty list of positive numbers")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule not decreasing")
    stages = []
    current = initial
    for eps in schedule:
        try:
            current = solve_penalized(spec, eps, cfg, initial=current)
        except (ConvergenceError, JacobianSingularError) as exc:
            raise ContinuationError(eps, exc) from exc
        stages.append(current)
    final = SolutionPair(current.u1, current.u2, method="penalized", eps_schedule=tuple(schedule),
                         iterations=tuple(s.iterations[0] for s in stages), residuals=current.residuals)
    return (final, stages) if keep_stages else final


def constraint_violation(spec: ProblemSpec, pair: SolutionPair) -> float:
    """``max(0, -min_i min_x theta_i)``."""
    d = spec.data
    t1 = pair.u1.values - pair.u2.values + d.psi1.values
    t2 = pair.u2.values - pair.u1.values + d.psi2.values
    return max(0.0, -float(min(t1.min(), t2.min())))


def epsilon_sweep(spec: ProblemSpec, schedule, cfg: SolverConfig | None = None) -> dict:
    """Constraint violation and successive-stage differences along an eps schedule."""
    _, stages = continuation_solve(spec, schedule, cfg, keep_stages=True)
    rows = []
    prev = None
    for stage in stages:
        rows.append({
            "eps": stage.eps_schedule[0],
            "violation": constraint_violation(spec, stage),
            "newton_iterations": stage.iterations[0],
            "change_from_previous": None if prev is None else stage.max_diff(prev),
        })
        prev = stage
    pos = [r for r in rows if r["violation"] > 0]
    slope = r2 = None
    if len(pos) >= 2:
        slope, r2 = loglog_fit([r["eps"] for r in pos], [r["violation"] for r in pos])
    return {"rows": rows, "slope": slope, "r2": r2, "final": stages[-1]}


def solve_minimal(spec: ProblemSpec, cfg: SolverConfig | None = None) -> SolutionPair:
    """Minimal solution via the difference ``U = u1 - u2``.

    ``U`` solves the double-obstacle problem ``-psi1 <= U <= psi2`` with
    forcing ``f2 - f1``; ``m = -Delta_h U + f1 - f2`` then splits as
    ``-Delta_h u1 + f1 = m+`` and ``-Delta_h u2 + f2 = m-``.
    """
    cfg = cfg or SolverConfig()
    grid = spec.grid
    d = spec.data
    g1, g2 = _boundary_values(d.g1), _boundary_values(d.g2)
    upper = d.psi2.values
    # validation allows rounding-level loop violations; keep the obstacles ordered
    lower = np.minimum(-d.psi1.values, upper)
    forcing = d.f2.values - d.f1.values
    info = {}
    U = solve_double_obstacle(forcing, lower, upper, g1 - g2, cfg.elliptic, grid=grid, info=info)
    m = np.zeros(grid.shape)
    m[1:-1, 1:-1] = -laplacian_values(U.values, grid.hx, grid.hy) - forcing[1:-1, 1:-1]
    u1 = solve_poisson(np.maximum(m, 0.0) - d.f1.values, g1, cfg.elliptic, grid=grid)
    v2 = u1.values - U.values
    bnd = grid.boundary_mask()
    v2[bnd] = g2[bnd]
    u2 = ScalarField(grid, v2)
    return SolutionPair(u1, u2, method="minimal", iterations=(info.get("sweeps", 0),),
                        residuals={"complementarity": info.get("residual", math.nan)})


def construct_nonminimal(psi, M: float, q, g1, grid: GridSpec, cfg: SolverConfig | None = None) -> SolutionPair:
    """A member of the non-unique zero-loop family.

    ``u1`` solves ``-Delta_h u1 = M + q`` with ``u1 = g1`` on the boundary and
    ``u2 = u1 + psi``; ``q >= 0`` selects the member (``q = 0`` is the minimal one).
    """
    cfg = cfg or SolverConfig()
    psi_f = sample(as_expression(psi) if isinstance(psi, str) else psi, grid)
    lap_psi = ScalarField(grid, np.pad(laplacian_values(psi_f.values, grid.hx, grid.hy), 1))
    if not 2.0 * M > lap_psi.max_abs():
        raise ValueError(f"need 2M > |Delta_h psi|_inf, got M={M!r}, |Delta_h psi|={lap_psi.max_abs()!r}")
    q_f = sample(as_expression(q) if isinstance(q, str) else q, grid)
    if q_f.min() < 0:
        raise ValueError("q must be non-negative")
    g_f = sample(as_expression(g1) if isinstance(g1, str) else g1, grid, where=grid.boundary_mask())
    u1 = solve_poisson(q_f.values + float(M), g_f.filled(0.0), cfg.elliptic, grid=grid)
    u2 = ScalarField(grid, u1.values + psi_f.values)
    return SolutionPair(u1, u2, method="nonminimal")
