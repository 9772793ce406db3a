"""Discrete residuals of the switching system and the induced set decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..grid import GridMismatchError, ScalarField, laplacian
from .pair import SolutionPair
from .problem import ProblemSpec


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Per-node residual fields and their max-norms.

    ``eq1``/``eq2`` are the obstacle-form equations of the two modes, ``eq3``
    the minimality equation ``min(-Delta u1 + f1, -Delta u2 + f2)``.  Fields
    involving the Laplacian are masked on the boundary.
    """

    eq1: ScalarField
    eq2: ScalarField
    eq3: ScalarField
    theta1: ScalarField
    theta2: ScalarField
    op1: ScalarField
    op2: ScalarField
    tol_sys: float
    laplacian_bound: float
    laplacian_max: float

    def maxima(self) -> dict:
        lap_max = self.laplacian_max
        return {
            "eq1_max": self.eq1.max_abs(),
            "eq2_max": self.eq2.max_abs(),
            "eq3_max": self.eq3.max_abs(),
            "theta1_min": self.theta1.min(),
            "theta2_min": self.theta2.min(),
            "op1_min": self.op1.min(),
            "op2_min": self.op2.min(),
            "laplacian_max": lap_max,
            "laplacian_bound": self.laplacian_bound,
            "laplacian_bound_ok": bool(lap_max <= self.laplacian_bound + self.tol_sys),
            "tol_sys": self.tol_sys,
        }

    @property
    def system_ok(self) -> bool:
        """Both obstacle-form equations within ``tol_sys``."""
        return max(self.eq1.max_abs(), self.eq2.max_abs()) <= self.tol_sys

    @property
    def minimal_ok(self) -> bool:
        return self.system_ok and self.eq3.max_abs() <= self.tol_sys

    def to_dict(self) -> dict:
        out = self.maxima()
        out.update(system_ok=self.system_ok, minimal_ok=self.minimal_ok)
        return out


def _check_grid(spec: ProblemSpec, pair: SolutionPair) -> None:
    if pair.grid != spec.grid:
        raise GridMismatchError(f"pair grid {pair.grid} differs from problem grid {spec.grid}")


def residual_report(spec: ProblemSpec, pair: SolutionPair) -> ResidualReport:
    _check_grid(spec, pair)
    d = spec.data
    lap1, lap2 = laplacian(pair.u1), laplacian(pair.u2)
    op1 = d.f1 - lap1
    op2 = d.f2 - lap2
    theta1 = pair.u1 - pair.u2 + d.psi1
    theta2 = pair.u2 - pair.u1 + d.psi2
    mask = ~spec.grid.interior_mask()
    eq1 = ScalarField(spec.grid, np.minimum(op1.filled(0.0), theta1.values), mask)
    eq2 = ScalarField(spec.grid, np.minimum(op2.filled(0.0), theta2.values), mask)
    eq3 = ScalarField(spec.grid, np.minimum(op1.filled(0.0), op2.filled(0.0)), mask)
    return ResidualReport(eq1, eq2, eq3, theta1, theta2, op1, op2,
                          tol_sys=spec.tol_sys, laplacian_bound=spec.laplacian_bound(),
                          laplacian_max=max(lap1.max_abs(), lap2.max_abs()))


UNLABELED, OMEGA1, OMEGA2, OMEGA12, L0, L_BOUNDARY = range(6)
LABEL_NAMES = {UNLABELED: "unlabeled", OMEGA1: "Omega1", OMEGA2: "Omega2", OMEGA12: "Omega12",
               L0: "L0", L_BOUNDARY: "boundary_of_L"}


@dataclass(frozen=True, eq=False)
class SetPartition:
    """Node labels (``labels[j, i]``, codes in :data:`LABEL_NAMES`) and meeting points ``(i, j)``."""

    labels: np.ndarray
    meeting_points: tuple
    tau: float
    tau_loop: float
    conflicts: int

    def counts(self) -> dict:
        return {name: int(np.sum(self.labels == code)) for code, name in LABEL_NAMES.items()}

    def mask(self, code: int) -> np.ndarray:
        return self.labels == code

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "tau_loop": self.tau_loop,
            "counts": self.counts(),
            "conflicts": self.conflicts,
            "meeting_points": [list(p) for p in self.meeting_points],
        }


_NEIGHBOURS = np.ones((3, 3), dtype=bool)


def partition_sets(spec: ProblemSpec, pair: SolutionPair, tau: float | None = None,
                   tau_loop: float | None = None) -> SetPartition:
    """Label interior nodes by the active part of the system.

    The zero-loop labels use the data threshold ``tau_loop`` (default
    ``1e-12 * scale``) and take priority; a node that is neither is ``Omega1``
    or ``Omega2`` when the corresponding operator exceeds ``tau`` (both at once
    counts as a conflict and stays unlabeled), else ``Omega12`` when both gaps
    exceed ``tau``.  Boundary nodes are unlabeled.
    """
    _check_grid(spec, pair)
    tau = spec.tau if tau is None else float(tau)
    tau_loop = 1e-12 * spec.scale if tau_loop is None else float(tau_loop)
    d = spec.data
    grid = spec.grid
    interior = grid.interior_mask()

    op1 = (d.f1 - laplacian(pair.u1)).filled(-np.inf)
    op2 = (d.f2 - laplacian(pair.u2)).filled(-np.inf)
    theta1 = (pair.u1 - pair.u2 + d.psi1).values
    theta2 = (pair.u2 - pair.u1 + d.psi2).values

    zero = (d.psi1.values + d.psi2.values) <= tau_loop
    all_zero = ndimage.binary_erosion(zero, structure=_NEIGHBOURS, border_value=1)
    in_l0 = interior & all_zero
    in_lb = interior & zero & ~all_zero

    labels = np.full(grid.shape, UNLABELED, dtype=np.int8)
    free = interior & ~zero
    a1, a2 = op1 > tau, op2 > tau
    labels[free & a1 & ~a2] = OMEGA1
    labels[free & a2 & ~a1] = OMEGA2
    conflicts = int(np.sum(free & a1 & a2))
    labels[free & ~a1 & ~a2 & (theta1 > tau) & (theta2 > tau)] = OMEGA12
    labels[in_l0] = L0
    labels[in_lb] = L_BOUNDARY

    def near(m):
        return ndimage.binary_dilation(m, structure=_NEIGHBOURS, iterations=2)

    meet = interior & near(labels == OMEGA1) & near(labels == OMEGA2) & near(labels == L_BOUNDARY)
    pts = tuple((int(i), int(j)) for j, i in np.argwhere(meet))
    return SetPartition(labels, pts, tau, tau_loop, conflicts)
