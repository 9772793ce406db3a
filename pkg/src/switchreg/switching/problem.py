from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..expr import Expression, as_expression, to_string
from ..grid import GridSpec, ScalarField, laplacian, sample

EPS = float(np.finfo(float).eps)
# relative slack (in units of scale) for the data inequalities; absorbs the
# rounding of expressions like g1 - (g1 + psi) + psi
DATA_SLACK = 8.0 * EPS

_NAMES = ("f1", "f2", "psi1", "psi2", "g1", "g2")


def _describe(obj) -> str:
    if isinstance(obj, str):
        return obj
    try:
        return to_string(as_expression(obj))
    except TypeError:
        return f"<callable {getattr(obj, '__qualname__', repr(obj))}>"


@dataclass(frozen=True)
class SampledData:
    f1: ScalarField
    f2: ScalarField
    psi1: ScalarField
    psi2: ScalarField
    g1: ScalarField
    g2: ScalarField


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of one two-mode switching problem on a rectangle.

    Each datum is an expression string, a parsed :class:`Expression`, or a
    vectorised callable ``f(X, Y)``.  Boundary data ``g1``, ``g2`` are only
    sampled on boundary nodes.
    """

    f1: Any
    f2: Any
    psi1: Any
    psi2: Any
    g1: Any
    g2: Any
    grid: GridSpec
    data: SampledData = field(init=False, repr=False)

    def __post_init__(self):
        conv = {}
        for name in _NAMES:
            raw = getattr(self, name)
            if isinstance(raw, (str, int, float)) and not isinstance(raw, bool):
                raw = as_expression(raw)
            conv[name] = raw
            object.__setattr__(self, name, raw)
        bnd = self.grid.boundary_mask()
        fields = {n: sample(conv[n], self.grid) for n in ("f1", "f2", "psi1", "psi2")}
        for n in ("g1", "g2"):
            fields[n] = sample(conv[n], self.grid, where=bnd)
        object.__setattr__(self, "data", SampledData(**fields))

    @property
    def scale(self) -> float:
        d = self.data
        return 1.0 + max(f.max_abs() for f in (d.f1, d.f2, d.psi1, d.psi2, d.g1, d.g2))

    @property
    def tol_sys(self) -> float:
        return 50.0 * self.grid.h**2 * self.scale

    @property
    def tau(self) -> float:
        return 10.0 * self.grid.h**2 * self.scale

    def laplacian_bound(self) -> float:
        """``max_i |Delta_h psi_i|_inf + 3 max_i |f_i|_inf`` (interior nodes)."""
        d = self.data
        lap = max(laplacian(d.psi1).max_abs(), laplacian(d.psi2).max_abs())
        return lap + 3.0 * max(d.f1.max_abs(), d.f2.max_abs())

    def with_grid(self, grid: GridSpec) -> "ProblemSpec":
        return ProblemSpec(*(getattr(self, n) for n in _NAMES), grid=grid)

    def describe(self) -> dict:
        g = self.grid
        out = {n: _describe(getattr(self, n)) for n in _NAMES}
        out.update(xmin=g.xmin, xmax=g.xmax, ymin=g.ymin, ymax=g.ymax, nx=g.nx, ny=g.ny)
        return out


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    loop_ok: bool
    boundary_ok: bool
    loop_min: float
    loop_worst_node: tuple
    boundary_min: float
    boundary_worst_node: tuple
    tolerance: float

    def messages(self) -> list:
        out = []
        if not self.loop_ok:
            out.append(f"loop violation {self.loop_min!r} at node {self.loop_worst_node}")
        if not self.boundary_ok:
            out.append(f"boundary compatibility violation {self.boundary_min!r} at node {self.boundary_worst_node}")
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "loop_ok": self.loop_ok, "boundary_ok": self.boundary_ok,
            "loop_min": self.loop_min, "loop_worst_node": list(self.loop_worst_node),
            "boundary_min": self.boundary_min, "boundary_worst_node": list(self.boundary_worst_node),
            "tolerance": self.tolerance, "messages": self.messages(),
        }


def _argmin_node(a: np.ndarray, where: np.ndarray):
    vals = np.where(where, a, np.inf)
    j, i = np.unravel_index(int(np.argmin(vals)), a.shape)
    return float(vals[j, i]), (int(i), int(j))


def validate_spec(spec: ProblemSpec, boundary_axes: str = "xy") -> ValidationReport:
    """Check the non-negative loop condition and boundary compatibility.

    ``boundary_axes="x"`` treats only the x-ends as Dirichlet boundary, for
    one-dimensional problems embedded in a three-row strip.
    """
    d = spec.data
    tol = DATA_SLACK * spec.scale
    loop = d.psi1.values + d.psi2.values
    loop_min, loop_node = _argmin_node(loop, np.ones(loop.shape, dtype=bool))
    bnd = spec.grid.boundary_mask(boundary_axes)
    g1, g2 = d.g1.filled(0.0), d.g2.filled(0.0)
    gap = np.minimum(g1 - g2 + d.psi1.values, g2 - g1 + d.psi2.values)
    bc_min, bc_node = _argmin_node(gap, bnd)
    loop_ok = loop_min >= -tol
    bc_ok = bc_min >= -tol
    return ValidationReport(bool(loop_ok and bc_ok), bool(loop_ok), bool(bc_ok),
                            loop_min, loop_node, bc_min, bc_node, tol)


def example2_spec(psi, M: float, g1, grid: GridSpec) -> ProblemSpec:
    """Zero-loop data ``f1 = -M, f2 = M, psi1 = psi, psi2 = -psi, g2 = g1 + psi``."""
    from ..expr import BinOp, Neg, Num

    psi_e, g1_e = as_expression(psi), as_expression(g1)
    return ProblemSpec(
        f1=Num(-float(M)), f2=Num(float(M)), psi1=psi_e, psi2=Neg(psi_e),
        g1=g1_e, g2=BinOp("+", g1_e, psi_e), grid=grid,
    )


__all__ = ["ProblemSpec", "SampledData", "ValidationReport", "validate_spec", "example2_spec", "Expression"]
