"""Uniform vertex-centred grids carrying nodal fields, with finite-difference operators on them.

Field arrays are stored with shape ``(ny, nx)`` and indexed ``values[j, i]``
so that a C-order ravel is row-major with ``x`` varying fastest.  Node
``(i, j)`` sits at ``(xmin + i*hx, ymin + j*hy)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import Expression, ExpressionEvalError, as_expression, evaluate_array


class GridMismatchError(ValueError):
    pass


class EmptyBallError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("grid rectangle must have xmax > xmin and ymax > ymin")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per axis")

    @classmethod
    def square(cls, n: int, lo: float = -1.0, hi: float = 1.0) -> "GridSpec":
        return cls(lo, hi, lo, hi, n, n)

    @property
    def hx(self) -> float:
        return (self.xmax - self.xmin) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.ymax - self.ymin) / (self.ny - 1)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.ymin + self.hy * np.arange(self.ny)

    def mesh(self):
        """Coordinate arrays ``(X, Y)`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def boundary_mask(self, axes: str = "xy") -> np.ndarray:
        """Nodes on the rectangle's edges; ``axes="x"`` keeps only the x-ends."""
        m = np.zeros(self.shape, dtype=bool)
        if "x" in axes:
            m[:, 0] = m[:, -1] = True
        if "y" in axes:
            m[0, :] = m[-1, :] = True
        return m

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[margin:-margin, margin:-margin] = True
        return m

    def node_index(self, x: float, y: float):
        """Nearest node ``(i, j)`` to a point."""
        i = int(round((x - self.xmin) / self.hx))
        j = int(round((y - self.ymin) / self.hy))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a grid; masked nodes hold NaN and are excluded from norms."""

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        mask = np.zeros(vals.shape, dtype=bool) if self.mask is None else np.array(self.mask, dtype=bool)
        if mask.shape != vals.shape:
            raise ValueError("mask shape does not match values")
        if not np.all(np.isfinite(vals[~mask])):
            raise ValueError("unmasked field values must be finite")
        vals[mask] = np.nan
        vals.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mask", mask)

    @property
    def n_masked(self) -> int:
        return int(self.mask.sum())

    def max_abs(self) -> float:
        v = self.values[~self.mask]
        return float(np.max(np.abs(v))) if v.size else 0.0

    def min(self) -> float:
        return float(np.min(self.values[~self.mask]))

    def max(self) -> float:
        return float(np.max(self.values[~self.mask]))

    def with_mask(self, extra: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, self.values, self.mask | extra)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask, fill, self.values)

    def __add__(self, other):
        return _binary(self, other, np.add)

    def __sub__(self, other):
        return _binary(self, other, np.subtract)

    def __mul__(self, other):
        return _binary(self, other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.mask)


def _binary(a: ScalarField, b, op):
    if isinstance(b, ScalarField):
        if b.grid != a.grid:
            raise GridMismatchError("fields live on different grids")
        with np.errstate(invalid="ignore"):
            return ScalarField(a.grid, op(a.values, b.values), a.mask | b.mask)
    with np.errstate(invalid="ignore"):
        return ScalarField(a.grid, op(a.values, float(b)), a.mask)


def sample(expr, grid: GridSpec, where: np.ndarray | None = None) -> ScalarField:
    """Evaluate an expression (or vectorised callable ``f(X, Y)``) at every node.

    ``where`` restricts evaluation to a subset of nodes; the rest are masked.
    Evaluation failures raise :class:`ExpressionEvalError` naming the first
    offending node ``(i, j)`` in row-major order.
    """
    X, Y = grid.mesh()
    if callable(expr) and not isinstance(expr, str):
        fn: Callable = expr
        with np.errstate(all="ignore"):
            vals = np.array(np.broadcast_to(fn(X, Y), grid.shape), dtype=float)
        bad = ~np.isfinite(vals)
    else:
        vals, bad = evaluate_array(as_expression(expr), X, Y)
    if where is not None:
        bad = bad & where
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise ExpressionEvalError(
            f"evaluation failed at node (i={i}, j={j}), point ({X[j, i]!r}, {Y[j, i]!r})"
        )
    mask = None if where is None else ~where
    return ScalarField(grid, vals, mask)


def constant(grid: GridSpec, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def laplacian_values(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Five-point Laplacian of a raw array on its interior (shape reduced by 2)."""
    return (v[1:-1, 2:] + v[1:-1, :-2] - 2.0 * v[1:-1, 1:-1]) / hx**2 + (
        v[2:, 1:-1] + v[:-2, 1:-1] - 2.0 * v[1:-1, 1:-1]
    ) / hy**2


def _margin_field(grid, inner, base_mask, margin=1):
    out = np.full(grid.shape, np.nan)
    out[margin:-margin, margin:-margin] = inner
    mask = ~grid.interior_mask(margin)
    # a stencil touching a masked node is itself masked
    touched = np.zeros(grid.shape, dtype=bool)
    if base_mask.any():
        bm = base_mask
        touched[1:-1, 1:-1] = (
            bm[1:-1, 1:-1] | bm[1:-1, 2:] | bm[1:-1, :-2] | bm[2:, 1:-1] | bm[:-2, 1:-1]
            | bm[2:, 2:] | bm[2:, :-2] | bm[:-2, 2:] | bm[:-2, :-2]
        )
    return ScalarField(grid, out, mask | touched)


def laplacian(u: ScalarField) -> ScalarField:
    """Discrete Laplacian; boundary nodes are masked."""
    if "laplacian" not in u._cache:
        g = u.grid
        with np.errstate(invalid="ignore"):
            inner = laplacian_values(u.values, g.hx, g.hy)
        u._cache["laplacian"] = _margin_field(g, inner, u.mask)
    return u._cache["laplacian"]


def gradient(u: ScalarField):
    """Central-difference gradient ``(ux, uy)`` with a one-node masked margin."""
    if "gradient" not in u._cache:
        g, v = u.grid, u.values
        with np.errstate(invalid="ignore"):
            ux = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * g.hx)
            uy = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * g.hy)
        u._cache["gradient"] = (_margin_field(g, ux, u.mask), _margin_field(g, uy, u.mask))
    return u._cache["gradient"]


def hessian(u: ScalarField):
    """Central second differences ``(uxx, uxy, uyy)``; ``uxy`` uses the corner stencil."""
    if "hessian" not in u._cache:
        g, v = u.grid, u.values
        with np.errstate(invalid="ignore"):
            uxx = (v[1:-1, 2:] + v[1:-1, :-2] - 2.0 * v[1:-1, 1:-1]) / g.hx**2
            uyy = (v[2:, 1:-1] + v[:-2, 1:-1] - 2.0 * v[1:-1, 1:-1]) / g.hy**2
            uxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4.0 * g.hx * g.hy)
        u._cache["hessian"] = tuple(_margin_field(g, a, u.mask) for a in (uxx, uxy, uyy))
    return u._cache["hessian"]


def ball_slices(grid: GridSpec, center, r: float):
    """Index window and in-ball selector for the discrete closed ball ``B_r(center)``."""
    cx, cy = float(center[0]), float(center[1])
    i0 = max(int(math.floor((cx - r - grid.xmin) / grid.hx)), 0)
    i1 = min(int(math.ceil((cx + r - grid.xmin) / grid.hx)), grid.nx - 1)
    j0 = max(int(math.floor((cy - r - grid.ymin) / grid.hy)), 0)
    j1 = min(int(math.ceil((cy + r - grid.ymin) / grid.hy)), grid.ny - 1)
    xs = grid.xmin + grid.hx * np.arange(i0, i1 + 1) - cx
    ys = grid.ymin + grid.hy * np.arange(j0, j1 + 1) - cy
    inside = ys[:, None] ** 2 + xs[None, :] ** 2 <= r * r * (1.0 + 1e-12)
    return (slice(j0, j1 + 1), slice(i0, i1 + 1)), inside


def ball_values(u: ScalarField, center, r: float) -> np.ndarray:
    """Unmasked nodal values inside the discrete ball, in row-major order."""
    window, inside = ball_slices(u.grid, center, r)
    sel = inside & ~u.mask[window]
    vals = u.values[window][sel]
    if vals.size == 0:
        raise EmptyBallError(f"no unmasked nodes within r={r!r} of {tuple(center)!r}")
    return vals


def ball_average(u: ScalarField, center, r: float) -> float:
    return float(np.mean(ball_values(u, center, r)))


def ball_l2(u: ScalarField, center, r: float) -> float:
    vals = ball_values(u, center, r)
    return math.sqrt(float(np.sum(vals * vals)) * u.grid.hx * u.grid.hy)


def ball_masked_count(u: ScalarField, center, r: float) -> int:
    """How many in-ball nodes were skipped because they are masked."""
    window, inside = ball_slices(u.grid, center, r)
    return int((inside & u.mask[window]).sum())


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else format(float(v), ".17g")


def write_csv(path_or_buf, columns: dict, grid: GridSpec) -> None:
    """Write nodal columns as ``x,y,<names...>`` rows, row-major."""
    X, Y = grid.mesh()
    names = list(columns)
    arrays = [np.asarray(columns[n].values if isinstance(columns[n], ScalarField) else columns[n]).ravel()
              for n in names]
    lines = [",".join(["x", "y", *names])]
    for k, (xv, yv) in enumerate(zip(X.ravel(), Y.ravel())):
        lines.append(",".join([_fmt(xv), _fmt(yv), *(_fmt(a[k]) for a in arrays)]))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, io.TextIOBase):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)


def field_to_csv(u: ScalarField, path_or_buf) -> None:
    write_csv(path_or_buf, {"value": u}, u.grid)


def read_csv(path, grid: GridSpec) -> dict:
    """Read a CSV written by :func:`write_csv` back into fields on ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["x", "y"]:
        raise ValueError("CSV must start with x,y columns")
    if len(body) != grid.nx * grid.ny:
        raise GridMismatchError(f"CSV has {len(body)} rows, grid has {grid.nx * grid.ny} nodes")
    data = np.array([[float(c) for c in row] for row in body])
    X, Y = grid.mesh()
    tol = 1e-9 * max(grid.xmax - grid.xmin, grid.ymax - grid.ymin)
    if np.max(np.abs(data[:, 0] - X.ravel())) > tol or np.max(np.abs(data[:, 1] - Y.ravel())) > tol:
        raise GridMismatchError("CSV node coordinates do not match the grid")
    out = {}
    for k, name in enumerate(header[2:], start=2):
        vals = data[:, k].reshape(grid.shape)
        out[name] = ScalarField(grid, vals, ~np.isfinite(vals))
    return out
