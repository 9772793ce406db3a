from __future__ import annotations

from dataclasses import dataclass, field

from ..grid import GridMismatchError, ScalarField, laplacian, read_csv, write_csv

METHODS = ("penalized", "minimal", "closed-form", "nonminimal")


@dataclass(frozen=True, eq=False)
class SolutionPair:
    """Fields ``(u1, u2)`` with how they were obtained.

    ``iterations`` holds Newton counts per continuation stage (penalized) or
    obstacle sweeps (minimal); ``residuals`` the final solver residuals.
    """

    u1: ScalarField
    u2: ScalarField
    method: str
    eps_schedule: tuple = ()
    iterations: tuple = ()
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise GridMismatchError("u1 and u2 live on different grids")
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")

    @property
    def grid(self):
        return self.u1.grid

    def max_diff(self, other: "SolutionPair") -> float:
        return max((self.u1 - other.u1).max_abs(), (self.u2 - other.u2).max_abs())


def pair_columns(spec, pair: SolutionPair) -> dict:
    d = spec.data
    return {
        "u1": pair.u1,
        "u2": pair.u2,
        "theta1": pair.u1 - pair.u2 + d.psi1,
        "theta2": pair.u2 - pair.u1 + d.psi2,
        "lapu1": laplacian(pair.u1),
        "lapu2": laplacian(pair.u2),
    }


def write_pair_csv(spec, pair: SolutionPair, path) -> None:
    """CSV with columns ``x,y,u1,u2,theta1,theta2,lapu1,lapu2``; boundary Laplacians are ``nan``."""
    if pair.grid != spec.grid:
        raise GridMismatchError("pair and spec grids differ")
    write_csv(path, pair_columns(spec, pair), spec.grid)


def read_pair_csv(path, spec, method: str = "minimal") -> SolutionPair:
    cols = read_csv(path, spec.grid)
    return SolutionPair(cols["u1"], cols["u2"], method=method)
