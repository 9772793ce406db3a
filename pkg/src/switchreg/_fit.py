from __future__ import annotations

import numpy as np


class DegenerateFitError(ValueError):
    """The abscissae of a fit do not vary."""


def linear_fit(x, y):
    """Least-squares line ``y = slope*x + intercept``; returns ``(slope, intercept, r2)``.

    ``r2`` is clipped into ``[0, 1]`` and taken as 1 when ``y`` is constant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.all(x == x[0]):
        raise DegenerateFitError("need at least two distinct abscissae")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_res = float(np.sum(resid * resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(icpt), r2


def loglog_fit(xs, ys):
    """Slope and R^2 of ``ln ys`` against ``ln xs``."""
    slope, _, r2 = linear_fit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)))
    return slope, r2
