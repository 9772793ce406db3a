from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyFunction:
    """C^1 penalty that vanishes for ``s >= 0`` and is negative below.

    ``beta(s) = -s^2/(2 eta)`` on ``(-eta, 0)`` and ``s + eta/2`` for
    ``s <= -eta``, so ``0 < beta' <= 1`` on ``s < 0`` and ``beta -> -inf``.
    """

    eta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def beta(self, s):
        s = np.asarray(s, dtype=float)
        eta = self.eta
        out = np.where(s >= 0.0, 0.0, np.where(s > -eta, -s * s / (2.0 * eta), s + eta / 2.0))
        return out[()] if out.ndim == 0 else out

    def dbeta(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s >= 0.0, 0.0, np.where(s > -self.eta, -s / self.eta, 1.0))
        return out[()] if out.ndim == 0 else out

    def beta_eps(self, eps: float, s):
        if not eps > 0:
            raise ValueError("eps must be positive")
        return self.beta(np.asarray(s, dtype=float) / eps)

    def dbeta_eps(self, eps: float, s):
        """Derivative of ``s -> beta(s/eps)``."""
        return self.dbeta(np.asarray(s, dtype=float) / eps) / eps
