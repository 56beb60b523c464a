"""Nonlinear kernel layer: warped resolvents and the momentum map.

Two closed-form kernel families are shipped:

* ``ScaledMetricKernel``: M = S/gamma.  The warped resolvent collapses to the
  ordinary resolvent and the momentum term vanishes identically.
* ``ShiftedKernel``: M = S/gamma - A2 for a single-valued Lipschitz A2 coming
  from a decomposition A = A1 + A2.  Since M + A1 + A2 = S/gamma + A1, the
  warped resolvent is again an ordinary resolvent of A1, while the momentum
  term becomes -gamma*(A2 y - A2 x).
"""

from __future__ import annotations

import numpy as np

__all__ = ["ScaledMetricKernel", "ShiftedKernel", "warped_resolvent", "momentum_update"]


class ScaledMetricKernel:
    """Kernel M = S/gamma; recovers the momentumless splitting schemes."""

    def momentum_lipschitz(self, gamma):
        return 0.0

    def apply(self, gamma, S, x):
        """M(x) = S x / gamma."""
        return S.apply(x) / gamma

    def backward_op(self, prob):
        """The set-valued operator whose resolvent the warped solve reduces to."""
        return prob.A


class ShiftedKernel:
    """Kernel M = S/gamma - A2 for a given single-valued operator A2."""

    def __init__(self, a2):
        self.a2 = a2

    def momentum_lipschitz(self, gamma):
        # gamma*M - S = -gamma*A2
        return gamma * self.a2.lipschitz

    def apply(self, gamma, S, x):
        return S.apply(x) / gamma - self.a2(x)

    def backward_op(self, prob):
        if prob.a1 is None:
            raise ValueError(
                "shifted kernel requires the problem to supply the A = A1 + A2 "
                "decomposition"
            )
        return prob.a1


def warped_resolvent(kernel, A, gamma, S, z):
    """Solve M(y) + a = z for the unique y, a in A_total(y).

    ``A`` is the set-valued operator the solve reduces to: the full A for the
    scaled-metric kernel, A1 for the shifted kernel.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return A.resolvent(gamma, gamma * S.solve(np.asarray(z, dtype=float)))


def momentum_update(kernel, gamma, S, y, x):
    """(gamma*M - S)y - (gamma*M - S)x."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise ValueError("dimension mismatch in momentum update")
    if isinstance(kernel, ScaledMetricKernel):
        return np.zeros_like(y)
    return -gamma * (kernel.a2(y) - kernel.a2(x))
