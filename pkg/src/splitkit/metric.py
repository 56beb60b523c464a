"""Weighted geometry induced by a self-adjoint strongly positive operator.

All solver quantities (norms, Lipschitz constants, cocoercivity moduli) are
measured in the inner product ``<S x, y>``.  Three concrete kinds are
supported: identity, diagonal with positive weights, and dense symmetric.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["Metric"]

_SYMMETRY_RTOL = 1e-12
_SINGULAR_FLOOR = 1e-14


def _check_dim(metric, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (metric.dim is not None and x.shape[0] != metric.dim):
        raise ValueError(
            f"dimension mismatch: metric dim {metric.dim}, vector shape {x.shape}"
        )
    return x


class Metric:
    """The operator S defining the inner-product geometry.

    Instances are immutable; the dense factorization is computed once at
    construction and shared across solver runs.
    """

    def __init__(self, kind, dim=None, weights=None, matrix=None, modulus=None):
        self.kind = kind
        self.dim = dim
        self._weights = weights
        self._matrix = matrix
        self._cho = None
        if kind == "identity":
            self.modulus = 1.0 if modulus is None else modulus
        elif kind == "diagonal":
            w = np.asarray(weights, dtype=float)
            if np.any(w <= 0):
                raise ValueError("diagonal metric weights must be positive")
            self._weights = w
            self.dim = w.shape[0]
            self.modulus = float(w.min()) if modulus is None else modulus
        elif kind == "dense":
            m = np.asarray(matrix, dtype=float)
            scale = np.abs(m).max()
            if scale == 0 or np.abs(m - m.T).max() > _SYMMETRY_RTOL * max(scale, 1.0):
                raise ValueError("dense metric matrix must be symmetric")
            m = 0.5 * (m + m.T)
            self._matrix = m
            self.dim = m.shape[0]
            try:
                self._cho = cho_factor(m)
            except np.linalg.LinAlgError as exc:
                raise ValueError("metric is not positive definite") from exc
            self.modulus = (
                self._estimate_modulus() if modulus is None else modulus
            )
            if self.modulus < _SINGULAR_FLOOR:
                raise ValueError(
                    f"metric is numerically singular (modulus {self.modulus:.3e})"
                )
        else:
            raise ValueError(f"unknown metric kind {kind!r}")
        if self.modulus <= 0:
            raise ValueError("strong-positivity modulus must be positive")

    @classmethod
    def identity(cls, dim=None):
        return cls("identity", dim=dim)

    @classmethod
    def diagonal(cls, weights):
        return cls("diagonal", weights=weights)

    @classmethod
    def dense(cls, matrix, modulus=None):
        return cls("dense", matrix=matrix, modulus=modulus)

    def _estimate_modulus(self, iters=50):
        # Inverse power iteration: largest eigenvalue of S^-1 is 1/lambda_min(S).
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = cho_solve(self._cho, v)
            lam = np.linalg.norm(w)
            if lam == 0:
                return 0.0
            v = w / lam
        return 1.0 / lam

    # -- core operations ---------------------------------------------------

    def apply(self, x):
        """Return S x."""
        x = _check_dim(self, x)
        if self.kind == "identity":
            return x
        if self.kind == "diagonal":
            return self._weights * x
        return self._matrix @ x

    def solve(self, y):
        """Return the x with S x = y."""
        y = _check_dim(self, y)
        if self.kind == "identity":
            return y
        if self.kind == "diagonal":
            return y / self._weights
        return cho_solve(self._cho, y)

    def norm(self, x):
        """S-weighted norm sqrt(<S x, x>)."""
        x = _check_dim(self, x)
        return float(np.sqrt(max(np.dot(self.apply(x), x), 0.0)))

    def inv_norm(self, x):
        """S-inverse-weighted norm sqrt(<S^-1 x, x>)."""
        x = _check_dim(self, x)
        return float(np.sqrt(max(np.dot(self.solve(x), x), 0.0)))

    def norms(self, x):
        """Both weighted norms of x as ``(norm_S, norm_Sinv)``."""
        return self.norm(x), self.inv_norm(x)

    def inner(self, x, y):
        """Weighted inner product <S x, y>."""
        return float(np.dot(self.apply(x), np.asarray(y, dtype=float)))

    @property
    def is_identity(self):
        return self.kind == "identity"

    def __repr__(self):
        return f"Metric(kind={self.kind!r}, dim={self.dim})"
