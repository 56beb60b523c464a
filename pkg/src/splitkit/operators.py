"""Concrete operators for the experiment problems.

Set-valued operators are represented through their resolvents (projections
for normal cones); single-valued operators carry their Lipschitz constant
and, when applicable, a cocoercivity modulus.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SetValuedOp",
    "ZeroCone",
    "BoxNormalCone",
    "NonnegOrthantNormalCone",
    "CappedSimplexNormalCone",
    "ProductOp",
    "IdentityPlus",
    "SingleValuedOp",
    "ZeroMap",
    "AffineOp",
    "SkewSaddle",
    "QuadraticGradient",
    "SumOp",
    "Scaled",
    "project_capped_simplex",
    "estimate_opnorm",
]


# ---------------------------------------------------------------------------
# Set-valued operators (via resolvents)
# ---------------------------------------------------------------------------

class SetValuedOp:
    """A maximally monotone set-valued operator exposed through its resolvent."""

    def resolvent(self, gamma, z):
        """Return the unique y with y + gamma*a = z for some a in A(y)."""
        raise NotImplementedError


class ZeroCone(SetValuedOp):
    """The zero operator; its resolvent is the identity."""

    def resolvent(self, gamma, z):
        return np.asarray(z, dtype=float)


class BoxNormalCone(SetValuedOp):
    """Normal cone of a box [lo, hi] per coordinate.

    The resolvent is the projection onto the box and does not depend on
    gamma; do not reuse this class for operators that are not normal cones.
    """

    def __init__(self, lo, hi, dim=None):
        self.lo = np.asarray(lo, dtype=float) if np.ndim(lo) else float(lo)
        self.hi = np.asarray(hi, dtype=float) if np.ndim(hi) else float(hi)
        self.dim = dim

    def resolvent(self, gamma, z):
        z = np.asarray(z, dtype=float)
        if self.dim is not None and z.shape[0] != self.dim:
            raise ValueError("dimension mismatch in box projection")
        return np.clip(z, self.lo, self.hi)


class NonnegOrthantNormalCone(SetValuedOp):
    """Normal cone of the nonnegative orthant; resolvent clips at zero."""

    def resolvent(self, gamma, z):
        return np.maximum(np.asarray(z, dtype=float), 0.0)


class CappedSimplexNormalCone(SetValuedOp):
    """Normal cone of {x : sum x = 1, 0 <= x <= 1}."""

    def resolvent(self, gamma, z):
        return project_capped_simplex(z)


class ProductOp(SetValuedOp):
    """Blockwise product of set-valued operators over contiguous index blocks."""

    def __init__(self, blocks):
        # blocks: list of (op, size)
        self.blocks = list(blocks)
        self.dim = sum(size for _, size in self.blocks)

    def resolvent(self, gamma, z):
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.dim:
            raise ValueError(
                f"dimension mismatch: product op dim {self.dim}, got {z.shape[0]}"
            )
        out = np.empty_like(z)
        off = 0
        for op, size in self.blocks:
            out[off:off + size] = op.resolvent(gamma, z[off:off + size])
            off += size
        return out


class IdentityPlus(SetValuedOp):
    """The operator rho*Id + A for a set-valued A; strongly monotone for rho > 0.

    Resolvent: y + gamma*(rho*y + a) = z  <=>  y = J_{gamma' A}(z/(1+gamma*rho))
    with gamma' = gamma/(1+gamma*rho).
    """

    def __init__(self, inner, rho):
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        self.inner = inner
        self.rho = float(rho)

    def resolvent(self, gamma, z):
        z = np.asarray(z, dtype=float)
        scale = 1.0 + gamma * self.rho
        return self.inner.resolvent(gamma / scale, z / scale)


# ---------------------------------------------------------------------------
# Single-valued operators
# ---------------------------------------------------------------------------

class SingleValuedOp:
    """A single-valued monotone operator with known Lipschitz constant."""

    lipschitz = 0.0
    cocoercivity_beta = None

    def __call__(self, v):
        raise NotImplementedError


class ZeroMap(SingleValuedOp):
    def __call__(self, v):
        return np.zeros_like(np.asarray(v, dtype=float))


class AffineOp(SingleValuedOp):
    """v -> M v + c."""

    def __init__(self, matrix, offset=None, lipschitz=None):
        self.matrix = np.asarray(matrix, dtype=float)
        n = self.matrix.shape[1]
        self.offset = (
            np.zeros(self.matrix.shape[0])
            if offset is None
            else np.asarray(offset, dtype=float)
        )
        self.dim = n
        self.lipschitz = (
            estimate_opnorm(self.matrix) if lipschitz is None else float(lipschitz)
        )

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ValueError("dimension mismatch in affine operator")
        return self.matrix @ v + self.offset

    def as_affine(self):
        return self.matrix, self.offset


class SkewSaddle(SingleValuedOp):
    """Saddle coupling on a stacked (x, u): (D^T u, -D x - b).

    Monotone with zero symmetric part when b = 0; Lipschitz constant ||D||.
    """

    def __init__(self, coupling, offset=None, lipschitz=None):
        self.coupling = np.asarray(coupling, dtype=float)
        q, n = self.coupling.shape
        self.n = n
        self.q = q
        self.dim = n + q
        self.offset = (
            np.zeros(q) if offset is None else np.asarray(offset, dtype=float)
        )
        self.lipschitz = (
            estimate_opnorm(self.coupling) if lipschitz is None else float(lipschitz)
        )

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ValueError("dimension mismatch in saddle operator")
        x, u = v[: self.n], v[self.n:]
        return np.concatenate([self.coupling.T @ u, -self.coupling @ x - self.offset])

    def as_affine(self):
        k = np.zeros((self.dim, self.dim))
        k[: self.n, self.n:] = self.coupling.T
        k[self.n:, : self.n] = -self.coupling
        c = np.concatenate([np.zeros(self.n), -self.offset])
        return k, c


class QuadraticGradient(SingleValuedOp):
    """Gradient of a convex quadratic acting on the leading x-block.

    Value is (Q x + c, 0) on a stacked (x, u) vector; Q must be symmetric
    positive semidefinite.  Cocoercive with beta = ||Q||.
    """

    def __init__(self, quad, offset=None, dim=None, beta=None):
        self.quad = np.asarray(quad, dtype=float)
        self.n = self.quad.shape[0]
        self.dim = self.n if dim is None else int(dim)
        self.offset = (
            np.zeros(self.n) if offset is None else np.asarray(offset, dtype=float)
        )
        norm = estimate_opnorm(self.quad) if beta is None else float(beta)
        self.cocoercivity_beta = norm
        self.lipschitz = norm

    @classmethod
    def from_least_squares(cls, design, target, dim=None):
        """Gradient of 0.5*||G x - b||^2, i.e. Q = G^T G, c = -G^T b."""
        design = np.asarray(design, dtype=float)
        target = np.asarray(target, dtype=float)
        beta = estimate_opnorm(design) ** 2
        return cls(design.T @ design, -design.T @ target, dim=dim, beta=beta)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.dim:
            raise ValueError("dimension mismatch in quadratic gradient")
        out = np.zeros_like(v)
        out[: self.n] = self.quad @ v[: self.n] + self.offset
        return out


class SumOp(SingleValuedOp):
    """Pointwise sum of single-valued operators; constants add."""

    def __init__(self, *ops):
        if not ops:
            raise ValueError("need at least one operator")
        self.ops = ops
        self.lipschitz = sum(op.lipschitz for op in ops)

    def __call__(self, v):
        out = self.ops[0](v)
        for op in self.ops[1:]:
            out = out + op(v)
        return out


class Scaled(SingleValuedOp):
    """factor * inner; Lipschitz and cocoercivity constants scale accordingly."""

    def __init__(self, inner, factor):
        self.inner = inner
        self.factor = float(factor)
        self.lipschitz = abs(self.factor) * inner.lipschitz
        if inner.cocoercivity_beta is not None:
            self.cocoercivity_beta = abs(self.factor) * inner.cocoercivity_beta

    def __call__(self, v):
        return self.factor * self.inner(v)

    def as_affine(self):
        k, c = self.inner.as_affine()
        return self.factor * k, self.factor * c


# ---------------------------------------------------------------------------
# Projections and constants
# ---------------------------------------------------------------------------

def project_capped_simplex(z, width=1e-14):
    """Euclidean projection onto {y : sum y = 1, 0 <= y <= 1}.

    Finds the shift tau by bisection on the nonincreasing map
    tau -> sum(clip(z - tau, 0, 1)) - 1.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("capped-simplex projection needs a nonempty vector")
    lo = float(z.min()) - 1.0
    hi = float(z.max())
    # sum at lo is n >= 1, sum at hi is 0 <= 1
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if np.clip(z - mid, 0.0, 1.0).sum() >= 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(z - 0.5 * (lo + hi), 0.0, 1.0)


def estimate_opnorm(matrix, tol=1e-10, max_iter=10_000):
    """Largest singular value by power iteration on M^T M.

    Deterministic: starts from the all-ones vector.  Returns 0 for the zero
    matrix.
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0 or np.abs(m).max() == 0.0:
        return 0.0
    v = np.ones(m.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = m.T @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # all-ones start lies in the null space; perturb once
            v = np.arange(1.0, m.shape[1] + 1.0)
            v /= np.linalg.norm(v)
            w = m.T @ (m @ v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0
        new_est = np.sqrt(nw)
        v = w / nw
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return float(new_est)
        est = new_est
    return float(est)
