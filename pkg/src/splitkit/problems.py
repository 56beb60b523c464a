"""Builders for the experiment problem instances.

Covers the randomly generated constrained-QP saddle problems, the portfolio
saddle problem with its delimited-text dataset reader, and strongly monotone
synthetics with oracle solutions for rate certification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .metric import Metric
from .operators import (
    AffineOp,
    BoxNormalCone,
    CappedSimplexNormalCone,
    IdentityPlus,
    NonnegOrthantNormalCone,
    ProductOp,
    QuadraticGradient,
    Scaled,
    SkewSaddle,
    estimate_opnorm,
)
from .solver_stoch import FiniteSumOracle

__all__ = [
    "SplitProblem",
    "PortfolioInstance",
    "ParseError",
    "build_qp_saddle",
    "split_saddle_B",
    "fourop_variant",
    "parse_orlibrary",
    "build_portfolio",
    "build_strong_synthetic",
    "split_B_finite_sum",
]


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


@dataclass
class SplitProblem:
    """The triple (A, B, C) with its geometry and optional extras.

    ``a1``/``a2`` carry an optional decomposition A_total = a1 + a2 with a2
    single-valued Lipschitz, consumed by the shifted kernel.  Instances are
    treated as immutable and may be shared across concurrent solves.
    """

    name: str
    dim: int
    A: object
    B: object
    C: object
    S: Metric
    a1: object = None
    a2: object = None
    known_solution: np.ndarray | None = None
    objective: object = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Random constrained-QP saddle problems
# ---------------------------------------------------------------------------

def build_qp_saddle(N, q, seed):
    """Random box-constrained least-squares problem with q linear inequality
    constraints, posed as a saddle inclusion on the stacked (x, u).

    All matrix entries are i.i.d. standard normal from the seed.
    """
    if N % 2 != 0 or N < 2:
        raise ValueError("N must be a positive even integer")
    if q < 1:
        raise ValueError("q must be at least 1")
    m = N // 2
    rng = _rng(seed)
    G = rng.standard_normal((m, N))
    D = rng.standard_normal((q, N))
    b = rng.standard_normal(m)
    dim = N + q
    A = ProductOp([(BoxNormalCone(0.0, 1.0), N), (NonnegOrthantNormalCone(), q)])
    B = SkewSaddle(D)
    C = QuadraticGradient.from_least_squares(G, b, dim=dim)

    def objective(v):
        return 0.5 * float(np.sum((G @ v[:N] - b) ** 2))

    return SplitProblem(
        name=f"qp-saddle(N={N},q={q})",
        dim=dim,
        A=A,
        B=B,
        C=C,
        S=Metric.identity(dim),
        objective=objective,
        seed=seed,
        meta={"N": N, "q": q, "mu": B.lipschitz, "beta": C.cocoercivity_beta},
    )


def split_saddle_B(prob):
    """Halve the saddle coupling: returns (a2, b_half), two equal halves of B.

    a2 is absorbed into the shifted kernel (backward together with A), b_half
    stays in the half-forward step.
    """
    if not isinstance(prob.B, SkewSaddle):
        raise ValueError("saddle split applies to problems with a saddle coupling B")
    return Scaled(prob.B, 0.5), Scaled(prob.B, 0.5)


def fourop_variant(prob):
    """Derived problem for the four-operator scheme: A1 = A, A2 = B/2, B = B/2.

    Only meaningful together with a ``ShiftedKernel(prob.a2)``; the combined
    backward operator A1 + A2 has no direct resolvent here.
    """
    a2, b_half = split_saddle_B(prob)
    return SplitProblem(
        name=prob.name + "+fourop",
        dim=prob.dim,
        A=prob.A,
        B=b_half,
        C=prob.C,
        S=prob.S,
        a1=prob.A,
        a2=a2,
        known_solution=prob.known_solution,
        objective=prob.objective,
        seed=prob.seed,
        meta=dict(prob.meta, mu=b_half.lipschitz, a2_lipschitz=a2.lipschitz),
    )


# ---------------------------------------------------------------------------
# Portfolio problem and its dataset format
# ---------------------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class PortfolioInstance:
    """Asset statistics: per-asset mean/stddev plus the correlation matrix."""

    n: int
    means: np.ndarray
    stddevs: np.ndarray
    corr: np.ndarray

    @property
    def covariance(self):
        h = self.corr * np.outer(self.stddevs, self.stddevs)
        return 0.5 * (h + h.T)

    def to_json(self, groups=None, r=None):
        iu = np.triu_indices(self.n)
        corr = [
            [int(i) + 1, int(j) + 1, float(self.corr[i, j])]
            for i, j in zip(*iu)
        ]
        doc = {
            "n": self.n,
            "means": self.means.tolist(),
            "stddevs": self.stddevs.tolist(),
            "corr": corr,
        }
        if groups is not None:
            doc["groups"] = [[int(lo), int(hi)] for lo, hi in groups]
        if r is not None:
            doc["r"] = r
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        n = doc["n"]
        corr = np.eye(n)
        for i, j, v in doc["corr"]:
            corr[i - 1, j - 1] = v
            corr[j - 1, i - 1] = v
        return cls(
            n=n,
            means=np.asarray(doc["means"], dtype=float),
            stddevs=np.asarray(doc["stddevs"], dtype=float),
            corr=corr,
        )


def parse_orlibrary(text):
    """Read the whitespace-separated portfolio file format.

    Layout: asset count n; n lines of "mean stddev"; then "i j corr" rows
    covering every pair i <= j with unit diagonal.  Raises ParseError with
    the offending line number.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split()
        if toks:
            rows.append((lineno, toks))
    if not rows:
        raise ParseError("empty file")
    lineno, toks = rows[0]
    try:
        n = int(toks[0])
    except ValueError:
        raise ParseError(f"expected asset count, got {toks[0]!r}", lineno)
    if n < 1:
        raise ParseError(f"asset count must be positive, got {n}", lineno)
    if len(rows) < 1 + n:
        raise ParseError(f"expected {n} mean/stddev rows, found {len(rows) - 1}")
    means = np.empty(n)
    stddevs = np.empty(n)
    for k in range(n):
        lineno, toks = rows[1 + k]
        if len(toks) < 2:
            raise ParseError("expected 'mean stddev'", lineno)
        means[k] = float(toks[0])
        stddevs[k] = float(toks[1])
        if stddevs[k] < 0:
            raise ParseError(f"negative stddev {stddevs[k]}", lineno)
    corr = np.full((n, n), np.nan)
    for lineno, toks in rows[1 + n:]:
        if len(toks) < 3:
            raise ParseError("expected 'i j corr'", lineno)
        i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"asset index out of range in pair ({i}, {j})", lineno)
        if i == j and abs(v - 1.0) > 1e-9:
            raise ParseError(f"diagonal correlation for asset {i} is {v}, not 1", lineno)
        corr[i - 1, j - 1] = v
        corr[j - 1, i - 1] = v
    missing = np.argwhere(np.isnan(np.triu(corr)) & (np.triu(np.ones((n, n))) > 0))
    if missing.size:
        i, j = missing[0]
        raise ParseError(f"missing correlation for pair ({i + 1}, {j + 1})")
    return PortfolioInstance(n=n, means=means, stddevs=stddevs, corr=corr)


def default_groups(n, k=3):
    size = n // k
    if size * k != n:
        raise ValueError(f"{n} assets do not split into {k} equal groups")
    return [(i * size, (i + 1) * size) for i in range(k)]


def build_portfolio(instance, r, groups=None, min_group_weight=0.3):
    """Saddle formulation of the minimum-variance problem: fully invested
    long-only weights, a target-return constraint, and per-group minimum
    allocations, with one multiplier per inequality row.
    """
    n = instance.n
    groups = default_groups(n) if groups is None else [tuple(g) for g in groups]
    covered = sorted(i for lo, hi in groups for i in range(lo, hi))
    if covered != list(range(n)):
        raise ValueError("groups must partition the asset indices")
    q = 1 + len(groups)
    D = np.zeros((q, n))
    D[0] = -instance.means
    for row, (lo, hi) in enumerate(groups, start=1):
        D[row, lo:hi] = -1.0
    b = np.concatenate([[r], np.full(len(groups), min_group_weight)])
    H = instance.covariance
    beta = estimate_opnorm(H)
    dim = n + q
    A = ProductOp([(CappedSimplexNormalCone(), n), (NonnegOrthantNormalCone(), q)])
    B = SkewSaddle(D, offset=b)
    C = QuadraticGradient(H, dim=dim, beta=beta)

    def objective(v):
        x = v[:n]
        return 0.5 * float(x @ (H @ x))

    return SplitProblem(
        name=f"portfolio(n={n},r={r})",
        dim=dim,
        A=A,
        B=B,
        C=C,
        S=Metric.identity(dim),
        objective=objective,
        meta={
            "n": n,
            "r": r,
            "groups": groups,
            "mu": B.lipschitz,
            "beta": beta,
            "covariance_norm": beta,
        },
    )


# ---------------------------------------------------------------------------
# Strongly monotone synthetics with oracle solutions
# ---------------------------------------------------------------------------

def build_strong_synthetic(n, rho, seed, strong_part="A", box_halfwidth=5.0):
    """Test fixture with a known solution computed by a direct solve.

    ``strong_part="A"`` puts the strong monotonicity in the set-valued part
    (rho*Id + box normal cone); ``"B"`` puts it in the Lipschitz part
    (rho*Id + skew).  The remaining operators are a random skew map and a
    random positive-semidefinite quadratic gradient, scaled to modest norms
    so the solution lands strictly inside the box.
    """
    if n < 1 or rho <= 0:
        raise ValueError("need n >= 1 and rho > 0")
    rng = _rng(seed)
    W = rng.standard_normal((n, n))
    W = 0.5 * (W - W.T)
    wn = estimate_opnorm(W)
    if wn > 0:
        W *= 0.5 / wn
    R = rng.standard_normal((n, n)) / np.sqrt(n)
    Q = R.T @ R
    qn = estimate_opnorm(Q)
    if qn > 0:
        Q *= 0.5 / qn
    c = 0.1 * rng.standard_normal(n)

    box = BoxNormalCone(-box_halfwidth, box_halfwidth)
    if strong_part == "A":
        A = IdentityPlus(box, rho)
        B = AffineOp(W)
        K = rho * np.eye(n) + W + Q
    elif strong_part == "B":
        A = box
        B = AffineOp(rho * np.eye(n) + W)
        K = rho * np.eye(n) + W + Q
    else:
        raise ValueError("strong_part must be 'A' or 'B'")
    C = QuadraticGradient(Q, c)

    x_star = np.linalg.solve(K, -c)
    if np.abs(x_star).max() >= box_halfwidth:
        raise RuntimeError("synthetic solution left the box; rescale the instance")
    # projection residual of the full inclusion at x_star
    F = K @ x_star + c
    res = np.linalg.norm(x_star - np.clip(x_star - F, -box_halfwidth, box_halfwidth))
    if res > 1e-10:
        raise RuntimeError(f"oracle solution residual {res:.3e} too large")

    return SplitProblem(
        name=f"strong-synthetic(n={n},rho={rho},{strong_part})",
        dim=n,
        A=A,
        B=B,
        C=C,
        S=Metric.identity(n),
        known_solution=x_star,
        seed=seed,
        meta={
            "rho": rho,
            "strong_part": strong_part,
            "mu": B.lipschitz,
            "beta": C.cocoercivity_beta,
        },
    )


def split_B_finite_sum(prob, n_parts, seed, scheme="uniform"):
    """Split a matrix-form B into row blocks, one component per block.

    The components sum to B exactly; per-component constants come from the
    power-iteration norm estimate.
    """
    if n_parts < 1:
        raise ValueError("n_parts must be at least 1")
    if not hasattr(prob.B, "as_affine"):
        raise ValueError("finite-sum split needs a matrix-form B")
    K, c = prob.B.as_affine()
    d = K.shape[0]
    perm = _rng(seed).permutation(d)
    bounds = np.linspace(0, d, n_parts + 1).astype(int)
    components = []
    for k in range(n_parts):
        rows = perm[bounds[k]:bounds[k + 1]]
        Kk = np.zeros_like(K)
        Kk[rows] = K[rows]
        ck = np.zeros(d)
        ck[rows] = c[rows]
        components.append(AffineOp(Kk, ck))
    return FiniteSumOracle(components, scheme=scheme)
