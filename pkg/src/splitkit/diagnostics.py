"""Lyapunov evaluators, residuals, and rate-certificate calculators.

These are certificates and measurements only: the solvers never read them.
Tests compare solver trajectories against the quantities computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TraceRecord",
    "phi",
    "gamma_lyap",
    "relative_change",
    "det_rate_factor",
    "stoch_rate_factor",
    "fit_geometric_rate",
]

CSV_HEADER = "iter,residual,objective,error,phi,time_s"


@dataclass
class TraceRecord:
    """One sampled point of a solver run."""

    iter: int
    residual: float
    objective: float | None = None
    error: float | None = None
    phi: float | None = None
    time_s: float | None = None

    def to_csv_row(self):
        def fmt(v):
            return "" if v is None else repr(float(v))

        return (
            f"{self.iter},{fmt(self.residual)},{fmt(self.objective)},"
            f"{fmt(self.error)},{fmt(self.phi)},{fmt(self.time_s)}"
        )


def phi(x_k, u_k, prev_disp_normS, L_prev, x_star, S):
    """Deterministic Lyapunov value at a solution x_star."""
    d = np.asarray(x_k, dtype=float) - np.asarray(x_star, dtype=float)
    return (
        S.norm(d) ** 2
        + 2.0 * float(np.dot(np.asarray(u_k, dtype=float), d))
        + L_prev * prev_disp_normS**2
    )


def gamma_lyap(x_k, omega_k, u_k, prev_disp_normS, L_prev, lam, p, x_star, S):
    """Stochastic Lyapunov value at a solution x_star."""
    if not (0 < p <= 1):
        raise ValueError("p must be in (0, 1]")
    dx = np.asarray(x_k, dtype=float) - np.asarray(x_star, dtype=float)
    dw = np.asarray(omega_k, dtype=float) - np.asarray(x_star, dtype=float)
    return (
        lam * S.norm(dx) ** 2
        + (1.0 - lam) / p * S.norm(dw) ** 2
        + 2.0 * float(np.dot(np.asarray(u_k, dtype=float), dx))
        + L_prev * prev_disp_normS**2
    )


def relative_change(z_next, z_cur):
    """||z_next - z_cur|| / ||z_cur|| with a guarded denominator."""
    z_next = np.asarray(z_next, dtype=float)
    z_cur = np.asarray(z_cur, dtype=float)
    return float(
        np.linalg.norm(z_next - z_cur) / max(np.linalg.norm(z_cur), 1e-300)
    )


def det_rate_factor(gamma, rho, mu, beta, L_prev, L_cur, eps1, eps2):
    """Linear-rate factor t for the deterministic solver under strong monotonicity.

    Requires gamma < 1/eps1.  An L_cur = 0 denominator is treated as +inf.
    """
    if gamma >= 1.0 / eps1:
        raise ValueError("requires gamma < 1/eps1")
    kappa = (
        1.0 - L_prev - L_cur - 2.0 * gamma * L_cur * mu
        - gamma**2 * mu**2 - gamma * beta / 2.0
    )
    nu = 2.0 * gamma**2 * rho * mu**2 * (gamma - 1.0 / eps1)
    t1 = 2.0 * gamma * rho * (1.0 - gamma * eps1) / (1.0 + L_cur / eps2)
    t2 = math.inf if L_cur == 0 else (kappa + nu) / (L_cur * (eps2 + 1.0))
    return min(t1, t2)


def stoch_rate_factor(p, gamma, mu, L_prev, L_cur, alpha, eps3, rate_L):
    """Linear-rate factor c for the variance-reduced solver.

    ``rate_L`` is the free constant of the rate bound and must satisfy
    rate_L >= (3-p)/2; zero-denominator terms are treated as +inf.  The
    certified per-iteration contraction is 1/(1 + c/(2*rate_L)).
    """
    if rate_L < (3.0 - p) / 2.0:
        raise ValueError(f"rate_L must be at least (3-p)/2 = {(3.0 - p) / 2.0}")
    if L_cur + alpha > (1.0 - math.sqrt(p)) / 4.0:
        raise ValueError(
            f"requires L_cur + alpha <= (1-sqrt(p))/4 = {(1.0 - math.sqrt(p)) / 4.0}"
        )
    c1 = gamma * mu / (1.0 + L_cur / (2.0 * rate_L * eps3))
    if L_cur == 0:
        c2 = math.inf
    else:
        c2 = (
            2.0 * rate_L
            * (1.0 - p - L_prev - alpha - (1.0 - p) * (alpha + L_cur))
            / ((1.0 - p) * L_cur * (eps3 + 1.0))
        )
    c3 = (
        rate_L * p * (1.0 - math.sqrt(p) - 4.0 * (L_cur + alpha))
        / (2.0 * (1.0 - p) * (4.0 + p) + 2.0 * p * L_cur * (eps3 + 1.0))
    )
    return min(c1, c2, c3)


def fit_geometric_rate(error_trace, floor=1e-14):
    """Per-iteration geometric rate fitted by least squares on log(error).

    Entries at or below the floating-point floor are ignored; an all-zero
    trace returns 0, flagging exact convergence.
    """
    e = np.asarray(error_trace, dtype=float)
    if e.size < 10:
        raise ValueError("need a trace of at least 10 errors")
    k = np.arange(e.size)
    mask = e > floor
    if not mask.any():
        return 0.0
    slope = np.polyfit(k[mask], np.log(e[mask]), 1)[0]
    return float(min(np.exp(slope), 1.0))
