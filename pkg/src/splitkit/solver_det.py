"""Deterministic splitting solver with a nonlinear kernel and momentum.

One iteration, for step-size gamma and kernel M:

    y_k     = (M + A)^-1 (M(x_k) - (B + C)(x_k) + u_k/gamma)
    x_{k+1} = y_k - gamma*S^-1 B(y_k) + gamma*S^-1 B(x_k)
    u_{k+1} = (gamma*M - S)y_k - (gamma*M - S)x_k

With the scaled-metric kernel this is the classical half-forward scheme
(and, in degenerate cases, forward-backward or the forward-backward-forward
method); with the shifted kernel it is a four-operator scheme where A2 is
handled by the momentum term.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import TraceRecord, phi as phi_value
from .kernels import momentum_update, warped_resolvent
from .report import RunReport

__all__ = [
    "DetState",
    "StepPlan",
    "StoppingRule",
    "validate_stepsize",
    "chi_stepsize",
    "fourop_stepsize_bar",
    "default_gamma_fbhf",
    "default_gamma_fourop",
    "auto_gamma",
    "det_step",
    "det_solve",
    "DivergenceError",
]


class DivergenceError(RuntimeError):
    """Raised when an iterate stops being finite."""


@dataclass
class DetState:
    x: np.ndarray
    u: np.ndarray
    prev_disp_normS: float = 0.0
    iter: int = 0


@dataclass
class StepPlan:
    """Step-size plan: a constant gamma or a per-iteration schedule.

    ``validate=False`` skips the sufficient-condition check; the four-operator
    closed-form preset needs this, since it is calibrated more aggressively
    than the sufficient bound.
    """

    gamma: float | object
    eps_margin: float = 1e-3
    validate: bool = True

    def gamma_at(self, k):
        return self.gamma(k) if callable(self.gamma) else self.gamma

    @property
    def constant(self):
        return not callable(self.gamma)


@dataclass
class StoppingRule:
    """Relative-change stop: ||z_{k+1} - z_k|| / max(||z_k||, denom_floor) < tol."""

    tol: float = 1e-6
    denom_floor: float = 1.0


def validate_stepsize(gamma, L_prev, L_cur, mu, beta, eps):
    """Sufficient step-size condition for the deterministic solver."""
    margin = (
        1.0 - L_prev - L_cur - 2.0 * gamma * L_cur * mu
        - gamma**2 * mu**2 - gamma * beta / 2.0
    )
    return margin >= eps


def chi_stepsize(beta, L):
    """Classical half-forward step-size bound 4/(beta + sqrt(beta^2 + 16 L^2))."""
    if beta == 0 and L == 0:
        raise ValueError("step-size bound is unbounded when beta = L = 0")
    return 4.0 / (beta + np.sqrt(beta**2 + 16.0 * L**2))


def fourop_stepsize_bar(beta, L):
    """Four-operator preset bound; singular at L = 0 (use chi_stepsize there).

    ``L`` is the Lipschitz constant of the operator being halved.  Note this
    preset exceeds the sufficient bound of ``validate_stepsize``; run it with
    ``StepPlan(validate=False)``.
    """
    if L == 0:
        raise ValueError("four-operator preset needs L > 0; use chi_stepsize")
    return (
        (-beta / 2.0 + 2.0 * L) + np.sqrt((beta / 2.0 + 2.0 * L) ** 2 + 12.0 * L**2)
    ) / (6.0 * L**2)


def default_gamma_fbhf(beta, L, scale=0.9):
    """scale times the classical half-forward bound."""
    return scale * chi_stepsize(beta, L)


def default_gamma_fourop(beta, L, scale=0.9):
    """scale times the four-operator preset bound."""
    return scale * fourop_stepsize_bar(beta, L)


def auto_gamma(mu, beta, a2_lipschitz=0.0, eps=1e-3):
    """Largest gamma satisfying the step-size condition with margin eps.

    For kernels with momentum, L_prev = L_cur = gamma * a2_lipschitz.
    Bisection on the margin polynomial, which is decreasing in gamma.
    """

    def margin(g):
        lk = g * a2_lipschitz
        return 1.0 - 2.0 * lk - 2.0 * g * lk * mu - g**2 * mu**2 - g * beta / 2.0

    if mu == 0 and beta == 0 and a2_lipschitz == 0:
        return 1.0
    hi = 1.0
    while margin(hi) > eps:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if margin(mid) > eps:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise ValueError(f"no positive step-size achieves margin {eps}")
    return lo


def det_step(state, prob, kernel, gamma):
    """One iteration; returns the new state and the intermediate point y_k."""
    S = prob.S
    x = state.x
    backward = kernel.backward_op(prob)
    z = kernel.apply(gamma, S, x) - (prob.B(x) + prob.C(x)) + state.u / gamma
    y = warped_resolvent(kernel, backward, gamma, S, z)
    x_next = y - gamma * S.solve(prob.B(y) - prob.B(x))
    u_next = momentum_update(kernel, gamma, S, y, x)
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(f"non-finite iterate at iteration {state.iter}")
    return (
        DetState(x_next, u_next, S.norm(y - x), state.iter + 1),
        y,
    )


def _check_plan(plan, prob, kernel, k):
    g = plan.gamma_at(k)
    lk = kernel.momentum_lipschitz(g)
    mu = prob.B.lipschitz
    beta = prob.C.cocoercivity_beta or 0.0
    if not validate_stepsize(g, lk, lk, mu, beta, plan.eps_margin):
        raise ValueError(
            f"step-size {g} violates the sufficient condition at iteration {k} "
            f"(margin below {plan.eps_margin})"
        )


def det_solve(
    prob,
    kernel,
    plan,
    stop=None,
    max_iter=5_000_000,
    x0=None,
    u0=None,
    trace_every=0,
    algo="det",
):
    """Iterate to the relative-change stopping rule and report the run.

    ``trace_every=n`` records every n-th iteration (plus the last);
    0 disables the trace.
    """
    stop = stop or StoppingRule()
    S = prob.S
    x = np.zeros(prob.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    u = np.zeros(prob.dim) if u0 is None else np.asarray(u0, dtype=float).copy()
    state = DetState(x, u)

    if plan.validate:
        if plan.constant:
            _check_plan(plan, prob, kernel, 0)
        # schedules are validated inside the loop

    x_star = prob.known_solution
    lk_of = kernel.momentum_lipschitz
    trace = []
    residual = np.inf
    converged = False
    t0 = time.perf_counter()

    def record(res):
        err = None if x_star is None else S.norm(state.x - x_star)
        ph = None
        if x_star is not None:
            g = plan.gamma_at(max(state.iter - 1, 0))
            ph = phi_value(state.x, state.u, state.prev_disp_normS, lk_of(g), x_star, S)
        trace.append(
            TraceRecord(
                iter=state.iter,
                residual=res,
                objective=prob.objective(state.x) if prob.objective else None,
                error=err,
                phi=ph,
                time_s=time.perf_counter() - t0,
            )
        )

    for k in range(max_iter):
        if plan.validate and not plan.constant:
            _check_plan(plan, prob, kernel, k)
        gamma = plan.gamma_at(k)
        z_prev = state.x
        state, _y = det_step(state, prob, kernel, gamma)
        residual = np.linalg.norm(state.x - z_prev) / max(
            np.linalg.norm(z_prev), stop.denom_floor
        )
        if trace_every and (state.iter % trace_every == 0):
            record(residual)
        if residual < stop.tol:
            converged = True
            break

    wall = time.perf_counter() - t0
    if trace_every and (not trace or trace[-1].iter != state.iter):
        record(residual)
    return RunReport(
        algo=algo,
        problem=prob.name,
        seed=prob.seed,
        iterations=state.iter,
        wall_seconds=wall,
        residual=float(residual) if np.isfinite(residual) else float("inf"),
        converged=converged,
        objective=prob.objective(state.x) if prob.objective else None,
        x=state.x,
        trace=trace,
        config={
            "gamma": plan.gamma if plan.constant else "schedule",
            "tol": stop.tol,
            "max_iter": max_iter,
        },
    )
