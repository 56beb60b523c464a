"""Loopless variance-reduced splitting solver with momentum.

The Lipschitz part B is a finite sum; each iteration evaluates one sampled
component at two points and keeps a full-operator snapshot at an anchor
point that is refreshed with probability p (no outer loop).

One iteration, for mixing weight lambda, step-size gamma and kernel M:

    xbar_k  = lambda*x_k + (1-lambda)*omega_k
    y_k     = (M + A)^-1 (M(xbar_k) - (B + C)(omega_k) + u_k/gamma)
    u_{k+1} = (gamma*M - S)y_k - (gamma*M - S)xbar_k
    draw a component index xi_k from Q
    x_{k+1} = y_k - gamma*S^-1 B_xi(y_k) + gamma*S^-1 B_xi(omega_k)
    omega_{k+1} = x_{k+1} with probability p, else omega_k
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import TraceRecord
from .kernels import momentum_update, warped_resolvent
from .report import RunReport

__all__ = [
    "FiniteSumOracle",
    "StochConfig",
    "StochState",
    "validate_stoch",
    "strong_preset",
    "stoch_step",
    "stoch_solve",
]


class FiniteSumOracle:
    """Components {B_i} with constants {L_i} and a sampling distribution.

    ``scheme`` is "uniform" (P(i) = 1/N, theta = sqrt(N * sum L_i^2)) or
    "importance" (P(i) proportional to L_i, theta = sum L_i).  The rescaled
    draw B_i(x)/P(i) is an unbiased estimate of the sum under either scheme.
    """

    def __init__(self, components, scheme="uniform"):
        if not components:
            raise ValueError("need at least one component")
        self.components = list(components)
        self.Ls = np.array([c.lipschitz for c in components], dtype=float)
        self.scheme = scheme
        n = len(components)
        if scheme == "uniform":
            self.probs = np.full(n, 1.0 / n)
            self.theta = float(np.sqrt(n * np.sum(self.Ls**2)))
        elif scheme == "importance":
            if np.any(self.Ls <= 0):
                raise ValueError("importance sampling needs positive L_i")
            self.probs = self.Ls / self.Ls.sum()
            self.theta = float(self.Ls.sum())
        else:
            raise ValueError(f"unknown sampling scheme {scheme!r}")
        self._cum = np.cumsum(self.probs)

    def __len__(self):
        return len(self.components)

    def apply(self, i, x):
        """Rescaled component value B_i(x) / P(i)."""
        if not 0 <= i < len(self.components):
            raise IndexError(f"component index {i} out of range")
        return self.components[i](x) / self.probs[i]

    def mean(self, x):
        """The exact sum over components (equals the oracle expectation)."""
        out = self.components[0](x)
        for c in self.components[1:]:
            out = out + c(x)
        return out

    def draw(self, rng):
        return int(np.searchsorted(self._cum, rng.random(), side="right"))


@dataclass
class StochConfig:
    p: float
    lam: float
    gamma: float
    seed: int = 0
    eps_margin: float = 0.0


@dataclass
class StochState:
    x: np.ndarray
    omega: np.ndarray
    u: np.ndarray
    prev_disp_normS: float = 0.0
    iter: int = 0
    snap_B: np.ndarray | None = None
    snap_C: np.ndarray | None = None


def validate_stoch(lam, gamma, theta, beta, L_prev, L_cur, eps):
    """Both sufficient inequalities for the variance-reduced solver."""
    m1 = (
        lam - L_prev - gamma * L_cur * theta
        - lam * (gamma * L_cur * theta + L_cur)
    )
    m2 = (
        1.0 - lam - gamma**2 * theta**2 - gamma * beta / 2.0
        - (1.0 - lam) * (gamma * L_cur * theta + L_cur)
    )
    return m1 >= eps and m2 >= eps


def strong_preset(p, beta, theta, L_cur, alpha):
    """Parameter preset for the strongly monotone rate: lambda = 1-p and
    gamma = min(sqrt(p)/(2 theta), p/beta, alpha/(L_cur theta)).

    Zero denominators drop the corresponding term.  Requires p in (0,1) and
    L_cur + alpha <= (1 - sqrt(p))/4.
    """
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    bound = (1.0 - math.sqrt(p)) / 4.0
    if L_cur + alpha > bound:
        raise ValueError(
            f"needs L_cur + alpha <= (1-sqrt(p))/4 = {bound}; got {L_cur + alpha}"
        )
    terms = [math.sqrt(p) / (2.0 * theta) if theta > 0 else math.inf]
    terms.append(p / beta if beta > 0 else math.inf)
    terms.append(alpha / (L_cur * theta) if L_cur * theta > 0 else math.inf)
    gamma = min(terms)
    if not math.isfinite(gamma):
        raise ValueError("all preset terms are unbounded; supply theta > 0")
    return 1.0 - p, gamma


def make_rngs(seed):
    """Two counter-based streams: index draws and the snapshot coin."""
    index = np.random.Generator(np.random.Philox(key=np.uint64(seed) << np.uint64(1)))
    coin = np.random.Generator(
        np.random.Philox(key=(np.uint64(seed) << np.uint64(1)) + np.uint64(1))
    )
    return index, coin


def stoch_step(state, prob, oracle, kernel, cfg, rng_index, rng_coin):
    """One iteration; returns (new state, refreshed flag).

    Fills the snapshot on the incoming state when it is missing, so the
    first call after a refresh pays the one full-sum evaluation.
    """
    S = prob.S
    lam, gamma, p = cfg.lam, cfg.gamma, cfg.p
    xbar = lam * state.x + (1.0 - lam) * state.omega
    if state.snap_B is None:
        state.snap_B = oracle.mean(state.omega)
        state.snap_C = prob.C(state.omega)
    z = kernel.apply(gamma, S, xbar) - (state.snap_B + state.snap_C) + state.u / gamma
    y = warped_resolvent(kernel, kernel.backward_op(prob), gamma, S, z)
    u_next = momentum_update(kernel, gamma, S, y, xbar)
    i = oracle.draw(rng_index)
    # with one component the rescaled draw at omega is the snapshot itself
    b_omega = state.snap_B if len(oracle) == 1 else oracle.apply(i, state.omega)
    x_next = y - gamma * S.solve(oracle.apply(i, y) - b_omega)
    if not np.all(np.isfinite(x_next)):
        from .solver_det import DivergenceError

        raise DivergenceError(f"non-finite iterate at iteration {state.iter}")
    refresh = rng_coin.random() < p
    if refresh:
        omega_next, snap_B, snap_C = x_next, None, None
    else:
        omega_next, snap_B, snap_C = state.omega, state.snap_B, state.snap_C
    return StochState(
        x=x_next,
        omega=omega_next,
        u=u_next,
        prev_disp_normS=S.norm(y - xbar),
        iter=state.iter + 1,
        snap_B=snap_B,
        snap_C=snap_C,
    ), refresh


def stoch_solve(
    prob,
    oracle,
    kernel,
    cfg,
    stop=None,
    max_iter=5_000_000,
    x0=None,
    u0=None,
    trace_every=0,
    algo="svr",
    enforce_validation=True,
):
    """Run the variance-reduced solver to the relative-change stopping rule.

    The report carries the oracle-economy counters: sampled-component
    evaluations, full-sum evaluations, and snapshot refreshes.
    """
    from .solver_det import StoppingRule

    stop = stop or StoppingRule()
    if enforce_validation:
        lk = kernel.momentum_lipschitz(cfg.gamma)
        beta = prob.C.cocoercivity_beta or 0.0
        if not validate_stoch(cfg.lam, cfg.gamma, oracle.theta, beta, lk, lk,
                              cfg.eps_margin):
            raise ValueError("config violates the sufficient step-size conditions")

    x = np.zeros(prob.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    u = np.zeros(prob.dim) if u0 is None else np.asarray(u0, dtype=float).copy()
    state = StochState(x=x, omega=x.copy(), u=u)
    rng_index, rng_coin = make_rngs(cfg.seed)

    x_star = prob.known_solution
    component_evals = 0
    full_evals = 1  # initial snapshot
    refreshes = 0
    trace = []
    residual = np.inf
    converged = False
    t0 = time.perf_counter()

    def record(res):
        trace.append(
            TraceRecord(
                iter=state.iter,
                residual=res,
                objective=prob.objective(state.x) if prob.objective else None,
                error=None if x_star is None else prob.S.norm(state.x - x_star),
                time_s=time.perf_counter() - t0,
            )
        )

    for _ in range(max_iter):
        z_prev = state.x
        state, refreshed = stoch_step(
            state, prob, oracle, kernel, cfg, rng_index, rng_coin
        )
        component_evals += 2 if len(oracle) > 1 else 1
        if refreshed:
            refreshes += 1
            full_evals += 1
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
        seed=cfg.seed,
        iterations=state.iter,
        wall_seconds=wall,
        residual=float(residual) if np.isfinite(residual) else float("inf"),
        converged=converged,
        objective=prob.objective(state.x) if prob.objective else None,
        x=state.x,
        trace=trace,
        component_evals=component_evals,
        full_evals=full_evals,
        snapshot_refreshes=refreshes,
        config={
            "p": cfg.p,
            "lambda": cfg.lam,
            "gamma": cfg.gamma,
            "seed": cfg.seed,
            "tol": stop.tol,
            "max_iter": max_iter,
            "parts": len(oracle),
            "scheme": oracle.scheme,
        },
    )
