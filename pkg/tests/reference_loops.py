"""Directly coded splitting iterations, independent of the library internals.

Each loop works on plain callables and numpy arrays so equivalence tests
compare two genuinely separate implementations.
"""

import numpy as np


def fbhf_loop(proj, B, C, gamma, x0, steps):
    """y = P(x - g(Bx + Cx)); x+ = y - g*By + g*Bx."""
    xs = [np.asarray(x0, dtype=float).copy()]
    x = xs[0]
    for _ in range(steps):
        y = proj(x - gamma * (B(x) + C(x)))
        x = y - gamma * B(y) + gamma * B(x)
        xs.append(x)
    return xs


def tseng_loop(proj, B, gamma, x0, steps):
    """Forward-backward-forward: FBHF with the cocoercive part absent."""
    xs = [np.asarray(x0, dtype=float).copy()]
    x = xs[0]
    for _ in range(steps):
        y = proj(x - gamma * B(x))
        x = y - gamma * B(y) + gamma * B(x)
        xs.append(x)
    return xs


def fb_loop(proj, C, gamma, x0, steps):
    """Forward-backward: x+ = P(x - g*Cx)."""
    xs = [np.asarray(x0, dtype=float).copy()]
    x = xs[0]
    for _ in range(steps):
        x = proj(x - gamma * C(x))
        xs.append(x)
    return xs


def fourop_loop(proj1, A2, B, C, gamma, x0, steps):
    """Shifted-kernel recursion with the A2 momentum lag:

    y_k  = P1(x_k - g*A2 x_k - g*B x_k - g*C x_k - g*(A2 y_{k-1} - A2 x_{k-1}))
    x_k+1 = y_k - g*B y_k + g*B x_k
    """
    x = np.asarray(x0, dtype=float).copy()
    xs = [x.copy()]
    lag = np.zeros_like(x)
    for _ in range(steps):
        y = proj1(x - gamma * A2(x) - gamma * B(x) - gamma * C(x) - lag)
        lag = gamma * (A2(y) - A2(x))
        x = y - gamma * B(y) + gamma * B(x)
        xs.append(x)
    return xs
