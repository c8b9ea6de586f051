"""Truncated bivariate Taylor arithmetic in (t, x).

A jet is an array of shape (..., M, D) whose entry [..., m, d] is the
Taylor coefficient d_t^m d_x^d u / (m! d!) at a fixed point. Leading axes
are batch axes. Unknown coefficients may be NaN; products propagate them
only into coefficients that genuinely depend on them.
"""

from __future__ import annotations

from math import factorial

import numpy as np

__all__ = ["compose", "from_partials", "multiply", "partial", "to_partials"]


def _factorial_grid(m: int, d: int) -> np.ndarray:
    fm = np.array([factorial(i) for i in range(m)], dtype=float)
    fd = np.array([factorial(i) for i in range(d)], dtype=float)
    return np.outer(fm, fd)


def from_partials(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p / _factorial_grid(*p.shape[-2:])


def to_partials(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return c * _factorial_grid(*c.shape[-2:])


def partial(c: np.ndarray, m: int, d: int) -> np.ndarray:
    """d_t^m d_x^d of the jet at its base point."""
    return c[..., m, d] * (factorial(m) * factorial(d))


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of two jets with identical trailing shape."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    mm, dd = a.shape[-2:]
    out = np.zeros(a.shape)
    for i in range(mm):
        for j in range(dd):
            coef = a[..., i, j]
            if not np.any(coef):
                continue
            out[..., i:, j:] += coef[..., None, None] * b[..., : mm - i, : dd - j]
    return out


def compose(derivs, c: np.ndarray) -> np.ndarray:
    """Jet of phi(u) given the jet of u.

    ``derivs(p, u0)`` must return phi^(p)(u0); it is queried for
    p = 0 .. (M-1)+(D-1). Terms with a zero derivative are skipped, so
    polynomial reactions never touch unknown coefficients needlessly.
    """
    c = np.asarray(c, dtype=float)
    mm, dd = c.shape[-2:]
    base = c[..., 0, 0]
    delta = c.copy()
    delta[..., 0, 0] = 0.0
    out = np.zeros(c.shape)
    out[..., 0, 0] = derivs(0, base)
    coefs = [np.asarray(derivs(p, base), dtype=float) / factorial(p)
             for p in range(1, mm + dd - 1)]
    live = [p for p, coef in enumerate(coefs, start=1) if np.any(coef)]
    power = None
    for p in range(1, (live[-1] if live else 0) + 1):
        power = delta.copy() if power is None else multiply(power, delta)
        coef = coefs[p - 1]
        if p in live:
            out = out + coef[..., None, None] * power
    return out
