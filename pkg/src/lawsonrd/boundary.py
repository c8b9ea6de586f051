"""Boundary traces consumed by the corrected Lawson steps.

Every trace is obtained from a truncated Taylor jet of the solution in
(t, x) at the endpoint. The jet is seeded with a handful of primary values
(u, u_x, u_t, u_tx, u_tt, u_ttx) and completed by the PDE itself,
u_xx = u_t - phi(u) - h. In ``oracle`` mode the primary values are exact;
in ``data`` mode they come from boundary data where the condition fixes
them, and otherwise from the numerical solution through one-sided
differences in space (Dirichlet endpoints) and backward differentiation in
time (Neumann/Robin endpoints, and u_t in the interior for order 4).

Arrays carry leading batch axes: ``t`` may have shape (B,) and the state
shape (B, N); every trace then has shape (B, 2) (or (B, s, 2) for stagewise
traces), the last axis indexing the endpoints x=0 and x=1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from . import jets
from .discretization import bdf_space_boundary_derivative
from .problems import exact_jet

__all__ = [
    "BoundaryTermSet",
    "MODES",
    "TraceHistory",
    "bdf_space_boundary_derivative",
    "bdf_time_derivative",
    "boundary_terms",
    "terms_order2",
    "terms_order3",
    "terms_order4",
]

MODES = ("oracle", "data")

_BDF1 = np.array([11.0, -18.0, 9.0, -2.0]) / 6.0
_BDF2 = np.array([2.0, -5.0, 4.0, -1.0])


@dataclass(frozen=True)
class BoundaryTermSet:
    """Endpoint traces for one step; entries are ``None`` when not required."""

    order: int
    du: np.ndarray
    dAu: np.ndarray
    df: np.ndarray
    dA2u: np.ndarray | None = None
    dAf: np.ndarray | None = None
    stage_df: np.ndarray | None = None
    dA3u: np.ndarray | None = None
    dA2f: np.ndarray | None = None
    stage_dAf: np.ndarray | None = None
    composed_df: np.ndarray | None = None

    def fields(self) -> dict:
        names = ("du", "dAu", "df", "dA2u", "dAf", "stage_df", "dA3u", "dA2f",
                 "stage_dAf", "composed_df")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}

    @classmethod
    def zeros(cls, order: int, stages: int, batch: tuple = ()) -> "BoundaryTermSet":
        pair = np.zeros(batch + (2,))
        staged = np.zeros(batch + (stages, 2))
        kw = {}
        if order >= 3:
            kw.update(dA2u=pair, dAf=pair, stage_df=staged)
        if order >= 4:
            kw.update(dA3u=pair, dA2f=pair, stage_dAf=staged, composed_df=staged)
        return cls(order, pair, pair, pair, **kw)


def bdf_time_derivative(history, order: int, k: float):
    """Backward-difference time derivative from the four newest samples.

    ``history`` lists samples newest first (y_n, y_{n-1}, y_{n-2}, y_{n-3}),
    either as a sequence or an array whose axis 0 runs over time. Order 1 is
    the three-step BDF formula (exact on cubics), order 2 the four-point
    backward second difference.
    """
    if order not in (1, 2):
        raise ValueError("time derivative order must be 1 or 2")
    if len(history) < 4:
        raise ValueError(f"backward differentiation needs 4 samples, got {len(history)}")
    weights = _BDF1 / k if order == 1 else _BDF2 / k**2
    return sum(w * np.asarray(history[i], dtype=float) for i, w in enumerate(weights))


class TraceHistory:
    """The four most recent states of one integration, newest first."""

    def __init__(self, k: float, depth: int = 4):
        self.k = k
        self._times: deque = deque(maxlen=depth)
        self._states: deque = deque(maxlen=depth)

    def __len__(self):
        return len(self._states)

    def push(self, t: float, state: np.ndarray) -> None:
        if self._times and not np.isclose(self._times[0] + self.k, t, rtol=0, atol=1e-9 * max(1.0, abs(t))):
            raise ValueError("history timestamps must advance by exactly one step")
        self._times.appendleft(t)
        self._states.appendleft(np.array(state, dtype=float, copy=True))

    @property
    def ready(self) -> bool:
        return len(self._states) == self._states.maxlen

    def derivative(self, order: int) -> np.ndarray | None:
        """BDF estimate of the state's time derivative, or None during startup."""
        if not self.ready:
            return None
        return bdf_time_derivative(list(self._states), order, self.k)


# -- jet assembly ---------------------------------------------------------

def _jet_shape(order: int) -> tuple[int, int]:
    return order - 1, 2 * order - 2


def _fill_pde(u: np.ndarray, forcing: np.ndarray, derivs) -> np.ndarray:
    """Complete the x-coefficients d >= 2 from u_xx = u_t - phi(u) - h."""
    mm, dd = u.shape[-2:]
    for d in range(2, dd):
        f = jets.compose(derivs, u)
        for m in range(mm):
            nxt = u[..., m + 1, d - 2] * (m + 1) if m + 1 < mm else np.nan
            u[..., m, d] = (nxt - f[..., m, d - 2] - forcing[..., m, d - 2]) / ((d - 1) * d)
    return u


def _primary(problem, space, side_index, t, mode, state, udot, uddot, order, startup):
    """Partials P[m, d] (m < order-1, d < 2) of u at one endpoint."""
    side = problem.sides[side_index]
    mm = order - 1
    batch = np.shape(t)
    p = np.full(batch + (mm, 2), np.nan)

    def exact(m, d):
        return problem.exact_partial(m, d, t, side.x) * np.ones(batch)

    def blend(estimate, m, d):
        if estimate is None:
            return exact(m, d)
        return np.where(startup, exact(m, d), estimate)

    g = [problem.boundary_data(t, m)[..., side_index] for m in range(mm)]
    if side.kind == "dirichlet":
        for m in range(mm):
            p[..., m, 0] = g[m]
        data = problem.boundary_data(t, 0)
        p[..., 0, 1] = space.boundary_slopes(state, data)[..., side_index]
        if order >= 4:
            est = None
            if udot is not None:
                est = space.boundary_slopes(udot, problem.boundary_data(t, 1))[..., side_index]
            p[..., 1, 1] = blend(est, 1, 1)
        return p
    # Neumann/Robin: value from the unknown at the endpoint, slope from the condition
    p[..., 0, 0] = space.boundary_value(state, side_index)
    if mm >= 2:
        est = None if udot is None else space.boundary_value(udot, side_index)
        p[..., 1, 0] = blend(est, 1, 0)
    if mm >= 3:
        est = None if uddot is None else space.boundary_value(uddot, side_index)
        p[..., 2, 0] = blend(est, 2, 0)
    for m in range(mm):
        p[..., m, 1] = side.solve_slope(g[m], p[..., m, 0])
    return p


def _trace(side, x, m, d):
    """alpha * d_t^m d_x^d X + beta * n * d_t^m d_x^(d+1) X at the endpoint."""
    out = 0.0
    if side.alpha:
        out = out + side.alpha * jets.partial(x, m, d)
    if side.beta:
        out = out + side.beta * side.normal * jets.partial(x, m, d + 1)
    return out


def _x_shift(row: np.ndarray, s: int) -> np.ndarray:
    """x-jet of d^s/dx^s of the function whose x-jet is ``row`` (last axis)."""
    dd = row.shape[-1]
    out = np.full(row.shape, np.nan)
    for d in range(dd - s):
        out[..., d] = row[..., d + s] * (factorial(d + s) / factorial(d))
    return out


def boundary_terms(problem, space, tableau, order: int, mode: str, t, state, k: float,
                   udot=None, uddot=None, startup=False) -> BoundaryTermSet:
    """All traces needed by the corrected scheme of the given local order.

    ``udot``/``uddot`` are backward-difference estimates of the state's time
    derivatives (data mode only); ``None`` or a true ``startup`` flag (which
    may be a per-row boolean array) selects exact values for the terms that
    would need them.
    """
    if order not in (2, 3, 4):
        raise ValueError("boundary terms exist for local orders 2, 3 and 4")
    if mode not in MODES:
        raise ValueError(f"unknown boundary mode {mode!r}; expected one of {MODES}")
    t = np.asarray(t, dtype=float)
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != space.size:
        raise ValueError("state length does not match the space")
    derivs = problem.reaction.lenient
    forcing = problem.forcing
    mm, dd = _jet_shape(order)
    s = tableau.stages
    cs = [Fraction(c) for c in tableau.c]

    per_side = {name: [] for name in ("du", "dAu", "df", "dA2u", "dAf", "stage_df", "dA3u",
                                      "dA2f", "stage_dAf", "composed_df")}
    for idx, side in enumerate(problem.sides):
        hjet = forcing.jet(t, side.x, (mm - 1, dd - 1))
        if mode == "oracle":
            u = exact_jet(problem.solution, t, side.x, (mm, dd))
        else:
            prim = _primary(problem, space, idx, t, mode, state, udot, uddot, order, startup)
            u = np.full(np.shape(t) + (mm, dd), np.nan)
            u[..., :, :2] = jets.from_partials(prim)
            u = _fill_pde(u, hjet, derivs)
        fh = jets.compose(derivs, u) + hjet
        g = [problem.boundary_data(t, m)[..., idx] for m in range(order)]

        df = _trace(side, fh, 0, 0)
        per_side["du"].append(g[0])
        per_side["df"].append(df)
        per_side["dAu"].append(g[1] - df)
        if order < 3:
            continue
        dAf = _trace(side, fh, 0, 2)
        per_side["dAf"].append(dAf)
        per_side["dA2u"].append(g[2] - _trace(side, fh, 1, 0) - dAf)

        # f(t_n + c_i k, u + c_i k u_t) as x-jets
        fw = []
        for ci in cs:
            tau = float(ci) * k
            w = u[..., :1, :] + tau * u[..., 1:2, :]
            hx = forcing.jet(t + tau, side.x, (0, dd - 1))
            fw.append(jets.compose(derivs, w) + hx)
        per_side["stage_df"].append(np.stack([_trace(side, f, 0, 0) for f in fw], axis=-1))
        if order < 4:
            continue
        dA2f = _trace(side, fh, 0, 4)
        per_side["dA2f"].append(dA2f)
        per_side["dA3u"].append(g[3] - _trace(side, fh, 2, 0) - _trace(side, fh, 1, 2) - dA2f)
        per_side["stage_dAf"].append(np.stack([_trace(side, f, 0, 2) for f in fw], axis=-1))

        au = _x_shift(u[..., 0, :], 2)
        a2u = _x_shift(u[..., 0, :], 4)
        af = _x_shift(fh[..., 0, :], 2)
        composed = []
        for i, ci in enumerate(cs):
            tau = float(ci) * k
            z = u[..., 0, :] + tau * au + 0.5 * tau**2 * a2u
            for j in range(i):
                aij = float(tableau.a[i][j])
                if aij:
                    z = z + k * aij * (fw[j][..., 0, :] + float(ci - cs[j]) * k * af)
            hx = forcing.jet(t + tau, side.x, (0, dd - 1))
            fz = jets.compose(derivs, z[..., None, :]) + hx
            composed.append(_trace(side, fz, 0, 0))
        per_side["composed_df"].append(np.stack(composed, axis=-1))

    out = {name: np.stack(vals, axis=-1) for name, vals in per_side.items() if vals}
    return BoundaryTermSet(order, **out)


def terms_order2(problem, mode, t, state, space, tableau=None, k=0.0):
    from .tableaus import builtin

    return boundary_terms(problem, space, tableau or builtin("rk2"), 2, mode, t, state, k)


def terms_order3(problem, mode, t, state, history, space, tableau, k=None):
    k = history.k if k is None and history is not None else k
    udot = None if history is None else history.derivative(1)
    return boundary_terms(problem, space, tableau, 3, mode, t, state, k, udot=udot)


def terms_order4(problem, mode, t, state, history, space, tableau, k=None):
    k = history.k if k is None and history is not None else k
    udot = uddot = None
    if history is not None:
        udot, uddot = history.derivative(1), history.derivative(2)
    return boundary_terms(problem, space, tableau, 4, mode, t, state, k, udot=udot, uddot=uddot)
