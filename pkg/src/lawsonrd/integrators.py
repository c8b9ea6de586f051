"""Lawson steps (classical and boundary-corrected), trajectories and local errors.

A step reads, for stages i = 1..s,

    K_i = e^{c_i k A} U + k sum_{j<i} a_ij e^{(c_i-c_j) k A} F_j + (boundary injections)
    U+  = e^{k A} U + k sum_i b_i e^{(1-c_i) k A} F_i + (boundary injections)

where F_j = f(t + c_j k, K_j), plus C_h g(t + c_j k) in the classical scheme.
The corrected schemes replace C_h g by injections tau^l phi_l(tau A) C_h d,
with d a boundary trace. All step functions broadcast over a leading batch
axis: ``t`` of shape (B,) and states of shape (B, N) advance B independent
initial states at once, which the restarted local-error sweep exploits.
"""

from __future__ import annotations

import enum
import warnings
from fractions import Fraction

import numpy as np

from .boundary import BoundaryTermSet, TraceHistory, bdf_time_derivative, boundary_terms
from .tableaus import ButcherTableau, classical_order

__all__ = [
    "BLOWUP_THRESHOLD",
    "BlowUpError",
    "OrderMismatchWarning",
    "SchemeKind",
    "StepWorkspace",
    "Trajectory",
    "check_compatible",
    "check_scheme",
    "global_error",
    "integrate",
    "GLOBAL_CONVENTIONS",
    "LOCAL_CONVENTIONS",
    "local_error_sweep",
    "step",
    "step_classical",
    "step_corrected2",
    "step_corrected3",
    "step_corrected4",
]

BLOWUP_THRESHOLD = 1e10
_MAX_STEPS = 10_000_000
_BATCH_ELEMENTS = 2_000_000


class SchemeKind(str, enum.Enum):
    CLASSICAL = "classical"
    CORRECTED2 = "corrected2"
    CORRECTED3 = "corrected3"
    CORRECTED4 = "corrected4"

    @property
    def order(self) -> int:
        """Local order targeted by the boundary correction (0 for classical)."""
        return {"classical": 0, "corrected2": 2, "corrected3": 3, "corrected4": 4}[self.value]

    @property
    def required_tableau_order(self) -> int:
        return {"classical": 1, "corrected2": 2, "corrected3": 2, "corrected4": 3}[self.value]


class BlowUpError(RuntimeError):
    def __init__(self, step_index: int, t: float, norm: float):
        super().__init__(f"solution blew up at step {step_index} (t={t:.6g}, |U|={norm:.3e})")
        self.step_index = step_index
        self.t = t
        self.norm = norm


class OrderMismatchWarning(UserWarning):
    pass


class StepWorkspace:
    """Per-(space, tableau, k) scratch: propagator and cached injection vectors.

    ``injection(tau, l)`` returns the (2, N) array whose rows are
    tau^l phi_l(tau A) C_h e_side, so an injection of a trace pair d is
    ``d @ injection(tau, l)``.
    """

    def __init__(self, space, tableau: ButcherTableau, k: float):
        if not k > 0:
            raise ValueError("time step must be positive")
        self.space = space
        self.tableau = tableau
        self.k = k
        self.propagator = space.propagator
        self._inj: dict = {}
        c = [Fraction(v) for v in tableau.c]
        self.c = c
        self.stage_tau = [float(ci) * k for ci in c]
        self.rest_tau = [float(1 - ci) * k for ci in c]
        self.pair_tau = [[float(c[i] - c[j]) * k for j in range(i)] for i in range(len(c))]
        self.a = tableau.A
        self.b = tableau.B

    def expo(self, tau: float, v: np.ndarray) -> np.ndarray:
        return self.propagator.apply(tau, 0, v)

    def injection(self, tau: float, l: int) -> np.ndarray:
        key = (tau, l)
        hit = self._inj.get(key)
        if hit is None:
            if tau == 0.0:
                hit = np.zeros((2, self.space.size))
            else:
                cols = self.space.boundary_columns.T
                hit = tau**l * self.propagator.apply(tau, l, cols)
            self._inj[key] = hit
        return hit

    def inject(self, tau: float, l: int, pair) -> np.ndarray:
        return np.asarray(pair) @ self.injection(tau, l)


def _propagate(ws: StepWorkspace, groups: dict) -> np.ndarray:
    """Sum of e^{tau A} v over a dict tau -> v, one propagator call per tau."""
    out = None
    for tau in sorted(groups):
        term = ws.expo(tau, groups[tau])
        out = term if out is None else out + term
    return out


def _add(groups: dict, tau: float, v) -> None:
    groups[tau] = v if tau not in groups else groups[tau] + v


def _source(problem, space, t, values, classical: bool) -> np.ndarray:
    out = problem.source(t, values, space.nodes)
    if classical:
        out = out + space.boundary_map(problem.boundary_data(t))
    return out


def _check_terms(terms, order):
    if terms is None or terms.order < order:
        raise ValueError(f"corrected step of order {order} needs boundary terms of that order")


def _lawson_step(ws: StepWorkspace, problem, t, state, scheme: SchemeKind,
                 terms: BoundaryTermSet | None) -> np.ndarray:
    k = ws.k
    s = ws.tableau.stages
    t = np.asarray(t, dtype=float)
    order = scheme.order
    classical = order == 0
    if not classical:
        _check_terms(terms, order)
    inj = ws.inject
    stages_f = []
    for i in range(s):
        ci = ws.stage_tau[i]
        groups = {ci: state}
        extra = 0.0
        if order >= 2:
            extra = inj(ci, 1, terms.du)
        if order >= 3:
            extra = extra + inj(ci, 2, terms.dAu)
        if order >= 4:
            extra = extra + inj(ci, 3, terms.dA2u)
        for j in range(i):
            aij = ws.a[i, j]
            if aij == 0.0:
                continue
            tau = ws.pair_tau[i][j]
            _add(groups, tau, k * aij * stages_f[j])
            if order == 3:
                extra = extra + k * aij * inj(tau, 1, terms.df)
            elif order == 4:
                extra = extra + k * aij * (inj(tau, 1, terms.stage_df[..., j, :])
                                           + inj(tau, 2, terms.dAf))
        stage = _propagate(ws, groups) + extra
        stages_f.append(_source(problem, ws.space, t + ci, stage, classical))

    groups = {k: state}
    extra = 0.0
    if order >= 2:
        pairs = [terms.du, terms.dAu, terms.dA2u, terms.dA3u][:order]
        for l, d in enumerate(pairs, start=1):
            extra = extra + inj(k, l, d)
    for i in range(s):
        bi = ws.b[i]
        if bi == 0.0:
            continue
        tau = ws.rest_tau[i]
        _add(groups, tau, k * bi * stages_f[i])
        if order == 2:
            extra = extra + k * bi * inj(tau, 1, terms.df)
        elif order == 3:
            extra = extra + k * bi * (inj(tau, 1, terms.stage_df[..., i, :]) + inj(tau, 2, terms.dAf))
        elif order == 4:
            extra = extra + k * bi * (inj(tau, 1, terms.composed_df[..., i, :])
                                      + inj(tau, 2, terms.stage_dAf[..., i, :])
                                      + inj(tau, 3, terms.dA2f))
    return _propagate(ws, groups) + extra


def _workspace(space, tableau, k, ws):
    if ws is not None and ws.k == k and ws.tableau is tableau and ws.space is space:
        return ws
    return StepWorkspace(space, tableau, k)


def step_classical(space, problem, tableau, t_n, state, k, workspace=None):
    ws = _workspace(space, tableau, k, workspace)
    return _lawson_step(ws, problem, t_n, state, SchemeKind.CLASSICAL, None)


def step_corrected2(space, problem, tableau, t_n, state, k, terms, workspace=None):
    ws = _workspace(space, tableau, k, workspace)
    return _lawson_step(ws, problem, t_n, state, SchemeKind.CORRECTED2, terms)


def step_corrected3(space, problem, tableau, t_n, state, k, terms, workspace=None):
    ws = _workspace(space, tableau, k, workspace)
    return _lawson_step(ws, problem, t_n, state, SchemeKind.CORRECTED3, terms)


def step_corrected4(space, problem, tableau, t_n, state, k, terms, workspace=None):
    ws = _workspace(space, tableau, k, workspace)
    return _lawson_step(ws, problem, t_n, state, SchemeKind.CORRECTED4, terms)


def step(space, problem, tableau, scheme, t_n, state, k, terms=None, workspace=None):
    scheme = SchemeKind(scheme)
    ws = _workspace(space, tableau, k, workspace)
    return _lawson_step(ws, problem, t_n, state, scheme, terms)


def check_scheme(scheme, tableau) -> None:
    """Warn when the tableau's classical order is below what the scheme assumes."""
    scheme = SchemeKind(scheme)
    p = classical_order(tableau)
    if p < scheme.required_tableau_order:
        warnings.warn(f"{scheme.value} assumes a tableau of classical order >= "
                      f"{scheme.required_tableau_order}; {tableau.name} has order {p}",
                      OrderMismatchWarning, stacklevel=3)


def check_compatible(space, problem) -> None:
    """The space's closure must match the problem's boundary operators."""
    kinds = tuple(side.kind for side in problem.sides)
    if "robin" in kinds:
        raise ValueError("no space discretization implements a Robin closure")
    if kinds != tuple(space.boundary_kinds):
        raise ValueError(f"problem conditions {kinds} do not match the space closure "
                         f"{tuple(space.boundary_kinds)}")


def _step_count(T, k):
    n = round(T / k)
    if n < 1 or abs(n * k - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not an integer multiple of k={k}")
    if n > _MAX_STEPS:
        raise ValueError(f"{n} steps exceed the limit of {_MAX_STEPS}")
    return n


class Trajectory:
    """Result of :func:`integrate`: step times and stored states."""

    def __init__(self, times, states, k):
        self.times = np.asarray(times)
        self.states = states
        self.k = k

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def steps(self) -> int:
        return len(self.times) - 1


def integrate(space, problem, tableau, scheme, k, T=None, boundary_mode="oracle",
              store="final") -> Trajectory:
    """March from P_h u(0) to T with constant step k.

    ``store`` is ``final`` (initial and final states only) or ``all``.
    Raises :class:`BlowUpError` when the state stops being finite or its max
    norm exceeds ``BLOWUP_THRESHOLD``.
    """
    scheme = SchemeKind(scheme)
    T = problem.T if T is None else T
    n_steps = _step_count(T, k)
    check_compatible(space, problem)
    check_scheme(scheme, tableau)
    ws = StepWorkspace(space, tableau, k)
    state = space.project(problem.initial)
    history = TraceHistory(k)
    history.push(0.0, state)
    times, states = [0.0], [state]
    for n in range(n_steps):
        t = n * k
        terms = None
        if scheme.order:
            udot = uddot = None
            if boundary_mode == "data" and scheme.order >= 3:
                udot = history.derivative(1)
                uddot = history.derivative(2) if scheme.order >= 4 else None
            terms = boundary_terms(problem, space, tableau, scheme.order, boundary_mode, t,
                                   state, k, udot=udot, uddot=uddot)
        state = _lawson_step(ws, problem, t, state, scheme, terms)
        norm = float(np.max(np.abs(state)))
        if not np.isfinite(norm) or norm > BLOWUP_THRESHOLD:
            raise BlowUpError(n + 1, (n + 1) * k, norm)
        history.push((n + 1) * k, state)
        if store == "all" or n == n_steps - 1:
            times.append((n + 1) * k)
            states.append(state)
    return Trajectory(times, states, k)


GLOBAL_CONVENTIONS = ("final", "max")


def global_error(space, problem, tableau, scheme, k, T=None, boundary_mode="oracle",
                 convention="final") -> float:
    """Max-norm error against P_h u(T), or the max over all t_n <= T with ``convention="max"``."""
    if convention not in GLOBAL_CONVENTIONS:
        raise ValueError(f"unknown global-error convention {convention!r}")
    T = problem.T if T is None else T
    store = "all" if convention == "max" else "final"
    traj = integrate(space, problem, tableau, scheme, k, T, boundary_mode, store=store)
    exact = problem.exact(traj.times[:, None], space.nodes)
    return float(np.max(np.abs(np.asarray(traj.states) - exact)))


LOCAL_CONVENTIONS = ("first", "max")


def local_error_sweep(space, problem, tableau, scheme, k, T=None, boundary_mode="oracle",
                      return_all=False, convention="first"):
    """Restarted local error |one step from P_h u(t_n) - P_h u(t_{n+1})|.

    ``convention="first"`` reports the step from t_0 = 0 only; ``"max"``
    reports the maximum over all steps up to T (``return_all`` then gives
    the per-step array). Steps are evaluated in batches. In data mode the
    backward differences use the projected exact solution at the previous
    three steps; the first three steps use exact time-derivative traces, as
    a trajectory would.
    """
    if convention not in LOCAL_CONVENTIONS:
        raise ValueError(f"unknown local-error convention {convention!r}")
    scheme = SchemeKind(scheme)
    T = problem.T if T is None else T
    n_steps = _step_count(T, k)
    check_compatible(space, problem)
    check_scheme(scheme, tableau)
    ws = StepWorkspace(space, tableau, k)
    nodes = space.nodes
    chunk = max(1, _BATCH_ELEMENTS // max(space.size, 1))
    if convention == "first":
        n_steps = 1
    errors = np.empty(n_steps)
    for start in range(0, n_steps, chunk):
        idx = np.arange(start, min(start + chunk, n_steps))
        t = idx * k
        state = problem.exact(t[:, None], nodes)
        terms = None
        if scheme.order:
            udot = uddot = None
            startup = idx < 3
            if boundary_mode == "data" and scheme.order >= 3:
                past = [problem.exact((idx - j)[:, None] * k, nodes) for j in range(4)]
                udot = bdf_time_derivative(past, 1, k)
                if scheme.order >= 4:
                    uddot = bdf_time_derivative(past, 2, k)
            terms = boundary_terms(problem, space, tableau, scheme.order, boundary_mode, t,
                                   state, k, udot=udot, uddot=uddot, startup=startup)
        nxt = _lawson_step(ws, problem, t, state, scheme, terms)
        exact = problem.exact((t + k)[:, None], nodes)
        errors[idx] = np.max(np.abs(nxt - exact), axis=-1)
    if not np.all(np.isfinite(errors)):
        bad = int(np.argmin(np.isfinite(errors)))
        raise BlowUpError(bad + 1, (bad + 1) * k, float("inf"))
    return errors if return_all else float(np.max(errors))
