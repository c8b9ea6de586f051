"""Manufactured reaction-diffusion problems u_t = u_xx + phi(u) + h(t, x).

The forcing ``h`` and boundary data ``g`` are derived from a closed-form
exact solution, so every partial derivative the boundary-corrected schemes
ask for is available exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, pi
from typing import Callable, Mapping

import numpy as np

from . import jets

__all__ = [
    "BoundarySide",
    "CosineSolution",
    "DerivativeBundle",
    "ForcingSpec",
    "ManufacturedProblem",
    "PROBLEMS",
    "ReactionSpec",
    "VanishingSolution",
    "ZeroSolution",
    "get_problem",
    "manufacture",
    "semidiscrete_rhs",
]


class CosineSolution:
    """u = cos(x + t + shift)."""

    def __init__(self, shift: float = 0.0):
        self.shift = shift

    def partial(self, m: int, d: int, t, x):
        return np.cos(np.add(x, t) + self.shift + (m + d) * pi / 2)


class VanishingSolution:
    """u = x (x - 1) cos(x + t), zero at both ends."""

    def partial(self, m: int, d: int, t, x):
        x = np.asarray(x, dtype=float)
        poly = (x * (x - 1.0), 2.0 * x - 1.0, 2.0 * np.ones_like(x))
        arg = np.add(x, t)
        out = 0.0
        for r in range(min(d, 2) + 1):
            out = out + comb(d, r) * poly[r] * np.cos(arg + (m + d - r) * pi / 2)
        return out


class ZeroSolution:
    def partial(self, m: int, d: int, t, x):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)


class DerivativeBundle:
    """Exact solution given as explicit partials keyed by (t-order, x-order)."""

    REQUIRED = ((0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1))

    def __init__(self, partials: Mapping[tuple[int, int], Callable]):
        missing = [key for key in self.REQUIRED if key not in partials]
        if missing:
            raise ValueError(f"derivative bundle lacks partials {missing}")
        self._partials = dict(partials)

    def partial(self, m: int, d: int, t, x):
        try:
            fn = self._partials[(m, d)]
        except KeyError:
            raise ValueError(f"derivative bundle lacks partial d_t^{m} d_x^{d}") from None
        return fn(t, x)


@dataclass(frozen=True)
class ReactionSpec:
    """phi and its derivatives; ``degree`` marks polynomials (higher derivatives vanish)."""

    derivatives: tuple[Callable, ...]
    degree: int | None = None
    name: str = "custom"

    def derivative(self, p: int, u, strict: bool = True):
        """phi^(p)(u); unsupplied orders raise, or give NaN when ``strict`` is off."""
        if p < len(self.derivatives):
            return self.derivatives[p](u)
        if self.degree is not None and p > self.degree:
            return np.zeros(np.shape(u))
        if not strict:
            return np.full(np.shape(u), np.nan)
        raise ValueError(f"reaction derivative of order {p} not supplied")

    def lenient(self, p: int, u):
        return self.derivative(p, u, strict=False)

    def __call__(self, u):
        return self.derivatives[0](u)

    @classmethod
    def quadratic(cls) -> "ReactionSpec":
        return cls((lambda u: u * u, lambda u: 2.0 * u, lambda u: 2.0 * np.ones(np.shape(u))),
                   degree=2, name="u^2")

    @classmethod
    def zero(cls) -> "ReactionSpec":
        return cls((lambda u: np.zeros(np.shape(u)),), degree=0, name="0")


@dataclass(frozen=True)
class BoundarySide:
    """Boundary operator alpha*u + beta*du/dn at one endpoint (position 0 or 1)."""

    kind: str
    position: int
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind != "dirichlet" and self.beta == 0.0:
            raise ValueError("Neumann/Robin conditions need beta != 0")

    @property
    def x(self) -> float:
        return float(self.position)

    @property
    def normal(self) -> float:
        return 1.0 if self.position else -1.0

    def trace(self, value, slope):
        """alpha*value + beta*(outward normal derivative), from value and d/dx."""
        out = 0.0
        if self.alpha:
            out = out + self.alpha * np.asarray(value)
        if self.beta:
            out = out + self.beta * self.normal * np.asarray(slope)
        return out

    def solve_slope(self, data, value):
        """d/dx at the endpoint from the boundary condition and the value."""
        rest = np.asarray(data) - (self.alpha * np.asarray(value) if self.alpha else 0.0)
        return rest / (self.beta * self.normal)

    @classmethod
    def dirichlet(cls, position):
        return cls("dirichlet", position, 1.0, 0.0)

    @classmethod
    def neumann(cls, position):
        return cls("neumann", position, 0.0, 1.0)


class ForcingSpec:
    """h(t, x) = u_t - u_xx - phi(u) with all partials assembled from the solution."""

    def __init__(self, solution, reaction: ReactionSpec):
        self.solution = solution
        self.reaction = reaction

    def __call__(self, t, x):
        s = self.solution
        return s.partial(1, 0, t, x) - s.partial(0, 2, t, x) - self.reaction(s.partial(0, 0, t, x))

    def jet(self, t, x, orders: tuple[int, int]) -> np.ndarray:
        """Taylor jet of h at (t, x) holding coefficients up to ``orders`` (t, x)."""
        mm, dd = orders[0] + 1, orders[1] + 1
        u = exact_jet(self.solution, t, x, (mm + 1, dd + 2))
        ut = u[..., 1:, :dd] * np.arange(1, mm + 1)[:, None]
        uxx = u[..., :mm, 2:] * (np.arange(1, dd + 1) * np.arange(2, dd + 2))[None, :]
        return ut - uxx - jets.compose(self.reaction.lenient, u[..., :mm, :dd])

    def partial(self, m: int, d: int, t, x):
        return jets.partial(self.jet(t, x, (m, d)), m, d)

    # named accessors for the partials used by the boundary formulas
    def h_t(self, t, x):
        return self.partial(1, 0, t, x)

    def h_tt(self, t, x):
        return self.partial(2, 0, t, x)

    def h_x(self, t, x):
        return self.partial(0, 1, t, x)

    def h_xx(self, t, x):
        return self.partial(0, 2, t, x)

    def h_xxx(self, t, x):
        return self.partial(0, 3, t, x)

    def h_xxxx(self, t, x):
        return self.partial(0, 4, t, x)

    def h_txx(self, t, x):
        return self.partial(1, 2, t, x)


def exact_jet(solution, t, x, shape: tuple[int, int]) -> np.ndarray:
    """Taylor jet (shape (..., M, D)) of the exact solution at (t, x)."""
    mm, dd = shape
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    batch = np.broadcast(t, x).shape
    parts = np.empty(batch + (mm, dd))
    for m in range(mm):
        for d in range(dd):
            parts[..., m, d] = solution.partial(m, d, t, x)
    return jets.from_partials(parts)


@dataclass(frozen=True, eq=False)
class ManufacturedProblem:
    name: str
    solution: object
    reaction: ReactionSpec
    sides: tuple[BoundarySide, BoundarySide]
    T: float = 1.0

    @property
    def forcing(self) -> ForcingSpec:
        return ForcingSpec(self.solution, self.reaction)

    @property
    def boundary_kinds(self) -> tuple[str, str]:
        return tuple("dirichlet" if s.kind == "dirichlet" else "neumann" for s in self.sides)

    def exact(self, t, x):
        return self.solution.partial(0, 0, t, x)

    def initial(self, x):
        return self.exact(0.0, x)

    def exact_partial(self, m, d, t, x):
        return self.solution.partial(m, d, t, x)

    def boundary_data(self, t, order: int = 0) -> np.ndarray:
        """d^order/dt^order of (g_0, g_1); shape t.shape + (2,)."""
        out = []
        for side in self.sides:
            value = self.solution.partial(order, 0, t, side.x) if side.alpha else 0.0
            slope = self.solution.partial(order, 1, t, side.x) if side.beta else 0.0
            out.append(side.trace(value, slope) * np.ones(np.shape(t)))
        return np.stack(out, axis=-1)

    def source(self, t, values, nodes) -> np.ndarray:
        """f(t, U) = phi(U) + h(t, nodes), applied nodewise."""
        t = np.asarray(t, dtype=float)[..., None]
        return self.reaction(values) + self.forcing(t, nodes)


def semidiscrete_rhs(problem: ManufacturedProblem, space, t, values) -> np.ndarray:
    """A_h0 U + C_h g(t) + f(t, U)."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != space.size:
        raise ValueError("state length does not match the space")
    return (values @ space.matrix.T + space.boundary_map(problem.boundary_data(t))
            + problem.source(t, values, space.nodes))


def manufacture(solution, reaction: ReactionSpec, bc_kind: str = "dirichlet", *,
                name: str = "custom", alpha: float = 1.0, beta: float = 1.0,
                T: float = 1.0) -> ManufacturedProblem:
    """Attach forcing and boundary data derived from ``solution``.

    ``bc_kind`` is ``dirichlet`` (both ends), ``mixed`` (Dirichlet at x=0,
    Neumann at x=1) or ``robin`` (Dirichlet at x=0, alpha*u + beta*u_x at x=1).
    """
    if isinstance(solution, Mapping):
        solution = DerivativeBundle(solution)
    left = BoundarySide.dirichlet(0)
    if bc_kind == "dirichlet":
        right = BoundarySide.dirichlet(1)
    elif bc_kind == "mixed":
        right = BoundarySide.neumann(1)
    elif bc_kind == "robin":
        right = BoundarySide("robin", 1, alpha, beta)
    else:
        raise ValueError(f"unknown boundary kind {bc_kind!r}")
    return ManufacturedProblem(name, solution, reaction, (left, right), T)


PROBLEMS = {
    "dirichlet-vanishing": lambda: manufacture(VanishingSolution(), ReactionSpec.quadratic(),
                                               "dirichlet", name="dirichlet-vanishing"),
    "dirichlet-nonvanishing": lambda: manufacture(CosineSolution(), ReactionSpec.quadratic(),
                                                  "dirichlet", name="dirichlet-nonvanishing"),
    "mixed-nonvanishing": lambda: manufacture(CosineSolution(), ReactionSpec.quadratic(),
                                              "mixed", name="mixed-nonvanishing"),
}


def get_problem(name: str) -> ManufacturedProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
