"""Semidiscrete operators (A_h0, C_h) on [0, 1].

Three spaces are available: second-order finite differences with Dirichlet
data at both ends, finite differences with Dirichlet data at x=0 and
Neumann data at x=1, and Chebyshev-Gauss-Lobatto collocation with Dirichlet
data at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .phi import LinearPropagator

__all__ = [
    "DiscreteSpace",
    "Grid1D",
    "build_collocation",
    "build_fd_dirichlet",
    "build_fd_mixed",
    "build_space",
    "chebyshev_lobatto_nodes",
    "consistency_measure",
    "differentiation_matrix",
    "elliptic_projection",
]

SPACE_KINDS = ("fd-dirichlet", "fd-mixed", "collocation")


@dataclass(frozen=True)
class Grid1D:
    """Unknown-carrying nodes of a grid on [0, 1].

    ``all_nodes`` includes both endpoints; ``unknown_mask`` flags the entries
    of ``all_nodes`` that are solution unknowns.
    """

    all_nodes: np.ndarray
    unknown_mask: np.ndarray
    spacing: float

    def __post_init__(self):
        x = self.all_nodes
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must increase strictly from 0 to 1")

    @property
    def nodes(self) -> np.ndarray:
        return self.all_nodes[self.unknown_mask]

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.unknown_mask))


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """The pair (A_h0, C_h) together with the nodal projection P_h.

    ``boundary_columns[:, 0]`` and ``boundary_columns[:, 1]`` are the images
    of unit data at x=0 and x=1 under C_h.
    """

    kind: str
    grid: Grid1D
    matrix: np.ndarray
    boundary_columns: np.ndarray
    boundary_kinds: tuple[str, str]
    gamma: float = 1.0
    _diff: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def h(self) -> float:
        return self.grid.spacing

    def boundary_map(self, data) -> np.ndarray:
        """C_h applied to boundary data of shape (..., 2)."""
        data = np.asarray(data, dtype=float)
        return data[..., :1] * self.boundary_columns[:, 0] + data[..., 1:2] * self.boundary_columns[:, 1]

    def project(self, func) -> np.ndarray:
        """P_h: nodal values of ``func`` at the unknown nodes."""
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.size)

    def boundary_value(self, values: np.ndarray, side: int) -> np.ndarray:
        """Numerical trace at an endpoint that carries an unknown."""
        if self.grid.unknown_mask[-1 if side else 0]:
            return values[..., -1 if side else 0]
        raise ValueError(f"endpoint {side} carries no unknown")

    @cached_property
    def propagator(self) -> LinearPropagator:
        if self.kind == "fd-dirichlet":
            return LinearPropagator.sine(self.matrix, self.h)
        if self.kind == "fd-mixed":
            return LinearPropagator.spectral(self.matrix, check=False)
        return LinearPropagator.dense(self.matrix)

    def boundary_slopes(self, values: np.ndarray, data) -> np.ndarray:
        """One-sided estimates of u_x at the Dirichlet endpoints.

        ``values`` are nodal values at the unknowns (leading batch axes
        allowed) and ``data`` the exact Dirichlet values, shape (..., 2).
        Finite differences use the three-point second-order formula with the
        two nearest interior values; collocation differentiates the global
        interpolant. Entries for non-Dirichlet endpoints are NaN.
        """
        values = np.asarray(values, dtype=float)
        data = np.asarray(data, dtype=float)
        out = np.full(values.shape[:-1] + (2,), np.nan)
        if self.kind == "collocation":
            full = np.concatenate([data[..., :1], values, data[..., 1:2]], axis=-1)
            out[..., 0] = full @ self._diff[0]
            out[..., 1] = full @ self._diff[-1]
            return out
        h = self.h
        if self.boundary_kinds[0] == "dirichlet":
            out[..., 0] = bdf_space_boundary_derivative(data[..., 0], values[..., 0], values[..., 1], h)
        if self.boundary_kinds[1] == "dirichlet":
            out[..., 1] = bdf_space_boundary_derivative(data[..., 1], values[..., -1], values[..., -2], -h)
        return out


def bdf_space_boundary_derivative(boundary_value, first, second, h):
    """Three-point one-sided derivative at an endpoint.

    ``first`` and ``second`` are the values at distances ``h`` and ``2h``
    from the endpoint; ``h`` is signed (negative at the right end) so the
    result is always d/dx. Exact for quadratics.
    """
    return -(3.0 * np.asarray(boundary_value) - 4.0 * np.asarray(first) + np.asarray(second)) / (2.0 * h)


def build_fd_dirichlet(n: int) -> DiscreteSpace:
    if n < 2:
        raise ValueError("need at least two interior nodes")
    h = 1.0 / (n + 1)
    x = np.linspace(0.0, 1.0, n + 2)
    mask = np.ones(n + 2, dtype=bool)
    mask[[0, -1]] = False
    a = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    cols = np.zeros((n, 2))
    cols[0, 0] = 1.0 / h**2
    cols[-1, 1] = 1.0 / h**2
    return DiscreteSpace("fd-dirichlet", Grid1D(x, mask, h), a, cols, ("dirichlet", "dirichlet"))


def build_fd_mixed(n: int) -> DiscreteSpace:
    """Dirichlet at x=0, Neumann at x=1; the node x=1 is the last unknown."""
    if n < 2:
        raise ValueError("need at least two unknowns")
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    mask = np.ones(n + 1, dtype=bool)
    mask[0] = False
    a = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    a[-1, -2] = 2.0
    a /= h**2
    cols = np.zeros((n, 2))
    cols[0, 0] = 1.0 / h**2
    cols[-1, 1] = 2.0 / h
    return DiscreteSpace("fd-mixed", Grid1D(x, mask, h), a, cols, ("dirichlet", "neumann"))


def chebyshev_lobatto_nodes(count: int) -> np.ndarray:
    """Gauss-Lobatto Chebyshev points mapped to [0, 1], increasing."""
    j = np.arange(count)
    x = 0.5 * (1.0 - np.cos(np.pi * j / (count - 1)))
    x[0], x[-1] = 0.0, 1.0
    # symmetrise to kill rounding asymmetry
    return 0.5 * (x + (1.0 - x[::-1]))


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """Barycentric first-derivative matrix of the interpolant on ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def build_collocation(node_count: int) -> DiscreteSpace:
    if node_count < 4:
        raise ValueError("collocation needs at least four nodes")
    x = chebyshev_lobatto_nodes(node_count)
    d = differentiation_matrix(x)
    d2 = d @ d
    mask = np.ones(node_count, dtype=bool)
    mask[[0, -1]] = False
    a = d2[1:-1, 1:-1].copy()
    cols = d2[1:-1][:, [0, -1]].copy()
    spacing = float(np.max(np.diff(x)))
    return DiscreteSpace("collocation", Grid1D(x, mask, spacing), a, cols,
                         ("dirichlet", "dirichlet"), _diff=d)


def build_space(kind: str, *, h: float | None = None, nodes: int | None = None) -> DiscreteSpace:
    """Build a space from a kind tag and either a spacing or a node count."""
    if kind == "fd-dirichlet":
        return build_fd_dirichlet(_count_from_spacing(h) - 1)
    if kind == "fd-mixed":
        return build_fd_mixed(_count_from_spacing(h))
    if kind == "collocation":
        if nodes is None:
            raise ValueError("collocation needs a node count")
        return build_collocation(nodes)
    raise ValueError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}")


def _count_from_spacing(h):
    if h is None or not h > 0:
        raise ValueError("finite-difference spaces need a positive spacing h")
    n = round(1.0 / h)
    if abs(n * h - 1.0) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h={h}")
    return n


def elliptic_projection(space: DiscreteSpace, boundary_trace, au_samples) -> np.ndarray:
    """Solve A_h0 R + C_h du = P_h(Au) for R."""
    rhs = np.asarray(au_samples, dtype=float) - space.boundary_map(boundary_trace)
    try:
        return scipy.linalg.solve(space.matrix, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("singular operator in elliptic projection") from exc


def consistency_measure(space: DiscreteSpace, u, au, boundary_trace) -> tuple[float, float]:
    """Return (||A_h0 (P_h u - R_h u)||, ||P_h u - R_h u||) in the max norm."""
    pu = space.project(u)
    ru = elliptic_projection(space, boundary_trace, space.project(au))
    gap = pu - ru
    return float(np.max(np.abs(space.matrix @ gap))), float(np.max(np.abs(gap)))
