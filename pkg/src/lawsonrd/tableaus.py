"""Explicit Butcher tableaus underlying the Lawson schemes."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr

import numpy as np

__all__ = ["ButcherTableau", "TABLEAUS", "builtin", "classical_order"]


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    name: str
    a: tuple[tuple[Fr, ...], ...]
    b: tuple[Fr, ...]
    c: tuple[Fr, ...]

    def __post_init__(self):
        s = len(self.b)
        if len(self.c) != s or len(self.a) != s or any(len(row) != s for row in self.a):
            raise ValueError("inconsistent tableau dimensions")
        if any(self.a[i][j] != 0 for i in range(s) for j in range(i, s)):
            raise ValueError("tableau must be explicit (strictly lower triangular)")
        # floats are rendered once from the exact entries
        object.__setattr__(self, "A", np.array([[float(v) for v in row] for row in self.a]))
        object.__setattr__(self, "B", np.array([float(v) for v in self.b]))
        object.__setattr__(self, "C", np.array([float(v) for v in self.c]))

    @property
    def stages(self) -> int:
        return len(self.b)

    def row_sum_defects(self) -> list:
        """sum_i b_i - 1 and sum_j a_ij - c_i, exact when entries are rational."""
        out = [sum(self.b) - 1]
        out += [sum(row) - ci for row, ci in zip(self.a, self.c)]
        return out

    def satisfies_row_sums(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.row_sum_defects())


def _tab(name, a, b, c):
    s = len(b)
    rows = tuple(tuple(Fr(a[i][j]) if j < len(a[i]) else Fr(0) for j in range(s)) for i in range(s))
    return ButcherTableau(name, rows, tuple(Fr(v) for v in b), tuple(Fr(v) for v in c))


TABLEAUS = {
    "rk2": _tab("rk2", [[], [1]], [Fr(1, 2), Fr(1, 2)], [0, 1]),
    "heun3": _tab("heun3", [[], [Fr(1, 3)], [0, Fr(2, 3)]], [Fr(1, 4), 0, Fr(3, 4)],
                  [0, Fr(1, 3), Fr(2, 3)]),
    "rk4": _tab("rk4", [[], [Fr(1, 3)], [Fr(-1, 3), 1], [1, -1, 1]],
                [Fr(1, 8), Fr(3, 8), Fr(3, 8), Fr(1, 8)], [0, Fr(1, 3), Fr(2, 3), 1]),
}


def builtin(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; choose from {sorted(TABLEAUS)}") from None


def classical_order(tab: ButcherTableau, tol: float = 1e-12) -> int:
    """Largest p <= 4 for which all order conditions up to p hold."""
    if not tab.satisfies_row_sums(tol):
        raise ValueError(f"tableau {tab.name} violates the row-sum conditions")
    a, b, c = tab.A, tab.B, tab.C
    ac = a @ c
    conditions = {
        1: [b.sum() - 1.0],
        2: [b @ c - 0.5],
        3: [b @ c**2 - 1.0 / 3.0, b @ ac - 1.0 / 6.0],
        4: [b @ c**3 - 0.25, (b * c) @ ac - 0.125, b @ (a @ c**2) - 1.0 / 12.0,
            b @ (a @ ac) - 1.0 / 24.0],
    }
    order = 0
    for p in range(1, 5):
        if all(abs(v) <= tol for v in conditions[p]):
            order = p
        else:
            break
    return order
