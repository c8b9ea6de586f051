from fractions import Fraction as Fr

import numpy as np
import pytest

from lawsonrd.tableaus import TABLEAUS, ButcherTableau, builtin, classical_order


def test_rk2():
    t = builtin("rk2")
    assert t.c == (0, 1)
    assert t.a[1][0] == 1
    assert t.b == (Fr(1, 2), Fr(1, 2))


def test_heun3():
    t = builtin("heun3")
    assert t.c == (0, Fr(1, 3), Fr(2, 3))
    assert t.a[1][0] == Fr(1, 3) and t.a[2][1] == Fr(2, 3) and t.a[2][0] == 0
    assert t.b == (Fr(1, 4), 0, Fr(3, 4))


def test_rk4():
    t = builtin("rk4")
    assert t.c == (0, Fr(1, 3), Fr(2, 3), 1)
    assert t.a[2][:2] == (Fr(-1, 3), 1)
    assert t.a[3][:3] == (1, -1, 1)
    assert t.b == (Fr(1, 8), Fr(3, 8), Fr(3, 8), Fr(1, 8))


@pytest.mark.parametrize("name,order", [("rk2", 2), ("heun3", 3), ("rk4", 4)])
def test_classical_order(name, order):
    assert classical_order(builtin(name)) == order


@pytest.mark.parametrize("name", sorted(TABLEAUS))
def test_row_sums_exact(name):
    t = TABLEAUS[name]
    assert all(v == 0 for v in t.row_sum_defects())
    assert np.all(np.diff(t.C) > 0)


def test_rk4_order_conditions_exact():
    t = builtin("rk4")
    b, c, a = t.b, t.c, t.a
    s = t.stages
    ac = [sum(a[i][j] * c[j] for j in range(s)) for i in range(s)]
    assert sum(b[i] * c[i] ** 3 for i in range(s)) == Fr(1, 4)
    assert sum(b[i] * c[i] * ac[i] for i in range(s)) == Fr(1, 8)
    assert sum(b[i] * a[i][j] * c[j] ** 2 for i in range(s) for j in range(s)) == Fr(1, 12)
    assert sum(b[i] * a[i][j] * ac[j] for i in range(s) for j in range(s)) == Fr(1, 24)


def test_unknown_name():
    with pytest.raises(ValueError):
        builtin("dopri5")


def test_invalid_tableaus():
    with pytest.raises(ValueError):
        ButcherTableau("implicit", ((Fr(1),),), (Fr(1),), (Fr(1),))
    with pytest.raises(ValueError):
        ButcherTableau("ragged", ((Fr(0), Fr(0)),), (Fr(1),), (Fr(0),))
    bad = ButcherTableau("bad", ((Fr(0), Fr(0)), (Fr(1), Fr(0))), (Fr(1, 2), Fr(1, 2)),
                         (Fr(0), Fr(1, 2)))
    with pytest.raises(ValueError):
        classical_order(bad)


def test_euler_is_first_order():
    euler = ButcherTableau("euler", ((Fr(0),),), (Fr(1),), (Fr(0),))
    assert classical_order(euler) == 1
