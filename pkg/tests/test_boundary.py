import numpy as np
import pytest

from lawsonrd.boundary import (BoundaryTermSet, TraceHistory, bdf_space_boundary_derivative,
                               bdf_time_derivative, boundary_terms, terms_order2, terms_order3,
                               terms_order4)
from lawsonrd.discretization import build_collocation, build_space, elliptic_projection
from lawsonrd.problems import (CosineSolution, ReactionSpec, ZeroSolution, get_problem,
                               manufacture)
from lawsonrd.tableaus import builtin

RK4 = builtin("rk4")


def slope(xs, ys):
    return np.polyfit(np.log(xs), np.log(ys), 1)[0]


def exact_state(p, space, t):
    return space.project(lambda x: p.exact(t, x))


def test_dirichlet_df_from_data():
    p = get_problem("dirichlet-nonvanishing")
    space = build_space("fd-dirichlet", h=0.01)
    for t in (0.0, 0.37):
        terms = terms_order2(p, "data", t, exact_state(p, space, t), space)
        assert terms.df[1] == pytest.approx(np.cos(1 + t) ** 2 + p.forcing(t, 1.0), rel=1e-14)
        assert terms.du[0] == pytest.approx(np.cos(t))


def zero_problem(kind="dirichlet"):
    return manufacture(ZeroSolution(), ReactionSpec.quadratic(), kind)


@pytest.mark.parametrize("mode", ["oracle", "data"])
@pytest.mark.parametrize("order", [2, 3, 4])
def test_zero_data_gives_zero_terms(mode, order):
    p = zero_problem()
    space = build_space("fd-dirichlet", h=0.05)
    u = np.zeros(space.size)
    terms = boundary_terms(p, space, RK4, order, mode, 0.3, u, 0.1, udot=u, uddot=u)
    for name, value in terms.fields().items():
        assert np.all(value == 0), name


def test_zero_data_mixed_all_terms_zero():
    p = zero_problem("mixed")
    space = build_space("fd-mixed", h=0.05)
    u = np.zeros(space.size)
    terms = boundary_terms(p, space, RK4, 4, "data", 0.3, u, 0.1, udot=u, uddot=u)
    assert all(np.all(v == 0) for v in terms.fields().values())


@pytest.mark.parametrize("name,kind", [("dirichlet-nonvanishing", "fd-dirichlet"),
                                       ("dirichlet-vanishing", "fd-dirichlet"),
                                       ("dirichlet-nonvanishing", "collocation")])
@pytest.mark.parametrize("mode", ["oracle", "data"])
def test_dirichlet_identity(name, kind, mode):
    p = get_problem(name)
    space = build_space(kind, h=0.02, nodes=13)
    t = np.array([0.0, 0.25, 0.8])
    state = p.exact(t[:, None], space.nodes) + 1e-3
    udot = p.exact_partial(1, 0, t[:, None], space.nodes)
    terms = boundary_terms(p, space, RK4, 4, mode, t, state, 0.05, udot=udot, uddot=udot)
    gdot = p.boundary_data(t, 1)
    assert np.max(np.abs(terms.dAu + terms.df - gdot)) <= 1e-14


def test_mixed_data_df_against_oracle_over_h():
    p = get_problem("mixed-nonvanishing")
    hs = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
    errs = []
    for h in hs:
        space = build_space("fd-mixed", h=h)
        t = 0.5
        au = space.project(lambda x: p.exact_partial(0, 2, t, x))
        trace = [p.exact(t, 0.0), p.exact_partial(0, 1, t, 1.0)]
        state = elliptic_projection(space, trace, au)
        data = terms_order2(p, "data", t, state, space)
        oracle = terms_order2(p, "oracle", t, state, space)
        errs.append(np.max(np.abs(data.df - oracle.df)))
    assert slope(hs, errs) == pytest.approx(2.0, abs=0.15)


def test_dirichlet_slope_error_order_two():
    p = get_problem("dirichlet-nonvanishing")
    hs = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
    errs = []
    for h in hs:
        space = build_space("fd-dirichlet", h=h)
        s = space.boundary_slopes(exact_state(p, space, 0.2), p.boundary_data(0.2))
        errs.append(abs(s[0] - p.exact_partial(0, 1, 0.2, 0.0)))
    assert slope(hs, errs) == pytest.approx(2.0, abs=0.1)


def test_oracle_dAf_closed_form():
    p = get_problem("dirichlet-nonvanishing")
    space = build_space("fd-dirichlet", h=0.1)
    t = 0.6
    terms = terms_order3(p, "oracle", t, exact_state(p, space, t), None, space, builtin("rk2"), k=0.1)
    for idx, x in enumerate((0.0, 1.0)):
        u, ux, uxx = np.cos(x + t), -np.sin(x + t), -np.cos(x + t)
        closed = 2 * ux**2 + 2 * u * uxx + p.forcing.h_xx(t, x)
        assert terms.dAf[idx] == pytest.approx(closed, abs=1e-9)


def test_oracle_dA3u_closed_form():
    p = get_problem("dirichlet-nonvanishing")
    h = p.forcing
    space = build_space("fd-dirichlet", h=0.1)
    t = 0.45
    terms = terms_order4(p, "oracle", t, exact_state(p, space, t), None, space, RK4, k=0.1)
    for idx, x in enumerate((0.0, 1.0)):
        a = x + t
        u, ud, udd, uddd = np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)
        ux, udx = -np.sin(a), -np.cos(a)
        uxx = ud - u**2 - h(t, x)
        udxx = udd - 2 * u * ud - h.h_t(t, x)
        uxxx = udx - 2 * u * ux - h.h_x(t, x)
        uxxxx = udd - 2 * u * ud - h.h_t(t, x) - 2 * ux**2 - 2 * u * uxx - h.h_xx(t, x)
        a_ft = 2 * uxx * ud + 4 * ux * udx + 2 * u * udxx + h.h_txx(t, x)
        a2f = 6 * uxx**2 + 8 * ux * uxxx + 2 * u * uxxxx + h.h_xxxx(t, x)
        dA3u = uddd - (h.h_tt(t, x) + 2 * ud**2 + 2 * u * udd) - a_ft - a2f
        assert terms.dA3u[idx] == pytest.approx(dA3u, abs=1e-8)
        assert terms.dA3u[idx] == pytest.approx(-np.cos(a), abs=1e-8)
        assert terms.dA2f[idx] == pytest.approx(a2f, abs=1e-8)


def test_stage_terms_dirichlet_closed_form():
    p = get_problem("dirichlet-nonvanishing")
    space = build_space("fd-dirichlet", h=0.05)
    t, k = 0.3, 0.2
    terms = boundary_terms(p, space, RK4, 4, "data", t, exact_state(p, space, t), k)
    for i, c in enumerate(RK4.C):
        for idx, x in enumerate((0.0, 1.0)):
            g, gd = np.cos(x + t), -np.sin(x + t)
            expected = (g + c * k * gd) ** 2 + p.forcing(t + c * k, x)
            assert terms.stage_df[i, idx] == pytest.approx(expected, rel=1e-13)


def test_robin_traces_match_oracle_on_exact_state():
    p = manufacture(CosineSolution(), ReactionSpec.quadratic(), "robin", alpha=2.0, beta=0.5)
    space = build_space("fd-mixed", h=0.02)
    t = 0.35
    state = exact_state(p, space, t)
    udot = space.project(lambda x: p.exact_partial(1, 0, t, x))
    uddot = space.project(lambda x: p.exact_partial(2, 0, t, x))
    data = boundary_terms(p, space, RK4, 4, "data", t, state, 0.1, udot=udot, uddot=uddot)
    oracle = boundary_terms(p, space, RK4, 4, "oracle", t, state, 0.1)
    for name, value in data.fields().items():
        # the Robin end (index 1) uses only the end value and the condition: exact here
        assert np.allclose(value[..., 1], oracle.fields()[name][..., 1], rtol=1e-10, atol=1e-10), name


def test_order4_data_vs_oracle_decreases_at_fixed_cfl():
    p = get_problem("dirichlet-nonvanishing")
    diffs = []
    for h in (1 / 20, 1 / 40, 1 / 80, 1 / 160):
        space = build_space("fd-dirichlet", h=h)
        k = h
        t = 0.5
        past = [exact_state(p, space, t - j * k) for j in range(4)]
        hist = TraceHistory(k)
        for j in reversed(range(4)):
            hist.push(t - j * k, past[j])
        data = terms_order4(p, "data", t, past[0], hist, space, RK4)
        oracle = terms_order4(p, "oracle", t, past[0], hist, space, RK4)
        diffs.append(np.max(np.abs(data.dA2f - oracle.dA2f)))
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_collocation_data_matches_oracle_closely():
    p = get_problem("dirichlet-nonvanishing")
    space = build_collocation(17)
    t = 0.2
    udot = space.project(lambda x: p.exact_partial(1, 0, t, x))
    data = boundary_terms(p, space, RK4, 4, "data", t, exact_state(p, space, t), 0.01, udot=udot)
    oracle = boundary_terms(p, space, RK4, 4, "oracle", t, exact_state(p, space, t), 0.01)
    for name, value in data.fields().items():
        assert np.allclose(value, oracle.fields()[name], atol=1e-7), name


def test_startup_mask_selects_exact_values():
    p = get_problem("mixed-nonvanishing")
    space = build_space("fd-mixed", h=0.05)
    t = np.array([0.1, 0.2])
    state = p.exact(t[:, None], space.nodes)
    junk = np.full_like(state, 123.0)
    mixed = boundary_terms(p, space, RK4, 4, "data", t, state, 0.1, udot=junk, uddot=junk,
                           startup=np.array([True, False]))
    clean = boundary_terms(p, space, RK4, 4, "data", t, state, 0.1)
    assert np.allclose(mixed.dA2u[0], clean.dA2u[0])
    assert not np.allclose(mixed.dA2u[1], clean.dA2u[1])


def test_argument_validation():
    p = get_problem("dirichlet-nonvanishing")
    space = build_space("fd-dirichlet", h=0.1)
    u = exact_state(p, space, 0.0)
    with pytest.raises(ValueError):
        boundary_terms(p, space, RK4, 5, "oracle", 0.0, u, 0.1)
    with pytest.raises(ValueError):
        boundary_terms(p, space, RK4, 2, "guess", 0.0, u, 0.1)
    with pytest.raises(ValueError):
        boundary_terms(p, space, RK4, 2, "oracle", 0.0, u[:-1], 0.1)


def test_zeros_constructor_shapes():
    z = BoundaryTermSet.zeros(4, 3, (5,))
    assert z.stage_df.shape == (5, 3, 2)
    assert set(z.fields()) == {"du", "dAu", "df", "dA2u", "dAf", "stage_df", "dA3u", "dA2f",
                               "stage_dAf", "composed_df"}


# -- numerical differentiation --------------------------------------------

def test_bdf1_exact_on_cubics():
    k, t = 0.1, 0.7
    hist = [(t - j * k) ** 3 for j in range(4)]
    assert bdf_time_derivative(hist, 1, k) == pytest.approx(3 * t**2, abs=1e-12)


def test_bdf_orders_on_sine():
    ks = [0.1, 0.05, 0.025, 0.0125]
    t = 0.9
    e1, e2 = [], []
    for k in ks:
        hist = [np.sin(t - j * k) for j in range(4)]
        e1.append(abs(bdf_time_derivative(hist, 1, k) - np.cos(t)))
        e2.append(abs(bdf_time_derivative(hist, 2, k) + np.sin(t)))
    assert slope(ks, e1) == pytest.approx(3.0, abs=0.15)
    assert slope(ks, e2) == pytest.approx(2.0, abs=0.15)


def test_bdf_needs_history():
    with pytest.raises(ValueError):
        bdf_time_derivative([1.0, 2.0, 3.0], 1, 0.1)
    with pytest.raises(ValueError):
        bdf_time_derivative([1.0] * 4, 3, 0.1)


def test_trace_history():
    hist = TraceHistory(0.1)
    assert hist.derivative(1) is None
    for n in range(5):
        hist.push(n * 0.1, np.array([(n * 0.1) ** 2]))
    assert len(hist) == 4
    assert hist.derivative(1)[0] == pytest.approx(0.8, abs=1e-12)
    assert hist.derivative(2)[0] == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(ValueError):
        hist.push(0.7, np.array([0.0]))


def test_space_stencil_reexported():
    assert bdf_space_boundary_derivative(0.0, 0.01, 0.04, 0.1) == 0.0
