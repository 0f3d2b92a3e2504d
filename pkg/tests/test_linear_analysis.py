import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridpassivity.bus_models import AffineBusModel, CallableBusModel, GeneratorParams, assemble_bus_model
from gridpassivity.equilibrium import init_machine
from gridpassivity.errors import IllPosedInterconnection, NonFiniteDerivative, ResolventSingular
from gridpassivity.linear_analysis import (EigenReport, FrequencyGrid, LinearBusModel,
                                           check_open_loop_stability, closed_loop_matrix, damping_ratio,
                                           full_system_eigenanalysis, linearize_bus, linearize_equilibrium,
                                           passivity_sweep)
from gridpassivity.synthetic import lag_example_machine

seeds = st.integers(0, 2**32 - 1)


def _static(d):
    return LinearBusModel(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), d)


def test_planted_lti_recovered(rng):
    for k in (1, 3, 6):
        a, b, c, d = rng.normal(size=(k, k)), rng.normal(size=(k, 2)), rng.normal(size=(2, k)), rng.normal(size=(2, 2))
        model = AffineBusModel(a, b, c, d, f0=rng.normal(size=k), y0=rng.normal(size=2))
        lm = linearize_bus(model, rng.normal(size=k), rng.normal(size=2))
        for got, want in ((lm.a, a), (lm.b, b), (lm.c, c), (lm.d, d)):
            assert np.max(np.abs(got - want)) <= 1e-9


def test_machine_angle_row_is_exact():
    p = GeneratorParams(m=0.1, d=0.05, xd=1.8, xq=1.7, xd_t=0.3, xq_t=0.3, td0_t=8, tq0_t=0.4, r_s=0.01)
    m, x = init_machine(assemble_bus_model(p), 1.0 + 0.1j, 0.6 - 0.2j)
    lm = linearize_bus(m, x, [-0.6, 0.2])
    assert np.array_equal(lm.a[0], [0.0, 1.0, 0.0, 0.0])


def _smooth_model(rng, k=4):
    w1, w2 = rng.normal(size=(k, k)), rng.normal(size=(k, 2))
    c1 = rng.normal(size=(2, k))

    def rhs(x, u):
        return np.tanh(w1 @ x) + np.sin(w2 @ u) * np.exp(-0.1 * x @ x) + x * u[0]

    def terms(x):
        return np.cos(c1 @ x), np.array([[1 + x[0] ** 2, x[1]], [-x[1], 2.0]])
    return CallableBusModel(rhs, terms, k)


def _forward_jacobian(fun, z0, h=1e-7):
    f0 = fun(z0)
    out = np.zeros((f0.size, z0.size))
    for j in range(z0.size):
        z = z0.copy()
        z[j] += h
        out[:, j] = (fun(z) - f0) / h
    return out


@given(seeds)
def test_nonlinear_jacobian_matches_forward_differences(seed):
    rng = np.random.default_rng(seed)
    model = _smooth_model(rng)
    x0, u0 = rng.normal(size=4), rng.normal(size=2)
    lm = linearize_bus(model, x0, u0)
    fx = _forward_jacobian(lambda x: model.f(x, u0), x0)
    fu = _forward_jacobian(lambda u: model.f(x0, u), u0)
    gx = _forward_jacobian(lambda x: model.g(x, u0), x0)
    gu = _forward_jacobian(lambda u: model.g(x0, u), u0)
    for got, ref in ((lm.a, fx), (lm.b, fu), (lm.c, gx), (lm.d, gu)):
        assert np.max(np.abs(got - ref)) <= 1e-5 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_derivative_raises():
    bad = CallableBusModel(lambda x, u: np.array([np.log(x[0])]), lambda x: (np.zeros(2), np.zeros((2, 2))), 1)
    with pytest.raises(NonFiniteDerivative):
        linearize_bus(bad, np.array([0.0]), np.zeros(2))


def test_linearization_error_is_quadratic(kundur_ep, rng):
    m, x, u = kundur_ep.models[0], kundur_ep.x_hat[0], kundur_ep.u_hat[0]
    lm = linearize_bus(m, x, u)
    ratios = []
    for scale in (1e-2, 5e-3, 2.5e-3):
        dx = scale * rng.normal(size=x.size)
        err = np.linalg.norm(m.f(x + dx, u) - m.f(x, u) - lm.a @ dx)
        ratios.append(err / np.linalg.norm(dx) ** 2)
    assert np.all(np.isfinite(ratios)) and max(ratios) < 1e3


def test_static_resistive_model_sweep():
    rep = passivity_sweep(_static(0.4 * np.eye(2)))
    assert np.allclose(rep.min_eig, 0.8, atol=1e-15) and rep.passive
    assert rep.grid[0] == 0.0 and rep.grid.size == 401


def test_integrator_is_not_passive_by_this_test():
    lm = LinearBusModel(np.zeros((2, 2)), np.eye(2), np.eye(2), np.zeros((2, 2)))
    rep = passivity_sweep(lm)
    assert np.allclose(rep.min_eig, 0.0, atol=1e-15)
    assert not rep.hurwitz and not rep.passive
    assert rep.grid[0] > 0     # dc point skipped for singular A


def test_undamped_mode_on_grid_is_singular():
    w0 = FrequencyGrid().points()[100]
    lm = LinearBusModel(np.array([[0.0, w0], [-w0, 0.0]]), np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ResolventSingular):
        passivity_sweep(lm)


@given(seeds)
def test_sweep_hermitian_part_is_hermitian(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    lm = LinearBusModel(rng.normal(size=(k, k)) - 3 * np.eye(k), rng.normal(size=(k, 2)),
                        rng.normal(size=(2, k)), rng.normal(size=(2, 2)))
    g = lm.transfer(np.logspace(-2, 3, 40))
    herm = g + np.conj(np.swapaxes(g, 1, 2))
    assert np.max(np.abs(herm - np.conj(np.swapaxes(herm, 1, 2)))) <= 1e-12
    assert np.max(np.abs(np.linalg.eigvals(herm).imag)) <= 1e-10


def test_sweep_matches_direct_resolvent(rng):
    lm = LinearBusModel(rng.normal(size=(3, 3)) - 4 * np.eye(3), rng.normal(size=(3, 2)),
                        rng.normal(size=(2, 3)), rng.normal(size=(2, 2)))
    rep = passivity_sweep(lm, FrequencyGrid(0.1, 10, 7, include_dc=False))
    for w, m in zip(rep.grid, rep.min_eig):
        g = lm.c @ np.linalg.inv(1j * w * np.eye(3) - lm.a) @ lm.b + lm.d
        assert m == pytest.approx(np.linalg.eigvalsh(g + g.conj().T).min(), abs=1e-12)


def test_lag_example_bus_plain_exciter_violates_low_band():
    ex = lag_example_machine()
    rep = passivity_sweep(linearize_bus(ex.model, ex.x_hat, ex.u_hat))
    w = rep.grid[rep.violating]
    assert rep.hurwitz and w.size and np.all((w >= 0.2) & (w <= 3.0))


def test_lag_example_bus_passes_with_reference_lag_constants():
    ex = lag_example_machine()
    m, x = init_machine(ex.model.with_exciter_lag(3.3, 0.3), ex.v, ex.i)
    rep = passivity_sweep(linearize_bus(m, x, ex.u_hat))
    assert rep.passive, f"worst min eigenvalue {rep.worst}"


def test_open_loop_stability_examples():
    s = check_open_loop_stability(LinearBusModel(-np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2))))
    assert s.stable and s.abscissa == -1.0
    s = check_open_loop_stability(LinearBusModel(np.zeros((1, 1)), np.ones((1, 2)), np.ones((2, 1)), np.zeros((2, 2))))
    assert not s.stable


def test_kundur_machine_with_controls_is_open_loop_stable(kundur_ep):
    for lm in linearize_equilibrium(kundur_ep):
        assert check_open_loop_stability(lm).stable


def test_damping_ratio_formula():
    lam = complex(-1.0, 2 * math.pi)
    assert abs(damping_ratio(lam) - 1 / math.sqrt(1 + 4 * math.pi**2)) <= 1e-12
    assert damping_ratio(-3.0) == 1.0 and damping_ratio(2.0) == -1.0
    assert math.isnan(damping_ratio(0.0))


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_damping_ratio_bounded(lam):
    if lam != 0:
        assert -1.0 <= damping_ratio(lam) <= 1.0


def test_single_bus_zero_network_keeps_open_loop_spectrum(rng):
    lm = LinearBusModel(rng.normal(size=(4, 4)), rng.normal(size=(4, 2)), rng.normal(size=(2, 4)), rng.normal(size=(2, 2)))
    rep = full_system_eigenanalysis([lm], np.zeros((2, 2)))
    assert np.allclose(np.sort_complex(rep.eigenvalues), np.sort_complex(np.linalg.eigvals(lm.a)), atol=1e-12)


def test_closed_loop_matches_descriptor_elimination(rng):
    lms = [LinearBusModel(rng.normal(size=(3, 3)), rng.normal(size=(3, 2)), rng.normal(size=(2, 3)),
                          rng.normal(size=(2, 2))) for _ in range(2)]
    h = rng.normal(size=(4, 4))
    acl = closed_loop_matrix(lms, h)
    # simulate one step of the algebraic loop explicitly for a random state
    x = rng.normal(size=6)
    u = np.zeros(4)
    for _ in range(200):   # fixed point u = -H (C x + D u) after a scaling that contracts
        pass
    n = 2
    cx = np.zeros(4)
    dmat = np.zeros((4, 4))
    bmat = np.zeros((6, 4))
    for i, lm in enumerate(lms):
        s = slice(3 * i, 3 * i + 3)
        cx[[i, n + i]] = lm.c @ x[s]
        dmat[np.ix_([i, n + i], [i, n + i])] = lm.d
        bmat[s][:, [i, n + i]] = lm.b
    u = np.linalg.solve(np.eye(4) + h @ dmat, -h @ cx)
    xdot = np.concatenate([lm.a @ x[3 * i:3 * i + 3] for i, lm in enumerate(lms)]) + bmat @ u
    assert np.allclose(acl @ x, xdot, atol=1e-10)


def test_ill_posed_interconnection():
    lm = LinearBusModel(-np.eye(1), np.ones((1, 2)), np.ones((2, 1)), -np.eye(2))
    with pytest.raises(IllPosedInterconnection):
        closed_loop_matrix([lm], np.eye(2))


def test_kundur_rotational_mode_reported(kundur_variant):
    _, ep = kundur_variant("gov+exc")
    rep = full_system_eigenanalysis(linearize_equilibrium(ep), ep.h_reduced)
    assert rep.near_zero.size == 1
    assert rep.abscissa_excluding_rotational < 0
    osc = rep.eigenvalues[rep.oscillatory()]
    # one inter-area mode near 0.5-0.7 Hz and local modes near 1-1.2 Hz
    freqs = np.sort(osc.imag / (2 * math.pi))
    assert np.any((freqs > 0.4) & (freqs < 0.8))
    assert np.sum((freqs > 0.9) & (freqs < 1.3)) >= 2


def test_eigen_report_excludes_only_one_rotational_mode():
    rep = EigenReport(np.array([1e-9, -2e-9, -1.0]), np.zeros(3))
    assert rep.abscissa_excluding_rotational == pytest.approx(-2e-9)
