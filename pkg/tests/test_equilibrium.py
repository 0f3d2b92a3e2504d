import math
from dataclasses import replace

import numpy as np
import pytest

from gridpassivity.bus_models import GeneratorParams, assemble_bus_model
from gridpassivity.equilibrium import (PowerFlowSpec, case_admittance, init_machine, solve_case_equilibrium,
                                       solve_power_flow, verify_equilibrium)
from gridpassivity.errors import InfeasibleSteadyState, NonConvergence, SingularJacobian
from gridpassivity.network import BranchSpec, build_admittance

LINE = build_admittance([BranchSpec(0, 1, 0.0, 0.5)], 2)


def test_two_bus_no_load_is_flat():
    res = solve_power_flow(LINE, PowerFlowSpec(("slack", "pq"), [0, 0], [0, 0], [1, 1]))
    assert np.allclose(res.v, [1, 1], atol=1e-14) and np.allclose(res.s_inj, 0, atol=1e-14)


def test_two_bus_load_closed_form():
    # lossless line x = 0.5 carrying 0.5 pu at unity power factor: V2 = cos 15 deg at -15 deg
    res = solve_power_flow(LINE, PowerFlowSpec(("slack", "pq"), [0, -0.5], [0, 0], [1, 1]))
    v2 = res.v[1]
    assert abs(v2) == pytest.approx(math.cos(math.radians(15)), abs=1e-9)
    assert math.degrees(np.angle(v2)) == pytest.approx(-15.0, abs=1e-7)
    s = res.v * np.conj(LINE.complex @ res.v)
    assert abs(s[1] - (-0.5)) <= 1e-8


def test_infeasible_transfer_does_not_converge():
    with pytest.raises((NonConvergence, SingularJacobian)):
        solve_power_flow(LINE, PowerFlowSpec(("slack", "pq"), [0, -5.0], [0, 0], [1, 1]), max_iter=30)


def test_spec_requires_one_slack():
    with pytest.raises(ValueError):
        PowerFlowSpec(("pv", "pq"), [0, 0], [0, 0], [1, 1])


def test_kundur_power_flow(kundur, kundur_ep):
    pf = kundur_ep.power_flow
    assert pf.mismatch <= 1e-8 and pf.iterations <= 10
    y = case_admittance(kundur).complex
    i = y @ pf.v
    assert np.allclose(i, pf.i_inj, atol=1e-8)
    idx = kundur.bus_index
    # area 1 exports: the tie lines carry power from bus 7 towards bus 9
    v7, v8 = pf.v[idx[7]], pf.v[idx[8]]
    y78 = -y[idx[7], idx[8]]
    assert (v7 * np.conj(y78 * (v7 - v8))).real > 0
    ang = np.degrees(np.angle(pf.v[[idx[1], idx[2], idx[3], idx[4]]]))
    assert ang[0] > ang[1] > ang[2] > ang[3]


def test_kundur_equilibrium_residual(kundur_ep):
    assert kundur_ep.residual_norm <= 1e-8
    assert all(x[2] > 0 for x in kundur_ep.x_hat)


def test_open_circuit_machine_aligns_with_voltage():
    p = GeneratorParams(m=1, d=0, xd=1, xq=0.8, xd_t=0.3, xq_t=0.3, td0_t=5, tq0_t=0.5, r_s=0.0)
    v = 1.02 * complex(math.cos(0.3), math.sin(0.3))
    m, x = init_machine(assemble_bus_model(p), v, 0j)
    assert x[0] == pytest.approx(0.3, abs=1e-15) and x[1] == 0.0
    assert x[2] == pytest.approx(1.02, abs=1e-15) and x[3] == pytest.approx(0.0, abs=1e-15)
    assert np.max(np.abs(m.f(x, [0.0, 0.0]))) <= 1e-15


def test_negative_internal_emf_is_infeasible():
    p = GeneratorParams(m=1, d=0, xd=1, xq=0.8, xd_t=0.3, xq_t=0.3, td0_t=5, tq0_t=0.5)
    with pytest.raises(InfeasibleSteadyState):
        init_machine(assemble_bus_model(p), 1.0 + 0j, 2.0j)


def test_initialized_states_give_zero_derivative_under_each_control_mode(kundur_variant):
    for mode in ("none", "gov", "gov+exc", "gov+exc+pss"):
        _, ep = kundur_variant(mode)
        assert ep.residual_norm <= 1e-8, mode


def test_lagged_exciter_initialization(kundur):
    rec = kundur.machines[0]
    exc = replace(rec.controllers.exciter, t_b=3.3, t_c=0.3)
    case = kundur.with_machine(replace(rec, controllers=replace(rec.controllers, exciter=exc)))
    ep = solve_case_equilibrium(case)
    assert ep.residual_norm <= 1e-8
    assert ep.models[0].n_states == 7


def test_perturbation_residual_is_local(kundur_ep):
    states = [x.copy() for x in kundur_ep.x_hat]
    states[2][1] += 0.1
    rep = verify_equilibrium(kundur_ep, states=states, inputs="fixed")
    assert rep.per_bus[2] > 1e-3
    assert np.all(rep.per_bus[[0, 1, 3]] <= 1e-8)
    coupled = verify_equilibrium(kundur_ep, states=states)
    assert coupled.per_bus[2] > 1e-3


def test_islanded_machine_with_zero_injection():
    p = GeneratorParams(m=1, d=0.1, xd=1, xq=0.8, xd_t=0.3, xq_t=0.3, td0_t=5, tq0_t=0.5, r_s=0.01)
    m, x = init_machine(assemble_bus_model(p), 1.0 + 0j, 0j)
    from gridpassivity.equilibrium import EquilibriumPoint
    from gridpassivity.frames import ComplexPhasor, FrameAngle
    ep = EquilibriumPoint((1,), (ComplexPhasor(1, 0),), (ComplexPhasor(0, 0),), (x,), (FrameAngle(x[0]),),
                          (m,), np.zeros((2, 2)), np.zeros((1, 1)), 0.0)
    assert verify_equilibrium(ep).max_residual <= 1e-12


def test_angle_reference_shift_leaves_residual_unchanged(kundur):
    base = solve_case_equilibrium(kundur)
    buses = tuple(replace(b, angle_deg=b.angle_deg + 25.0) if b.kind == "slack" else b for b in kundur.buses)
    shifted = solve_case_equilibrium(replace(kundur, buses=buses))
    d0 = np.array([x[0] for x in base.x_hat])
    d1 = np.array([x[0] for x in shifted.x_hat])
    assert np.allclose(d1 - d0, math.radians(25.0), atol=1e-9)
    assert abs(shifted.residual_norm - base.residual_norm) <= 1e-10
