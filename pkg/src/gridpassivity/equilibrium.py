"""Power flow and equilibrium initialization of the interconnected system."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .bus_models import BusDynamicModel, GeneratorBusModel, assemble_bus_model
from .case_io import CaseFile
from .errors import InfeasibleSteadyState, NonConvergence, SingularJacobian
from .frames import ComplexPhasor, FrameAngle
from .network import block_layout, build_admittance, interface_currents, kron_reduce


@dataclass(frozen=True)
class PowerFlowSpec:
    """Per-bus arrays.  ``kinds`` holds 'slack', 'pv' or 'pq'."""

    kinds: tuple
    p_inj: np.ndarray
    q_inj: np.ndarray
    v_set: np.ndarray
    slack_angle: float = 0.0

    def __post_init__(self):
        n = len(self.kinds)
        for name in ("p_inj", "q_inj", "v_set"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be {n} finite values")
            object.__setattr__(self, name, arr)
        if sum(k == "slack" for k in self.kinds) != 1:
            raise ValueError("exactly one slack bus is required")

    @property
    def slack(self) -> int:
        return self.kinds.index("slack")

    @property
    def pv(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k == "pv"], dtype=int)

    @property
    def pq(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k == "pq"], dtype=int)


@dataclass(frozen=True)
class PowerFlowResult:
    v: np.ndarray            # complex bus voltages
    s_inj: np.ndarray        # complex net injections
    iterations: int
    mismatch: float

    @property
    def i_inj(self) -> np.ndarray:
        return np.conj(self.s_inj / self.v)


def _mismatch(y, v, spec, non_slack, pq):
    s = v * np.conj(y @ v)
    dp = spec.p_inj - s.real
    dq = spec.q_inj - s.imag
    return np.concatenate([dp[non_slack], dq[pq]]), s


def _jacobian(y, v, non_slack, pq):
    i = y @ v
    dv = np.diag(v)
    vn = np.diag(v / np.abs(v))
    ds_dth = 1j * dv @ np.conj(np.diag(i) - y @ dv)
    ds_dvm = dv @ np.conj(y @ vn) + np.conj(np.diag(i)) @ vn
    top = np.hstack([ds_dth.real[np.ix_(non_slack, non_slack)], ds_dvm.real[np.ix_(non_slack, pq)]])
    bot = np.hstack([ds_dth.imag[np.ix_(pq, non_slack)], ds_dvm.imag[np.ix_(pq, pq)]])
    return np.vstack([top, bot])


def solve_power_flow(y, spec: PowerFlowSpec, tol: float = 1e-8,
                     max_iter: int = 50) -> PowerFlowResult:
    """Newton-Raphson in polar coordinates from a flat start.

    ``y`` is the complex bus admittance matrix (or an ``AdmittancePair``).
    Constant-power loads must already be netted into ``spec``.
    """
    y = np.asarray(y.complex if hasattr(y, "complex") else y, dtype=complex)
    n = len(spec.kinds)
    non_slack = np.array([k for k in range(n) if k != spec.slack], dtype=int)
    pq = spec.pq
    vm = np.ones(n)
    th = np.zeros(n)
    gen = np.array([k != "pq" for k in spec.kinds])
    vm[gen] = spec.v_set[gen]
    th[spec.slack] = spec.slack_angle
    for it in range(max_iter + 1):
        v = vm * np.exp(1j * th)
        f, s = _mismatch(y, v, spec, non_slack, pq)
        err = float(np.max(np.abs(f))) if f.size else 0.0
        if err <= tol:
            return PowerFlowResult(v, s, it, err)
        if it == max_iter or not math.isfinite(err):
            break
        jac = _jacobian(y, v, non_slack, pq)
        try:
            if np.linalg.cond(jac) > 1e14:
                raise SingularJacobian(f"power-flow Jacobian singular at iteration {it}")
            dx = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        th[non_slack] += dx[:non_slack.size]
        vm[pq] += dx[non_slack.size:]
    raise NonConvergence(it, err)


def case_power_flow_spec(case: CaseFile) -> PowerFlowSpec:
    idx = case.bus_index
    n = len(case.buses)
    p = np.zeros(n)
    q = np.zeros(n)
    v = np.ones(n)
    slack_angle = 0.0
    for b in case.buses:
        k = idx[b.id]
        p[k] += b.p_gen
        v[k] = b.v_set
        if b.kind == "slack":
            slack_angle = math.radians(b.angle_deg)
    for ld in case.loads:
        p[idx[ld.bus]] -= ld.p
        q[idx[ld.bus]] -= ld.q
    return PowerFlowSpec(tuple(b.kind for b in case.buses), p, q, v, slack_angle)


def case_admittance(case: CaseFile):
    return build_admittance(case.branches, len(case.buses), case.bus_index)


def load_admittances(case: CaseFile, v: np.ndarray) -> np.ndarray:
    """Constant-impedance equivalents ``(P - jQ)/|V|^2`` of the case loads."""
    idx = case.bus_index
    y_load = np.zeros(len(case.buses), dtype=complex)
    for ld in case.loads:
        k = idx[ld.bus]
        y_load[k] += complex(ld.p, -ld.q) / abs(v[k]) ** 2
    return y_load


# -- machine back-solve ------------------------------------------------------

def init_machine(model: GeneratorBusModel, v: complex, i: complex) -> tuple[GeneratorBusModel, np.ndarray]:
    """Steady state of one machine delivering current ``i`` at voltage ``v``.

    Returns the model with its references (P_ref, E_fd, V_ref) set and the
    equilibrium state vector.
    """
    p = model.params
    e_q = v + complex(p.r_s, p.xq) * i
    if abs(e_q) < 1e-12:
        raise InfeasibleSteadyState("internal emf vanishes; rotor angle undefined")
    delta = math.atan2(e_q.imag, e_q.real)
    rot = complex(math.cos(delta), -math.sin(delta))
    idq = rot * i
    vdq = rot * v
    iq, id_ = idq.real, idq.imag
    vq = vdq.real
    ed_t = -(p.xq - p.xq_t) * iq
    eq_t = vq + p.r_s * iq - p.xd_t * id_
    if eq_t <= 0:
        raise InfeasibleSteadyState(f"required E'q = {eq_t:.4g} is not positive")
    ef = eq_t - id_ * (p.xd - p.xd_t)
    pe = eq_t * iq + ed_t * id_ + (p.xd_t - p.xq_t) * id_ * iq
    c = model.controllers
    params = replace(p, p_ref=pe, e_fd=ef)
    exc = c.exciter
    if exc.enabled:
        exc = replace(exc, v_ref=abs(v) + ef / exc.k_a)
    new = replace(model, params=params, controllers=replace(c, exciter=exc))
    x = np.zeros(new.n_states)
    x[:4] = [delta, 0.0, eq_t, ed_t]
    names = new.state_names
    if "pm" in names:
        x[names.index("pm")] = pe
    if "ef" in names:
        x[names.index("ef")] = ef
    if "x_lag" in names:
        x[names.index("x_lag")] = ef / exc.k_a
    return new, x


@dataclass(frozen=True)
class EquilibriumPoint:
    buses: tuple                 # machine bus ids, in interconnection order
    v_hat: tuple                 # ComplexPhasor per machine bus
    i_hat: tuple                 # ComplexPhasor per machine bus (injected into network)
    x_hat: tuple                 # state vector per machine
    delta_hat: tuple             # FrameAngle per machine
    models: tuple                # bus models with references set
    h_reduced: np.ndarray        # network block matrix seen by the machines (loads folded in)
    y_reduced: np.ndarray        # complex counterpart of h_reduced
    residual_norm: float
    power_flow: PowerFlowResult | None = None
    y_load: np.ndarray | None = None

    @property
    def u_hat(self) -> list:
        return [np.array([-c.re, -c.im]) for c in self.i_hat]

    def stacked_state(self) -> np.ndarray:
        return np.concatenate(self.x_hat)


def complex_to_block(y: np.ndarray) -> np.ndarray:
    return np.block([[y.real, -y.imag], [y.imag, y.real]])


def initialize_machine_states(case: CaseFile, pf: PowerFlowResult,
                              models: Sequence[GeneratorBusModel] | None = None) -> EquilibriumPoint:
    """Back-solve every machine's internal state from a converged power flow.

    Loads become constant admittances at the solved voltages and the augmented
    network is reduced onto the machine buses.
    """
    idx = case.bus_index
    if models is None:
        models = [assemble_bus_model(m.params, m.controllers, m.order) for m in case.machines]
    y = case_admittance(case).complex
    y_load = load_admittances(case, pf.v)
    y_aug = y + np.diag(y_load)
    gen = [idx[m.bus] for m in case.machines]
    i_net = y_aug @ pf.v
    ready, xs, v_hat, i_hat, deltas = [], [], [], [], []
    non_gen = np.setdiff1d(np.arange(len(case.buses)), gen)
    if non_gen.size and np.max(np.abs(i_net[non_gen])) > 1e-6:
        raise InfeasibleSteadyState("non-machine buses carry injections the power flow did not balance")
    for model, k in zip(models, gen):
        new, x = init_machine(model, complex(pf.v[k]), complex(i_net[k]))
        ready.append(new)
        xs.append(x)
        v_hat.append(ComplexPhasor.from_complex(pf.v[k]))
        i_hat.append(ComplexPhasor.from_complex(i_net[k]))
        deltas.append(FrameAngle(x[0]))
    y_red = kron_reduce(y_aug, gen)
    h_red = complex_to_block(y_red)
    ep = EquilibriumPoint(tuple(m.bus for m in case.machines), tuple(v_hat), tuple(i_hat),
                          tuple(xs), tuple(deltas), tuple(ready), h_red, y_red, 0.0, pf, y_load)
    report = verify_equilibrium(ep)
    return replace(ep, residual_norm=report.max_residual)


def solve_case_equilibrium(case: CaseFile, tol: float = 1e-8, max_iter: int = 50,
                           models=None) -> EquilibriumPoint:
    pf = solve_power_flow(case_admittance(case), case_power_flow_spec(case), tol, max_iter)
    return initialize_machine_states(case, pf, models)


@dataclass(frozen=True)
class ResidualReport:
    per_bus: np.ndarray          # max-norm of f_i at the equilibrium
    interface_mismatch: float    # max |I - I_hat| of the resolved interface

    @property
    def max_residual(self) -> float:
        return float(self.per_bus.max()) if self.per_bus.size else 0.0


def resolve_inputs(models: Sequence[BusDynamicModel], states, h: np.ndarray) -> list:
    """Inputs ``u_i = -I_i`` that make bus outputs and network consistent."""
    terms = [m.output_terms(x) for m, x in zip(models, states)]
    n = len(models)
    e_blk = np.concatenate([[t[0][0] for t in terms], [t[0][1] for t in terms]])
    z_blk = block_layout([t[1] for t in terms])
    i_blk, _ = interface_currents(h, e_blk, z_blk)
    return [-np.array([i_blk[k], i_blk[n + k]]) for k in range(n)]


def verify_equilibrium(ep: EquilibriumPoint, models=None, h: np.ndarray | None = None,
                       states=None, inputs: str = "interconnected") -> ResidualReport:
    """Evaluate every bus derivative at the equilibrium.

    ``inputs='interconnected'`` re-solves the interface from the states;
    ``'fixed'`` uses the stored equilibrium currents, which keeps the residual
    of an unperturbed bus exactly local.
    """
    models = ep.models if models is None else models
    h = ep.h_reduced if h is None else h
    states = ep.x_hat if states is None else states
    if inputs == "interconnected":
        us = resolve_inputs(models, states, h)
    elif inputs == "fixed":
        us = ep.u_hat
    else:
        raise ValueError(f"inputs must be 'interconnected' or 'fixed', got {inputs!r}")
    per_bus = np.array([np.max(np.abs(m.f(x, u))) if m.n_states else 0.0
                        for m, x, u in zip(models, states, us)])
    mismatch = max((float(np.max(np.abs(u - u0))) for u, u0 in zip(us, ep.u_hat)), default=0.0)
    return ResidualReport(per_bus, mismatch)
