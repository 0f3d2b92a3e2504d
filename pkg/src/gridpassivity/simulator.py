"""Fixed-step RK4 simulation of buses coupled through the (load-augmented) network."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bus_models import BusDynamicModel
from .errors import NonFiniteState, SimulationError, VoltageCollapse, VoltageCollapseAtEvent
from .network import block_layout, interface_currents, kron_reduce

MIN_VOLTAGE = 1e-6


@dataclass(frozen=True)
class AugmentedNetwork:
    """Branch admittance plus constant-impedance loads, seen from the dynamic buses."""

    y_branch: np.ndarray          # complex, all buses
    y_load: np.ndarray            # complex shunt per bus
    dynamic: tuple                # indices of buses with dynamic models

    @property
    def y_full(self) -> np.ndarray:
        return self.y_branch + np.diag(self.y_load)

    def reduced(self) -> np.ndarray:
        return kron_reduce(self.y_full, list(self.dynamic))

    def block(self) -> np.ndarray:
        y = self.reduced()
        return np.block([[y.real, -y.imag], [y.imag, y.real]])

    def full_voltages(self, v_dyn: np.ndarray) -> np.ndarray:
        """All bus voltages given the dynamic-bus voltages."""
        y = self.y_full
        n = y.shape[0]
        keep = np.asarray(self.dynamic, dtype=int)
        drop = np.setdiff1d(np.arange(n), keep)
        v = np.zeros(n, dtype=complex)
        v[keep] = v_dyn
        if drop.size:
            v[drop] = -np.linalg.solve(y[np.ix_(drop, drop)], y[np.ix_(drop, keep)] @ v_dyn)
        return v


def load_step_admittance(delta_p: float, delta_q: float, v_mag: float) -> complex:
    if not abs(v_mag) > MIN_VOLTAGE:
        raise VoltageCollapseAtEvent(f"bus voltage {v_mag:.3e} pu at event time")
    return complex(delta_p, -delta_q) / (v_mag * v_mag)


def apply_load_step(net: AugmentedNetwork, bus: int, delta_p: float, delta_q: float,
                    v_at_event: float) -> AugmentedNetwork:
    """Add ``(dP - j dQ)/|V|^2`` at bus index ``bus``."""
    y_load = net.y_load.copy()
    y_load[bus] += load_step_admittance(delta_p, delta_q, v_at_event)
    return replace(net, y_load=y_load)


@dataclass(frozen=True)
class InterfaceSolution:
    v: np.ndarray    # (n, 2): V_a, V_b per bus
    i: np.ndarray    # (n, 2): I_a, I_b per bus (injected into the network)

    @property
    def inputs(self) -> np.ndarray:
        return -self.i


def solve_interface(models: Sequence[BusDynamicModel], states: Sequence[np.ndarray],
                    h: np.ndarray) -> InterfaceSolution:
    n = len(models)
    terms = [m.output_terms(x) for m, x in zip(models, states)]
    e_blk = np.array([t[0][0] for t in terms] + [t[0][1] for t in terms])
    z_blk = block_layout([t[1] for t in terms])
    i_blk, v_blk = interface_currents(np.asarray(h, dtype=float), e_blk, z_blk)
    return InterfaceSolution(np.column_stack([v_blk[:n], v_blk[n:]]),
                             np.column_stack([i_blk[:n], i_blk[n:]]))


@dataclass(frozen=True)
class LoadStep:
    time: float
    bus: object          # bus id as used by the system's ``bus_ids``
    delta_p: float
    delta_q: float = 0.0


@dataclass(frozen=True)
class Scenario:
    horizon: float = 10.0
    dt: float = 0.005
    events: tuple = ()

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise ValueError("dt and horizon must be positive")
        times = [e.time for e in self.events]
        if any(t < 0 or t > self.horizon for t in times):
            raise ValueError("event times must lie within the horizon")
        if times != sorted(times):
            raise ValueError("events must be sorted by time")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class InterconnectedSystem:
    models: tuple
    network: AugmentedNetwork
    x0: np.ndarray                # stacked equilibrium state
    bus_ids: tuple                # ids of every network bus (index order)
    dynamic_ids: tuple            # ids of the dynamic buses, in model order

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([m.n_states for m in self.models])]).astype(int)

    def split(self, x: np.ndarray) -> list:
        o = self.offsets
        return [x[o[k]:o[k + 1]] for k in range(len(self.models))]


def build_system(case, ep) -> InterconnectedSystem:
    from .equilibrium import case_admittance
    idx = case.bus_index
    net = AugmentedNetwork(case_admittance(case).complex, ep.y_load.copy(),
                           tuple(idx[b] for b in ep.buses))
    return InterconnectedSystem(tuple(ep.models), net, ep.stacked_state(),
                                tuple(case.bus_ids), tuple(ep.buses))


def network_only_system(models, y: np.ndarray, x0, y_load=None) -> InterconnectedSystem:
    """System where every network bus carries a dynamic model."""
    y = np.asarray(y, dtype=complex)
    n = y.shape[0]
    net = AugmentedNetwork(y, np.zeros(n, complex) if y_load is None else np.asarray(y_load, complex),
                           tuple(range(n)))
    return InterconnectedSystem(tuple(models), net, np.asarray(x0, float),
                                tuple(range(n)), tuple(range(n)))


UNITS_NOTE = ("# d_omega is the rotor speed deviation in rad/s "
              "(divide by omega_s = {ws!r} rad/s for per unit); "
              "voltages and currents in per unit on the system base")
CSV_HEADER = "t[s],bus,d_omega[rad/s],v_mag[pu],delta[rad],i_a[pu],i_b[pu]"


@dataclass
class Trajectory:
    times: np.ndarray
    bus_ids: tuple
    states: np.ndarray            # (n_samples, n_states_total)
    d_omega: np.ndarray           # (n_samples, n_buses)
    v_mag: np.ndarray
    delta: np.ndarray
    i_a: np.ndarray
    i_b: np.ndarray
    interface_residual: float = 0.0
    omega_s: float = 2 * math.pi * 60

    def bus_column(self, name: str, bus) -> np.ndarray:
        return getattr(self, name)[:, self.bus_ids.index(bus)]

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO()
        buf.write(UNITS_NOTE.format(ws=self.omega_s) + "\n")
        buf.write(CSV_HEADER + "\n")
        for k, t in enumerate(self.times):
            for j, bus in enumerate(self.bus_ids):
                buf.write(f"{t:.6f},{bus},{self.d_omega[k, j]:.12e},{self.v_mag[k, j]:.12e},"
                          f"{self.delta[k, j]:.12e},{self.i_a[k, j]:.12e},{self.i_b[k, j]:.12e}\n")
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


class _Recorder:
    def __init__(self, system: InterconnectedSystem, n_samples: int):
        n = len(system.models)
        k = int(system.offsets[-1])
        self.system = system
        self.times = np.zeros(n_samples)
        self.states = np.zeros((n_samples, k))
        self.cols = {name: np.zeros((n_samples, n)) for name in
                     ("d_omega", "v_mag", "delta", "i_a", "i_b")}
        self.count = 0

    def record(self, t, x, sol: InterfaceSolution):
        k = self.count
        self.times[k] = t
        self.states[k] = x
        for j, (m, xs) in enumerate(zip(self.system.models, self.system.split(x))):
            self.cols["d_omega"][k, j] = xs[m.omega_index] if m.omega_index is not None else 0.0
            self.cols["delta"][k, j] = xs[m.delta_index] if m.delta_index is not None else 0.0
        self.cols["v_mag"][k] = np.hypot(sol.v[:, 0], sol.v[:, 1])
        self.cols["i_a"][k] = sol.i[:, 0]
        self.cols["i_b"][k] = sol.i[:, 1]
        self.count += 1

    def build(self, residual, omega_s) -> Trajectory:
        c = self.count
        return Trajectory(self.times[:c].copy(), tuple(self.system.dynamic_ids), self.states[:c].copy(),
                          *(self.cols[n][:c].copy() for n in ("d_omega", "v_mag", "delta", "i_a", "i_b")),
                          interface_residual=residual, omega_s=omega_s)


def _rhs(system: InterconnectedSystem, x: np.ndarray, h: np.ndarray):
    parts = system.split(x)
    sol = solve_interface(system.models, parts, h)
    if np.min(np.hypot(sol.v[:, 0], sol.v[:, 1])) < MIN_VOLTAGE:
        raise VoltageCollapse("a bus voltage fell below 1e-6 pu")
    u = sol.inputs
    dx = np.concatenate([m.f(xs, u[k]) for k, (m, xs) in enumerate(zip(system.models, parts))])
    return dx, sol


def simulate(system: InterconnectedSystem, scenario: Scenario, x0=None,
             omega_s: float = 2 * math.pi * 60) -> Trajectory:
    """Integrate with classical RK4; load steps snap to the nearest step boundary."""
    x = np.array(system.x0 if x0 is None else x0, dtype=float)
    dt = scenario.dt
    n_steps = scenario.n_steps
    rec = _Recorder(system, n_steps + 1)
    net = system.network
    h = net.block()
    bus_pos = {b: k for k, b in enumerate(system.bus_ids)}
    pending = sorted(((int(round(e.time / dt)), e) for e in scenario.events), key=lambda p: p[0])
    residual = 0.0
    ev = 0
    for step in range(n_steps + 1):
        t = step * dt
        applied = False
        while ev < len(pending) and pending[ev][0] == step:
            e = pending[ev][1]
            if e.bus not in bus_pos:
                raise SimulationError(f"event references unknown bus {e.bus!r}")
            sol = solve_interface(system.models, system.split(x), h)
            v_all = net.full_voltages(sol.v[:, 0] + 1j * sol.v[:, 1])
            k = bus_pos[e.bus]
            net = apply_load_step(net, k, e.delta_p, e.delta_q, abs(v_all[k]))
            applied = True
            ev += 1
        if applied:
            h = net.block()
        try:
            k1, sol = _rhs(system, x, h)
        except VoltageCollapse as err:
            raise NonFiniteState(t, rec.build(residual, omega_s)) from err
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(k1))):
            raise NonFiniteState(t, rec.build(residual, omega_s))
        i_blk = np.concatenate([sol.i[:, 0], sol.i[:, 1]])
        v_blk = np.concatenate([sol.v[:, 0], sol.v[:, 1]])
        residual = max(residual, float(np.max(np.abs(i_blk - h @ v_blk))))
        rec.record(t, x, sol)
        if step == n_steps:
            break
        try:
            k2, _ = _rhs(system, x + 0.5 * dt * k1, h)
            k3, _ = _rhs(system, x + 0.5 * dt * k2, h)
            k4, _ = _rhs(system, x + dt * k3, h)
        except VoltageCollapse as err:
            raise NonFiniteState(t, rec.build(residual, omega_s)) from err
        with np.errstate(over="ignore", invalid="ignore"):
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(t + dt, rec.build(residual, omega_s))
    return rec.build(residual, omega_s)
