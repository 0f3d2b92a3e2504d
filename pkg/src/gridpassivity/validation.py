"""Empirical check of the decentralized stability claim.

For one configuration (bus models on a network) the premise is evaluated at
the actual interconnected equilibrium: every bus linearization passes the
sweep and the network certificate passes.  The conclusion is checked by
simulation: after a load step the trajectory must settle onto the
post-disturbance equilibrium.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridPassivityError, NonFiniteState
from .linear_analysis import FrequencyGrid, linearize_bus, passivity_sweep
from .network import AdmittancePair, certify_network_passivity
from .simulator import LoadStep, Scenario, apply_load_step, network_only_system, simulate, solve_interface
from .synthetic import find_equilibrium


@dataclass
class ConfigurationOutcome:
    name: str
    bus_passive: list
    network_passes: bool
    converged: bool | None = None
    final_distance: float = float("nan")
    final_rate: float = float("nan")
    note: str = ""
    envelope: np.ndarray | None = None

    @property
    def premise(self) -> bool:
        return bool(all(self.bus_passive) and self.network_passes)

    @property
    def counterexample(self) -> bool:
        return self.premise and not self.converged


@dataclass
class Configuration:
    name: str
    models: Sequence
    y: np.ndarray                 # complex admittance, every bus dynamic
    x_guess: np.ndarray
    step_bus: int = 0
    delta_p: float = 0.5
    delta_q: float = 0.0
    horizon: float = 40.0
    dt: float = 0.01
    step_time: float = 1.0
    y_load: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def evaluate_configuration(cfg: Configuration, grid: FrequencyGrid | None = None,
                           tol: float = 1e-6, segments: int = 4) -> ConfigurationOutcome:
    grid = grid or FrequencyGrid()
    n = cfg.y.shape[0]
    y_load = np.zeros(n, complex) if cfg.y_load is None else np.asarray(cfg.y_load, complex)
    system = network_only_system(cfg.models, cfg.y, cfg.x_guess, y_load)
    h = system.network.block()
    x_star = find_equilibrium(cfg.models, h, cfg.x_guess)
    parts = system.split(x_star)
    sol = solve_interface(cfg.models, parts, h)
    passive = []
    for k, (m, xs) in enumerate(zip(cfg.models, parts)):
        try:
            passive.append(passivity_sweep(linearize_bus(m, xs, sol.inputs[k]), grid).passive)
        except GridPassivityError:
            passive.append(False)
    y_aug = cfg.y + np.diag(y_load)
    cert = certify_network_passivity(AdmittancePair.from_complex(y_aug))
    out = ConfigurationOutcome(cfg.name, passive, cert.passes)

    sc = Scenario(cfg.horizon, cfg.dt, (LoadStep(cfg.step_time, cfg.step_bus, cfg.delta_p, cfg.delta_q),))
    system = network_only_system(cfg.models, cfg.y, x_star, y_load)
    try:
        traj = simulate(system, sc)
    except NonFiniteState as exc:
        out.converged = False
        out.note = f"diverged at t = {exc.time:.3f} s"
        return out
    v_ev = np.hypot(*sol.v[cfg.step_bus])
    net_after = apply_load_step(system.network, cfg.step_bus, cfg.delta_p, cfg.delta_q, v_ev)
    x_end = traj.states[-1]
    try:
        x_new = find_equilibrium(cfg.models, net_after.block(), x_end)
    except GridPassivityError as exc:
        out.converged = False
        out.note = f"no post-event equilibrium: {exc}"
        return out
    dist = np.max(np.abs(traj.states - x_new), axis=1)
    k_ev = int(round(cfg.step_time / cfg.dt))
    out.final_distance = float(dist[-1])
    last = max(1, int(round(1.0 / cfg.dt)))
    out.final_rate = float(np.max(np.abs(traj.states[-1] - traj.states[-1 - last])))
    out.envelope = segment_envelope(dist[k_ev:], segments)
    out.converged = envelope_converges(out.envelope, dist[-1], tol)
    return out


def segment_envelope(dist: np.ndarray, segments: int = 4) -> np.ndarray:
    """Maximum of ``dist`` over equal consecutive windows."""
    chunks = np.array_split(np.asarray(dist), segments)
    return np.array([c.max() for c in chunks if c.size])


def envelope_converges(envelope: np.ndarray, final: float, tol: float) -> bool:
    """Settled (final distance below ``tol``) or every window's peak below the previous one."""
    if final <= tol:
        return True
    return bool(np.all(np.diff(envelope) < 0) and final < envelope[0])


def synthetic_configurations(seed: int = 7, n_linear: int = 2, n_machines: int = 2) -> list:
    """Reference set of configurations for the stability check.

    Linear port-Hamiltonian buses and cubic-damped buses on random lossy
    networks (premise holds by construction), plus exciter-destabilized
    machines among passive neighbours, each once with the plain exciter and
    once with a tuned lag stage.
    """
    from .equilibrium import init_machine
    from .errors import TuningFailed
    from .synthetic import (cubic_damped_bus, machine_with_neighbours, random_admittance, random_ph_bus,
                            synthetic_violating_machines)
    from .tuner import TuningConstraints, bus_factory, tune_lag

    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_linear):
        n = int(rng.integers(3, 7))
        models = [random_ph_bus(rng) for _ in range(n)]
        y = random_admittance(rng, n).complex
        out.append(Configuration(f"linear-{k}", models, y, np.zeros(sum(m.n_states for m in models)),
                                 step_bus=int(rng.integers(n))))
    n = 4
    models = [cubic_damped_bus(rng) for _ in range(n)]
    out.append(Configuration("cubic", models, random_admittance(rng, n).complex,
                             np.zeros(sum(m.n_states for m in models))))
    machines = synthetic_violating_machines(np.random.default_rng(seed), 3 * n_machines, min_band_lo=0.05)
    used = 0
    for j, m in enumerate(machines):
        if used >= n_machines:
            break
        exc = m.model.controllers.exciter
        try:
            lag = tune_lag(bus_factory(m.model, m.v, m.i), None, TuningConstraints(exc.k_a, exc.t_a))
        except TuningFailed:
            continue
        used += 1
        for label, (t_b, t_c) in (("plain", (0.0, 0.0)), ("tuned", (lag.t_b, lag.t_c))):
            model, x = init_machine(m.model.with_exciter_lag(t_b, t_c), m.v, m.i)
            ms, y, x0 = machine_with_neighbours(np.random.default_rng(1000 + j), model, x, m.v, m.i)
            out.append(Configuration(f"machine-{j}-{label}", ms, y, x0, step_bus=1, delta_p=0.2,
                                     extra={"t_b": t_b, "t_c": t_c}))
    return out
