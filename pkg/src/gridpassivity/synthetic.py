"""Random test systems: networks, passive buses and exciter-destabilized machines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .bus_models import (AffineBusModel, CallableBusModel, ControllerParams, ExciterParams,
                         GeneratorBusModel, GeneratorParams, assemble_bus_model)
from .equilibrium import init_machine
from .errors import InfeasibleSteadyState
from .linear_analysis import FrequencyGrid, linearize_bus, passivity_sweep
from .network import BranchSpec, build_admittance
from .simulator import solve_interface


def random_branches(rng: np.random.Generator, n: int, lossless: bool = False,
                    shunts: bool = False, extra: float = 0.3) -> list:
    """Connected branch set: a random spanning tree plus ``extra * n`` chords."""
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for _ in range(int(extra * n)):
        i, j = rng.choice(n, 2, replace=False)
        pairs.add(tuple(sorted((int(i), int(j)))))
    out = []
    for i, j in sorted(pairs):
        r = 0.0 if lossless else rng.uniform(0.005, 0.2)
        x = rng.uniform(0.02, 0.5)
        b = rng.uniform(0.0, 0.1) if shunts else 0.0
        out.append(BranchSpec(i, j, r, x, b))
    return out


def random_admittance(rng, n, **kw):
    return build_admittance(random_branches(rng, n, **kw), n)


def random_ph_bus(rng: np.random.Generator, k: int = 3, offset: float = 0.5,
                  min_damping: float = 0.3) -> AffineBusModel:
    """Input-strictly passive linear bus in port-Hamiltonian form.

    ``x' = (J - R) Q x + B u + f0``, ``y = B^T Q x + D u + y0`` with
    ``Q, R > 0`` and ``D + D^T > 0``.
    """
    def spd(m, floor):
        a = rng.normal(size=(m, m))
        return a @ a.T / m + floor * np.eye(m)
    s = rng.normal(size=(k, k))
    j = s - s.T
    r = spd(k, min_damping)
    q = spd(k, 0.5)
    b = rng.normal(size=(k, 2))
    dsym = spd(2, 0.2)
    dskew = rng.normal() * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return AffineBusModel((j - r) @ q, b, b.T @ q, dsym + dskew,
                          f0=offset * rng.normal(size=k), y0=np.array([1.0, 0.0]) + offset * rng.normal(size=2))


def cubic_damped_bus(rng: np.random.Generator, k: int = 2, offset: float = 0.5) -> CallableBusModel:
    """Nonlinear passive bus ``x' = -a x - c x^3 + B u + f0``, ``y = B^T x + D u + y0``."""
    a = rng.uniform(0.3, 2.0, size=k)
    c = rng.uniform(0.1, 1.0, size=k)
    b = rng.normal(size=(k, 2))
    d = np.diag(rng.uniform(0.2, 1.0, size=2))
    f0 = offset * rng.normal(size=k)
    y0 = np.array([1.0, 0.0]) + offset * rng.normal(size=2)

    def rhs(x, u):
        return -a * x - c * x ** 3 + b @ u + f0

    def terms(x):
        return b.T @ x + y0, d
    return CallableBusModel(rhs, terms, k)


def interconnection_residual(models, h, x: np.ndarray) -> np.ndarray:
    offs = np.concatenate([[0], np.cumsum([m.n_states for m in models])]).astype(int)
    parts = [x[offs[k]:offs[k + 1]] for k in range(len(models))]
    sol = solve_interface(models, parts, h)
    return np.concatenate([m.f(p, sol.inputs[k]) for k, (m, p) in enumerate(zip(models, parts))])


def find_equilibrium(models: Sequence, h: np.ndarray, x_guess: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Root of the interconnected vector field near ``x_guess``."""
    sol = optimize.root(lambda x: interconnection_residual(models, h, x), x_guess,
                        method="hybr", tol=tol)
    res = np.max(np.abs(interconnection_residual(models, h, sol.x)))
    if not sol.success and res > 1e-9:
        raise InfeasibleSteadyState(f"equilibrium search failed: {sol.message} (residual {res:.2e})")
    return sol.x


@dataclass(frozen=True)
class SyntheticMachine:
    model: GeneratorBusModel     # with exciter, references set
    v: complex
    i: complex
    x_hat: np.ndarray

    @property
    def u_hat(self) -> np.ndarray:
        return np.array([-self.i.real, -self.i.imag])


def random_machine_params(rng: np.random.Generator) -> GeneratorParams:
    xd_t = rng.uniform(0.05, 0.4)
    return GeneratorParams(
        m=rng.uniform(0.02, 1.0), d=rng.uniform(0.1, 10.0),
        xd=xd_t + rng.uniform(0.0, 0.5), xq=xd_t + rng.uniform(0.0, 0.3),
        xd_t=xd_t, xq_t=xd_t, td0_t=rng.uniform(1.0, 10.0), tq0_t=rng.uniform(0.2, 1.0),
        r_s=rng.uniform(0.05, 1.0))


def synthetic_violating_machines(rng: np.random.Generator, count: int = 20,
                                 grid: FrequencyGrid | None = None, max_trials: int = 20000,
                                 max_band_lo: float = 5.0, min_band_lo: float = 0.0) -> list:
    """Machines that pass the sweep without an exciter and fail it once a
    plain first-order exciter is added, with the violation starting in
    ``[min_band_lo, max_band_lo]`` rad/s."""
    grid = grid or FrequencyGrid()
    out = []
    for _ in range(max_trials):
        if len(out) >= count:
            break
        p = random_machine_params(rng)
        v = complex(1.0, 0.0)
        i = complex(rng.uniform(0.1, 1.5) * np.exp(1j * rng.uniform(-np.pi, np.pi)))
        k_a = float(rng.choice([20.0, 50.0, 100.0, 200.0]))
        try:
            bare, x0 = init_machine(assemble_bus_model(p), v, i)
        except InfeasibleSteadyState:
            continue
        u = np.array([-i.real, -i.imag])
        if not passivity_sweep(linearize_bus(bare, x0, u), grid).passive:
            continue
        ctrl = ControllerParams(exciter=ExciterParams(k_a=k_a, t_a=0.05))
        model, x = init_machine(assemble_bus_model(p, ctrl), v, i)
        rep = passivity_sweep(linearize_bus(model, x, u), grid)
        band = rep.violation_band
        if rep.passive or not rep.hurwitz or band is None or not min_band_lo <= band[0] <= max_band_lo:
            continue
        out.append(SyntheticMachine(model, v, i, x))
    return out


def place_at_operating_point(model: AffineBusModel, v: complex, i: complex) -> AffineBusModel:
    """Shift the offsets of a linear bus so ``x = 0`` is an equilibrium
    delivering current ``i`` at voltage ``v``."""
    u = np.array([-i.real, -i.imag])
    f0 = -model.b @ u
    y0 = np.array([v.real, v.imag]) - model.d @ u
    return AffineBusModel(model.a, model.b, model.c, model.d, f0=f0, y0=y0)


def machine_with_neighbours(rng: np.random.Generator, machine: GeneratorBusModel, x_machine: np.ndarray,
                            v: complex, i: complex, n: int = 3):
    """Machine at bus 0 of a random lossy network whose other buses are
    passive linear buses, arranged so the stacked state ``[x_machine, 0, ...]``
    is an exact equilibrium.  Returns ``(models, y, x0)``."""
    for _ in range(100):
        y = random_admittance(rng, n).complex
        if abs(y[0, 1]) < 1e-6:
            continue
        volts = np.empty(n, dtype=complex)
        volts[0] = v
        volts[2:] = rng.uniform(0.95, 1.05, n - 2) * np.exp(1j * rng.uniform(-0.3, 0.3, n - 2))
        volts[1] = (i - y[0, 0] * volts[0] - y[0, 2:] @ volts[2:]) / y[0, 1]
        if not 0.8 < abs(volts[1]) < 1.2:
            continue
        cur = y @ volts
        models = [machine] + [place_at_operating_point(random_ph_bus(rng), complex(volts[k]), complex(cur[k]))
                              for k in range(1, n)]
        x0 = np.concatenate([x_machine] + [np.zeros(m.n_states) for m in models[1:]])
        return models, y, x0
    raise InfeasibleSteadyState("could not place the machine's operating point on a random network")


def lag_example_machine() -> SyntheticMachine:
    """A bus whose plain exciter (K_a = 20, T_a = 0.05) violates the sweep
    only between roughly 0.28 and 2 rad/s.  Found by random search; kept as a
    fixed reference for lag tuning."""
    p = GeneratorParams(m=0.5690313591555196, d=0.460501729406698, xd=0.23639212263593978,
                        xq=0.2565676107466175, xd_t=0.18486567766745837, xq_t=0.18486567766745837,
                        td0_t=7.696645753738354, tq0_t=0.6031877282093749, r_s=0.6020858298347775)
    v, i = complex(1.0, 0.0), complex(-0.5917594821909653, 1.2673634947766752)
    ctrl = ControllerParams(exciter=ExciterParams(k_a=20.0, t_a=0.05))
    model, x = init_machine(assemble_bus_model(p, ctrl), v, i)
    return SyntheticMachine(model, v, i, x)
