"""Decentralized passivation: place an exciter lag stage from the local
violation band, falling back to enlarged transient reactances."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bus_models import GeneratorBusModel, GeneratorParams
from .equilibrium import init_machine
from .errors import OrderingViolated, TuningFailed
from .linear_analysis import (EPS, FrequencyGrid, LinearBusModel, PassivitySweepReport,
                              linearize_bus, passivity_sweep)


@dataclass(frozen=True)
class TuningConstraints:
    k_a: float
    t_a: float
    margin: float = 3.0
    max_tb: float = 100.0
    n_tc: int = 20

    def __post_init__(self):
        if not self.margin > 1:
            raise ValueError(f"margin must exceed 1, got {self.margin}")
        if not self.max_tb > 0:
            raise ValueError(f"max_tb must be positive, got {self.max_tb}")


@dataclass(frozen=True)
class ViolationBand:
    lo: float
    hi: float
    multi_band: bool = False


def find_violation_band(report: PassivitySweepReport) -> Optional[ViolationBand]:
    band = report.violation_band
    if band is None:
        return None
    return ViolationBand(band[0], band[1], report.n_violation_intervals > 1)


def tb_ladder(omega_lo: float, tc: TuningConstraints) -> list:
    """Candidate lag time constants, smallest first: margin/omega_lo, then x3 steps up to the cap."""
    if omega_lo <= 0:
        return [tc.max_tb]
    out = []
    t_b = tc.margin / omega_lo
    while t_b < tc.max_tb:
        out.append(t_b)
        t_b *= 3.0
    out.append(tc.max_tb)
    return out


def tc_grid(t_b: float, tc: TuningConstraints) -> np.ndarray:
    """Descending log grid in ``(1.5 t_a, t_b/2]``; empty when the interval is."""
    lo, hi = 1.5 * tc.t_a, 0.5 * t_b
    if hi <= lo:
        return np.zeros(0)
    return np.logspace(np.log10(lo), np.log10(hi), tc.n_tc + 1)[1:][::-1]


@dataclass(frozen=True)
class LagTuning:
    t_b: float
    t_c: float
    report: PassivitySweepReport
    tried: tuple = ()


def tune_lag(factory: Callable[[float, float], LinearBusModel], band: Optional[ViolationBand],
             tc: TuningConstraints, grid: FrequencyGrid | None = None,
             eps: float = EPS) -> LagTuning:
    """Search lag constants for which the rebuilt bus passes the sweep.

    ``factory(t_b, t_c)`` must return the bus linearized about its equilibrium
    with that lag stage.  Only verified pairs are returned.
    """
    grid = grid or FrequencyGrid()
    base = passivity_sweep(factory(0.0, 0.0), grid, eps)
    if base.passive:
        return LagTuning(0.0, 0.0, base)
    if band is None:
        band = find_violation_band(base)
    omega_lo = band.lo if band is not None else grid.lo
    if omega_lo >= 1.0 / tc.t_a:
        raise TuningFailed(
            f"violation starts at {omega_lo:.3g} rad/s, above the exciter pole 1/t_a = "
            f"{1.0 / tc.t_a:.3g} rad/s; a lag stage with t_c > t_a cannot act there")
    tried = []
    for t_b in tb_ladder(omega_lo, tc):
        for t_c in tc_grid(t_b, tc):
            report = passivity_sweep(factory(t_b, t_c), grid, eps)
            tried.append((t_b, t_c, report.worst[1], report.hurwitz))
            if report.passive:
                return LagTuning(float(t_b), float(t_c), report, tuple(tried))
    raise TuningFailed(f"no lag pair passes for band starting at {omega_lo:.3g} rad/s "
                       f"({len(tried)} candidates tried)", tried)


def suggest_reactance_bump(p: GeneratorParams, factor: float) -> GeneratorParams:
    if not 0 <= factor <= 0.5:
        raise ValueError(f"factor must lie in [0, 0.5], got {factor}")
    xd_t = p.xd_t * (1 + factor)
    xq_t = p.xq_t * (1 + factor)
    if xd_t > p.xd or xq_t > p.xq:
        raise OrderingViolated(
            f"scaled transient reactances ({xd_t:.4g}, {xq_t:.4g}) exceed synchronous ones "
            f"({p.xd:.4g}, {p.xq:.4g})")
    return replace(p, xd_t=xd_t, xq_t=xq_t)


def bus_factory(model: GeneratorBusModel, v: complex, i: complex, h: float = 1e-6):
    """Lag-parameterized linearizations of one machine at a fixed terminal operating point."""
    v, i = complex(v), complex(i)
    u = np.array([-i.real, -i.imag])

    def build(t_b: float, t_c: float) -> LinearBusModel:
        tuned, x = init_machine(model.with_exciter_lag(t_b, t_c), v, i)
        return linearize_bus(tuned, x, u, h)
    return build


@dataclass
class BusTuningOutcome:
    bus: int
    model: GeneratorBusModel
    t_b: float = 0.0
    t_c: float = 0.0
    bumped: bool = False
    passive: bool = False
    report: Optional[PassivitySweepReport] = None
    message: str = ""
    tried: list = field(default_factory=list)


def tune_machine(bus: int, model: GeneratorBusModel, v: complex, i: complex,
                 margin: float = 3.0, max_tb: float = 100.0, n_tc: int = 20,
                 bump_factor: float = 0.15, grid: FrequencyGrid | None = None,
                 eps: float = EPS, h: float = 1e-6) -> BusTuningOutcome:
    """Lag tuning, then one retry with enlarged transient reactances.

    A bus that already passes is returned unchanged with the bypass pair (0, 0);
    ``outcome.model`` always carries the exciter to keep.
    """
    grid = grid or FrequencyGrid()
    exc = model.controllers.exciter
    if not exc.enabled:
        return BusTuningOutcome(bus, model, message="no exciter to tune")
    tc = TuningConstraints(exc.k_a, exc.t_a, margin, max_tb, n_tc)
    v, i = complex(v), complex(i)
    current, x = init_machine(model, v, i)
    as_is = passivity_sweep(linearize_bus(current, x, np.array([-i.real, -i.imag]), h), grid, eps)
    if as_is.passive:
        return BusTuningOutcome(bus, model, 0.0, 0.0, passive=True, report=as_is,
                                message="already passive")
    candidates = [(model, False)]
    if bump_factor > 0:
        try:
            candidates.append((replace(model, params=suggest_reactance_bump(model.params, bump_factor)), True))
        except OrderingViolated as err:
            bump_note = str(err)
        else:
            bump_note = ""
    messages = []
    tried = []
    for cand, bumped in candidates:
        factory = bus_factory(cand, v, i, h)
        try:
            res = tune_lag(factory, None, tc, grid, eps)
        except TuningFailed as err:
            messages.append(("bumped: " if bumped else "") + str(err))
            tried.extend(err.tried)
            continue
        return BusTuningOutcome(bus, cand.with_exciter_lag(res.t_b, res.t_c), res.t_b, res.t_c,
                                bumped, True, res.report, "ok", list(res.tried))
    if bump_factor > 0 and bump_note:
        messages.append(bump_note)
    last = passivity_sweep(bus_factory(model, v, i, h)(0.0, 0.0), grid, eps)
    return BusTuningOutcome(bus, model, report=last, message="; ".join(messages), tried=tried)
