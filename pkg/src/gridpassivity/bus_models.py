"""Per-bus nonlinear dynamics.

A bus model maps the input ``u = (-I_a, -I_b)`` (current drawn from the bus by
the network, system frame) to the output ``y = (V_a, V_b)``.  Every model in
this module is affine in ``u`` at the output::

    y = e(x) + Z(x) u

which lets the simulator resolve the algebraic loop with one linear solve.

Units: angles in rad, frequency deviation in rad/s, everything electrical in
per unit on the system base.  ``m`` is in pu*s^2/rad (``2H/omega_s``) and ``d``
in pu per rad/s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidTimeConstant, ModelError, VoltageCollapse
from .frames import ComplexPhasor, rotation

MIN_VOLTAGE = 1e-6


# -- parameters --------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    """Fourth-order machine constants.

    ``p_ref`` and ``e_fd`` are operating-point quantities: the mechanical
    power and field voltage held when no governor or exciter is present.
    Equilibrium initialization fills them in.
    """

    m: float
    d: float
    xd: float
    xq: float
    xd_t: float
    xq_t: float
    td0_t: float
    tq0_t: float
    r_s: float = 0.0
    p_ref: float = 0.0
    e_fd: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.m > 0:
            problems.append(f"m must be positive, got {self.m}")
        if not (self.xd >= self.xd_t > 0):
            problems.append(f"need xd >= xd_t > 0, got xd={self.xd}, xd_t={self.xd_t}")
        if not (self.xq >= self.xq_t > 0):
            problems.append(f"need xq >= xq_t > 0, got xq={self.xq}, xq_t={self.xq_t}")
        if not self.r_s >= 0:
            problems.append(f"r_s must be non-negative, got {self.r_s}")
        if problems:
            raise ModelError("; ".join(problems))
        if not (self.td0_t > 0 and self.tq0_t > 0):
            raise InvalidTimeConstant(
                f"open-circuit time constants must be positive, got {self.td0_t}, {self.tq0_t}")

    @property
    def stator_impedance(self) -> np.ndarray:
        """Z with ``[Vq; Vd] = [E'q; E'd] - Z [Iq; Id]``."""
        return np.array([[self.r_s, -self.xd_t], [self.xq_t, self.r_s]])


@dataclass(frozen=True)
class MachineState:
    delta: float
    d_omega: float
    eq_t: float
    ed_t: float

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.d_omega, self.eq_t, self.ed_t])


@dataclass(frozen=True)
class GovernorParams:
    t_g: float = 0.5
    droop_r: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if self.enabled and not (self.t_g > 0 and self.droop_r > 0):
            raise InvalidTimeConstant(
                f"governor needs t_g > 0 and droop_r > 0, got {self.t_g}, {self.droop_r}")


@dataclass(frozen=True)
class ExciterParams:
    """``K_a/(1 + s T_a) * (1 + s T_c)/(1 + s T_b)``; ``t_b = t_c = 0`` drops the lag."""

    k_a: float = 20.0
    t_a: float = 0.05
    t_b: float = 0.0
    t_c: float = 0.0
    v_ref: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if not self.enabled:
            return
        if not self.t_a > 0:
            raise InvalidTimeConstant(f"exciter t_a must be positive, got {self.t_a}")
        if self.t_b < 0 or self.t_c < 0:
            raise InvalidTimeConstant(f"lag constants must be non-negative, got {self.t_b}, {self.t_c}")
        if self.t_b == 0 and self.t_c != 0:
            raise InvalidTimeConstant("t_c > 0 with t_b = 0 gives an improper lag stage")

    @property
    def has_lag(self) -> bool:
        return self.t_b > 0

    def transfer(self, s):
        """Exciter transfer function evaluated at complex ``s``."""
        s = np.asarray(s, dtype=complex)
        tf = self.k_a / (1 + s * self.t_a)
        if self.has_lag:
            tf = tf * (1 + s * self.t_c) / (1 + s * self.t_b)
        return tf


@dataclass(frozen=True)
class PssParams:
    k_w: float = 0.0
    t_w: float = 10.0
    t_1: float = 0.05
    t_2: float = 0.02
    t_3: float = 3.0
    t_4: float = 5.4
    enabled: bool = False

    def __post_init__(self):
        if not self.enabled:
            return
        if not (self.t_w > 0 and self.t_2 > 0 and self.t_4 > 0):
            raise InvalidTimeConstant("PSS washout and lag time constants must be positive")
        if self.t_1 < 0 or self.t_3 < 0:
            raise InvalidTimeConstant("PSS lead time constants must be non-negative")

    def transfer(self, s):
        s = np.asarray(s, dtype=complex)
        if not self.enabled:
            return np.zeros_like(s)
        return (self.k_w * s * self.t_w / (1 + s * self.t_w)
                * (1 + s * self.t_1) / (1 + s * self.t_2)
                * (1 + s * self.t_3) / (1 + s * self.t_4))


@dataclass(frozen=True)
class ControllerParams:
    governor: GovernorParams = field(default_factory=lambda: GovernorParams(enabled=False))
    exciter: ExciterParams = field(default_factory=lambda: ExciterParams(enabled=False))
    pss: PssParams = field(default_factory=PssParams)

    def __post_init__(self):
        if self.pss.enabled and not self.exciter.enabled:
            raise ModelError("a PSS needs an exciter to act through")


# -- component equations -----------------------------------------------------

def electrical_power(eq_t, ed_t, iq, id_, p: GeneratorParams):
    return eq_t * iq + ed_t * id_ + (p.xd_t - p.xq_t) * id_ * iq


def machine_derivatives(s, idq, p: GeneratorParams, pm: float, ef: float,
                        order: int = 4) -> np.ndarray:
    """Time derivative of ``(delta, d_omega, E'q, E'd)``.

    ``order`` 3 freezes E'd, order 2 additionally freezes E'q.
    """
    delta, w, eq_t, ed_t = _unpack_state(s)
    iq, id_ = idq
    pe = electrical_power(eq_t, ed_t, iq, id_, p)
    d_eq = (ef - eq_t + id_ * (p.xd - p.xd_t)) / p.td0_t if order >= 3 else 0.0
    d_ed = (-ed_t - iq * (p.xq - p.xq_t)) / p.tq0_t if order >= 4 else 0.0
    return np.array([w, (pm - pe - p.d * w) / p.m, d_eq, d_ed])


def _unpack_state(s):
    if isinstance(s, MachineState):
        return s.delta, s.d_omega, s.eq_t, s.ed_t
    return s[0], s[1], s[2], s[3]


def stator_output_dq(s, idq, p: GeneratorParams) -> tuple[float, float]:
    _, _, eq_t, ed_t = _unpack_state(s)
    iq, id_ = idq
    vq = eq_t - p.r_s * iq + p.xd_t * id_
    vd = ed_t - p.xq_t * iq - p.r_s * id_
    return vq, vd


def system_frame_terms(delta: float, eq_t: float, ed_t: float,
                       p: GeneratorParams) -> tuple[np.ndarray, np.ndarray]:
    """``(e, Z_sys)`` with ``V_ab = e - Z_sys I_ab``."""
    t = rotation(delta)
    e = t.T @ np.array([eq_t, ed_t])
    z = t.T @ p.stator_impedance @ t
    return e, z


def bus_output_system_frame(s, iab, p: GeneratorParams) -> ComplexPhasor:
    delta, _, eq_t, ed_t = _unpack_state(s)
    e, z = system_frame_terms(delta, eq_t, ed_t, p)
    v = e - z @ np.asarray(iab, dtype=float)
    return ComplexPhasor(float(v[0]), float(v[1]))


def governor_derivatives(pm: float, d_omega: float, gp: GovernorParams, p_ref: float) -> float:
    return (-pm + p_ref - d_omega / gp.droop_r) / gp.t_g


def exciter_derivatives(xe, eg_error: float, ep: ExciterParams):
    """Returns ``(d xe/dt, ef)`` for states ``xe = [ef]`` or ``[ef, x_lag]``."""
    if not ep.t_a > 0:
        raise InvalidTimeConstant(f"exciter t_a must be positive, got {ep.t_a}")
    ef = xe[0]
    if ep.has_lag:
        x_lag = xe[1]
        ratio = ep.t_c / ep.t_b
        lag_out = ratio * eg_error + (1.0 - ratio) * x_lag
        return np.array([(ep.k_a * lag_out - ef) / ep.t_a, (eg_error - x_lag) / ep.t_b]), ef
    return np.array([(ep.k_a * eg_error - ef) / ep.t_a]), ef


def pss_derivatives(xp, d_omega: float, pp: PssParams):
    """Washout then two lead-lag stages.  Returns ``(d xp/dt, signal)``."""
    if not pp.enabled:
        return np.zeros(0), 0.0
    x1, x2, x3 = xp
    y1 = pp.k_w * d_omega - x1
    r1 = pp.t_1 / pp.t_2
    y2 = r1 * y1 + (1.0 - r1) * x2
    r2 = pp.t_3 / pp.t_4
    y3 = r2 * y2 + (1.0 - r2) * x3
    return np.array([y1 / pp.t_w, (y1 - x2) / pp.t_2, (y2 - x3) / pp.t_4]), y3


# -- assembled bus -----------------------------------------------------------

class BusDynamicModel:
    """Interface shared by all bus models used in analysis and simulation."""

    n_states: int
    state_names: tuple
    omega_index: Optional[int] = None
    delta_index: Optional[int] = None

    def output_terms(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(e, Z)`` with ``y = e + Z u``."""
        raise NotImplementedError

    def f(self, x, u) -> np.ndarray:
        raise NotImplementedError

    def g(self, x, u) -> np.ndarray:
        e, z = self.output_terms(x)
        return e + z @ np.asarray(u, dtype=float)


@dataclass(frozen=True)
class GeneratorBusModel(BusDynamicModel):
    params: GeneratorParams
    controllers: ControllerParams = field(default_factory=ControllerParams)
    order: int = 4

    def __post_init__(self):
        if self.order not in (2, 3, 4):
            raise ModelError(f"machine order must be 2, 3 or 4, got {self.order}")
        names = ["delta", "d_omega", "eq_t", "ed_t"]
        idx = {}
        c = self.controllers
        if c.governor.enabled:
            idx["pm"] = len(names)
            names.append("pm")
        if c.exciter.enabled:
            idx["ef"] = len(names)
            names.append("ef")
            if c.exciter.has_lag:
                names.append("x_lag")
        if c.pss.enabled:
            idx["pss"] = len(names)
            names += ["pss_washout", "pss_lead1", "pss_lead2"]
        object.__setattr__(self, "state_names", tuple(names))
        object.__setattr__(self, "n_states", len(names))
        object.__setattr__(self, "_idx", idx)

    omega_index = 1
    delta_index = 0

    def output_terms(self, x):
        return system_frame_terms(x[0], x[2], x[3], self.params)

    def voltage(self, x, u) -> np.ndarray:
        return self.g(x, u)

    def f(self, x, u):
        x = np.asarray(x, dtype=float)
        p, c, idx = self.params, self.controllers, self._idx
        delta, w = x[0], x[1]
        t = rotation(delta)
        iab = -np.asarray(u, dtype=float)
        iq, id_ = t @ iab
        pm = x[idx["pm"]] if "pm" in idx else p.p_ref
        ef = x[idx["ef"]] if "ef" in idx else p.e_fd
        dx = np.empty(self.n_states)
        dx[:4] = machine_derivatives(x, (iq, id_), p, pm, ef, self.order)
        if "pm" in idx:
            dx[idx["pm"]] = governor_derivatives(pm, w, c.governor, p.p_ref)
        signal = 0.0
        if "pss" in idx:
            k = idx["pss"]
            dx[k:k + 3], signal = pss_derivatives(x[k:k + 3], w, c.pss)
        if "ef" in idx:
            vq, vd = stator_output_dq(x, (iq, id_), p)
            vmag = math.hypot(vq, vd)
            if vmag < MIN_VOLTAGE:
                raise VoltageCollapse(f"terminal voltage {vmag:.3e} pu below {MIN_VOLTAGE}")
            k = idx["ef"]
            nexc = 2 if c.exciter.has_lag else 1
            dx[k:k + nexc], _ = exciter_derivatives(
                x[k:k + nexc], c.exciter.v_ref - vmag + signal, c.exciter)
        return dx

    def with_exciter_lag(self, t_b: float, t_c: float) -> "GeneratorBusModel":
        exc = replace(self.controllers.exciter, t_b=t_b, t_c=t_c)
        return replace(self, controllers=replace(self.controllers, exciter=exc))

    def machine_state(self, x) -> MachineState:
        return MachineState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


def assemble_bus_model(p: GeneratorParams, c: ControllerParams | None = None,
                       order: int = 4) -> GeneratorBusModel:
    return GeneratorBusModel(p, c if c is not None else ControllerParams(), order)


@dataclass(frozen=True)
class AffineBusModel(BusDynamicModel):
    """``x' = A x + B u + f0``, ``y = C x + D u + y0``.

    Used for planted test models and for synthetic linear buses.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    f0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    omega_index: Optional[int] = None
    delta_index: Optional[int] = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        k = a.shape[0]
        b = np.asarray(self.b, dtype=float).reshape(k, 2)
        c = np.asarray(self.c, dtype=float).reshape(2, k)
        d = np.asarray(self.d, dtype=float).reshape(2, 2)
        for name, val in (("a", a), ("b", b), ("c", c), ("d", d)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "f0", np.zeros(k) if self.f0 is None else np.asarray(self.f0, float))
        object.__setattr__(self, "y0", np.zeros(2) if self.y0 is None else np.asarray(self.y0, float))
        object.__setattr__(self, "n_states", k)
        object.__setattr__(self, "state_names", tuple(f"x{i}" for i in range(k)))

    def f(self, x, u):
        return self.a @ np.asarray(x, float) + self.b @ np.asarray(u, float) + self.f0

    def output_terms(self, x):
        return self.c @ np.asarray(x, float) + self.y0, self.d


@dataclass(frozen=True)
class CallableBusModel(BusDynamicModel):
    """Wraps user functions ``f(x, u)`` and ``output_terms(x)``."""

    rhs: Callable
    terms: Callable
    n_states: int
    omega_index: Optional[int] = None
    delta_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(f"x{i}" for i in range(self.n_states)))

    def f(self, x, u):
        return np.asarray(self.rhs(np.asarray(x, float), np.asarray(u, float)), dtype=float)

    def output_terms(self, x):
        e, z = self.terms(np.asarray(x, float))
        return np.asarray(e, float), np.asarray(z, float)
