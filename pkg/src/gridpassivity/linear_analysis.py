"""Linearization, frequency-domain passivity test and closed-loop eigenanalysis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bus_models import AffineBusModel, BusDynamicModel
from .errors import IllPosedInterconnection, NonFiniteDerivative, ResolventSingular

EPS = 1e-9
STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class LinearBusModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.a).shape[0]
        shapes = {"a": (k, k), "b": (k, 2), "c": (2, k), "d": (2, 2)}
        for name, shape in shapes.items():
            val = np.asarray(getattr(self, name), dtype=float).reshape(shape)
            if not np.all(np.isfinite(val)):
                raise NonFiniteDerivative(f"matrix {name} has non-finite entries")
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    def transfer(self, omega: np.ndarray) -> np.ndarray:
        """``G(j w)`` for each ``w``; shape ``(len(w), 2, 2)``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        k = self.n_states
        if k == 0:
            return np.broadcast_to(self.d.astype(complex), (omega.size, 2, 2)).copy()
        m = 1j * omega[:, None, None] * np.eye(k) - self.a
        x = np.linalg.solve(m, np.broadcast_to(self.b.astype(complex), (omega.size, k, 2)))
        return self.c @ x + self.d

    def as_bus_model(self) -> AffineBusModel:
        return AffineBusModel(self.a, self.b, self.c, self.d)


def _step(value: float, h: float) -> float:
    return h * max(1.0, abs(value))


def linearize_bus(model: BusDynamicModel, x_hat, u_hat, h: float = 1e-6) -> LinearBusModel:
    """Central differences of ``f`` and ``g`` with a step relative to each coordinate."""
    x_hat = np.asarray(x_hat, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    k = model.n_states
    a = np.zeros((k, k))
    c = np.zeros((2, k))
    b = np.zeros((k, 2))
    d = np.zeros((2, 2))
    for j in range(k):
        s = _step(x_hat[j], h)
        xp, xm = x_hat.copy(), x_hat.copy()
        xp[j] += s
        xm[j] -= s
        a[:, j] = (model.f(xp, u_hat) - model.f(xm, u_hat)) / (2 * s)
        c[:, j] = (model.g(xp, u_hat) - model.g(xm, u_hat)) / (2 * s)
    for j in range(2):
        s = _step(u_hat[j], h)
        up, um = u_hat.copy(), u_hat.copy()
        up[j] += s
        um[j] -= s
        b[:, j] = (model.f(x_hat, up) - model.f(x_hat, um)) / (2 * s)
        d[:, j] = (model.g(x_hat, up) - model.g(x_hat, um)) / (2 * s)
    for name, val in (("A", a), ("B", b), ("C", c), ("D", d)):
        if not np.all(np.isfinite(val)):
            raise NonFiniteDerivative(f"non-finite entries in {name}")
    return LinearBusModel(a, b, c, d)


def linearize_equilibrium(ep, h: float = 1e-6) -> list:
    return [linearize_bus(m, x, u, h) for m, x, u in zip(ep.models, ep.x_hat, ep.u_hat)]


# -- passivity sweep ---------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    lo: float = 1e-2
    hi: float = 1e3
    n: int = 400
    include_dc: bool = True

    def __post_init__(self):
        if not (0 < self.lo < self.hi) or self.n < 1:
            raise ValueError("grid needs 0 < lo < hi and n >= 1")

    def points(self) -> np.ndarray:
        return np.logspace(np.log10(self.lo), np.log10(self.hi), self.n)

    @classmethod
    def parse(cls, text: str, include_dc: bool = True) -> "FrequencyGrid":
        """``'lo:hi:n'``"""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like lo:hi:n, got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]), include_dc)


@dataclass(frozen=True)
class PassivitySweepReport:
    grid: np.ndarray
    min_eig: np.ndarray
    hurwitz: bool
    abscissa: float
    eps: float = EPS

    @property
    def violating(self) -> np.ndarray:
        return self.min_eig < -self.eps

    @property
    def passive(self) -> bool:
        return bool(self.hurwitz and not self.violating.any())

    @property
    def violation_band(self) -> Optional[tuple]:
        w = self.grid[self.violating]
        return (float(w.min()), float(w.max())) if w.size else None

    @property
    def n_violation_intervals(self) -> int:
        v = self.violating.astype(int)
        return int(v[0] + np.count_nonzero(np.diff(v) == 1)) if v.size else 0

    @property
    def worst(self) -> tuple:
        k = int(np.argmin(self.min_eig))
        return float(self.grid[k]), float(self.min_eig[k])


def hermitian_part_eigs(g: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``G + G^H`` for a stack of 2x2 matrices."""
    herm = g + np.conj(np.swapaxes(g, -1, -2))
    return np.linalg.eigvalsh(herm)


def passivity_sweep(lm: LinearBusModel, grid: FrequencyGrid | None = None,
                    eps: float = EPS, singular_tol: float = 1e-12) -> PassivitySweepReport:
    grid = grid or FrequencyGrid()
    omega = grid.points()
    k = lm.n_states
    eig_a = np.linalg.eigvals(lm.a) if k else np.zeros(0)
    abscissa = float(eig_a.real.max()) if k else -np.inf
    scale = max(1.0, float(np.abs(lm.a).max())) if k else 1.0
    if k:
        # jw hits an undamped eigenvalue of A
        hit = np.abs(eig_a[None, :] - 1j * omega[:, None]) < singular_tol * scale
        if hit.any():
            raise ResolventSingular(float(omega[np.argwhere(hit)[0, 0]]))
    if grid.include_dc and (k == 0 or np.min(np.abs(eig_a)) > singular_tol * scale):
        omega = np.concatenate([[0.0], omega])
    g = lm.transfer(omega)
    min_eig = hermitian_part_eigs(g)[:, 0]
    return PassivitySweepReport(omega, min_eig, abscissa < -STABILITY_MARGIN, abscissa, eps)


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    abscissa: float


def check_open_loop_stability(lm: LinearBusModel) -> StabilityResult:
    if lm.n_states == 0:
        return StabilityResult(True, -np.inf)
    abscissa = float(np.linalg.eigvals(lm.a).real.max())
    return StabilityResult(abscissa < -STABILITY_MARGIN, abscissa)


# -- closed loop -------------------------------------------------------------

def damping_ratio(lam) -> np.ndarray | float:
    """``-Re(l)/|l|``; NaN at the origin."""
    lam = np.asarray(lam, dtype=complex)
    mag = np.abs(lam)
    with np.errstate(invalid="ignore", divide="ignore"):
        zeta = np.where(mag > 0, -lam.real / np.where(mag > 0, mag, 1.0), np.nan)
    return float(zeta) if zeta.ndim == 0 else zeta


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: np.ndarray
    damping_ratios: np.ndarray
    zero_tol: float = 1e-6

    @property
    def near_zero(self) -> np.ndarray:
        return self.eigenvalues[np.abs(self.eigenvalues) < self.zero_tol]

    @property
    def abscissa(self) -> float:
        return float(self.eigenvalues.real.max()) if self.eigenvalues.size else -np.inf

    @property
    def abscissa_excluding_rotational(self) -> float:
        """Spectral abscissa with the single eigenvalue nearest the origin
        removed when it is within ``zero_tol``."""
        ev = self.eigenvalues
        if ev.size == 0:
            return -np.inf
        k = int(np.argmin(np.abs(ev)))
        if abs(ev[k]) < self.zero_tol:
            ev = np.delete(ev, k)
        return float(ev.real.max()) if ev.size else -np.inf

    def oscillatory(self, min_freq: float = 0.1) -> np.ndarray:
        """Indices of modes with positive imaginary part above ``min_freq`` rad/s."""
        return np.flatnonzero(self.eigenvalues.imag > min_freq)


def _stack(lms: Sequence[LinearBusModel]):
    n = len(lms)
    sizes = [lm.n_states for lm in lms]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    ktot = int(offs[-1])
    a = np.zeros((ktot, ktot))
    b = np.zeros((ktot, 2 * n))
    c = np.zeros((2 * n, ktot))
    d = np.zeros((2 * n, 2 * n))
    for i, lm in enumerate(lms):
        s = slice(offs[i], offs[i + 1])
        a[s, s] = lm.a
        b[s, i], b[s, n + i] = lm.b[:, 0], lm.b[:, 1]
        c[i, s], c[n + i, s] = lm.c[0], lm.c[1]
        d[i, i], d[i, n + i] = lm.d[0, 0], lm.d[0, 1]
        d[n + i, i], d[n + i, n + i] = lm.d[1, 0], lm.d[1, 1]
    return a, b, c, d


def closed_loop_matrix(lms: Sequence[LinearBusModel], h: np.ndarray) -> np.ndarray:
    """State matrix of the buses under ``u = -h y``."""
    h = np.asarray(getattr(h, "h", h), dtype=float)
    a, b, c, d = _stack(lms)
    k = np.eye(h.shape[0]) + h @ d
    if 1.0 / np.linalg.cond(k, 1) < 1e-12:
        raise IllPosedInterconnection("I + H D is numerically singular")
    return a - b @ np.linalg.solve(k, h @ c)


def full_system_eigenanalysis(lms: Sequence[LinearBusModel], h) -> EigenReport:
    ev = np.linalg.eigvals(closed_loop_matrix(lms, h))
    ev = ev[np.lexsort((ev.imag, ev.real))[::-1]]
    return EigenReport(ev, np.asarray(damping_ratio(ev)))
