"""Admittance matrices, the real 2N x 2N network block and its passivity
certificate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (DimensionMismatch, IllPosedInterconnection, IndexOutOfRange,
                     ZeroImpedanceBranch)

PASSIVITY_EPS = 1e-9


@dataclass(frozen=True)
class BranchSpec:
    """Pi-equivalent branch.  ``tap`` is the off-nominal ratio on the from side."""

    from_bus: object
    to_bus: object
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"branch {self.from_bus}-{self.to_bus} is a self loop")
        if self.tap <= 0:
            raise ValueError(f"tap ratio must be positive, got {self.tap}")

    @property
    def series_admittance(self) -> complex:
        z = complex(self.r, self.x)
        if z == 0:
            raise ZeroImpedanceBranch(
                f"branch {self.from_bus}-{self.to_bus} has zero series impedance")
        return 1.0 / z


@dataclass(frozen=True)
class AdmittancePair:
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape != b.shape:
            raise DimensionMismatch(f"G {g.shape} and B {b.shape} must be equal and square")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_complex(cls, y) -> "AdmittancePair":
        y = np.asarray(y, dtype=complex)
        return cls(y.real.copy(), y.imag.copy())

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def complex(self) -> np.ndarray:
        return self.g + 1j * self.b


@dataclass(frozen=True)
class NetworkBlockMatrix:
    """``h = [[G, -B], [B, G]]`` acting on ``[Va; Vb]``."""

    h: np.ndarray

    @property
    def n(self) -> int:
        return self.h.shape[0] // 2

    @property
    def symmetric_part(self) -> np.ndarray:
        return 0.5 * (self.h + self.h.T)

    @property
    def skew_part(self) -> np.ndarray:
        return 0.5 * (self.h - self.h.T)


def build_admittance(branches: Sequence[BranchSpec], n_buses: int,
                     bus_index: Mapping | None = None) -> AdmittancePair:
    """Nodal admittance of the branch set; loads are not included.

    Without ``bus_index`` the branch endpoints must already be 0-based indices.
    """
    y = np.zeros((n_buses, n_buses), dtype=complex)
    for br in branches:
        i = _index(br.from_bus, n_buses, bus_index)
        j = _index(br.to_bus, n_buses, bus_index)
        ys = br.series_admittance
        half_shunt = 0.5j * br.b
        t = br.tap
        y[i, i] += ys / (t * t) + half_shunt
        y[j, j] += ys + half_shunt
        y[i, j] -= ys / t
        y[j, i] -= ys / t
    return AdmittancePair.from_complex(y)


def _index(bus, n, bus_index):
    if bus_index is not None:
        if bus not in bus_index:
            raise IndexOutOfRange(f"unknown bus {bus!r}")
        return bus_index[bus]
    if not isinstance(bus, (int, np.integer)) or not 0 <= bus < n:
        raise IndexOutOfRange(f"bus index {bus!r} outside 0..{n - 1}")
    return int(bus)


def assemble_block(y: AdmittancePair) -> NetworkBlockMatrix:
    return NetworkBlockMatrix(np.block([[y.g, -y.b], [y.b, y.g]]))


def network_map(h: NetworkBlockMatrix, va, vb) -> tuple[np.ndarray, np.ndarray]:
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    n = h.n
    if va.shape != (n,) or vb.shape != (n,):
        raise DimensionMismatch(f"voltage vectors must have length {n}")
    i = h.h @ np.concatenate([va, vb])
    return i[:n], i[n:]


def machine_frame_currents(y: AdmittancePair, vq, vd, deltas):
    """Injected currents in each bus's own (q, d) frame, from the (q, d)
    voltages of every bus.  Evaluates the trigonometric double sum directly
    with ``eta_ij = delta_i - delta_j``."""
    vq = np.asarray(vq, dtype=float)
    vd = np.asarray(vd, dtype=float)
    deltas = np.array([float(d) for d in deltas])
    n = y.n
    if vq.shape != (n,) or vd.shape != (n,) or deltas.shape != (n,):
        raise DimensionMismatch(f"expected {n} buses")
    eta = deltas[:, None] - deltas[None, :]
    c, s = np.cos(eta), np.sin(eta)
    g, b = y.g, y.b
    iq = ((g * c + b * s) * vq[None, :] + (g * s - b * c) * vd[None, :]).sum(axis=1)
    id_ = ((-g * s + b * c) * vq[None, :] + (g * c + b * s) * vd[None, :]).sum(axis=1)
    return iq, id_


@dataclass(frozen=True)
class PassivityCertificate:
    centers: np.ndarray
    radii: np.ndarray
    disc_ok: np.ndarray
    min_eigenvalue: float
    eps: float = PASSIVITY_EPS

    @property
    def passes(self) -> bool:
        return self.min_eigenvalue >= -self.eps

    @property
    def diagonally_dominant(self) -> bool:
        return bool(np.all(self.disc_ok))


def certify_network_passivity(y: AdmittancePair, eps: float = PASSIVITY_EPS) -> PassivityCertificate:
    """Gershgorin report on G plus the authoritative eigenvalue test.

    The symmetric part of the block matrix is ``blockdiag(G, G)``, so the
    minimum eigenvalue is that of ``(G + G^T)/2``.  The disc test is only a
    diagnostic: shunt charging and taps can break exact dominance.
    """
    g = y.g
    centers = np.diag(g).copy()
    radii = np.abs(g).sum(axis=1) - np.abs(centers)
    disc_ok = centers >= radii - eps
    sym = assemble_block(y).symmetric_part
    min_eig = float(np.linalg.eigvalsh(sym).min()) if g.size else 0.0
    return PassivityCertificate(centers, radii, disc_ok, min_eig, eps)


def supply_rate(h: NetworkBlockMatrix, va, vb) -> float:
    """``[Va; Vb]^T h [Va; Vb]``, the power absorbed by the network."""
    ia, ib = network_map(h, va, vb)
    return float(np.dot(va, ia) + np.dot(vb, ib))


def to_pair_layout(h: np.ndarray) -> np.ndarray:
    """Permute a ``[a-block; b-block]`` matrix into per-bus ``(a_i, b_i)`` pairs."""
    n = h.shape[0] // 2
    order = np.empty(2 * n, dtype=int)
    order[0::2] = np.arange(n)
    order[1::2] = np.arange(n) + n
    return h[np.ix_(order, order)]


def kron_reduce(y, keep) -> np.ndarray:
    """Eliminate every bus not in ``keep`` (zero injection there)."""
    y = np.asarray(y, dtype=complex)
    keep = np.asarray(keep, dtype=int)
    drop = np.setdiff1d(np.arange(y.shape[0]), keep)
    if drop.size == 0:
        return y[np.ix_(keep, keep)].copy()
    y_kk = y[np.ix_(keep, keep)]
    y_kd = y[np.ix_(keep, drop)]
    y_dk = y[np.ix_(drop, keep)]
    y_dd = y[np.ix_(drop, drop)]
    return y_kk - y_kd @ np.linalg.solve(y_dd, y_dk)


def block_layout(per_bus: Sequence[np.ndarray]) -> np.ndarray:
    """Place per-bus 2x2 matrices on the diagonal in ``[a-block; b-block]`` layout."""
    n = len(per_bus)
    out = np.zeros((2 * n, 2 * n))
    for i, z in enumerate(per_bus):
        out[i, i], out[i, n + i] = z[0, 0], z[0, 1]
        out[n + i, i], out[n + i, n + i] = z[1, 0], z[1, 1]
    return out


def interface_currents(h: np.ndarray, e_blk: np.ndarray, z_blk: np.ndarray,
                       rcond_min: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``I = h V`` together with ``V = e - Z I``.

    Vectors use the ``[a-block; b-block]`` layout.  Returns ``(I, V)``.
    """
    k = np.eye(h.shape[0]) + h @ z_blk
    if h.size and 1.0 / np.linalg.cond(k, 1) < rcond_min:
        raise IllPosedInterconnection("I + H Z is numerically singular")
    i = np.linalg.solve(k, h @ e_blk)
    return i, e_blk - z_blk @ i
