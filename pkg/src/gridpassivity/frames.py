"""Reference-frame machinery: three-phase waveforms, Park's transform and the
rotation between the system frame and a machine's local (q, d) frame.

Conventions
-----------
A phasor in the system frame is ``a + jb``.  In a machine frame rotated by
``delta`` the same quantity is ``q + jd`` with::

    [q]   [ cos d   sin d] [a]
    [d] = [-sin d   cos d] [b]

i.e. ``q + jd = exp(-j*delta) * (a + jb)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
_SHIFT = 2.0 * math.pi / 3.0


class ThreePhaseSample(NamedTuple):
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class ComplexPhasor:
    """Rectangular phasor ``re + j*im`` (per unit)."""

    re: float
    im: float

    @classmethod
    def from_polar(cls, magnitude: float, angle: float) -> "ComplexPhasor":
        return cls(magnitude * math.cos(angle), magnitude * math.sin(angle))

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexPhasor":
        return cls(float(z.real), float(z.imag))

    @property
    def magnitude(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def angle(self) -> float:
        return math.atan2(self.im, self.re)

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def as_array(self) -> np.ndarray:
        return np.array([self.re, self.im])


@dataclass(frozen=True)
class FrameAngle:
    """Angle between a machine frame and the system frame, kept in [0, 2pi)."""

    delta: float

    def __post_init__(self):
        object.__setattr__(self, "delta", normalize_angle(self.delta))

    def __float__(self) -> float:
        return self.delta


def normalize_angle(angle: float) -> float:
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod can return exactly 2pi after the shift for tiny negative inputs
    if wrapped >= TWO_PI:
        wrapped -= TWO_PI
    return wrapped


def _angle(delta) -> float:
    return float(delta.delta) if isinstance(delta, FrameAngle) else float(delta)


def balanced_waveform(amplitude: float, gamma: float) -> ThreePhaseSample:
    """Instantaneous values of a balanced positive-sequence set with rms
    ``amplitude`` and phase ``gamma``."""
    if amplitude < 0:
        raise ValueError(f"amplitude must be non-negative, got {amplitude}")
    peak = math.sqrt(2.0) * amplitude
    return ThreePhaseSample(peak * math.cos(gamma),
                            peak * math.cos(gamma - _SHIFT),
                            peak * math.cos(gamma + _SHIFT))


def park_matrix(rho: float) -> np.ndarray:
    """Orthogonal 0dq transform ``sqrt(2/3) * P(rho)``; rows ordered (0, d, q)."""
    angles = np.array([rho, rho - _SHIFT, rho + _SHIFT])
    p = np.vstack([np.full(3, 1.0 / math.sqrt(2.0)), np.cos(angles), np.sin(angles)])
    return math.sqrt(2.0 / 3.0) * p


def park_transform(sample, rho: float) -> tuple[float, float, float]:
    x0, xd, xq = park_matrix(rho) @ np.asarray(sample, dtype=float)
    return float(x0), float(xd), float(xq)


def inverse_park_transform(x0dq, rho: float) -> ThreePhaseSample:
    a, b, c = park_matrix(rho).T @ np.asarray(x0dq, dtype=float)
    return ThreePhaseSample(float(a), float(b), float(c))


def rotation(delta) -> np.ndarray:
    """T(delta): system-frame (a, b) components to machine-frame (q, d)."""
    d = _angle(delta)
    c, s = math.cos(d), math.sin(d)
    return np.array([[c, s], [-s, c]])


def to_machine_frame(v, delta) -> tuple[float, float]:
    if isinstance(v, ComplexPhasor):
        a, b = v.re, v.im
    else:
        a, b = v
    d = _angle(delta)
    c, s = math.cos(d), math.sin(d)
    return c * a + s * b, -s * a + c * b


def to_system_frame(vqd, delta) -> ComplexPhasor:
    q, d_ = vqd
    d = _angle(delta)
    c, s = math.cos(d), math.sin(d)
    return ComplexPhasor(c * q - s * d_, s * q + c * d_)
