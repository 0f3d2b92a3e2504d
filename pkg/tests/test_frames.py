import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridpassivity.frames import (ComplexPhasor, FrameAngle, balanced_waveform, inverse_park_transform,
                                  normalize_angle, park_matrix, park_transform, rotation,
                                  to_machine_frame, to_system_frame)

angles = st.floats(-50.0, 50.0, allow_nan=False)
mags = st.floats(0.0, 10.0, allow_nan=False)
comps = st.floats(-10.0, 10.0, allow_nan=False)


def test_balanced_waveform_unit_zero_phase():
    s = balanced_waveform(1.0, 0.0)
    assert s.a == pytest.approx(math.sqrt(2), abs=1e-15)
    assert s.b == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)
    assert s.c == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)


def test_zero_amplitude_waveform():
    assert tuple(balanced_waveform(0.0, 1.3)) == (0.0, 0.0, 0.0)


def test_waveform_matches_scalar_cosines():
    s = balanced_waveform(0.7, 0.4)
    peak = 0.7 * math.sqrt(2)
    expected = [peak * math.cos(0.4), peak * math.cos(0.4 - 2 * math.pi / 3),
                peak * math.cos(0.4 + 2 * math.pi / 3)]
    assert np.allclose(s, expected, atol=1e-15, rtol=0)


def test_negative_amplitude_rejected():
    with pytest.raises(ValueError):
        balanced_waveform(-0.1, 0.0)


@given(mags, angles)
def test_balanced_phases_sum_to_zero(m, g):
    assert abs(sum(balanced_waveform(m, g))) <= 1e-12 * max(1.0, m)


@given(mags, angles)
def test_park_aligned_frame_projects_onto_d_axis(m, g):
    x0, xd, xq = park_transform(balanced_waveform(m, g), g)
    tol = 1e-12 * max(1.0, m)
    assert abs(x0) <= tol
    assert xd == pytest.approx(math.sqrt(3) * m, abs=tol)
    assert abs(xq) <= tol


def test_park_of_zero_sample():
    assert park_transform((0.0, 0.0, 0.0), 2.1) == (0.0, 0.0, 0.0)


def test_park_matches_explicit_matrix_product(rng):
    sample = rng.normal(size=3)
    rho = 0.9
    k = math.sqrt(2.0 / 3.0)
    shift = 2 * math.pi / 3
    p = [[k / math.sqrt(2)] * 3,
         [k * math.cos(rho), k * math.cos(rho - shift), k * math.cos(rho + shift)],
         [k * math.sin(rho), k * math.sin(rho - shift), k * math.sin(rho + shift)]]
    expected = [sum(p[r][c] * sample[c] for c in range(3)) for r in range(3)]
    assert np.allclose(park_transform(sample, rho), expected, atol=1e-14, rtol=0)


@given(angles)
def test_park_matrix_orthogonal(rho):
    p = park_matrix(rho)
    assert np.allclose(p @ p.T, np.eye(3), atol=1e-12, rtol=0)


@given(st.tuples(comps, comps, comps), angles)
def test_inverse_park_round_trip(sample, rho):
    back = inverse_park_transform(park_transform(sample, rho), rho)
    assert np.allclose(back, sample, atol=1e-12, rtol=0)


def test_machine_frame_identity_at_zero_angle():
    assert to_machine_frame(ComplexPhasor(0.3, -0.8), FrameAngle(0.0)) == (0.3, -0.8)


def test_quarter_rotation():
    q, d = to_machine_frame(ComplexPhasor(1.0, 0.0), FrameAngle(math.pi / 2))
    assert q == pytest.approx(0.0, abs=1e-15) and d == pytest.approx(-1.0, abs=1e-15)
    v = to_system_frame((0.0, -1.0), FrameAngle(math.pi / 2))
    assert v.re == pytest.approx(1.0, abs=1e-15) and v.im == pytest.approx(0.0, abs=1e-15)


def test_system_frame_identity_at_zero_angle():
    v = to_system_frame((0.25, 0.5), 0.0)
    assert (v.re, v.im) == (0.25, 0.5)


@given(comps, comps, angles)
def test_frame_round_trip_and_norm(a, b, delta):
    v = ComplexPhasor(a, b)
    qd = to_machine_frame(v, FrameAngle(delta))
    assert math.hypot(*qd) == pytest.approx(v.magnitude, abs=1e-12)
    back = to_system_frame(qd, FrameAngle(delta))
    assert back.re == pytest.approx(a, abs=1e-12) and back.im == pytest.approx(b, abs=1e-12)


def test_frame_composition_on_many_random_inputs(rng):
    for a, b, d in rng.uniform(-5, 5, size=(1000, 3)):
        back = to_system_frame(to_machine_frame((a, b), d), d)
        assert abs(back.re - a) <= 1e-12 and abs(back.im - b) <= 1e-12


@given(angles)
def test_rotation_orthogonal(delta):
    t = rotation(delta)
    assert np.allclose(t @ t.T, np.eye(2), atol=1e-12, rtol=0)


def test_rotation_matches_complex_multiplication(rng):
    for a, b, d in rng.uniform(-3, 3, size=(100, 3)):
        z = complex(a, b) * complex(math.cos(d), -math.sin(d))
        q, dd = rotation(d) @ np.array([a, b])
        assert q == pytest.approx(z.real, abs=1e-13) and dd == pytest.approx(z.imag, abs=1e-13)


@given(mags, angles)
def test_polar_round_trip(m, phi):
    v = ComplexPhasor.from_polar(m, phi)
    assert v.magnitude == pytest.approx(m, abs=1e-12)
    if m > 1e-6:
        assert abs(math.remainder(v.angle - phi, 2 * math.pi)) <= 1e-12 / min(1.0, m) + 1e-12


@given(angles)
def test_frame_angle_normalized_and_idempotent(d):
    f = FrameAngle(d)
    assert 0.0 <= f.delta < 2 * math.pi
    assert FrameAngle(f.delta).delta == f.delta
    assert normalize_angle(f.delta) == f.delta


def test_tiny_negative_angle_normalizes_into_range():
    assert 0.0 <= FrameAngle(-1e-18).delta < 2 * math.pi
