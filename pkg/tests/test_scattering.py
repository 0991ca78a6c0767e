import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import K, LAMBDA, free_flight, trajectory
from nanorotor.optics import CavityParams, Material, RodGeometry
from nanorotor.scattering import (
    AliasingError, NormalizationError, Orientation, ScatterScene, intensity_factors,
    max_modulation_frequency, normalize_signal, scattering_intensity, scattering_prefactor, sinc,
    synthesize_signal,
)

CAV, GEOM, MAT = CavityParams(), RodGeometry(800e-9, 100e-9), Material()
unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: 0.1 < math.sqrt(sum(c * c for c in v))
).map(lambda v: tuple(np.asarray(v) / np.linalg.norm(v)))


def scene(n, z=0.0, x=0.0, y=0.0):
    return ScatterScene((x, y, z), Orientation(tuple(n)), CAV, GEOM, MAT)


def test_sinc_unnormalised():
    assert sinc(0.0) == 1.0
    assert sinc(math.pi) == pytest.approx(0.0, abs=1e-16)
    assert sinc(1.0) == pytest.approx(math.sin(1.0))


def test_orientation_must_be_unit():
    with pytest.raises(ValueError):
        Orientation((1.0, 1.0, 0.0))
    Orientation.planar(0.7)


def test_rod_along_cavity_axis_by_hand():
    # n = e_z at an antinode: u = 2 e_x so |e_y x u|^2 = 4; S+ = S- = sinc(kL/2)
    s = math.sin(K * 400e-9) / (K * 400e-9)
    expected = 4 * (s * s + 2 * s * s + s * s)
    assert scattering_intensity(scene((0, 0, 1))) == pytest.approx(expected, rel=1e-12)


def test_aligned_rod_at_antinode_by_hand():
    # n = e_x: u = (2 + eps - 1) e_x, bracket 4
    assert scattering_intensity(scene((1, 0, 0))) == pytest.approx(4 * (MAT.epsilon_r + 1) ** 2, rel=1e-12)


def test_planar_node_is_dark():
    for phi in np.linspace(0, 2 * math.pi, 13):
        assert scattering_intensity(scene(Orientation.planar(phi).n, z=LAMBDA / 4)) == pytest.approx(0, abs=1e-12)


def test_planar_bracket_reduces_to_cos_squared():
    n = Orientation.planar(0.9).n
    z = 0.13 * LAMBDA
    sp = sinc(n[1] * K * GEOM.length / 2)
    u2 = (2 + (MAT.epsilon_r - 1) * n[0] ** 2) ** 2
    assert scattering_intensity(scene(n, z=z)) == pytest.approx(u2 * 4 * sp**2 * math.cos(K * z) ** 2, rel=1e-12)


def test_two_maxima_per_turn():
    phi = np.linspace(0, 2 * math.pi, 3601)[:-1]
    n = np.stack([np.cos(phi), np.sin(phi), 0 * phi], axis=-1)
    i = intensity_factors(n, 0.0, 0.0, 0.0, CAV, GEOM, MAT)
    peaks = np.flatnonzero((i > np.roll(i, 1)) & (i > np.roll(i, -1)))
    np.testing.assert_allclose(phi[peaks], [0, math.pi], atol=1e-9)
    assert abs(phi[np.argmin(i[:1800])] - math.pi / 2) < 0.2


def test_off_axis_envelope():
    base = scattering_intensity(scene((1, 0, 0)))
    assert scattering_intensity(scene((1, 0, 0), y=65e-6)) == pytest.approx(base * math.exp(-2))


def test_prefactor_positive():
    assert scattering_prefactor(CAV, GEOM, MAT) > 0


@given(unit, st.floats(-1e-5, 1e-5), st.floats(-1e-4, 1e-4))
def test_nonnegative_and_even(n, z, x):
    a = scattering_intensity(scene(n, z, x))
    b = scattering_intensity(scene(tuple(-c for c in n), z, x))
    assert a >= 0
    assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


@given(st.floats(-10, 10), st.floats(-1e-5, 1e-5))
def test_planar_pi_periodic(phi, z):
    a = scattering_intensity(scene(Orientation.planar(phi).n, z))
    b = scattering_intensity(scene(Orientation.planar(phi + math.pi).n, z))
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_normalize_constant_cavity():
    tr = normalize_signal([1.0, 2.0, 4.0], 2.0)
    np.testing.assert_allclose(tr.samples, [0.25, 0.5, 1.0])


def test_normalize_ratio_invariance(rng):
    raw, ic = rng.random(50), 1 + rng.random(50)
    np.testing.assert_array_equal(normalize_signal(raw, ic).samples, normalize_signal(raw, 2 * ic).samples)


def test_normalize_spike():
    raw = np.ones(20)
    raw[7] = 10.0
    s = normalize_signal(raw).samples
    assert s[7] == 1.0 and np.allclose(np.delete(s, 7), 0.1)


@settings(max_examples=30)
@given(st.lists(st.floats(0.01, 1e3), min_size=2, max_size=40))
def test_normalize_idempotent(raw):
    once = normalize_signal(raw)
    twice = normalize_signal(once.samples)
    np.testing.assert_array_equal(once.samples, twice.samples)
    assert once.samples.max() == 1.0 and once.samples.min() >= 0


@pytest.mark.parametrize("ic", [0.0, -1.0, [1.0, 0.0, 1.0]])
def test_normalize_rejects_bad_cavity(ic):
    with pytest.raises(NormalizationError):
        normalize_signal([1.0, 2.0, 3.0], ic)


def test_normalize_rejects_shape_mismatch():
    with pytest.raises(NormalizationError):
        normalize_signal([1.0, 2.0, 3.0], [1.0, 1.0])


def test_aligned_free_flight_is_single_tone():
    # no rotation, phi = 0: signal = cos^2(kz) under the envelope
    tr = free_flight(11.5, 0.0, 0.5, 0.0, 0.0)
    sig = synthesize_signal(tr, 40e6)
    t = sig.times
    expected = np.cos(K * 0.5 * (t - tr.t[0])) ** 2 * np.exp(-2 * (11.5 * t / 65e-6) ** 2)
    np.testing.assert_allclose(sig.samples, expected / expected.max(), atol=1e-6)


def test_synthesis_guard():
    tr = trajectory("s1")
    assert max_modulation_frequency(tr) == pytest.approx(2 * 2.14e6, rel=0.01)
    with pytest.raises(AliasingError):
        synthesize_signal(tr, 1e3)


def test_synthesis_grid_and_range():
    sig = synthesize_signal(trajectory("s1"), 100e6)
    assert sig.t0 == trajectory("s1").t[0]
    assert sig.samples.max() == 1.0 and sig.samples.min() >= 0
    assert sig.times[-1] <= trajectory("s1").t[-1]
