import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rislens.geometry import (
    Scenario, SphericalCoords, build_ris_grid, cartesian_from_spherical,
    spherical_from_cartesian, wavevector,
)

LAM = 0.010707


def test_wavevector_broadside():
    k = wavevector(SphericalCoords(1.0, 0.0, 0.0), LAM)
    np.testing.assert_allclose(k, [0, 0, -2 * np.pi / LAM], atol=1e-12)


def test_wavevector_endfire_x():
    k = wavevector(SphericalCoords(1.0, np.pi / 2, 0.0), LAM)
    np.testing.assert_allclose(k, [-2 * np.pi / LAM, 0, 0], atol=1e-9)


def test_wavevector_norm_random_angles():
    rng = np.random.default_rng(0)
    for theta, phi in zip(rng.uniform(0, np.pi / 2, 100), rng.uniform(0, 2 * np.pi, 100)):
        k = wavevector(SphericalCoords(1.0, theta, phi), LAM)
        assert np.linalg.norm(k) == pytest.approx(2 * np.pi / LAM, rel=1e-14)


def test_wavevector_homogeneous_in_inverse_wavelength():
    c = SphericalCoords(1.0, 0.7, 2.1)
    np.testing.assert_allclose(wavevector(c, 2 * LAM), 0.5 * wavevector(c, LAM), rtol=1e-14)


def test_position_is_scaled_negative_wavevector():
    c = SphericalCoords(2.5, 0.4, 5.0)
    p = cartesian_from_spherical(c)
    np.testing.assert_allclose(p, -LAM * c.d * wavevector(c, LAM) / (2 * np.pi), rtol=1e-13)


@pytest.mark.parametrize("coords, expected", [
    (SphericalCoords(1.0, 0.0, 1.3), [0, 0, 1]),
    (SphericalCoords(np.sqrt(3), np.arccos(1 / np.sqrt(3)), np.pi / 4), [1, 1, 1]),
])
def test_cartesian_from_spherical(coords, expected):
    np.testing.assert_allclose(cartesian_from_spherical(coords), expected, atol=1e-12)


@pytest.mark.parametrize("p, expected", [
    ([0, 0, 2], (2, 0, 0)),
    ([1, 1, 1], (np.sqrt(3), 0.9553166181245093, np.pi / 4)),
    ([-1, 0, 1], (np.sqrt(2), np.pi / 4, np.pi)),
])
def test_spherical_from_cartesian(p, expected):
    c = spherical_from_cartesian(p)
    np.testing.assert_allclose((c.d, c.theta, c.phi), expected, atol=1e-12)


def test_spherical_from_cartesian_rejects_origin():
    with pytest.raises(ValueError):
        spherical_from_cartesian([0, 0, 0])


def test_phi_range_half_open():
    c = spherical_from_cartesian([1.0, -1e-300, 1.0])
    assert 0 <= c.phi < 2 * np.pi


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-3, 50),
)
def test_round_trip(x, y, z):
    p = np.array([x, y, z])
    back = cartesian_from_spherical(spherical_from_cartesian(p))
    assert np.linalg.norm(back - p) <= 1e-12 * np.linalg.norm(p)


def test_grid_single_element():
    ris = build_ris_grid(1, 1, 0.005)
    np.testing.assert_array_equal(ris.positions, [[0, 0, 0]])
    assert ris.radial[0] == 0


def test_grid_two_by_two():
    s = 0.004
    ris = build_ris_grid(2, 2, s)
    np.testing.assert_allclose(np.abs(ris.positions[:, :2]), s / 2)
    np.testing.assert_allclose(ris.radial, s / np.sqrt(2))


def test_full_grid_extent():
    ris = build_ris_grid(50, 50, LAM / 2)
    assert np.abs(ris.positions[:, 0]).max() == pytest.approx(24.5 * 0.0053535, rel=1e-12)
    assert np.abs(ris.positions[:, 0]).max() == pytest.approx(0.13116, abs=1e-5)


@pytest.mark.parametrize("rows, cols", [(50, 50), (3, 7), (4, 1)])
def test_grid_centred_and_point_symmetric(rows, cols):
    ris = build_ris_grid(rows, cols, 0.01)
    assert np.abs(ris.positions.mean(axis=0)).max() < 1e-15
    flipped = -ris.positions[::-1]
    np.testing.assert_allclose(flipped[:, :2], ris.positions[:, :2], atol=1e-15)


def test_grid_polar_consistency():
    ris = build_ris_grid(6, 5, 0.01)
    recon = ris.radial[:, None] * np.column_stack(
        [np.cos(ris.azimuth), np.sin(ris.azimuth), np.zeros(ris.size)])
    np.testing.assert_allclose(recon, ris.positions, atol=1e-15)


def test_scenario_derived_constants(full_scenario):
    sc = full_scenario
    assert sc.wavelength == pytest.approx(0.010707, abs=5e-7)
    assert sc.num_elements == 2500
    assert sc.element_area == pytest.approx(sc.wavelength**2 / 4)
    assert sc.symbol_energy == pytest.approx(1e-9)
    assert 10 * np.log10(sc.snr_tx) == pytest.approx(106.0, abs=1e-9)
    assert sc.antenna_position == (0.0, 0.0, -sc.wavelength)


def test_scenario_warns_on_large_elements():
    with pytest.warns(UserWarning):
        Scenario(wavelength=0.01, element_side=0.008)


@pytest.mark.parametrize("kwargs", [
    dict(wavelength=-1.0), dict(wavelength=0.01, num_pilots=0),
    dict(wavelength=0.01, element_side=0.0), dict(wavelength=0.01, tx_power=0.0),
])
def test_scenario_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        Scenario(**kwargs)
