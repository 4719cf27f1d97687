import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rislens.channel import cm1_steering, cm2_steering
from rislens.fisher import snr
from rislens.geometry import spherical_from_cartesian
from rislens.profiles import (
    PriorBelief, antenna_compensation, assemble_w, directional_profiles, make_profiles,
    positional_profiles, quantize_profiles, random_profiles, write_w_csv,
)

from conftest import DIAGONAL


def _wrap(x):
    return np.angle(np.exp(1j * x))


# prior

def test_prior_samples_positive_z():
    prior = PriorBelief.isotropic([0.0, 0.0, 0.05], 0.2)
    pts = prior.sample(np.random.default_rng(0), 500)
    assert pts.shape == (500, 3)
    assert np.all(pts[:, 2] > 0)


def test_prior_rejects_asymmetric_cov():
    with pytest.raises(ValueError):
        PriorBelief(np.zeros(3), np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1.0]]))


def test_prior_rejects_negative_cov():
    with pytest.raises(ValueError):
        PriorBelief(np.zeros(3), -np.eye(3))


def test_prior_statistics():
    prior = PriorBelief.isotropic([1.0, -2.0, 30.0], 0.5)
    pts = prior.sample(np.random.default_rng(1), 20000)
    np.testing.assert_allclose(pts.mean(axis=0), prior.mean, atol=0.02)
    np.testing.assert_allclose(np.cov(pts.T), prior.cov, atol=0.01)


# antenna compensation

def test_compensation_example():
    h = np.array([2 * np.exp(1j * np.pi / 3)])
    ang = antenna_compensation(h)
    assert ang[0] == pytest.approx(-np.pi / 3)
    assert h[0] * np.exp(1j * ang[0]) == pytest.approx(2.0)


def test_compensation_real_positive_is_identity():
    np.testing.assert_array_equal(antenna_compensation(np.array([1.0, 0.3, 2.0])), 0.0)


def test_compensation_idempotent(full_h_ant):
    comp = full_h_ant * np.exp(1j * antenna_compensation(full_h_ant))
    np.testing.assert_allclose(np.exp(1j * antenna_compensation(comp)), 1.0, atol=1e-12)


def test_compensated_channel_real_nonnegative(full_h_ant):
    prod = full_h_ant * np.exp(1j * antenna_compensation(full_h_ant))
    np.testing.assert_allclose(prod.imag, 0, atol=1e-12 * np.abs(full_h_ant).max())
    assert np.all(prod.real >= 0)


def test_compensation_zero_entry_warns(caplog):
    ang = antenna_compensation(np.array([1j, 0.0]))
    assert ang[1] == 0.0
    assert "zero entries" in caplog.text


# random

def test_random_profiles_zero_mean():
    ph = random_profiles(1000, 1000, np.random.default_rng(0))
    assert abs(np.exp(1j * ph).mean()) < 0.01


def test_random_profiles_uniform_histogram():
    ph = random_profiles(200, 500, np.random.default_rng(1)).ravel()
    counts, _ = np.histogram(ph, bins=36, range=(0, 2 * np.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_random_profiles_deterministic():
    a = random_profiles(30, 7, np.random.default_rng(42))
    b = random_profiles(30, 7, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


def test_random_profiles_rejects_empty():
    with pytest.raises(ValueError):
        random_profiles(0, 3, np.random.default_rng(0))


# directed designs

def test_directional_broadside_all_ones(full_ris):
    prior = PriorBelief(np.array([0, 0, 2.0]), np.zeros((3, 3)))
    ph = directional_profiles(prior, full_ris, 0.0107, 5, np.random.default_rng(0))
    np.testing.assert_allclose(np.exp(1j * ph), 1.0, atol=1e-15)


@pytest.mark.parametrize("p0", [[0.3, -0.2, 0.8], [1.0, 1.0, 1.0], [-2.0, 0.5, 3.0]])
def test_directional_coherent_combining(full_scenario, full_ris, full_h_ant, p0):
    prior = PriorBelief(np.array(p0), np.zeros((3, 3)))
    W = make_profiles("directional", full_ris, full_scenario.wavelength, full_h_ant, 4,
                      np.random.default_rng(0), prior).W
    a = cm1_steering(spherical_from_cartesian(p0), full_ris, full_scenario.wavelength)
    np.testing.assert_allclose(np.abs(W.T @ a), np.abs(full_h_ant).sum(), rtol=1e-10)


@pytest.mark.parametrize("p0", [[0.3, -0.2, 0.8], [0.05, 0.05, 0.1], [-2.0, 0.5, 3.0]])
def test_positional_coherent_combining(full_scenario, full_ris, full_h_ant, p0):
    prior = PriorBelief(np.array(p0), np.zeros((3, 3)))
    W = make_profiles("positional", full_ris, full_scenario.wavelength, full_h_ant, 4,
                      np.random.default_rng(0), prior).W
    a = cm2_steering(p0, full_ris, full_scenario.wavelength)
    np.testing.assert_allclose(np.abs(W.T @ a), np.abs(full_h_ant).sum(), rtol=1e-10)


def test_positional_approaches_directional_far_away(full_ris):
    prior = PriorBelief(1000.0 * DIAGONAL, np.zeros((3, 3)))
    lam = 0.0107
    dph = directional_profiles(prior, full_ris, lam, 2, np.random.default_rng(0))
    pph = positional_profiles(prior, full_ris, lam, 2, np.random.default_rng(0))
    assert np.max(np.abs(_wrap(dph - pph))) < 0.1


def test_directed_profiles_need_prior(full_ris, full_h_ant):
    with pytest.raises(ValueError):
        make_profiles("directional", full_ris, 0.0107, full_h_ant, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_profiles("fancy", full_ris, 0.0107, full_h_ant, 4, np.random.default_rng(0))


def test_one_prior_sample_per_pilot(full_ris):
    prior = PriorBelief.isotropic([0.1, 0.1, 0.1], 0.1)
    ph = directional_profiles(prior, full_ris, 0.0107, 10, np.random.default_rng(0))
    # distinct draws give distinct columns
    assert len({tuple(np.round(c[:5], 9)) for c in ph.T}) == 10


# quantization

def test_quantize_one_bit_levels():
    ph = quantize_profiles(np.random.default_rng(0).uniform(-10, 10, 1000), 1)
    assert set(np.round(ph, 12)) <= {0.0, round(np.pi, 12)}


def test_quantize_zero_bits_noop():
    ph = np.random.default_rng(0).uniform(0, 6, 50)
    np.testing.assert_array_equal(quantize_profiles(ph, 0), ph)


def test_quantize_negative_bits():
    with pytest.raises(ValueError):
        quantize_profiles(np.zeros(3), -1)


@settings(max_examples=60, deadline=None)
@given(bits=st.integers(1, 6),
       phases=st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=40))
def test_quantize_error_bound(bits, phases):
    ph = np.array(phases)
    q = quantize_profiles(ph, bits)
    assert np.all(np.abs(_wrap(q - ph)) <= np.pi / 2**bits + 1e-12)
    levels = q / (2 * np.pi / 2**bits)
    np.testing.assert_allclose(levels, np.round(levels), atol=1e-9)


def test_three_bit_snr_close_to_unquantized(full_scenario, full_ris, full_h_ant):
    m_p = np.array([0.1, 0.1, 0.1])
    prior = PriorBelief.isotropic(m_p, 0.1)
    lam = full_scenario.wavelength
    for kind in ("directional", "positional"):
        full = make_profiles(kind, full_ris, lam, full_h_ant, 200, np.random.default_rng(3), prior)
        q3 = make_profiles(kind, full_ris, lam, full_h_ant, 200, np.random.default_rng(3), prior,
                           bits=3)
        gap = snr(full.W, m_p, full_scenario, full_ris) - snr(q3.W, m_p, full_scenario, full_ris)
        assert abs(gap) < 1.0


# assembly

def test_assemble_all_ones_gives_abs_h(full_h_ant):
    M = full_h_ant.size
    W = assemble_w(np.zeros((M, 3)), antenna_compensation(full_h_ant), full_h_ant)
    np.testing.assert_allclose(W, np.abs(full_h_ant)[:, None] * np.ones((1, 3)),
                               atol=1e-12 * np.abs(full_h_ant).max())


def test_assemble_moduli_and_column_norms(full_h_ant):
    rng = np.random.default_rng(0)
    M = full_h_ant.size
    W = assemble_w(random_profiles(M, 6, rng), antenna_compensation(full_h_ant), full_h_ant)
    np.testing.assert_allclose(np.abs(W), np.abs(full_h_ant)[:, None] * np.ones((1, 6)),
                               rtol=1e-12)
    norms = np.linalg.norm(W, axis=0)
    np.testing.assert_allclose(norms, norms[0], rtol=1e-12)


def test_assemble_shape_mismatch():
    with pytest.raises(ValueError):
        assemble_w(np.zeros((4, 2)), np.zeros(5), np.ones(5))


def test_profile_set_properties(full_ris, full_h_ant):
    ps = make_profiles("random", full_ris, 0.0107, full_h_ant, 3, np.random.default_rng(0))
    np.testing.assert_allclose(np.abs(ps.omega_tilde), 1.0, rtol=1e-15)
    np.testing.assert_allclose(np.abs(ps.omega_ant), 1.0, rtol=1e-15)
    assert ps.W.shape == (full_ris.size, 3)
    assert ps.kind == "random"


def test_write_w_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    W = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    path = tmp_path / "w.csv"
    write_w_csv(path, W)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["re_t0", "im_t0"]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (5, 6)
    np.testing.assert_array_equal(data[:, 0::2] + 1j * data[:, 1::2], W)
