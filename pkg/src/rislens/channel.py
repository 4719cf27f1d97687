"""Channel models between a user, the RIS elements and the receive antenna.

Three models are available:

* CM1 -- plane wave: constant amplitude, phase linear in the element position.
* CM2 -- spherical wave: constant amplitude, phase from the exact distance.
* CM3 -- spherical wave with per-element amplitudes from the closed-form
  integral of the received power over each element's square aperture.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RisArray, Scenario, SphericalCoords


@dataclass(frozen=True)
class ChannelRealization:
    rho: np.ndarray
    a: np.ndarray
    h_ant: np.ndarray
    theta: float
    theta_sync: float

    @property
    def alpha(self) -> np.ndarray:
        return self.rho * np.exp(1j * self.theta)


@dataclass(frozen=True)
class ObservationSet:
    y: np.ndarray
    noise: np.ndarray
    mu: np.ndarray
    channel: ChannelRealization


def correction_factor(theta, phi):
    """Polarization loss of a Y-polarized transmitter, in [0, 1]."""
    return 1.0 - np.sin(theta) ** 2 * np.sin(phi) ** 2


def cm1_amplitude(coords: SphericalCoords, scenario: Scenario) -> float:
    if not coords.d > 0:
        raise ValueError("distance must be positive")
    f = correction_factor(coords.theta, coords.phi)
    # np.cos(pi/2) is 6e-17; end-fire must give an exact null
    cos_t = 0.0 if coords.theta >= np.pi / 2 else np.cos(coords.theta)
    rho2 = f * scenario.element_area * cos_t / (4 * np.pi * coords.d**2)
    return float(np.sqrt(max(rho2, 0.0)))


def cm1_steering(coords: SphericalCoords, ris: RisArray, wavelength: float) -> np.ndarray:
    """Plane-wave steering vector ``exp(-j q_i . k)``."""
    st = np.sin(coords.theta)
    k = -(2 * np.pi / wavelength) * np.array(
        [st * np.cos(coords.phi), st * np.sin(coords.phi), np.cos(coords.theta)]
    )
    return np.exp(-1j * (ris.positions @ k))


def cm1_steering_polar(theta, phi, ris: RisArray, wavelength: float) -> np.ndarray:
    """Same vector as :func:`cm1_steering` written in element polar coordinates.

    Vectorized: returns shape ``(M,) + broadcast(theta, phi).shape``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    extra = (np.newaxis,) * np.broadcast(theta, phi).ndim
    r = ris.radial[(slice(None),) + extra]
    psi = ris.azimuth[(slice(None),) + extra]
    return np.exp(1j * (2 * np.pi / wavelength) * r * np.sin(theta) * np.cos(phi - psi))


def cm2_steering(p, ris: RisArray, wavelength: float) -> np.ndarray:
    """Spherical-wave steering vector, phase referenced to the array origin."""
    p = np.asarray(p, dtype=float)
    d = np.linalg.norm(p)
    if d == 0.0:
        raise ValueError("position must differ from the origin")
    dist = np.linalg.norm(ris.positions - p, axis=1)
    return np.exp(-1j * (2 * np.pi / wavelength) * (dist - d))


def cm2_steering_batch(points, ris: RisArray, wavelength: float) -> np.ndarray:
    """Steering vectors for many positions at once; shape ``(M, K)``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(points, axis=1)
    q = ris.positions
    # |p - q|^2 = |p|^2 - 2 p.q + |q|^2 ; q has z = 0
    sq = d[None, :] ** 2 - 2 * (q[:, :2] @ points[:, :2].T) + (ris.radial**2)[:, None]
    dist = np.sqrt(np.maximum(sq, 0.0))
    return np.exp(-1j * (2 * np.pi / wavelength) * (dist - d[None, :]))


def cm3_power(p, centers, side: float) -> np.ndarray:
    """Fraction of the isotropic power collected by square apertures.

    ``centers`` are aperture centres in the z = 0 plane and ``side`` their
    edge length. The result depends on z only through z**2, so sources on
    either side of the surface are handled alike.
    """
    x, y, z = (float(v) for v in np.asarray(p, dtype=float))
    if z == 0.0:
        raise ValueError("CM3 amplitudes are singular for z = 0")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    dx = centers[:, 0] - x
    dy = centers[:, 1] - y
    z2 = z * z
    total = np.zeros(centers.shape[0])
    for sx in (side / 2 + dx, side / 2 - dx):
        for sy in (side / 2 + dy, side / 2 - dy):
            g = np.sqrt(sx**2 / z2 + sy**2 / z2 + 1.0)
            total += sx * sy / ((sy**2 + z2) * g) + 2.0 * np.arctan(sx * sy / (z2 * g))
    return total / (12 * np.pi)


def cm3_amplitudes(p, ris: RisArray, scenario: Scenario) -> np.ndarray:
    return np.sqrt(np.maximum(cm3_power(p, ris.positions, scenario.element_side), 0.0))


def antenna_coupling(scenario: Scenario, ris: RisArray | None = None) -> np.ndarray:
    """Known RIS-to-antenna gains; CM3 amplitudes with CM2 phases."""
    ris = scenario.ris() if ris is None else ris
    p_ant = np.asarray(scenario.antenna_position, dtype=float)
    return cm3_amplitudes(p_ant, ris, scenario) * cm2_steering(p_ant, ris, scenario.wavelength)


def realize_channel(p, scenario: Scenario, ris: RisArray, theta_sync: float,
                    h_ant: np.ndarray | None = None) -> ChannelRealization:
    p = np.asarray(p, dtype=float)
    d = float(np.linalg.norm(p))
    if h_ant is None:
        h_ant = antenna_coupling(scenario, ris)
    return ChannelRealization(
        rho=cm3_amplitudes(p, ris, scenario),
        a=cm2_steering(p, ris, scenario.wavelength),
        h_ant=h_ant,
        theta=-2 * np.pi * d / scenario.wavelength + theta_sync,
        theta_sync=float(theta_sync),
    )


def noise_free_observation(W, channel: ChannelRealization, scenario: Scenario) -> np.ndarray:
    return (np.exp(1j * channel.theta) * np.sqrt(scenario.symbol_energy)
            * (W.T @ (channel.rho * channel.a)))


def synthesize_observations(W, p, scenario: Scenario, rng: np.random.Generator,
                            ris: RisArray | None = None,
                            theta_sync: float | None = None) -> ObservationSet:
    """Draw one noisy pilot block ``y = mu + n`` from the CM3 channel.

    ``theta_sync`` is drawn from ``rng`` (uniform on [0, 2pi)) unless given;
    it is drawn before the noise so a fixed stream reproduces both.
    """
    ris = scenario.ris() if ris is None else ris
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != ris.size:
        raise ValueError(f"W must have shape ({ris.size}, T), got {W.shape}")
    if theta_sync is None:
        theta_sync = rng.uniform(0.0, 2 * np.pi)
    ch = realize_channel(p, scenario, ris, theta_sync)
    mu = noise_free_observation(W, ch, scenario)
    T = W.shape[1]
    scale = np.sqrt(scenario.noise_variance / 2)
    noise = scale * (rng.standard_normal(T) + 1j * rng.standard_normal(T))
    return ObservationSet(y=mu + noise, noise=noise, mu=mu, channel=ch)


__all__ = [
    "ChannelRealization", "ObservationSet", "correction_factor", "cm1_amplitude",
    "cm1_steering", "cm1_steering_polar", "cm2_steering", "cm2_steering_batch",
    "cm3_power", "cm3_amplitudes", "antenna_coupling", "realize_channel",
    "noise_free_observation", "synthesize_observations",
]
