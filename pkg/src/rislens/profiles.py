"""RIS phase profile designs and assembly of the combined weight matrix.

Phases are kept as real angles and only exponentiated when ``W`` is built,
so every profile entry has exactly unit modulus.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import RisArray

log = logging.getLogger(__name__)

PROFILE_KINDS = ("random", "directional", "positional")


@dataclass(frozen=True)
class PriorBelief:
    """Gaussian belief about the user position, truncated to z > 0."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        cov = np.asarray(self.cov, dtype=float).reshape(3, 3)
        if not np.allclose(cov, cov.T):
            raise ValueError("prior covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) < 0):
            raise ValueError("prior covariance must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def isotropic(cls, mean, sigma: float) -> "PriorBelief":
        return cls(np.asarray(mean, dtype=float), sigma**2 * np.eye(3))

    def sample(self, rng: np.random.Generator, size: int, max_rounds: int = 1000) -> np.ndarray:
        """Draw ``size`` positions, resampling any draw with z <= 0."""
        w, V = np.linalg.eigh(self.cov)
        factor = V * np.sqrt(np.maximum(w, 0.0))
        out = np.empty((0, 3))
        for _ in range(max_rounds):
            draws = self.mean + rng.standard_normal((size, 3)) @ factor.T
            out = np.vstack([out, draws[draws[:, 2] > 0]])
            if out.shape[0] >= size:
                return out[:size]
        raise RuntimeError("prior rarely yields z > 0; cannot sample")


@dataclass(frozen=True)
class PhaseProfileSet:
    """Designed phases, antenna compensation and the resulting weights.

    Attributes
    ----------
    phases : ndarray, shape (M, T)
        Angles of the designed profiles.
    ant_phases : ndarray, shape (M,)
        Angles of the compensation removing the phase of ``h_ant``.
    h_ant : ndarray, shape (M,)
    """

    phases: np.ndarray
    ant_phases: np.ndarray
    h_ant: np.ndarray
    kind: str = "random"

    @property
    def omega_tilde(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    @property
    def omega_ant(self) -> np.ndarray:
        return np.exp(1j * self.ant_phases)

    @property
    def W(self) -> np.ndarray:
        return assemble_w(self.phases, self.ant_phases, self.h_ant)


def antenna_compensation(h_ant) -> np.ndarray:
    """Angles ``-arg(h_ant)`` so that ``h_ant * exp(1j*angle) = |h_ant|``.

    Zero entries get angle 0.
    """
    h_ant = np.asarray(h_ant, dtype=complex)
    zero = h_ant == 0
    if np.any(zero):
        log.warning("%d zero entries in h_ant; compensation set to 1", int(zero.sum()))
    return np.where(zero, 0.0, -np.angle(h_ant))


def random_profiles(M: int, T: int, rng: np.random.Generator) -> np.ndarray:
    if M < 1 or T < 1:
        raise ValueError("M and T must be >= 1")
    return rng.uniform(0.0, 2 * np.pi, size=(M, T))


def _sample_positions(prior: PriorBelief, T: int, rng: np.random.Generator) -> np.ndarray:
    return prior.sample(rng, T)


def directional_profiles(prior: PriorBelief, ris: RisArray, wavelength: float, T: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Conjugate plane-wave phases towards one prior sample per pilot."""
    pts = _sample_positions(prior, T, rng)
    u = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    # exp(+j q.k) with k = -(2pi/lambda) u
    return -(2 * np.pi / wavelength) * (ris.positions @ u.T)


def positional_profiles(prior: PriorBelief, ris: RisArray, wavelength: float, T: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Conjugate spherical-wave phases focused on one prior sample per pilot."""
    pts = _sample_positions(prior, T, rng)
    d = np.linalg.norm(pts, axis=1)
    dist = np.linalg.norm(ris.positions[:, None, :] - pts[None, :, :], axis=2)
    return (2 * np.pi / wavelength) * (dist - d[None, :])


def quantize_profiles(phases, bits: int) -> np.ndarray:
    """Snap angles to the nearest of ``2**bits`` uniform levels; 0 bits is a no-op."""
    phases = np.asarray(phases, dtype=float)
    if bits == 0:
        return phases
    if bits < 0:
        raise ValueError("bits must be >= 0")
    step = 2 * np.pi / 2**bits
    return np.mod(np.round(phases / step) * step, 2 * np.pi)


def assemble_w(phases, ant_phases, h_ant) -> np.ndarray:
    """``W[:, t] = diag(omega_ant * omega_t) h_ant``, shape (M, T)."""
    phases = np.asarray(phases, dtype=float)
    h_ant = np.asarray(h_ant, dtype=complex)
    ant_phases = np.asarray(ant_phases, dtype=float)
    if phases.ndim != 2 or phases.shape[0] != h_ant.shape[0] or ant_phases.shape != h_ant.shape:
        raise ValueError(
            f"inconsistent shapes: phases {phases.shape}, ant {ant_phases.shape}, h {h_ant.shape}"
        )
    return np.exp(1j * (phases + ant_phases[:, None])) * h_ant[:, None]


def make_profiles(kind: str, ris: RisArray, wavelength: float, h_ant, T: int,
                  rng: np.random.Generator, prior: PriorBelief | None = None,
                  bits: int = 0) -> PhaseProfileSet:
    if kind == "random":
        phases = random_profiles(ris.size, T, rng)
    elif kind in ("directional", "positional"):
        if prior is None:
            raise ValueError(f"{kind} profiles need a prior")
        design = directional_profiles if kind == "directional" else positional_profiles
        phases = design(prior, ris, wavelength, T, rng)
    else:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")
    phases = quantize_profiles(phases, bits)
    return PhaseProfileSet(phases, antenna_compensation(h_ant), np.asarray(h_ant), kind)


def write_w_csv(path, W) -> None:
    """Dump W with M rows and 2T columns (re, im interleaved)."""
    W = np.asarray(W)
    out = np.empty((W.shape[0], 2 * W.shape[1]))
    out[:, 0::2] = W.real
    out[:, 1::2] = W.imag
    header = ",".join(f"re_t{t},im_t{t}" for t in range(W.shape[1]))
    np.savetxt(path, out, delimiter=",", header=header, comments="", fmt="%.17e")
