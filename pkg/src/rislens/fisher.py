"""Fisher information, position error bound and SNR for the RIS lens.

The unknowns are ``eta = [rho, theta, x, y, z]``. Everything is computed
through the T-dimensional projections ``c = W^T a`` and ``E = W^T D``; the
M x M matrix ``W* W^T`` is never formed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import cm1_amplitude, cm1_steering, cm2_steering, cm2_steering_batch
from .geometry import RisArray, Scenario, spherical_from_cartesian

log = logging.getLogger(__name__)

# eigenvalues below this fraction of the largest one count as zero
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class FisherIntermediates:
    D: np.ndarray
    E: np.ndarray
    c: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class FisherResult:
    J_full: np.ndarray
    J_pos: np.ndarray
    peb: float


def direction_matrix(p, ris: RisArray) -> np.ndarray:
    """Unit vectors from the user towards each element, shape (3, M)."""
    p = np.asarray(p, dtype=float)
    diff = ris.positions - p
    norms = np.linalg.norm(diff, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("position coincides with a RIS element")
    return (diff / norms[:, None]).T


def steering_derivative(p, ris: RisArray, wavelength: float) -> np.ndarray:
    """Jacobian of the CM2 steering vector w.r.t. the position, shape (M, 3)."""
    p = np.asarray(p, dtype=float)
    K = direction_matrix(p, ris)
    a = cm2_steering(p, ris, wavelength)
    d = np.linalg.norm(p)
    return 1j * (2 * np.pi / wavelength) * (a[:, None] * K.T + np.outer(a, p / d))


def intermediates(p, W, ris: RisArray, wavelength: float) -> FisherIntermediates:
    D = steering_derivative(p, ris, wavelength)
    a = cm2_steering(p, ris, wavelength)
    return FisherIntermediates(D=D, E=W.T @ D, c=W.T @ a, K=direction_matrix(p, ris))


def fim_from_projections(c, E, rho: float, es: float, n0: float) -> np.ndarray:
    """5x5 FIM from ``c = W^T a`` (T,) and ``E = W^T D`` (T, 3)."""
    snr = 2 * es / n0
    cE = c.conj() @ E
    J = np.zeros((5, 5))
    J[0, 0] = snr * np.vdot(c, c).real
    J[1, 1] = rho**2 * J[0, 0]
    J[2:, 2:] = snr * rho**2 * np.real(E.conj().T @ E)
    J[0, 2:] = snr * rho * cE.real
    J[1, 2:] = snr * rho**2 * cE.imag
    J[2:, :2] = J[:2, 2:].T
    return J


def fim_full(p, rho: float, W, scenario: Scenario, ris: RisArray | None = None) -> np.ndarray:
    ris = scenario.ris() if ris is None else ris
    W = np.asarray(W)
    if W.shape[0] != ris.size:
        raise ValueError(f"W must have {ris.size} rows, got {W.shape[0]}")
    inter = intermediates(p, W, ris, scenario.wavelength)
    return fim_from_projections(inter.c, inter.E, rho, scenario.symbol_energy,
                                scenario.noise_variance)


def _is_singular(J) -> bool:
    ev = np.linalg.eigvalsh(0.5 * (J + J.T))
    return not ev[-1] > 0 or ev[0] <= SINGULAR_RTOL * ev[-1]


def efim_schur(J_full) -> np.ndarray:
    """Equivalent position FIM via the Schur complement of the nuisance block.

    A singular nuisance block returns the zero matrix, i.e. no usable
    position information.
    """
    J_full = np.asarray(J_full, dtype=float)
    nuis = J_full[:2, :2]
    if _is_singular(nuis):
        log.warning("singular nuisance information block; position FIM set to zero")
        return np.zeros((3, 3))
    cross = J_full[:2, 2:]
    return J_full[2:, 2:] - cross.T @ np.linalg.solve(nuis, cross)


def project_out(c, E) -> np.ndarray:
    """Component of the columns of E orthogonal to c."""
    return E - np.outer(c, c.conj() @ E) / np.vdot(c, c).real


def efim_from_projections(c, E, rho: float, es: float, n0: float) -> np.ndarray:
    if np.vdot(c, c).real == 0.0:
        return np.zeros((3, 3))
    P_E = project_out(c, E)
    return 2 * rho**2 * es / n0 * np.real(P_E.conj().T @ P_E)


def efim_projection(p, rho: float, W, scenario: Scenario,
                    ris: RisArray | None = None) -> np.ndarray:
    ris = scenario.ris() if ris is None else ris
    inter = intermediates(p, np.asarray(W), ris, scenario.wavelength)
    return efim_from_projections(inter.c, inter.E, rho, scenario.symbol_energy,
                                 scenario.noise_variance)


def peb(J) -> float:
    """Position error bound in metres from a 3x3 EFIM or the 5x5 FIM.

    Returns ``inf`` when the information matrix is singular.
    """
    J = np.asarray(J, dtype=float)
    if J.shape not in ((3, 3), (5, 5)):
        raise ValueError(f"expected a 3x3 or 5x5 matrix, got {J.shape}")
    if _is_singular(J):
        return float("inf")
    inv = np.linalg.inv(J)
    block = inv[-3:, -3:]
    tr = np.trace(block)
    return float(np.sqrt(tr)) if tr > 0 else float("inf")


def prior_peb(sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return float(sigma * np.sqrt(3.0))


def fisher_analysis(p, W, scenario: Scenario, ris: RisArray | None = None,
                    rho: float | None = None) -> FisherResult:
    """Full FIM, position EFIM and PEB at ``p`` under the CM2 model.

    ``rho`` defaults to the CM1 amplitude at ``p``.
    """
    ris = scenario.ris() if ris is None else ris
    if rho is None:
        rho = cm1_amplitude(spherical_from_cartesian(p), scenario)
    J = fim_full(p, rho, W, scenario, ris)
    J_pos = efim_schur(J)
    return FisherResult(J_full=J, J_pos=J_pos, peb=peb(J_pos))


def snr(W, p, scenario: Scenario, ris: RisArray | None = None, model: str = "cm2") -> float:
    """Pilot-averaged receive SNR in dB at position ``p``.

    ``model`` picks the steering vector: ``"cm2"`` (spherical) or ``"cm1"``.
    """
    ris = scenario.ris() if ris is None else ris
    coords = spherical_from_cartesian(p)
    rho = cm1_amplitude(coords, scenario)
    if model == "cm2":
        a = cm2_steering(p, ris, scenario.wavelength)
    elif model == "cm1":
        a = cm1_steering(coords, ris, scenario.wavelength)
    else:
        raise ValueError(f"unknown steering model {model!r}")
    gain = np.mean(np.abs(np.asarray(W).T @ a) ** 2)
    lin = scenario.symbol_energy * rho**2 / scenario.noise_variance * gain
    return float(10 * np.log10(lin)) if lin > 0 else float("-inf")


def snr_batch(W, points, scenario: Scenario, ris: RisArray | None = None,
              chunk: int = 256) -> np.ndarray:
    """CM2 SNR in dB for each row of ``points`` (all with z > 0)."""
    ris = scenario.ris() if ris is None else ris
    points = np.atleast_2d(np.asarray(points, dtype=float))
    W = np.asarray(W)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        pts = points[start:start + chunk]
        d = np.linalg.norm(pts, axis=1)
        theta = np.arccos(np.clip(pts[:, 2] / d, -1, 1))
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        f = 1 - np.sin(theta) ** 2 * np.sin(phi) ** 2
        rho2 = f * scenario.element_area * np.maximum(np.cos(theta), 0) / (4 * np.pi * d**2)
        gain = np.mean(np.abs(W.T @ cm2_steering_batch(pts, ris, scenario.wavelength)) ** 2, axis=0)
        lin = scenario.symbol_energy * rho2 / scenario.noise_variance * gain
        with np.errstate(divide="ignore"):
            out[start:start + chunk] = 10 * np.log10(lin)
    return out
