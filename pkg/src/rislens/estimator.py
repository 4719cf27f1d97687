"""Maximum-likelihood localization with a separable three-stage line search.

Stage 1 scans the elevation with an unstructured azimuth vector, stage 2
scans the azimuth at the estimated elevation (both under the plane-wave
model, made separable by a truncated Jacobi-Anger expansion), and stage 3
scans the distance along the estimated ray under the spherical-wave model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .channel import cm1_steering_polar, cm2_steering, cm2_steering_batch
from .geometry import RisArray, Scenario, unit_direction

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class SearchGrids:
    theta: np.ndarray
    phi: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name in ("theta", "phi", "d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(f"{name} grid needs at least 2 bins")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} grid must be strictly increasing")
            object.__setattr__(self, name, arr)
        if self.d[0] <= 0:
            raise ValueError("distance grid must be positive")

    @classmethod
    def uniform(cls, theta_bins: int = 90, phi_bins: int = 360, d_bins: int = 500,
                d_min: float = 0.05, d_max: float = 20.0) -> "SearchGrids":
        """Elevation over [0, pi/2] inclusive, azimuth over [0, 2pi), log-spaced distance."""
        if d_min <= 0 or d_max <= d_min:
            raise ValueError("need 0 < d_min < d_max")
        return cls(
            theta=np.linspace(0.0, np.pi / 2, theta_bins),
            phi=np.arange(phi_bins) * (2 * np.pi / phi_bins),
            d=np.geomspace(d_min, d_max, d_bins),
        )


@dataclass(frozen=True)
class Estimate:
    theta_hat: float
    phi_hat: float
    d_hat: float
    p_hat: np.ndarray
    alpha_hat: complex
    residual: float
    low_confidence: bool = False
    notes: tuple[str, ...] = field(default=())


def harmonic_orders(order: int) -> np.ndarray:
    if order < 0:
        raise ValueError("truncation order must be >= 0")
    return np.arange(-order, order + 1)


def bessel_basis(theta, ris: RisArray, wavelength: float, order: int) -> np.ndarray:
    """Elevation part of the separable plane-wave steering vector.

    Returns G with shape (2N+1, M) such that ``G.T @ azimuth_basis(phi, N)``
    approximates :func:`rislens.channel.cm1_steering` at ``(theta, phi)``.
    """
    n = harmonic_orders(order)
    x = (2 * np.pi / wavelength) * ris.radial * np.sin(theta)
    return ((1j ** n)[:, None] * jv(n[:, None], x[None, :])
            * np.exp(-1j * n[:, None] * ris.azimuth[None, :]))


def azimuth_basis(phi, order: int) -> np.ndarray:
    """``exp(1j n phi)`` for n = -N..N; shape (2N+1,) or (2N+1, K) for array phi."""
    n = harmonic_orders(order)
    phi = np.asarray(phi, dtype=float)
    return np.exp(1j * np.multiply.outer(n, phi))


def reconstruction_error(theta: float, phi: float, ris: RisArray, wavelength: float,
                         order: int, weights=None) -> float:
    """Relative error of the truncated expansion, optionally weighted per element."""
    a = cm1_steering_polar(theta, phi, ris, wavelength)
    approx = bessel_basis(theta, ris, wavelength, order).T @ azimuth_basis(phi, order)
    w = np.ones(ris.size) if weights is None else np.abs(np.asarray(weights))
    return float(np.linalg.norm(w * (a - approx)) / np.linalg.norm(w * a))


def gain_estimate(y, W, a, symbol_energy: float) -> complex:
    """Least-squares complex gain for a hypothesised steering vector ``a``.

    Returns ``nan`` when ``W^T a`` vanishes.
    """
    c = np.asarray(W).T @ a
    cc = np.vdot(c, c).real
    if cc == 0.0:
        return complex("nan")
    return complex(np.vdot(c, y) / (np.sqrt(symbol_energy) * cc))


def ml_objective(y, W, a) -> float:
    """Energy of ``y`` outside the span of ``W^T a``."""
    y = np.asarray(y)
    c = np.asarray(W).T @ a
    cc = np.vdot(c, c).real
    if cc == 0.0:
        return float(np.vdot(y, y).real)
    # explicit residual avoids the cancellation in ||y||^2 - |c^H y|^2 / ||c||^2
    r = y - c * (np.vdot(c, y) / cc)
    return float(np.vdot(r, r).real)


def _residuals_rank_one(y, C) -> np.ndarray:
    """``||y||^2 - |c^H y|^2 / ||c||^2`` for every column c of C; inf if c = 0."""
    yy = np.vdot(y, y).real
    cc = np.sum(np.abs(C) ** 2, axis=0)
    proj = np.abs(C.conj().T @ y) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        res = yy - proj / cc
    return np.where(cc > 0, res, np.inf)


def _residuals_subspace(y, B) -> np.ndarray:
    """Least-squares residual of y on each stacked basis B[k] (T x K)."""
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    keep = s > PINV_RTOL * s[:, :1]
    coef = np.einsum("ktj,t->kj", U.conj(), y)
    return np.vdot(y, y).real - np.sum(np.where(keep, np.abs(coef) ** 2, 0.0), axis=1)


def _zoom(grid: np.ndarray, idx: int, points: int) -> np.ndarray:
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, grid.size - 1)]
    return np.linspace(lo, hi, points)


class ThreeStageLocalizer:
    """Grid-search ML localizer with cached elevation bases.

    Parameters
    ----------
    ris : RisArray
    wavelength : float
    grids : SearchGrids, optional
        Defaults to 90 x 360 x 500 bins.
    order : int
        Truncation order N of the Jacobi-Anger expansion.
    symbol_energy : float
        Only used to scale the returned gain estimate.
    refine : bool
        If true, every stage re-searches a finer grid spanning the
        neighbours of the coarse minimum.
    """

    def __init__(self, ris: RisArray, wavelength: float, grids: SearchGrids | None = None,
                 order: int = 5, symbol_energy: float = 1.0, refine: bool = False,
                 zoom_points: int = 21, flat_rtol: float = 1e-6):
        self.ris = ris
        self.wavelength = wavelength
        self.grids = SearchGrids.uniform() if grids is None else grids
        self.order = order
        self.symbol_energy = symbol_energy
        self.refine = refine
        self.zoom_points = zoom_points
        self.flat_rtol = flat_rtol
        self._bases = None

    @classmethod
    def from_scenario(cls, scenario: Scenario, grids: SearchGrids | None = None,
                      order: int = 5, ris: RisArray | None = None, **kwargs):
        ris = scenario.ris() if ris is None else ris
        return cls(ris, scenario.wavelength, grids, order, scenario.symbol_energy, **kwargs)

    @property
    def bases(self) -> np.ndarray:
        """Transposed elevation bases on the grid, shape (n_theta, M, 2N+1)."""
        if self._bases is None:
            self._bases = np.stack([self._basis_t(t) for t in self.grids.theta])
        return self._bases

    def _basis_t(self, theta: float) -> np.ndarray:
        return bessel_basis(theta, self.ris, self.wavelength, self.order).T

    def _check(self, y, W):
        K = 2 * self.order + 1
        if W.ndim != 2 or W.shape[0] != self.ris.size or W.shape[1] != y.shape[0]:
            raise ValueError(f"W shape {W.shape} inconsistent with M={self.ris.size}, T={y.size}")
        if y.shape[0] < K:
            raise ValueError(f"need T >= 2N+1 = {K} pilots, got {y.shape[0]}")

    def stage1_residuals(self, y, W, thetas=None) -> np.ndarray:
        y = np.asarray(y)
        W = np.asarray(W)
        self._check(y, W)
        if thetas is None:
            n_t, M, K = self.bases.shape
            flat = self.bases.transpose(1, 0, 2).reshape(M, n_t * K)
            B = (W.T @ flat).reshape(-1, n_t, K).transpose(1, 0, 2)
        else:
            B = np.stack([W.T @ self._basis_t(t) for t in thetas])
        return _residuals_subspace(y, B)

    def stage1(self, y, W) -> tuple[float, np.ndarray]:
        res = self.stage1_residuals(y, W)
        i = int(np.argmin(res))
        theta = float(self.grids.theta[i])
        if self.refine:
            fine = _zoom(self.grids.theta, i, self.zoom_points)
            theta = float(fine[int(np.argmin(self.stage1_residuals(y, W, fine)))])
        return theta, res

    def stage2_residuals(self, y, W, theta_hat: float, phis=None) -> np.ndarray:
        phis = self.grids.phi if phis is None else phis
        B = np.asarray(W).T @ self._basis_t(theta_hat)
        return _residuals_rank_one(np.asarray(y), B @ azimuth_basis(phis, self.order))

    def stage2(self, y, W, theta_hat: float) -> tuple[float, np.ndarray]:
        res = self.stage2_residuals(y, W, theta_hat)
        if not np.isfinite(res).any():
            raise FloatingPointError("all azimuth bins degenerate")
        i = int(np.argmin(res))
        phi = float(self.grids.phi[i])
        if self.refine:
            step = self.grids.phi[1] - self.grids.phi[0]
            fine = np.linspace(phi - step, phi + step, self.zoom_points)
            best = fine[int(np.argmin(self.stage2_residuals(y, W, theta_hat, fine)))]
            phi = float(np.mod(best, 2 * np.pi))
        return phi, res

    def stage3_residuals(self, y, W, theta_hat: float, phi_hat: float, ds=None) -> np.ndarray:
        ds = self.grids.d if ds is None else np.asarray(ds)
        pts = ds[:, None] * unit_direction(theta_hat, phi_hat)[None, :]
        C = np.asarray(W).T @ cm2_steering_batch(pts, self.ris, self.wavelength)
        return _residuals_rank_one(np.asarray(y), C)

    def stage3(self, y, W, theta_hat: float, phi_hat: float):
        """Distance search; returns ``(d_hat, residuals, notes)``.

        ``notes`` flags an objective that is flat along the ray or whose
        minimum sits on the far edge of the grid.
        """
        res = self.stage3_residuals(y, W, theta_hat, phi_hat)
        i = int(np.argmin(res))
        d = float(self.grids.d[i])
        notes = []
        finite = res[np.isfinite(res)]
        top = finite.max()
        if top <= 0 or (top - finite.min()) <= self.flat_rtol * top:
            notes.append("distance objective flat")
        elif i == res.size - 1:
            notes.append("distance at upper grid edge")
        if self.refine:
            fine = _zoom(self.grids.d, i, self.zoom_points)
            d = float(fine[int(np.argmin(self.stage3_residuals(y, W, theta_hat, phi_hat, fine)))])
        return d, res, tuple(notes)

    def finish(self, y, W, theta: float, phi: float, d: float, notes=()) -> Estimate:
        p_hat = d * unit_direction(theta, phi)
        a = cm2_steering(p_hat, self.ris, self.wavelength)
        alpha = gain_estimate(y, W, a, self.symbol_energy)
        notes = list(notes)
        if not np.isfinite(alpha):
            notes.append("degenerate gain")
        return Estimate(theta, phi, d, p_hat, alpha, ml_objective(y, W, a),
                        low_confidence=bool(notes), notes=tuple(notes))

    def localize(self, y, W) -> Estimate:
        y = np.asarray(y)
        W = np.asarray(W)
        notes: list[str] = []
        theta, _ = self.stage1(y, W)
        try:
            phi, _ = self.stage2(y, W, theta)
        except FloatingPointError as exc:
            notes.append(str(exc))
            phi = float(self.grids.phi[0])
        d, _, n3 = self.stage3(y, W, theta, phi)
        return self.finish(y, W, theta, phi, d, notes + list(n3))


def stage1_elevation(y, W, grids: SearchGrids, ris: RisArray, wavelength: float,
                     order: int = 5) -> float:
    return ThreeStageLocalizer(ris, wavelength, grids, order).stage1(y, W)[0]


def stage2_azimuth(y, W, theta_hat: float, grids: SearchGrids, ris: RisArray,
                   wavelength: float, order: int = 5) -> float:
    return ThreeStageLocalizer(ris, wavelength, grids, order).stage2(y, W, theta_hat)[0]


def stage3_distance(y, W, theta_hat: float, phi_hat: float, grids: SearchGrids,
                    ris: RisArray, scenario: Scenario) -> Estimate:
    loc = ThreeStageLocalizer.from_scenario(scenario, grids, ris=ris)
    d, _, notes = loc.stage3(y, W, theta_hat, phi_hat)
    return loc.finish(np.asarray(y), np.asarray(W), theta_hat, phi_hat, d, notes)


def localize(y, W, grids: SearchGrids, scenario: Scenario, order: int = 5,
             ris: RisArray | None = None) -> Estimate:
    return ThreeStageLocalizer.from_scenario(scenario, grids, order, ris=ris).localize(y, W)
