"""Scenario constants, RIS element layout and coordinate conversions.

Angles follow the usual convention for a planar surface in the XY plane:
``theta`` is measured from the +Z axis (surface normal), ``phi`` counter
clockwise from +X.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SphericalCoords:
    d: float
    theta: float
    phi: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"distance must be positive, got {self.d}")


@dataclass(frozen=True)
class RisArray:
    """Element centres of a planar RIS, all with z = 0.

    Attributes
    ----------
    positions : ndarray, shape (M, 3)
    radial : ndarray, shape (M,)
        Distance of each element from the origin.
    azimuth : ndarray, shape (M,)
        Azimuth of each element in [0, 2pi).
    """

    positions: np.ndarray
    radial: np.ndarray = field(repr=False)
    azimuth: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def r_max(self) -> float:
        return float(self.radial.max())

    @classmethod
    def from_positions(cls, positions) -> "RisArray":
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if np.any(positions[:, 2] != 0.0):
            raise ValueError("RIS elements must lie in the z = 0 plane")
        radial = np.hypot(positions[:, 0], positions[:, 1])
        azimuth = np.mod(np.arctan2(positions[:, 1], positions[:, 0]), 2 * np.pi)
        return cls(positions, radial, azimuth)


@dataclass(frozen=True)
class Scenario:
    """Physical constants of one RIS-lens deployment.

    Derived quantities use the narrowband convention: one symbol lasts
    ``1 / bandwidth`` so ``symbol_energy = tx_power / bandwidth``, and the
    noise variance per complex sample is ``noise_psd * noise_figure``.
    """

    wavelength: float
    ris_rows: int = 50
    ris_cols: int = 50
    element_spacing: float | None = None
    element_side: float | None = None
    antenna_position: tuple[float, float, float] | None = None
    tx_power: float = 1e-3
    noise_psd: float = 10 ** (-174 / 10) * 1e-3
    noise_figure: float = 10 ** (8 / 10)
    bandwidth: float = 1e6
    num_pilots: int = 200

    def __post_init__(self):
        lam = self.wavelength
        if not lam > 0:
            raise ValueError("wavelength must be positive")
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", lam / 2)
        if self.element_side is None:
            object.__setattr__(self, "element_side", lam / 2)
        if self.antenna_position is None:
            object.__setattr__(self, "antenna_position", (0.0, 0.0, -lam))
        object.__setattr__(
            self, "antenna_position", tuple(float(v) for v in self.antenna_position)
        )
        if self.ris_rows < 1 or self.ris_cols < 1:
            raise ValueError("RIS needs at least one row and one column")
        if not (self.element_side > 0 and self.element_spacing > 0):
            raise ValueError("element side and spacing must be positive")
        if self.num_pilots < 1:
            raise ValueError("need at least one pilot")
        if not (self.symbol_energy > 0 and self.noise_variance > 0):
            raise ValueError("symbol energy and noise variance must be positive")
        if self.element_area > lam**2 / 4 * (1 + 1e-12):
            warnings.warn(
                f"element area {self.element_area:.3e} m^2 exceeds lambda^2/4",
                stacklevel=2,
            )

    @classmethod
    def from_carrier(cls, carrier_hz: float = 28e9, **kwargs) -> "Scenario":
        return cls(wavelength=SPEED_OF_LIGHT / carrier_hz, **kwargs)

    @property
    def num_elements(self) -> int:
        return self.ris_rows * self.ris_cols

    @property
    def element_area(self) -> float:
        return self.element_side**2

    @property
    def symbol_energy(self) -> float:
        return self.tx_power / self.bandwidth

    @property
    def noise_variance(self) -> float:
        return self.noise_psd * self.noise_figure

    @property
    def snr_tx(self) -> float:
        """Es/N0 before any path loss (linear)."""
        return self.symbol_energy / self.noise_variance

    def ris(self) -> RisArray:
        return build_ris_grid(self.ris_rows, self.ris_cols, self.element_spacing)


def wavevector(coords: SphericalCoords, wavelength: float) -> np.ndarray:
    """Wavevector of a plane wave arriving from ``(theta, phi)``; rad/m."""
    st = np.sin(coords.theta)
    return -(2 * np.pi / wavelength) * np.array(
        [st * np.cos(coords.phi), st * np.sin(coords.phi), np.cos(coords.theta)]
    )


def unit_direction(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def cartesian_from_spherical(coords: SphericalCoords) -> np.ndarray:
    return coords.d * unit_direction(coords.theta, coords.phi)


def spherical_from_cartesian(p) -> SphericalCoords:
    p = np.asarray(p, dtype=float)
    d = float(np.linalg.norm(p))
    if d == 0.0:
        raise ValueError("cannot convert the origin to spherical coordinates")
    if p[2] < 0:
        raise ValueError("positions must satisfy z >= 0")
    # atan2 keeps full precision close to the normal, unlike arccos(z/d)
    theta = float(np.arctan2(np.hypot(p[0], p[1]), p[2]))
    phi = float(np.mod(np.arctan2(p[1], p[0]), 2 * np.pi))
    if phi >= 2 * np.pi:
        phi = 0.0
    return SphericalCoords(d, theta, phi)


def build_ris_grid(rows: int, cols: int, spacing: float) -> RisArray:
    """Uniform rectangular grid centred on the origin, row-major order.

    Row ``m`` sets the y coordinate and column ``n`` the x coordinate.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    x = (np.arange(cols) - (cols - 1) / 2) * spacing
    y = (np.arange(rows) - (rows - 1) / 2) * spacing
    xx, yy = np.meshgrid(x, y)
    pos = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(rows * cols)])
    return RisArray.from_positions(pos)
