"""Seeded Monte Carlo sweeps (PEB, RMSE, SNR maps) and their CSV output."""
from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .channel import antenna_coupling, synthesize_observations
from .estimator import SearchGrids, ThreeStageLocalizer
from .fisher import fisher_analysis, prior_peb, snr_batch
from .geometry import SPEED_OF_LIGHT, Scenario, spherical_from_cartesian
from .profiles import PROFILE_KINDS, PriorBelief, make_profiles

log = logging.getLogger(__name__)

EXPERIMENTS = ("peb", "rmse", "snr-map")
STREAM_PURPOSES = {"profile": 0, "prior": 1, "sync": 2, "noise": 3}
REFERENCE_DISTANCES = (0.15, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0)


@dataclass
class RunConfig:
    carrier_hz: float = 2.8e10
    ris_rows: int = 50
    ris_cols: int = 50
    spacing_wavelengths: float = 0.5
    element_area: str | float = "quarter_wavelength_sq"
    antenna_pos_m: str = "0,0,-λ"
    tx_power_w: float = 1e-3
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 8.0
    bandwidth_hz: float = 1e6
    num_pilots: int = 200
    profile: list[str] = field(default_factory=lambda: ["random"])
    prior_sigma_m: list[float] = field(default_factory=lambda: [0.1])
    prior_mean_m: list[float] = field(default_factory=lambda: [0.1, 0.1, 0.1])
    direction: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    distances_m: list[float] = field(default_factory=lambda: list(REFERENCE_DISTANCES))
    trials: int = 200
    profile_realizations: int = 10
    seed: int = 0
    quant_bits: int = 0
    grid_theta_bins: int = 90
    grid_phi_bins: int = 360
    grid_d_bins: int = 500
    d_min_m: float = 0.05
    d_max_m: float = 20.0
    bessel_n: int = 5
    refine: bool = False
    workers: int = 1
    snr_map_extent_m: float = 1.0
    snr_map_points: int = 81
    output: str | None = None

    def __post_init__(self):
        if any(d <= 0 for d in self.distances_m):
            raise ValueError("distances must be positive")
        if self.trials < 1 or self.profile_realizations < 1:
            raise ValueError("trials and profile_realizations must be >= 1")
        for kind in self.profile:
            if kind not in PROFILE_KINDS:
                raise ValueError(f"unknown profile {kind!r}")
        if any(s <= 0 for s in self.prior_sigma_m):
            raise ValueError("prior_sigma_m must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def scenario(self) -> Scenario:
        lam = self.wavelength
        if self.element_area == "quarter_wavelength_sq":
            side = lam / 2
        else:
            side = math.sqrt(float(self.element_area))
        return Scenario(
            wavelength=lam,
            ris_rows=self.ris_rows,
            ris_cols=self.ris_cols,
            element_spacing=self.spacing_wavelengths * lam,
            element_side=side,
            antenna_position=_parse_position(self.antenna_pos_m, lam),
            tx_power=self.tx_power_w,
            noise_psd=10 ** (self.noise_psd_dbm_hz / 10) * 1e-3,
            noise_figure=10 ** (self.noise_figure_db / 10),
            bandwidth=self.bandwidth_hz,
            num_pilots=self.num_pilots,
        )

    def grids(self) -> SearchGrids:
        return SearchGrids.uniform(self.grid_theta_bins, self.grid_phi_bins, self.grid_d_bins,
                                   self.d_min_m, self.d_max_m)

    def unit_direction(self) -> np.ndarray:
        u = np.asarray(self.direction, dtype=float)
        return u / np.linalg.norm(u)


@dataclass(frozen=True)
class CurvePoint:
    distance: float
    profile: str
    sigma: float
    values: dict = field(default_factory=dict)


def _parse_scalar(text: str, lam: float) -> float:
    t = text.strip().replace("lambda", "λ").replace("*", "")
    if "λ" not in t:
        return float(t)
    coef = t.replace("λ", "")
    if coef in ("", "+"):
        return lam
    if coef == "-":
        return -lam
    return float(coef) * lam


def _parse_position(text, lam: float) -> tuple[float, float, float]:
    parts = text.split(",") if isinstance(text, str) else list(text)
    if len(parts) != 3:
        raise ValueError(f"expected three coordinates, got {text!r}")
    return tuple(_parse_scalar(str(p), lam) for p in parts)


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    if name in ("antenna_pos_m", "output"):
        return raw
    if name == "element_area":
        return raw if raw == "quarter_wavelength_sq" else float(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if isinstance(default, list):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if default and isinstance(default[0], str):
            return items
        return [float(s) for s in items]
    if isinstance(default, int):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    defaults = RunConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "experiment":
            continue
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, known[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), **overrides)


def point_key(*parts) -> int:
    """Stable 32-bit key for a sweep point, independent of sweep order."""
    return zlib.crc32("|".join(repr(p) for p in parts).encode())


def rng_streams(seed: int, trial: int, purpose: str, point: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, point, trial, purpose) combination."""
    ss = np.random.SeedSequence(seed, spawn_key=(point, trial, STREAM_PURPOSES[purpose]))
    return np.random.Generator(np.random.PCG64(ss))


def _sweep_points(config: RunConfig):
    """(profile, sigma) pairs; random profiles ignore the prior and get sigma = nan."""
    pairs = []
    for kind in sorted(set(config.profile)):
        if kind == "random":
            pairs.append((kind, math.nan))
        else:
            pairs.extend((kind, float(s)) for s in sorted(set(config.prior_sigma_m)))
    return pairs


def _sort_key(pt: CurvePoint):
    return (pt.profile, -1.0 if math.isnan(pt.sigma) else pt.sigma, pt.distance)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Setup:
    def __init__(self, config: RunConfig):
        self.config = config
        self.scenario = config.scenario()
        self.ris = self.scenario.ris()
        self.h_ant = antenna_coupling(self.scenario, self.ris)

    def profiles(self, kind, sigma, p_mean, trial, key):
        prior = None if kind == "random" else PriorBelief.isotropic(p_mean, sigma)
        prior_rng = rng_streams(self.config.seed, trial, "prior", key)
        prof_rng = rng_streams(self.config.seed, trial, "profile", key)
        rng = prof_rng if kind == "random" else prior_rng
        return make_profiles(kind, self.ris, self.scenario.wavelength, self.h_ant,
                             self.scenario.num_pilots, rng, prior, self.config.quant_bits)


def run_peb_sweep(config: RunConfig) -> list[CurvePoint]:
    """Mean PEB over profile realizations at each distance along ``direction``."""
    setup = _Setup(config)
    u = config.unit_direction()
    out = []
    for kind, sigma in _sweep_points(config):
        for d in config.distances_m:
            p = d * u
            key = point_key("peb", kind, sigma, d)

            def one(r, kind=kind, sigma=sigma, p=p, key=key):
                W = setup.profiles(kind, sigma, p, r, key).W
                return fisher_analysis(p, W, setup.scenario, setup.ris).peb

            pebs = np.array(_map(one, range(config.profile_realizations), config.workers))
            out.append(CurvePoint(d, kind, sigma, {
                "peb_m": float(np.mean(pebs)),
                "prior_peb_m": math.nan if math.isnan(sigma) else prior_peb(sigma),
            }))
    return sorted(out, key=_sort_key)


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def run_rmse_sweep(config: RunConfig) -> list[CurvePoint]:
    """Monte Carlo RMSE of the three-stage localizer at each distance."""
    setup = _Setup(config)
    sc = setup.scenario
    loc = ThreeStageLocalizer(setup.ris, sc.wavelength, config.grids(), config.bessel_n,
                              sc.symbol_energy, refine=config.refine)
    loc.bases  # build once before worker threads share it
    u = config.unit_direction()
    out = []
    for kind, sigma in _sweep_points(config):
        for d in config.distances_m:
            p = d * u
            truth = spherical_from_cartesian(p)
            key = point_key("rmse", kind, sigma, d)

            def one(t, kind=kind, sigma=sigma, p=p, key=key):
                W = setup.profiles(kind, sigma, p, t, key).W
                sync = rng_streams(config.seed, t, "sync", key).uniform(0.0, 2 * np.pi)
                obs = synthesize_observations(W, p, sc, rng_streams(config.seed, t, "noise", key),
                                              setup.ris, theta_sync=sync)
                try:
                    est = loc.localize(obs.y, W)
                except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
                    log.warning("trial %d at d=%g failed: %s", t, d, exc)
                    return (float(np.dot(p, p)), math.pi**2, math.pi**2, d**2, True)
                err2 = float(np.sum((est.p_hat - p) ** 2))
                return (err2, (est.theta_hat - truth.theta) ** 2,
                        _wrap(est.phi_hat - truth.phi) ** 2, (est.d_hat - d) ** 2,
                        err2 > (d / 2) ** 2)

            res = np.array(_map(one, range(config.trials), config.workers), dtype=float)
            mse = res[:, 0].mean()
            rmse = math.sqrt(mse)
            n = res.shape[0]
            se_mse = res[:, 0].std(ddof=1) / math.sqrt(n) if n > 1 else math.nan
            out.append(CurvePoint(d, kind, sigma, {
                "trials": n,
                "rmse_m": rmse,
                "rmse_theta_rad": math.sqrt(res[:, 1].mean()),
                "rmse_phi_rad": math.sqrt(res[:, 2].mean()),
                "rmse_d_m": math.sqrt(res[:, 3].mean()),
                "outlier_rate": float(res[:, 4].mean()),
                "stderr_m": se_mse / (2 * rmse) if rmse > 0 else math.nan,
            }))
    return sorted(out, key=_sort_key)


def snr_map_points(extent: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid in the X = Y plane: horizontal offset along (1,1,0)/sqrt2 and height z > 0.

    Returns ``(points, horizontal)``, points of shape (n*n, 3).
    """
    h = np.linspace(-extent, extent, n)
    z = np.linspace(extent / n, extent, n)
    hh, zz = np.meshgrid(h, z)
    xy = hh.ravel() / np.sqrt(2)
    return np.column_stack([xy, xy, zz.ravel()]), hh.ravel()


def snr_map_profiles(config: RunConfig) -> dict[str, np.ndarray]:
    """The single W realization per profile kind used for the SNR map."""
    setup = _Setup(config)
    sigma = config.prior_sigma_m[0]
    mean = np.asarray(config.prior_mean_m, dtype=float)
    return {kind: setup.profiles(kind, sigma, mean, 0, point_key("snr-map", kind, sigma)).W
            for kind in sorted(set(config.profile))}


def run_snr_map(config: RunConfig) -> list[dict]:
    """SNR (dB, truncated at 0) of one profile realization per kind over the X = Y plane."""
    scenario = config.scenario()
    ris = scenario.ris()
    pts, _ = snr_map_points(config.snr_map_extent_m, config.snr_map_points)
    rows = []
    for kind, W in snr_map_profiles(config).items():
        vals = np.maximum(snr_batch(W, pts, scenario, ris), 0.0)
        rows.extend({"x_m": x, "y_m": y, "z_m": z, "profile": kind, "snr_db": v}
                    for (x, y, z), v in zip(pts, vals))
    return rows


PEB_COLUMNS = ("distance_m", "profile", "sigma_m", "peb_m", "prior_peb_m")
RMSE_COLUMNS = ("distance_m", "profile", "sigma_m", "trials", "rmse_m", "rmse_theta_rad",
                "rmse_phi_rad", "rmse_d_m", "outlier_rate", "stderr_m")
SNR_COLUMNS = ("x_m", "y_m", "z_m", "profile", "snr_db")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.16e}"


def format_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def curve_rows(points: list[CurvePoint]) -> list[dict]:
    return [{"distance_m": p.distance, "profile": p.profile, "sigma_m": p.sigma, **p.values}
            for p in points]


def run_experiment(experiment: str, config: RunConfig) -> str:
    """Run one experiment and return its CSV text."""
    if experiment == "peb":
        return format_csv(curve_rows(run_peb_sweep(config)), PEB_COLUMNS)
    if experiment == "rmse":
        return format_csv(curve_rows(run_rmse_sweep(config)), RMSE_COLUMNS)
    if experiment == "snr-map":
        return format_csv(run_snr_map(config), SNR_COLUMNS)
    raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")


def with_overrides(config: RunConfig, **kwargs) -> RunConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
