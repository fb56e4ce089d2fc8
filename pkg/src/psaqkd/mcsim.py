"""Sample-level simulation of the prepare-and-measure detector chain.

Draws Bob's incoming quadratures, pushes them through PSA, detection loss and
raw electronic noise as the hardware would, normalizes by the modified
shot-noise unit and compares the sample variances with the
entanglement-based prediction.

Sampling is split into fixed-size chunks. Chunk ``i`` draws from its own
``SeedSequence(seed, spawn_key=(i,))`` substream and the per-chunk moments are
merged in chunk order, so results depend only on ``(seed, n_samples)`` and
never on how many workers evaluated the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .detector import RawCalibration, eta_e_from_raw
from .errors import DomainError

CHUNK_SIZE = 1 << 16
DEFAULT_Z = 4.0


@dataclass(frozen=True)
class PMConfig:
    cal: RawCalibration
    eta_d: float
    g: float
    V_B1: float
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta_d <= 1.0:
            raise DomainError(f"eta_d must lie in (0, 1], got {self.eta_d}")
        if self.g < 1:
            raise DomainError(f"deamplifying gain: g={self.g} < 1")
        if self.V_B1 < 1:
            raise DomainError(f"V_B1 must be >= 1, got {self.V_B1}")
        if self.n_samples < 1:
            raise DomainError(f"n_samples must be positive, got {self.n_samples}")
        if self.seed < 0:
            raise DomainError(f"seed must be unsigned, got {self.seed}")

    @property
    def eta_e(self) -> float:
        return eta_e_from_raw(self.cal)


@dataclass
class EquivalenceReport:
    n_samples: int
    sample_variance_x: float
    sample_variance_p: float
    predicted_x: float
    predicted_p: float
    z_scores: tuple[float, float]
    z_threshold: float
    sample_covariance_xp: float
    z_covariance: float
    passed: bool

    def lines(self) -> list[str]:
        return [
            f"n_samples={self.n_samples}",
            f"var_x sample={self.sample_variance_x:.12g} predicted={self.predicted_x:.12g} z={self.z_scores[0]:.6f}",
            f"var_p sample={self.sample_variance_p:.12g} predicted={self.predicted_p:.12g} z={self.z_scores[1]:.6f}",
            f"cov_xp sample={self.sample_covariance_xp:.12g} z={self.z_covariance:.6f}",
            f"z_threshold={self.z_threshold:g} result={'PASS' if self.passed else 'FAIL'}",
        ]


def _chunk_bounds(n: int) -> list[tuple[int, int]]:
    return [(i, min(CHUNK_SIZE, n - i * CHUNK_SIZE)) for i in range(math.ceil(n / CHUNK_SIZE))]


def _raw_chunk(cfg: PMConfig, index: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(index,))))
    sd_b = math.sqrt(cfg.V_B1)
    sd_ele = math.sqrt(cfg.cal.v_ele)
    xb, pb = rng.normal(0.0, sd_b, size), rng.normal(0.0, sd_b, size)
    xv, pv = rng.normal(0.0, 1.0, size), rng.normal(0.0, 1.0, size)
    x_ele, p_ele = rng.normal(0.0, sd_ele, size), rng.normal(0.0, sd_ele, size)

    t, r = math.sqrt(cfg.eta_d), math.sqrt(1.0 - cfg.eta_d)
    amp = cfg.cal.A * cfg.cal.x_lo
    sg = math.sqrt(cfg.g)
    x_raw = amp * (t * sg * xb + r * xv) + x_ele
    p_raw = amp * (t * pb / sg + r * pv) + p_ele
    return x_raw, p_raw


def iter_raw_chunks(cfg: PMConfig) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Raw (unnormalized) detector outputs, chunk by chunk in a fixed order."""
    for index, size in _chunk_bounds(cfg.n_samples):
        yield _raw_chunk(cfg, index, size)


def simulate_pm_raw(cfg: PMConfig) -> tuple[np.ndarray, np.ndarray]:
    xs, ps = zip(*iter_raw_chunks(cfg))
    return np.concatenate(xs), np.concatenate(ps)


def normalize(raw: np.ndarray, cal: RawCalibration, unit: str = "modified") -> np.ndarray:
    """Divide raw output by the square root of the chosen shot-noise unit (``modified`` or ``conventional``)."""
    if unit == "modified":
        return raw / math.sqrt(cal.u_s_prime)
    if unit == "conventional":
        return raw / math.sqrt(cal.u_s)
    raise ValueError(f"unknown shot-noise unit {unit!r}")


def simulate_pm(cfg: PMConfig) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``(x, p)`` samples, deterministic in ``cfg.seed``."""
    x_raw, p_raw = simulate_pm_raw(cfg)
    return normalize(x_raw, cfg.cal), normalize(p_raw, cfg.cal)


def eb_predicted_variance(cfg: PMConfig) -> tuple[float, float]:
    """x and p output variances of the entanglement-based detector model."""
    ee, ed, g, vb = cfg.eta_e, cfg.eta_d, cfg.g, cfg.V_B1
    v_x = ee * (ed * g * vb + (1.0 - ed)) + (1.0 - ee)
    v_p = ee * (ed * vb / g + (1.0 - ed)) + (1.0 - ee)
    return v_x, v_p


@dataclass
class _Moments:
    n: int = 0
    mx: float = 0.0
    mp: float = 0.0
    sxx: float = 0.0
    spp: float = 0.0
    sxp: float = 0.0

    @classmethod
    def of(cls, x: np.ndarray, p: np.ndarray) -> "_Moments":
        mx, mp = float(x.mean()), float(p.mean())
        dx, dp = x - mx, p - mp
        return cls(x.size, mx, mp, float(dx @ dx), float(dp @ dp), float(dx @ dp))

    def merge(self, o: "_Moments") -> "_Moments":
        # pairwise combine (Chan et al.)
        if self.n == 0:
            return o
        n = self.n + o.n
        dx, dp = o.mx - self.mx, o.mp - self.mp
        w = self.n * o.n / n
        return _Moments(
            n,
            self.mx + dx * o.n / n,
            self.mp + dp * o.n / n,
            self.sxx + o.sxx + dx * dx * w,
            self.spp + o.spp + dp * dp * w,
            self.sxp + o.sxp + dx * dp * w,
        )


def sample_moments(cfg: PMConfig, max_workers: int | None = None) -> tuple[float, float, float]:
    """Unbiased sample variances of x and p and their covariance, in modified SNU."""
    u = cfg.cal.u_s_prime

    def work(bounds):
        x, p = _raw_chunk(cfg, *bounds)
        return _Moments.of(x / math.sqrt(u), p / math.sqrt(u))

    bounds = _chunk_bounds(cfg.n_samples)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    total = _Moments()
    for part in parts:
        total = total.merge(part)
    dof = total.n - 1
    return total.sxx / dof, total.spp / dof, total.sxp / dof


def verify_equivalence(cfg: PMConfig, z_threshold: float = DEFAULT_Z,
                       predicted: tuple[float, float] | None = None,
                       max_workers: int | None = None) -> EquivalenceReport:
    """Compare simulated output variances with the EB prediction via z-scores.

    The standard error of a Gaussian sample variance is ``V sqrt(2 / (n - 1))``.
    ``predicted`` overrides the model prediction (used to check test power).
    """
    if cfg.n_samples < 10_000:
        raise DomainError(f"need at least 1e4 samples for a meaningful test, got {cfg.n_samples}")
    vx, vp, cxp = sample_moments(cfg, max_workers)
    px, pp = eb_predicted_variance(cfg) if predicted is None else predicted
    k = math.sqrt(2.0 / (cfg.n_samples - 1))
    zx = (vx - px) / (px * k)
    zp = (vp - pp) / (pp * k)
    zc = cxp / math.sqrt(px * pp / cfg.n_samples)
    ok = abs(zx) < z_threshold and abs(zp) < z_threshold
    return EquivalenceReport(cfg.n_samples, vx, vp, px, pp, (zx, zp), z_threshold, cxp, zc, ok)
