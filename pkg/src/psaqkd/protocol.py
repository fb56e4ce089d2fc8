"""Entanglement-based key-rate pipeline for GG02 with a trusted PSA inside Bob's detector.

Chain of Bob's mode: quantum channel -> electronic-noise beamsplitter
(``eta_e``, its output port D is handed to Eve) -> phase-sensitive amplifier
on x -> detection-efficiency beamsplitter (``eta_d``, output port C is
trusted) -> ideal homodyne on x. The final state is ordered ``(A, C, B4')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian
from .detector import ModifiedDetector
from .errors import DomainError, NumericalDomainError

# mode positions in the final (A, C, B4') ordering
MODE_A, MODE_C, MODE_B = 0, 1, 2

# At large PSA gain the amplified mode carries variances ~1e7, and float64
# rounding of the beamsplitter amplitudes alone breaks purity at the 1e-9
# level; the chain is therefore propagated in extended precision.
_WORK = np.longdouble


def channel_transmittance(L: float, alpha: float = 0.2) -> float:
    """Fibre transmittance ``10^(-alpha L / 10)`` for length ``L`` km at ``alpha`` dB/km."""
    if L < 0 or alpha < 0:
        raise DomainError(f"length and attenuation must be >= 0, got L={L}, alpha={alpha}")
    return 10.0 ** (-alpha * L / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    transmittance: float
    excess_noise: float = 0.01
    length_km: float | None = None
    alpha_db_per_km: float | None = None

    def __post_init__(self):
        if not 0.0 < self.transmittance <= 1.0:
            raise DomainError(f"transmittance must lie in (0, 1], got {self.transmittance}")
        if self.excess_noise < 0:
            raise DomainError(f"excess noise must be >= 0, got {self.excess_noise}")

    @classmethod
    def from_distance(cls, length_km: float, alpha_db_per_km: float = 0.2,
                      excess_noise: float = 0.01) -> "ChannelParams":
        T = channel_transmittance(length_km, alpha_db_per_km)
        return cls(T, excess_noise, length_km, alpha_db_per_km)

    def at_distance(self, length_km: float) -> "ChannelParams":
        alpha = 0.2 if self.alpha_db_per_km is None else self.alpha_db_per_km
        return ChannelParams.from_distance(length_km, alpha, self.excess_noise)

    def with_noise(self, excess_noise: float) -> "ChannelParams":
        return ChannelParams(self.transmittance, excess_noise, self.length_km, self.alpha_db_per_km)


@dataclass(frozen=True)
class ProtocolParams:
    """EPR variance ``V`` (modulation variance ``V - 1``), reconciliation efficiency and PSA gain."""

    V: float = 40.0
    beta: float = 0.956
    g: float = 1.0

    def __post_init__(self):
        if self.V <= 1:
            raise DomainError(f"EPR variance must exceed 1, got {self.V}")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"reconciliation efficiency must lie in [0, 1], got {self.beta}")
        if self.g < 1:
            raise DomainError(f"deamplifying gain: g={self.g} < 1")

    @property
    def modulation_variance(self) -> float:
        return self.V - 1.0


@dataclass
class ChainRecord:
    """Intermediate covariance matrices of :func:`build_chain`."""

    gamma_AB1: np.ndarray
    gamma_AB2D: np.ndarray
    gamma_AB2: np.ndarray
    gamma_AB3: np.ndarray
    gamma_AB4C: np.ndarray
    gamma_ACB4: np.ndarray

    def matrices(self) -> dict[str, np.ndarray]:
        return dict(self.__dict__)


@dataclass
class KeyRateBreakdown:
    R: float
    I_AB: float
    chi_BE: float
    lambdas: tuple[float, ...]
    gamma_ACB4: np.ndarray = field(repr=False)
    beta: float = field(default=1.0, repr=False)


def channel_output(ch: ChannelParams, V: float, dtype=float) -> np.ndarray:
    """Covariance of modes (A, B1) after the channel."""
    T, eps, V = dtype(ch.transmittance), dtype(ch.excess_noise), dtype(V)
    c = np.sqrt(T * (V * V - 1))
    b = T * (V - 1 + eps) + 1
    I, Z = np.eye(2, dtype=dtype), gaussian.SIGMA_Z.astype(dtype)
    return np.block([[V * I, c * Z], [c * Z, b * I]])


def build_chain(ch: ChannelParams, det: ModifiedDetector, pp: ProtocolParams,
                apply_psa: bool = True) -> tuple[np.ndarray, ChainRecord]:
    """Propagate the EPR state through channel and detector; return ``gamma_ACB4'`` and intermediates.

    ``apply_psa=False`` skips the amplifier step entirely (used to check that
    ``g = 1`` is a no-op).
    """
    gamma_AB1 = channel_output(ch, pp.V, _WORK)

    gamma = gaussian.attach_vacuum(gamma_AB1)
    gamma_AB2D = gaussian.apply(gaussian.beamsplitter(det.eta_e, 3, 1, 2, _WORK), gamma)
    gamma_AB2 = gaussian.select_modes(gamma_AB2D, [0, 1])

    if apply_psa:
        gamma_AB3 = gaussian.apply(gaussian.psa(pp.g, 2, 1, _WORK), gamma_AB2)
    else:
        gamma_AB3 = gamma_AB2

    gamma = gaussian.attach_vacuum(gamma_AB3)
    gamma_AB4C = gaussian.apply(gaussian.beamsplitter(det.eta_d, 3, 1, 2, _WORK), gamma)
    gamma_ACB4 = gaussian.select_modes(gamma_AB4C, [0, 2, 1])

    stages = (gamma_AB1, gamma_AB2D, gamma_AB2, gamma_AB3, gamma_AB4C, gamma_ACB4)
    record = ChainRecord(*(m.astype(float) for m in stages))
    return record.gamma_ACB4, record


def mutual_information(gamma_ACB4: np.ndarray, V: float | None = None) -> float:
    """Alice (heterodyne on A) / Bob (homodyne x on B4') mutual information in bits.

    Heterodyning halves the variance seen by Alice, ``(V + 1) / 2``, and
    scales her covariance with Bob by ``1 / sqrt(2)``.
    """
    xa, xb = 2 * MODE_A, 2 * MODE_B
    if V is None:
        V = gamma_ACB4[xa, xa]
    v_am = (V + 1.0) / 2.0
    c_het = gamma_ACB4[xa, xb] / math.sqrt(2.0)
    v_b = gamma_ACB4[xb, xb]
    v_cond = v_am - c_het ** 2 / v_b
    if v_cond <= 0:
        raise NumericalDomainError(f"non-positive conditional variance {v_cond}")
    return 0.5 * math.log2(v_am / v_cond)


def holevo_bound(gamma_ACB4: np.ndarray) -> tuple[float, tuple[float, ...]]:
    """Eve's Holevo information on Bob's x outcome, plus the five symplectic eigenvalues used."""
    lam_full = gaussian.symplectic_eigenvalues(gamma_ACB4)
    conditioned = gaussian.homodyne_condition(gamma_ACB4, MODE_B, "x")
    lam_cond = gaussian.symplectic_eigenvalues(conditioned)
    chi = gaussian.entropy_from_spectrum(lam_full) - gaussian.entropy_from_spectrum(lam_cond)
    return chi, tuple(float(x) for x in (*lam_full, *lam_cond))


def secret_key_rate(ch: ChannelParams, det: ModifiedDetector, pp: ProtocolParams) -> KeyRateBreakdown:
    """Asymptotic reverse-reconciliation rate ``beta I_AB - chi_BE`` (bits/pulse).

    Negative values are returned unchanged; they mean no key can be extracted.
    """
    gamma, _ = build_chain(ch, det, pp)
    i_ab = mutual_information(gamma, pp.V)
    chi, lambdas = holevo_bound(gamma)
    return KeyRateBreakdown(pp.beta * i_ab - chi, i_ab, chi, lambdas, gamma, pp.beta)


def key_rate(ch: ChannelParams, det: ModifiedDetector, pp: ProtocolParams) -> float:
    return secret_key_rate(ch, det, pp).R


def b1_variance(ch: ChannelParams, V: float) -> float:
    """Quadrature variance of the mode arriving at Bob."""
    return ch.transmittance * (V - 1.0 + ch.excess_noise) + 1.0
