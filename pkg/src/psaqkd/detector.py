"""Conventional and modified practical homodyne-detector models.

The conventional model normalizes raw detector output by the shot-noise unit
``u_s = A^2 X_LO^2`` and adds electronic noise ``v_el`` in those units. The
modified model normalizes by ``u_s' = A^2 X_LO^2 + V_ele`` and represents the
electronic noise as a beamsplitter of transmittance ``eta_e``. The two agree
after rescaling by ``s = u_s' / u_s = 1 + v_el``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import gaussian
from .errors import DomainError


@dataclass(frozen=True)
class RawCalibration:
    """Raw detector calibration: gain ``A``, LO amplitude ``x_lo`` and electronic-noise variance ``v_ele``."""

    A: float
    x_lo: float
    v_ele: float

    def __post_init__(self):
        if self.A <= 0 or self.x_lo <= 0:
            raise DomainError(f"A and X_LO must be positive, got A={self.A}, X_LO={self.x_lo}")
        if self.v_ele < 0:
            raise DomainError(f"raw electronic noise variance must be >= 0, got {self.v_ele}")

    @property
    def u_s(self) -> float:
        """Conventional shot-noise unit ``A^2 X_LO^2``."""
        return self.A ** 2 * self.x_lo ** 2

    @property
    def u_s_prime(self) -> float:
        """Modified shot-noise unit ``A^2 X_LO^2 + V_ele``."""
        return self.u_s + self.v_ele

    @property
    def v_el(self) -> float:
        """Electronic noise in conventional shot-noise units."""
        return self.v_ele / self.u_s


def _check_efficiency(name: str, value: float) -> None:
    if not 0.0 < value <= 1.0:
        raise DomainError(f"{name} must lie in (0, 1], got {value}")


@dataclass(frozen=True)
class ConventionalDetector:
    eta_d: float
    v_el: float

    def __post_init__(self):
        _check_efficiency("eta_d", self.eta_d)
        if self.v_el < 0:
            raise DomainError(f"v_el must be >= 0, got {self.v_el}")

    def to_modified(self) -> "ModifiedDetector":
        return ModifiedDetector(self.eta_d, eta_e_from_vel(self.v_el))


@dataclass(frozen=True)
class ModifiedDetector:
    eta_d: float
    eta_e: float

    def __post_init__(self):
        _check_efficiency("eta_d", self.eta_d)
        _check_efficiency("eta_e", self.eta_e)

    @classmethod
    def from_calibration(cls, eta_d: float, cal: RawCalibration) -> "ModifiedDetector":
        return cls(eta_d, eta_e_from_raw(cal))

    def to_conventional(self) -> ConventionalDetector:
        return ConventionalDetector(self.eta_d, vel_from_eta_e(self.eta_e))


class BSOrder(enum.Enum):
    """Order in which the incoming signal meets the two trusted beamsplitters."""

    EFFICIENCY_FIRST = "efficiency-first"
    ELECTRONIC_FIRST = "electronic-first"


def eta_e_from_raw(cal: RawCalibration) -> float:
    return cal.u_s / (cal.u_s + cal.v_ele)


def eta_e_from_vel(v_el: float) -> float:
    if v_el < 0:
        raise DomainError(f"v_el must be >= 0, got {v_el}")
    return 1.0 / (1.0 + v_el)


def vel_from_eta_e(eta_e: float) -> float:
    if eta_e <= 0:
        raise DomainError("eta_e = 0 corresponds to infinite electronic noise")
    _check_efficiency("eta_e", eta_e)
    return 1.0 / eta_e - 1.0


def scaling_s(v_el: float) -> float:
    """Ratio ``u_s' / u_s`` between the two shot-noise units."""
    if v_el < 0:
        raise DomainError(f"v_el must be >= 0, got {v_el}")
    return 1.0 + v_el


def conventional_output_variance(det: ConventionalDetector, V_M: float) -> float:
    """Output variance in units of ``u_s``: ``eta_d V_M + (1 - eta_d) + v_el``."""
    return det.eta_d * V_M + (1.0 - det.eta_d) + det.v_el


def modified_output_variance(det: ModifiedDetector, V_M: float) -> float:
    """Output variance in units of ``u_s'``: ``eta_e eta_d (V_M - 1) + 1``."""
    return det.eta_e * det.eta_d * V_M - det.eta_e * det.eta_d + 1.0


def equivalence_residual(eta_d: float, v_el: float, V_M: float) -> float:
    conv = conventional_output_variance(ConventionalDetector(eta_d, v_el), V_M)
    mod = modified_output_variance(ModifiedDetector(eta_d, eta_e_from_vel(v_el)), V_M)
    return abs(scaling_s(v_el) * mod - conv)


def modified_chain_variance(det: ModifiedDetector, V_M: float,
                            order: BSOrder = BSOrder.ELECTRONIC_FIRST) -> float:
    """Detected x-variance obtained by pushing a thermal input through the two beamsplitters.

    Covariance-level counterpart of :func:`modified_output_variance`, usable
    with either beamsplitter ordering.
    """
    if V_M < 1:
        raise DomainError(f"input variance must be >= 1, got {V_M}")
    etas = (det.eta_e, det.eta_d) if order is BSOrder.ELECTRONIC_FIRST else (det.eta_d, det.eta_e)
    gamma = gaussian.thermal(V_M)
    for eta in etas:
        gamma = gaussian.attach_vacuum(gamma)
        gamma = gaussian.apply(gaussian.beamsplitter(eta, 2, 0, 1), gamma)
        gamma = gaussian.select_modes(gamma, [0])
    return float(gamma[0, 0])


def conventional_noise_epr_variance(det: ConventionalDetector) -> float:
    """Variance of the noise EPR state that reproduces ``v_el`` behind the ``eta_d`` beamsplitter."""
    if det.eta_d == 1.0:
        return math.inf if det.v_el > 0 else 1.0
    return 1.0 + det.v_el / (1.0 - det.eta_d)


__all__ = [
    "BSOrder", "ConventionalDetector", "ModifiedDetector", "RawCalibration",
    "conventional_noise_epr_variance", "conventional_output_variance", "equivalence_residual",
    "eta_e_from_raw", "eta_e_from_vel", "modified_chain_variance", "modified_output_variance",
    "scaling_s", "vel_from_eta_e",
]
