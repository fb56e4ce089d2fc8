"""Key rates for GG02 CV-QKD with a modified practical homodyne detector and a trusted PSA."""

from .detector import ConventionalDetector, ModifiedDetector, RawCalibration
from .errors import DomainError, NumericalDomainError
from .protocol import ChannelParams, KeyRateBreakdown, ProtocolParams, secret_key_rate

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "ConventionalDetector", "DomainError", "KeyRateBreakdown", "ModifiedDetector",
    "NumericalDomainError", "ProtocolParams", "RawCalibration", "secret_key_rate",
]
