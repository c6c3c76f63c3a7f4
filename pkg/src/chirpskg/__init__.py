"""Filterbank-based secret key generation from chirp channel probes.

Modules follow the protocol: :mod:`waveform` and :mod:`channel` model the
probes, :mod:`filterbank` extracts sub-band powers, :mod:`quantizer` and
:mod:`reconciliation` turn them into agreed bits, :mod:`entropy` and
:mod:`amplification` distil the key, and :mod:`pipeline` runs sweeps.
"""

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    SKGError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateInputError",
    "DomainError",
    "SKGError",
    "UsageError",
]
