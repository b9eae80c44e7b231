"""Baseband OFDM physical-layer simulation toolkit - ofdm_phy.

A modem built on 1/N-forward transform conventions, channel impairments
(multipath, CFO, phase noise, AWGN), measurements (ICI, PAPR, PSD, BER) and a
reproducible Monte-Carlo experiment CLI.
"""

__version__ = "2026.10.0"

from .modem import OfdmModem  # noqa: F401, E402
from .models import SubcarrierPlan  # noqa: F401, E402
