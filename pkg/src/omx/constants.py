"""Physical constants and the one cyclic/angular conversion boundary.

All internal math in this package runs in angular frequency (rad/s).
Anything that crosses an I/O boundary (constructors, CLI flags, files)
is cyclic Hz and passes through the two helpers below exactly once.
"""

import math

from scipy.constants import hbar as HBAR  # J s, CODATA
from scipy.constants import k as K_B  # J/K, exact SI

TWO_PI = 2.0 * math.pi


def hz_to_angular(f_hz: float) -> float:
    """Convert cyclic frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f_hz


def angular_to_hz(omega: float) -> float:
    """Convert angular frequency (rad/s) to cyclic frequency (Hz)."""
    return omega / TWO_PI
