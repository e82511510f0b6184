"""Physical constants and unit conversions.

All frequencies inside the package are angular (rad/s).  Ordinary
frequencies in Hz (the f = omega/2pi convention used by configuration
files and CSV output) are converted exactly once at the boundary.
"""

import math

TWO_PI = 2.0 * math.pi

# CODATA / SI exact values, pinned as decimal literals for reproducibility.
HBAR = 1.0545718176461565e-34   # reduced Planck constant, J s
K_B = 1.3806490000000000e-23    # Boltzmann constant, J/K


def hz_to_angular(f):
    """Ordinary frequency in Hz -> angular frequency in rad/s."""
    return f * TWO_PI


def angular_to_hz(omega):
    """Angular frequency in rad/s -> ordinary frequency in Hz."""
    return omega / TWO_PI


def about_equal(a, b, rel=1e-12, floor=0.0):
    """Relative closeness with an absolute floor."""
    return abs(a - b) <= rel * max(abs(a), abs(b)) + floor
