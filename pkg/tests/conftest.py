import numpy as np
import pytest

from phonolase import SystemParams

# Membrane-layout working point used throughout: mechanical mode at
# 23.4 MHz, cavities at 4.8 MHz linewidth coupled at 11.7 MHz, weak
# radiation-pressure coupling, drive blue-detuned by half the splitting.
BASE_HZ = dict(omega_m_hz=23.4e6, chi_hz=1570.0, gamma_m_hz=0.125e6,
               gamma_c_hz=4.8e6, g_hz=11.7e6, delta_hz=5.85e6,
               temperature_k=1e-3)

# Detuned variant (supermode splitting exceeds the mechanical frequency
# by 1 MHz): g is fixed by 2g - omega_m = 1 MHz.
DETUNED_HZ = dict(BASE_HZ, g_hz=12.2e6, delta_hz=6.1e6)

# Overdamped-mechanics regime where the steady state is genuinely
# multivalued (saddle-node pair on top of the driven branch).
MULTI_HZ = dict(omega_m_hz=0.1e6, chi_hz=5e4, gamma_m_hz=2e6,
                gamma_c_hz=1e6, g_hz=5e6, delta_hz=10e6, temperature_k=1e-3)

# Red-detuned variant of the same regime: the low-amplitude branch stays
# stable through the fold, so saddle-node jumps land on a fixed point.
MULTI_RED_HZ = dict(MULTI_HZ, delta_hz=-10e6)


def make_params(base=BASE_HZ, omega_drive_hz=0.0, **overrides):
    values = dict(base, omega_drive_hz=omega_drive_hz)
    values.update(overrides)
    return SystemParams.from_hz(**values)


@pytest.fixture
def base_params():
    return make_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
