"""System parameters, derived scalars and the thermal phonon occupation.

Two cavities with equal frequency and decay rate, coupled at rate g, form
the supermodes a1, a2; a single mechanical mode couples to the photon
number imbalance with strength chi.  Every other module consumes physics
only through :class:`SystemParams`.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

from .constants import HBAR, K_B, TWO_PI, hz_to_angular


class ParameterError(ValueError):
    """Invalid physical parameter value."""


class ParameterFileError(ValueError):
    """Malformed parameter file; message carries the offending line number."""


@dataclass(frozen=True)
class SystemParams:
    """All model constants, stored as angular frequencies (rad/s).

    ``delta_drive`` is the drive-cavity detuning omega_d - omega_c; the
    complex ``omega_drive_amplitude`` is the pump amplitude (the physics
    depends on its modulus only, but the phase is carried through).
    ``geometry_factor`` is 1 for the membrane-in-the-middle layout and
    1/2 for the coupled-toroid layout; it multiplies chi everywhere.
    """

    omega_m: float
    chi: float
    gamma_m: float
    gamma_c: float
    g: float
    delta_drive: float
    omega_drive_amplitude: complex = 0j
    temperature: float = 0.0
    geometry_factor: float = 1.0

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ParameterError("omega_m must be positive")
        if not self.gamma_m > 0:
            raise ParameterError("gamma_m must be positive")
        if not self.gamma_c > 0:
            raise ParameterError("gamma_c must be positive")
        if self.chi < 0:
            raise ParameterError("chi must be nonnegative")
        if self.g < 0:
            raise ParameterError("g must be nonnegative")
        if self.temperature < 0:
            raise ParameterError("temperature must be nonnegative")
        if self.geometry_factor not in (1.0, 0.5):
            raise ParameterError("geometry_factor must be 1 or 1/2")
        object.__setattr__(self, "omega_drive_amplitude",
                           complex(self.omega_drive_amplitude))

    @property
    def chi_eff(self):
        """Radiation-pressure coupling including the geometry factor."""
        return self.chi * self.geometry_factor

    @property
    def drive_mod(self):
        """|Omega|, rad/s."""
        return abs(self.omega_drive_amplitude)

    @classmethod
    def from_hz(cls, *, omega_m_hz, chi_hz, gamma_m_hz, gamma_c_hz, g_hz,
                delta_hz, omega_drive_hz=0.0, omega_drive_phase_rad=0.0,
                temperature_k=0.0, geometry_factor=1.0):
        """Build from ordinary frequencies in Hz (the f = omega/2pi values)."""
        amp = hz_to_angular(omega_drive_hz) * cmath.exp(1j * omega_drive_phase_rad)
        return cls(
            omega_m=hz_to_angular(omega_m_hz),
            chi=hz_to_angular(chi_hz),
            gamma_m=hz_to_angular(gamma_m_hz),
            gamma_c=hz_to_angular(gamma_c_hz),
            g=hz_to_angular(g_hz),
            delta_drive=hz_to_angular(delta_hz),
            omega_drive_amplitude=amp,
            temperature=temperature_k,
            geometry_factor=geometry_factor,
        )

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_drive(self, omega_abs, phase=None) -> "SystemParams":
        """Same parameters with drive modulus ``omega_abs`` (rad/s)."""
        if phase is None:
            old = self.omega_drive_amplitude
            phase = cmath.phase(old) if old != 0 else 0.0
        return self.replace(omega_drive_amplitude=omega_abs * cmath.exp(1j * phase))

    def to_hz_dict(self):
        """Resolved parameters in file-key units, for metadata sidecars."""
        return {
            "omega_m_hz": self.omega_m / TWO_PI,
            "chi_hz": self.chi / TWO_PI,
            "gamma_m_hz": self.gamma_m / TWO_PI,
            "gamma_c_hz": self.gamma_c / TWO_PI,
            "g_hz": self.g / TWO_PI,
            "delta_hz": self.delta_drive / TWO_PI,
            "omega_drive_hz": abs(self.omega_drive_amplitude) / TWO_PI,
            "omega_drive_phase_rad": cmath.phase(self.omega_drive_amplitude)
            if self.omega_drive_amplitude != 0 else 0.0,
            "temperature_k": self.temperature,
            "geometry_factor": self.geometry_factor,
        }


def thermal_occupation(omega_m, temperature):
    """Mean thermal phonon number n_b = 1/(exp(hbar omega_m / k_B T) - 1).

    Returns exactly 0 at T = 0 (the defined limit).
    """
    if not omega_m > 0:
        raise ParameterError("omega_m must be positive")
    if temperature < 0:
        raise ParameterError("temperature must be nonnegative")
    if temperature == 0.0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega_m / (K_B * temperature))


@dataclass(frozen=True)
class DerivedScalars:
    """Scalar combinations shared by the lasing ladder.

    ``eps1``..``eps5`` are the coefficient-ladder constants (eps1 = gamma_c
    + i*delta and friends); they are distinct from the local constants of
    the 6x6 stability matrix, which live in :mod:`phonolase.stability`.
    """

    delta_small: float          # 2 g - omega_m, rad/s
    xi: complex                 # gamma_c/2 - i g
    m_param: float              # gamma_c^2/4 + g^2
    eps1: complex               # gamma_c + i delta_small
    eps2: complex               # gamma_c^2 - 2 g d + i(2 g gamma_c + gamma_c d)
    eps3: float                 # 1 / (m_param^2 + gamma_c^2 Delta^2)
    eps4: float                 # delta_small + 2 g
    eps5: float                 # gamma_c^2 - 2 delta_small g
    chi_eff: float
    delta_drive: float

    def n_param(self, b_abs2):
        """N = gamma_c^2/4 + g^2 - Delta^2 + chi^2 |b|^2 at phonon number b_abs2."""
        return self.m_param - self.delta_drive ** 2 + self.chi_eff ** 2 * b_abs2


def derive_scalars(params: SystemParams) -> DerivedScalars:
    """Evaluate every derived scalar from its defining formula.  Pure."""
    gc, g = params.gamma_c, params.g
    d = 2.0 * g - params.omega_m
    m = gc * gc / 4.0 + g * g
    return DerivedScalars(
        delta_small=d,
        xi=gc / 2.0 - 1j * g,
        m_param=m,
        eps1=gc + 1j * d,
        eps2=(gc * gc - 2.0 * g * d) + 1j * (2.0 * g * gc + gc * d),
        eps3=1.0 / (m * m + gc * gc * params.delta_drive ** 2),
        eps4=d + 2.0 * g,
        eps5=gc * gc - 2.0 * d * g,
        chi_eff=params.chi_eff,
        delta_drive=params.delta_drive,
    )


# --- flat key = value parameter files -------------------------------------

PHYSICAL_KEYS = (
    "omega_m_hz", "chi_hz", "gamma_m_hz", "gamma_c_hz", "g_hz", "delta_hz",
    "omega_drive_hz", "temperature_k", "geometry_factor",
)
OPTIONAL_PHYSICAL_KEYS = ("omega_drive_phase_rad",)
REQUIRED_PHYSICAL_KEYS = (
    "omega_m_hz", "chi_hz", "gamma_m_hz", "gamma_c_hz", "g_hz", "delta_hz",
    "temperature_k",
)


def parse_key_values(text, allowed_keys, source="<string>"):
    """Parse flat ``key = value`` text.  Unknown keys are a hard error.

    Blank lines and lines starting with ``#`` are ignored.  Errors carry
    the 1-based line number.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterFileError(
                f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in allowed_keys:
            raise ParameterFileError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterFileError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise ParameterFileError(
                f"{source}:{lineno}: invalid number {val!r} for key {key!r}") from None
    return values


def params_from_text(text, source="<string>", overrides=None) -> SystemParams:
    """Parse a physical parameter file body into :class:`SystemParams`."""
    allowed = set(PHYSICAL_KEYS) | set(OPTIONAL_PHYSICAL_KEYS)
    values = parse_key_values(text, allowed, source=source)
    if overrides:
        for key, val in overrides.items():
            if key not in allowed:
                raise ParameterFileError(f"<override>: unknown key {key!r}")
            values[key] = float(val)
    missing = [k for k in REQUIRED_PHYSICAL_KEYS if k not in values]
    if missing:
        raise ParameterFileError(f"{source}: missing required keys {missing}")
    values.setdefault("omega_drive_hz", 0.0)
    values.setdefault("omega_drive_phase_rad", 0.0)
    values.setdefault("geometry_factor", 1.0)
    try:
        return SystemParams.from_hz(**values)
    except ParameterError as exc:
        raise ParameterFileError(f"{source}: {exc}") from exc


def read_params(path, overrides=None) -> SystemParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_text(fh.read(), source=str(path), overrides=overrides)
