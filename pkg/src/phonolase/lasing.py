"""Phonon gain, threshold, the near-threshold cubic equation and potentials.

With the fast cavity variables adiabatically eliminated, the population
inversion expands to third order in the phonon amplitude and the phonon
equation becomes

    db/dt = G0 + G1 b + G2 b+ b + G3 b b - G4 b+ b b.

The coefficient ladder (j-, G-, eta- and eps-families) is evaluated
exactly as defined; the eps6..eps9 constants here belong to this ladder
and are distinct from both the DerivedScalars eps1..eps5 and the local
constants of the stability matrix.

Figures that specify coefficients directly (rather than a drive strength)
are served by :func:`injected_coefficients`, which builds the same record
from raw values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import hz_to_angular
from .params import SystemParams, derive_scalars, parse_key_values

# Near-threshold validity: the inversion expansion assumes
# 4 chi^2 |b|^2 / |eps1|^2 well below 1; flag raised above this fraction.
VALIDITY_FRACTION = 0.1


@dataclass(frozen=True)
class JzExpansion:
    """Third-order expansion of the population inversion in the phonon
    amplitude: Jz = j0 + j1 b + j1* b+ - j2 b+ b + j3 b+ b+ b + j3* b+ b b."""

    j0: complex
    j1: complex
    j2: complex
    j3: complex
    jz: complex                 # c-number value at the given amplitude
    near_threshold_ok: bool     # expansion validity flag


@dataclass(frozen=True)
class LasingCoefficients:
    """The derived coefficient ladder at a fixed drive.

    ``delta_small`` and ``gamma_c`` are carried because the planar flow
    couples through delta_small * eps8 / gamma_c terms.
    """

    j0: complex = 0j
    j1: complex = 0j
    j2: complex = 0j
    j3: complex = 0j
    g0: complex = 0j
    g1: complex = 0j
    g2: complex = 0j
    g3: complex = 0j
    g4: complex = 0j
    eta1: float = 0.0
    eta2: float = 0.0
    eta3: float = 0.0
    eta4: float = 0.0
    eta5: float = 0.0
    eta6: float = 0.0
    eta7: float = 0.0
    eta8: float = 0.0
    eps6: float = 0.0
    eps7: float = 0.0
    eps8: float = 0.0
    eps9: float = 0.0
    alpha_prime: float = 0.0    # net gain, eta3 - gamma_m
    gain_gprime: float = 0.0    # simple gain at the b = 0 reference
    gain_full: float = 0.0      # corrected gain at the b = 0 reference
    delta_small: float = 0.0
    gamma_c: float = 0.0

    @property
    def im_g1(self):
        return self.g1.imag


def population_inversion_expansion(params: SystemParams,
                                   phonon_amplitude=0j) -> JzExpansion:
    """j-coefficients and the c-number inversion at ``phonon_amplitude``.

    Validity of the near-threshold expansion is reported as a flag, not an
    error.
    """
    d = derive_scalars(params)
    chi = params.chi_eff
    gc = params.gamma_c
    w2 = abs(params.omega_drive_amplitude) ** 2
    e1, e2, e3, m = d.eps1, d.eps2, d.eps3, d.m_param
    ae1 = abs(e1) ** 2
    dd = params.delta_drive

    j0 = complex(params.g * dd * w2 * e3)
    j1 = 1j * chi * e3 * w2 * (m + (e2 * m + gc * e1 * dd ** 2) / ae1) / (2.0 * gc)
    j2 = complex(2.0 * chi ** 2 * dd * e3 * w2 * (params.omega_m / ae1 + params.g * m * e3))
    j3 = (1j * chi ** 3 * e3 * w2 / (2.0 * gc * ae1)) * (
        (2.0 * e3 * m * m - 1.0) * ae1
        + 2.0 * e3 * (np.conj(e2) * m * m + gc * np.conj(e1) * dd ** 2 * m)
        - np.conj(e2) + 4.0 * m
        + 4.0 * (np.conj(e2) * m + gc * np.conj(e1) * dd ** 2) / ae1)

    b = complex(phonon_amplitude)
    n_phonon = abs(b) ** 2
    jz = (j0 + j1 * b + np.conj(j1) * np.conj(b) - j2 * n_phonon
          + j3 * np.conj(b) ** 2 * b + np.conj(j3) * np.conj(b) * b * b)
    ok = (4.0 * chi ** 2 * n_phonon) <= VALIDITY_FRACTION * ae1 if chi > 0 else True
    return JzExpansion(j0=j0, j1=j1, j2=j2, j3=j3, jz=jz, near_threshold_ok=ok)


def gain_simple(params: SystemParams, jz) -> float:
    """Phonon gain from the inversion alone:
    G' = 2 chi^2 gamma_c Jz / (gamma_c^2 + (2g - omega_m)^2)."""
    d = 2.0 * params.g - params.omega_m
    chi = params.chi_eff
    return 2.0 * chi ** 2 * params.gamma_c * float(np.real(jz)) / \
        (params.gamma_c ** 2 + d * d)


def threshold_inversion(params: SystemParams) -> float:
    """Inversion at which G' equals the mechanical loss rate."""
    d = 2.0 * params.g - params.omega_m
    chi = params.chi_eff
    if chi == 0.0:
        return math.inf
    return params.gamma_m * (params.gamma_c ** 2 + d * d) / \
        (2.0 * chi ** 2 * params.gamma_c)


def gain_full(params: SystemParams, jz, b_abs2=0.0) -> float:
    """Corrected gain including the drive-detuning term:
    G = G' - Delta d gamma_c chi^2 |Omega|^2 / [(gamma_c^2 + d^2)(N^2 + Delta^2 gamma_c^2)]
    with N evaluated at the given phonon number."""
    sc = derive_scalars(params)
    d = sc.delta_small
    dd = params.delta_drive
    chi = params.chi_eff
    n_val = sc.n_param(b_abs2)
    w2 = abs(params.omega_drive_amplitude) ** 2
    correction = (dd * d * params.gamma_c * chi ** 2 * w2
                  / ((params.gamma_c ** 2 + d * d)
                     * (n_val ** 2 + dd ** 2 * params.gamma_c ** 2)))
    return gain_simple(params, jz) - correction


def gain_exceeds_loss(params: SystemParams, jz, b_abs2=0.0) -> bool:
    """Threshold condition: amplification requires G > gamma_m."""
    return gain_full(params, jz, b_abs2) > params.gamma_m


def cubic_coefficients(params: SystemParams) -> LasingCoefficients:
    """The full coefficient ladder at the drive stored in ``params``.

    ``gain_gprime``/``gain_full`` are evaluated at the b = 0 reference
    point (Jz = j0, N = N(0)).
    """
    d = derive_scalars(params)
    chi = params.chi_eff
    gc = params.gamma_c
    w2 = abs(params.omega_drive_amplitude) ** 2
    ae1 = abs(d.eps1) ** 2
    dd = params.delta_drive
    ds = d.delta_small
    e3, m = d.eps3, d.m_param
    e4, e5 = d.eps4, d.eps5

    jx = population_inversion_expansion(params)
    j0 = jx.j0.real
    j1, j2 = jx.j1, jx.j2.real

    eta1 = chi * gc * e3 * w2 * (e4 * m + 2.0 * ds * dd ** 2) / (2.0 * ae1)
    eta2 = chi * e3 * w2 * (e5 * m + 2.0 * gc ** 2 * dd ** 2) / (2.0 * ae1)
    eta3 = gc * chi ** 2 * (2.0 * j0 - ds * dd * w2 * e3) / ae1
    eta4 = chi ** 2 * (2.0 * ds * j0 + gc ** 2 * dd * w2 * e3) / ae1
    eta5 = (gc * chi ** 3 * e3 * w2 / (2.0 * ae1)
            * (e4 - 2.0 * e3 * m * w2 * (e4 * m + 2.0 * ds * dd ** 2)))
    eta6 = (chi ** 3 * e3 * w2 / (2.0 * ae1)
            * (e5 - 2.0 * e3 * m * w2 * (e5 * m + 2.0 * gc ** 2 * dd ** 2)))
    eta7 = 2.0 * gc * chi ** 2 * (j2 - 2.0 * ds * chi ** 2 * dd * e3 ** 2 * w2 * m) / ae1
    eta8 = 2.0 * chi ** 2 * (ds * j2 + chi ** 2 * gc ** 2 * dd * e3 ** 2 * w2 * m) / ae1

    eps6 = 4.0 * chi ** 2 * gc * j1.real / ae1
    eps7 = 4.0 * chi ** 2 * (ds * j1.real - gc * j1.imag) / ae1
    eps8 = 4.0 * chi ** 2 * gc * j1.imag / ae1
    eps9 = 4.0 * chi ** 2 * (gc * j1.real + ds * j1.imag) / ae1

    g0 = eta1 + 1j * eta2
    g1 = (eta3 - params.gamma_m) - 1j * (params.omega_m + eta4)
    g2 = 2.0 * chi ** 2 * np.conj(j1) / d.eps1 + eta5 + 1j * eta6
    g3 = 2.0 * chi ** 2 * j1 / d.eps1
    g4 = eta7 - 1j * eta8

    alpha_prime = eta3 - params.gamma_m
    return LasingCoefficients(
        j0=jx.j0, j1=jx.j1, j2=jx.j2, j3=jx.j3,
        g0=g0, g1=g1, g2=g2, g3=g3, g4=g4,
        eta1=eta1, eta2=eta2, eta3=eta3, eta4=eta4,
        eta5=eta5, eta6=eta6, eta7=eta7, eta8=eta8,
        eps6=eps6, eps7=eps7, eps8=eps8, eps9=eps9,
        alpha_prime=alpha_prime,
        gain_gprime=gain_simple(params, j0),
        gain_full=gain_full(params, j0, 0.0),
        delta_small=ds, gamma_c=gc)


INJECTION_KEYS = (
    "eta1_hz", "eta2_hz", "eta3_hz", "eta4_hz", "eta5_hz", "eta6_hz",
    "eta7_hz", "eta8_hz", "eps6_hz", "eps7_hz", "eps8_hz", "eps9_hz",
    "alpha_prime_hz", "im_g1_hz", "delta_hz", "gamma_c_hz",
)


def injected_coefficients(**values_hz) -> LasingCoefficients:
    """Coefficient record from raw values in Hz (figure-injection mode).

    Unspecified coefficients default to zero.  Accepts the keys of
    ``INJECTION_KEYS`` without the ``_hz`` suffix as keyword names, e.g.
    ``injected_coefficients(eta1_hz=100e6, alpha_prime_hz=-50e6, ...)``.
    """
    unknown = set(values_hz) - {k for k in INJECTION_KEYS}
    if unknown:
        raise ValueError(f"unknown coefficient keys: {sorted(unknown)}")
    get = lambda key: hz_to_angular(float(values_hz.get(key, 0.0)))
    eta = [get(f"eta{i}_hz") for i in range(1, 9)]
    eps = [get(f"eps{i}_hz") for i in range(6, 10)]
    alpha = get("alpha_prime_hz")
    im_g1 = get("im_g1_hz")
    g2_extra_re = (2.0 * eps[0] - eps[3]) / 2.0
    g2_extra_im = -(eps[1] + 2.0 * eps[2]) / 2.0
    return LasingCoefficients(
        g0=eta[0] + 1j * eta[1],
        g1=alpha + 1j * im_g1,
        g2=complex(eta[4] + g2_extra_re, eta[5] + g2_extra_im),
        g3=(eps[3] - 1j * eps[1]) / 2.0,
        g4=eta[6] - 1j * eta[7],
        eta1=eta[0], eta2=eta[1], eta3=eta[2], eta4=eta[3],
        eta5=eta[4], eta6=eta[5], eta7=eta[6], eta8=eta[7],
        eps6=eps[0], eps7=eps[1], eps8=eps[2], eps9=eps[3],
        alpha_prime=alpha,
        delta_small=get("delta_hz"), gamma_c=get("gamma_c_hz"))


def read_coefficient_file(path, overrides=None) -> LasingCoefficients:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    values = parse_key_values(text, set(INJECTION_KEYS), source=str(path))
    if overrides:
        for key, val in overrides.items():
            if key not in INJECTION_KEYS:
                raise ValueError(f"unknown coefficient key {key!r}")
            values[key] = float(val)
    return injected_coefficients(**values)


def flow_field(u, coeffs: LasingCoefficients):
    """Planar flow (du1/dt, du2/dt) of the near-threshold phonon field."""
    u1, u2 = u
    c = coeffs
    r2 = u1 * u1 + u2 * u2
    dsg = c.delta_small / c.gamma_c if c.gamma_c != 0.0 else 0.0
    du1 = (c.eta1 + c.alpha_prime * u1 - c.im_g1 * u2
           + (c.eta5 + c.eps6) * u1 * u1 + c.eps7 * u1 * u2
           + (c.eta5 - dsg * c.eps8) * u2 * u2
           - r2 * (c.eta7 * u1 + c.eta8 * u2))
    du2 = (c.eta2 + c.alpha_prime * u2 + c.im_g1 * u1
           + (c.eta6 - c.eps8) * u2 * u2 + c.eps9 * u1 * u2
           + (c.eta6 - dsg * c.eps6) * u1 * u1
           - r2 * (c.eta7 * u2 - c.eta8 * u1))
    return du1, du2


def flow_field_zero_detuning(u, coeffs: LasingCoefficients, check_tol=1e-9):
    """Reduced flow for the delta = 0 special case.

    Requires the coefficient identities eps7 = -eps8 and eps9 = eps6 that
    hold at zero detuning; raises ValueError when they fail.
    """
    c = coeffs
    scale = max(abs(c.eps6), abs(c.eps7), abs(c.eps8), abs(c.eps9), 1e-300)
    if abs(c.eps7 + c.eps8) > check_tol * scale or \
            abs(c.eps9 - c.eps6) > check_tol * scale:
        raise ValueError("coefficients violate the zero-detuning identities")
    u1, u2 = u
    r2 = u1 * u1 + u2 * u2
    du1 = (c.eta1 + c.alpha_prime * u1 - c.im_g1 * u2
           + c.eps6 * u1 * u1 - c.eps8 * u1 * u2 + c.eta5 * u2 * u2
           + c.eta8 * r2 * u1 - c.eta8 * r2 * u2)
    du2 = (c.eta2 + c.im_g1 * u1 + c.alpha_prime * u2
           + c.eps6 * u1 * u2 + (c.eta6 - c.eps8) * u2 * u2 + c.eta6 * u1 * u1
           + c.eta8 * r2 * u2 + c.eta8 * r2 * u1)
    return du1, du2


def potential_value(u1, u2, coeffs: LasingCoefficients):
    """Two-dimensional scalar potential (valid in the u1-dominant regime)."""
    c = coeffs
    r2 = u1 * u1 + u2 * u2
    return (-c.eta1 * u1 - c.eta2 * u2 + c.im_g1 * u1 * u2
            - 0.5 * c.alpha_prime * r2 - c.eps6 / 3.0 * u1 ** 3
            + 0.25 * c.eta7 * r2 * r2
            - c.eta8 * u1 ** 3 * u2 - c.eta8 / 3.0 * u2 ** 3 * u1)


@dataclass(frozen=True)
class PotentialSurface:
    u1: np.ndarray              # grid, dimensionless
    u2: np.ndarray
    values: np.ndarray          # (n1, n2) potential values, rad/s units
    minima: list                # (u1, u2, V) local minima, polished
    symmetry_broken: bool       # minima depths differ beyond 1e-9 relative
    u1_dominant: bool           # every minimum satisfies |u1| >= |u2|


def _is_local_min(u1, u2, coeffs, h):
    """Second-difference check that (u1, u2) is a strict local minimum."""
    v0 = potential_value(u1, u2, coeffs)
    around = [potential_value(u1 + a, u2 + b, coeffs)
              for a, b in ((h, 0), (-h, 0), (0, h), (0, -h),
                           (h, h), (-h, -h), (h, -h), (-h, h))]
    return all(v >= v0 for v in around)


def potential_2d(u1_range, u2_range, coeffs: LasingCoefficients,
                 n1=201, n2=201) -> PotentialSurface:
    """Potential on a rectangular grid with local-minimum detection.

    Grid minima (strictly below all 8 neighbors) are polished by
    Nelder-Mead and deduplicated.
    """
    import scipy.optimize

    u1 = np.linspace(float(u1_range[0]), float(u1_range[1]), int(n1))
    u2 = np.linspace(float(u2_range[0]), float(u2_range[1]), int(n2))
    grid1, grid2 = np.meshgrid(u1, u2, indexing="ij")
    values = potential_value(grid1, grid2, coeffs)
    if not np.all(np.isfinite(values)):
        raise ValueError("potential is not finite on the requested grid")

    interior = values[1:-1, 1:-1]
    neighbor_stack = [values[1 + di:values.shape[0] - 1 + di,
                             1 + dj:values.shape[1] - 1 + dj]
                      for di in (-1, 0, 1) for dj in (-1, 0, 1)
                      if (di, dj) != (0, 0)]
    is_min = np.ones_like(interior, dtype=bool)
    for nb in neighbor_stack:
        is_min &= interior < nb
    seeds = [(i + 1, j + 1) for i, j in zip(*np.nonzero(is_min))]
    # curved shallow valleys can defeat the strict-neighbor test on a
    # coarse grid; also polish from the lowest cells
    flat_order = np.argsort(values, axis=None)[:32]
    seeds.extend((int(k) // values.shape[1], int(k) % values.shape[1])
                 for k in flat_order)

    du = max(abs(u1[1] - u1[0]), abs(u2[1] - u2[0]))
    vscale = float(np.max(np.abs(values))) or 1.0
    minima = []
    for i, j in seeds:
        res = scipy.optimize.minimize(
            lambda x: potential_value(x[0], x[1], coeffs), (u1[i], u2[j]),
            method="Nelder-Mead",
            options={"xatol": 1e-9 * max(du, 1.0), "fatol": 1e-12 * vscale,
                     "maxiter": 4000})
        cand = (float(res.x[0]), float(res.x[1]), float(res.fun))
        if not any(abs(cand[0] - m[0]) < 2 * du and abs(cand[1] - m[1]) < 2 * du
                   for m in minima):
            minima.append(cand)
    # keep only genuine local minima of the polished set
    minima = [m for m in minima
              if _is_local_min(m[0], m[1], coeffs, 1e-5 * max(du, 1.0))]
    minima.sort(key=lambda m: (m[0], m[1]))

    broken = False
    if len(minima) >= 2:
        depths = sorted(m[2] for m in minima)
        span = abs(depths[0]) + abs(depths[-1])
        broken = abs(depths[-1] - depths[0]) > 1e-9 * max(span, 1e-300)
    dominant = all(abs(m[0]) >= abs(m[1]) for m in minima) if minima else True
    return PotentialSurface(u1=u1, u2=u2, values=values, minima=minima,
                            symmetry_broken=broken, u1_dominant=dominant)


def potential_1d(u1_range, coeffs: LasingCoefficients, n=401):
    """One-dimensional potential samples as an (n, 2) array of (u1, V)."""
    c = coeffs
    u1 = np.linspace(float(u1_range[0]), float(u1_range[1]), int(n))
    v = (-c.eta1 * u1 - 0.5 * c.alpha_prime * u1 ** 2
         - c.eps6 / 3.0 * u1 ** 3 + 0.25 * c.eta7 * u1 ** 4)
    return np.column_stack([u1, v])


def potential_1d_gradient(u1, coeffs: LasingCoefficients):
    """-dV/du1 as the exact polynomial eta1 + alpha' u1 + eps6 u1^2 - eta7 u1^3."""
    c = coeffs
    return c.eta1 + c.alpha_prime * u1 + c.eps6 * u1 ** 2 - c.eta7 * u1 ** 3


def potential_1d_minima(coeffs: LasingCoefficients):
    """Locations of the 1-D potential minima (real critical points with
    positive curvature), via the cubic critical-point equation."""
    c = coeffs
    if c.eta7 == 0.0:
        return []
    roots = np.roots([c.eta7, -c.eps6, -c.alpha_prime, -c.eta1])
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)):
            continue
        u = float(r.real)
        if 3.0 * c.eta7 * u * u - 2.0 * c.eps6 * u - c.alpha_prime > 0.0:
            out.append(u)
    return sorted(out)


GAIN_COLUMNS = ("omega_drive_hz", "alpha_prime_hz", "gprime_hz", "g_hz",
                "threshold_flag")
