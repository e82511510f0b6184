"""Linearized fluctuation spectra and second-order phonon coherence.

The phonon fluctuation in the frequency domain is a linear combination of
the six input noises,

    beta(w) = p1 b_in + p2 b_in+ + p3 G1 + p4 G1+ + p5 G2 + p6 G2+,

with coefficients built from the lambda/m/n ladder below.  Functions
carrying a '+' superscript follow the stationary-analysis convention
f+(w) = conj(f(-w)).  The correlation spectra combine the p's with the
thermal occupation; their frequency integrals give the equal-time moments
and, through Wick's theorem for the Gaussian noises, g2(0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from . import stability
from .constants import TWO_PI
from .params import SystemParams, thermal_occupation

# Core quadrature window in units of (omega_m + gamma_c); the floor the
# spectra need is 20, the default leaves margin for the tail model.
WINDOW_FACTOR = 30.0
# The analytic tail is fitted beyond OUTER_FACTOR * window, where the
# spectra are deep in their 1/w^2 regime.
OUTER_FACTOR = 10.0
POLE_REL = 1e-12
TAIL_FIT_REL = 0.5


class PoleAtFrequency(ValueError):
    """A response denominator vanished: the branch is marginally stable."""


class TailDivergence(ValueError):
    """The 1/w^2 tail fit failed; the spectral window is too narrow."""


class DegenerateDenominator(ValueError):
    """|B0|^2 + Y is too small to normalize g2(0)."""


@dataclass(frozen=True)
class FrequencyCoefficients:
    """Ladder values at one frequency (all complex)."""

    lambda1: complex
    lambda2: complex
    lambda3: complex
    lambda4: complex
    m1: complex
    m2: complex
    m3: complex
    m4: complex
    m5: complex
    m6: complex
    n1: complex
    n2: complex
    n3: complex
    n4: complex
    n5: complex
    n6: complex
    p1: complex
    p2: complex
    p3: complex
    p4: complex
    p5: complex
    p6: complex
    d1: complex
    d2: complex


def _amplitudes(branch):
    if hasattr(branch, "a1"):
        return complex(branch.a1), complex(branch.a2), complex(branch.b)
    a1, a2, b = branch
    return complex(a1), complex(a2), complex(b)


class _Ladder:
    """Vectorized evaluation of the frequency-domain coefficient ladder."""

    def __init__(self, branch, params: SystemParams):
        self.a1, self.a2, self.b0 = _amplitudes(branch)
        self.params = params
        self.chi = params.chi_eff

    def lambdas(self, w):
        p = self.params
        lam1 = p.gamma_c / 2.0 + 1j * (p.g - p.delta_drive) - 1j * w
        lam2 = p.gamma_c / 2.0 - 1j * (p.g + p.delta_drive) - 1j * w
        lam3 = p.gamma_m + 1j * p.omega_m - 1j * w
        lam4 = lam1 * lam2 + self.chi ** 2 * abs(self.b0) ** 2
        return lam1, lam2, lam3, lam4

    def d2(self, w):
        chi, a1, a2, b0 = self.chi, self.a1, self.a2, self.b0
        lam1, _, _, lam4 = self.lambdas(w)
        lam1p, _, lam3p, lam4p = [np.conj(x) for x in self.lambdas(-w)]
        return (1.0
                + chi ** 2 * abs(a2) ** 2 / (lam1p * lam3p)
                - chi ** 2 * abs(a1) ** 2 * lam1 / (lam3p * lam4)
                - chi ** 4 * abs(b0) ** 2 * abs(a2) ** 2 / (lam1p * lam3p * lam4p))

    def ms(self, w):
        chi, a1, a2, b0 = self.chi, self.a1, self.a2, self.b0
        p = self.params
        lam1, _, _, lam4 = self.lambdas(w)
        lam1p, _, lam3p, lam4p = [np.conj(x) for x in self.lambdas(-w)]
        d2 = self.d2(w)
        root = np.sqrt(2.0 * p.gamma_m)
        m1 = (1j * chi ** 3 * np.conj(a1) * a2 * np.conj(b0)
              * (lam4 + lam4p) / (d2 * lam3p * lam4 * lam4p))
        m2 = root / (lam3p * d2)
        m3 = chi ** 2 * np.conj(a1) * np.conj(b0) / (lam3p * lam4 * d2)
        m4 = (1j * chi * a2 * (chi ** 2 * abs(b0) ** 2 - lam4p)
              / (lam1p * lam3p * lam4p * d2))
        m5 = -1j * chi * lam1 * np.conj(a1) / (lam3p * lam4 * d2)
        m6 = -chi ** 2 * a2 * np.conj(b0) / (d2 * lam3p * lam4p)
        return np.array([m1, m2, m3, m4, m5, m6])

    def ns(self, w):
        chi, a1, a2, b0 = self.chi, self.a1, self.a2, self.b0
        lam1, _, _, lam4 = self.lambdas(w)
        mplus = np.conj(self.ms(-w))
        prod = np.conj(b0) * a2
        n1 = 1j * chi * (a1 * lam1 + 1j * chi * prod * mplus[0]) / lam4
        n2 = -chi ** 2 * prod * mplus[1] / lam4
        n3 = -chi ** 2 * prod * mplus[2] / lam4
        n4 = 1j * chi * (np.conj(b0) + 1j * chi * prod * mplus[3]) / lam4
        n5 = -chi ** 2 * prod * mplus[4] / lam4
        n6 = (lam1 - chi ** 2 * prod * mplus[5]) / lam4
        return np.array([n1, n2, n3, n4, n5, n6])

    def d1(self, w):
        chi, a1, a2, b0 = self.chi, self.a1, self.a2, self.b0
        lam1, _, lam3, _ = self.lambdas(w)
        n1 = self.ns(w)[0]
        n1p = np.conj(self.ns(-w)[0])
        m1 = self.ms(w)[0]
        return (lam1 * lam3 - 1j * chi * a1 * n1p * lam1
                + chi ** 2 * np.conj(a2) * b0 * n1 * m1
                + chi ** 2 * abs(a2) ** 2)

    def _pole_scale(self, w):
        p = self.params
        amp = self.chi * (abs(self.a1) + abs(self.a2) + abs(self.b0))
        base = p.gamma_c + p.gamma_m + p.omega_m + p.g + abs(p.delta_drive) \
            + np.abs(w) + amp
        return base * base

    def ps(self, w):
        """p1..p6 at frequency w (scalar or array)."""
        chi, a1, a2, b0 = self.chi, self.a1, self.a2, self.b0
        p = self.params
        lam1 = self.lambdas(w)[0]
        m = self.ms(w)
        n = self.ns(w)
        nplus = np.conj(self.ns(-w))
        d1 = self.d1(w)
        d2 = self.d2(w)
        if np.any(np.abs(d1) < POLE_REL * self._pole_scale(w)) or \
                np.any(np.abs(d2) < POLE_REL):
            raise PoleAtFrequency("response denominator vanished; "
                                  "the branch is marginally stable")
        root = np.sqrt(2.0 * p.gamma_m)
        fb = np.conj(a2) * b0
        p1 = (root * lam1 - chi ** 2 * fb * n[1]) / d1
        p2 = 1j * chi * (a1 * nplus[1] * lam1 + 1j * chi * fb * n[0] * m[1]) / d1
        p3 = 1j * chi * (a1 * nplus[2] * lam1 + np.conj(a2)
                         + 1j * chi * fb * (n[3] + n[0] * m[2])) / d1
        p4 = 1j * chi * (a1 * nplus[3] * lam1 + 1j * chi * fb * (n[2] + n[0] * m[3])) / d1
        p5 = 1j * chi * (a1 * nplus[4] * lam1 + 1j * chi * fb * (n[5] + n[0] * m[4])) / d1
        p6 = 1j * chi * (a1 * nplus[5] * lam1 + 1j * chi * fb * (n[4] + n[0] * m[5])) / d1
        return np.array([p1, p2, p3, p4, p5, p6])


def frequency_coefficients(omega, branch, params: SystemParams) -> FrequencyCoefficients:
    """Every ladder coefficient at one frequency (rad/s)."""
    lad = _Ladder(branch, params)
    lam1, lam2, lam3, lam4 = lad.lambdas(omega)
    m = lad.ms(omega)
    n = lad.ns(omega)
    p = lad.ps(omega)
    return FrequencyCoefficients(
        lambda1=complex(lam1), lambda2=complex(lam2), lambda3=complex(lam3),
        lambda4=complex(lam4),
        m1=complex(m[0]), m2=complex(m[1]), m3=complex(m[2]),
        m4=complex(m[3]), m5=complex(m[4]), m6=complex(m[5]),
        n1=complex(n[0]), n2=complex(n[1]), n3=complex(n[2]),
        n4=complex(n[3]), n5=complex(n[4]), n6=complex(n[5]),
        p1=complex(p[0]), p2=complex(p[1]), p3=complex(p[2]),
        p4=complex(p[3]), p5=complex(p[4]), p6=complex(p[5]),
        d1=complex(lad.d1(omega)), d2=complex(lad.d2(omega)))


def spectra(branch, params: SystemParams, omega_grid, n_b=None):
    """Correlation spectra on a symmetric frequency grid.

    Returns (Gamma_bb, Gamma_nb):
      Gamma_bb(w) = p1(w)p2(-w)(n_b+1) + p2(w)p1(-w)n_b
                    + gamma_c [p3(w)p4(-w) + p5(w)p6(-w)]
      Gamma_nb(w) = n_b|p1(-w)|^2 + (n_b+1)|p2(-w)|^2
                    + gamma_c [|p4(-w)|^2 + |p6(-w)|^2]
    """
    w = np.asarray(omega_grid, dtype=float)
    if w.size:
        ws = np.sort(w)
        if not np.allclose(ws, -ws[::-1], rtol=0.0,
                           atol=1e-9 * max(1.0, float(np.max(np.abs(w))))):
            raise ValueError("omega_grid must be symmetric about 0")
    if n_b is None:
        n_b = thermal_occupation(params.omega_m, params.temperature)
    lad = _Ladder(branch, params)
    pw = lad.ps(w)
    pm = lad.ps(-w)
    gc = params.gamma_c
    gamma_bb = (pw[0] * pm[1] * (n_b + 1.0) + pw[1] * pm[0] * n_b
                + gc * (pw[2] * pm[3] + pw[4] * pm[5]))
    gamma_nb = (n_b * np.abs(pm[0]) ** 2 + (n_b + 1.0) * np.abs(pm[1]) ** 2
                + gc * (np.abs(pm[3]) ** 2 + np.abs(pm[5]) ** 2))
    return gamma_bb, gamma_nb.real


@dataclass(frozen=True)
class SpectralBasis:
    """Occupation-independent pieces of the moment integrals.

    Y_nb = n_b i1 + (n_b+1) i2 + gamma_c (i4 + i6)
    Y_bb = (n_b+1) j12 + n_b j21 + gamma_c j_opt
    """

    i1: float
    i2: float
    i4: float
    i6: float
    j12: complex
    j21: complex
    j_opt: complex
    error: float                # quadrature + tail-fit error estimate
    window: float               # core window W, rad/s


def _integrand_factory(lad):
    def f(w):
        pw = lad.ps(w)
        pm = lad.ps(-w)
        out = np.empty(10)
        out[0] = np.abs(pm[0]) ** 2
        out[1] = np.abs(pm[1]) ** 2
        out[2] = np.abs(pm[3]) ** 2
        out[3] = np.abs(pm[5]) ** 2
        z12 = pw[0] * pm[1]
        z21 = pw[1] * pm[0]
        zop = pw[2] * pm[3] + pw[4] * pm[5]
        out[4], out[5] = z12.real, z12.imag
        out[6], out[7] = z21.real, z21.imag
        out[8], out[9] = zop.real, zop.imag
        return out
    return f


def _resonance_points(branch, params, window):
    report = stability.classify(branch, params)
    pts = sorted({0.0} | {float(-ev.imag) for ev in report.eigenvalues})
    return [x for x in pts if -window < x < window]


def _tail_fit(f, w_outer, sign):
    """Least-squares c2/w^2 + c3/w^3 over the outermost octave of one side.

    Returns (tail integral beyond sign*w_outer, scaled residual, ok flag).
    """
    ws = sign * np.geomspace(w_outer / 2.0, w_outer, 9)
    samples = np.array([f(w) * w * w for w in ws])      # ~ c2 + c3/w
    basis = np.column_stack([np.ones_like(ws), 1.0 / ws])
    coef, *_ = np.linalg.lstsq(basis, samples, rcond=None)
    c2, c3 = coef
    fitted = basis @ coef
    resid = np.abs(samples - fitted).max(axis=0)
    scale = np.abs(samples).max(axis=0)
    # components that are pure rounding noise next to the dominant one
    # cannot (and need not) follow the power law
    floor = max(1e-9 * float(scale.max()), 1e-300)
    ok = bool(np.all(resid <= TAIL_FIT_REL * np.maximum(scale, floor)))
    tail = c2 / w_outer + sign * c3 / (2.0 * w_outer ** 2)
    tail_err = float(np.sum(resid) / w_outer)
    return tail, tail_err, ok


def spectral_basis(branch, params: SystemParams, window=None,
                   epsrel=1e-9) -> SpectralBasis:
    """Moment integrals by adaptive panels plus an analytic 1/w^2 tail.

    The core window (default 30 (omega_m + gamma_c)) is integrated with
    breakpoints at the eigenvalue resonances; an outer adaptive annulus
    follows, and beyond 10x the window the integrand is replaced by a
    fitted power-law tail.  Raises :class:`TailDivergence` when the fit
    residual shows the window is too narrow.
    """
    if window is None:
        window = WINDOW_FACTOR * (params.omega_m + params.gamma_c)
    w_outer = OUTER_FACTOR * window
    lad = _Ladder(branch, params)
    f = _integrand_factory(lad)
    pts = _resonance_points(branch, params, window)

    core, err_core = quad_vec(f, -window, window, points=pts,
                              epsabs=1e-300, epsrel=epsrel, limit=600)
    hi, err_hi = quad_vec(f, window, w_outer, epsabs=1e-300,
                          epsrel=epsrel, limit=200)
    lo, err_lo = quad_vec(f, -w_outer, -window, epsabs=1e-300,
                          epsrel=epsrel, limit=200)
    tail_hi, terr_hi, ok_hi = _tail_fit(f, w_outer, +1)
    tail_lo, terr_lo, ok_lo = _tail_fit(f, w_outer, -1)
    if not (ok_hi and ok_lo):
        raise TailDivergence("tail fit failed; widen the spectral window")
    total = (core + hi + lo + tail_hi + tail_lo) / TWO_PI
    error = (err_core + err_hi + err_lo + terr_hi + terr_lo) / TWO_PI
    return SpectralBasis(
        i1=float(total[0]), i2=float(total[1]), i4=float(total[2]),
        i6=float(total[3]),
        j12=complex(total[4], total[5]), j21=complex(total[6], total[7]),
        j_opt=complex(total[8], total[9]),
        error=float(error), window=float(window))


@dataclass(frozen=True)
class MomentResult:
    y_bb: complex               # <beta beta>
    y_nb: float                 # <beta+ beta>
    error: float                # absolute error estimate (both moments)

    @property
    def fourth_moment(self):
        """<beta+ beta+ beta beta> by Wick's theorem."""
        return 2.0 * self.y_nb ** 2 + abs(self.y_bb) ** 2


def combine_basis(basis: SpectralBasis, n_b, gamma_c) -> MomentResult:
    y_nb = n_b * basis.i1 + (n_b + 1.0) * basis.i2 + gamma_c * (basis.i4 + basis.i6)
    y_bb = (n_b + 1.0) * basis.j12 + n_b * basis.j21 + gamma_c * basis.j_opt
    scale = max(n_b + 1.0, gamma_c)
    return MomentResult(y_bb=y_bb, y_nb=float(y_nb), error=basis.error * scale)


def equal_time_moments(branch, params: SystemParams, window=None,
                       epsrel=1e-9, basis=None) -> MomentResult:
    """Equal-time second moments Y_bb and Y_nb of the phonon fluctuation."""
    if basis is None:
        basis = spectral_basis(branch, params, window=window, epsrel=epsrel)
    n_b = thermal_occupation(params.omega_m, params.temperature)
    return combine_basis(basis, n_b, params.gamma_c)


def g2_zero(branch, moments: MomentResult) -> float:
    """Normalized equal-time second-order coherence of the phonon mode.

    g2(0) = [|B0|^4 + 2 Re(B0*^2 Y_bb) + 4 |B0|^2 Y_nb + <b+ b+ b b>]
            / (|B0|^2 + Y_nb)^2
    with the fourth moment from Wick's theorem.
    """
    _, _, b0 = _amplitudes(branch)
    b2 = abs(b0) ** 2
    den = b2 + moments.y_nb
    if den < 1e-30:
        raise DegenerateDenominator("|B0|^2 + Y is numerically zero")
    num = (b2 * b2
           + 2.0 * (np.conj(b0) ** 2 * moments.y_bb).real
           + 4.0 * b2 * moments.y_nb
           + moments.fourth_moment)
    return float(num / den ** 2)


@dataclass(frozen=True)
class CoherenceResult:
    omega_grid: np.ndarray
    spectrum_bb: np.ndarray
    spectrum_nb: np.ndarray
    y_bb: complex
    y_nb: float
    fourth_moment: float
    g2: float


def coherence_result(branch, params: SystemParams, omega_grid=None,
                     window=None) -> CoherenceResult:
    """Spectra on a grid plus moments and g2(0) for one branch."""
    if omega_grid is None:
        half = np.linspace(0.0, 2.0 * (params.omega_m + params.gamma_c), 512)
        omega_grid = np.concatenate([-half[:0:-1], half])
    moments = equal_time_moments(branch, params, window=window)
    gamma_bb, gamma_nb = spectra(branch, params, omega_grid)
    return CoherenceResult(
        omega_grid=np.asarray(omega_grid, dtype=float),
        spectrum_bb=gamma_bb, spectrum_nb=gamma_nb,
        y_bb=moments.y_bb, y_nb=moments.y_nb,
        fourth_moment=moments.fourth_moment,
        g2=g2_zero(branch, moments))


SPECTRA_COLUMNS = ("omega_hz", "re_gamma_bb", "im_gamma_bb", "gamma_nb")
G2_COLUMNS = ("omega_drive_hz", "g2_zero", "y_nb", "re_y_bb", "im_y_bb",
              "b0_abs2")


def write_spectra_csv(result: CoherenceResult, path):
    from .csvio import write_csv
    rows = []
    for w, bb, nb in zip(result.omega_grid, result.spectrum_bb,
                         result.spectrum_nb):
        rows.append((w / TWO_PI, bb.real, bb.imag, nb))
    write_csv(path, SPECTRA_COLUMNS, rows)
