"""Linear stability about fixed points: the 6x6 fluctuation matrix and its spectrum.

The fluctuation vector ordering is (L1, L1+, L2, L2+, beta, beta+), i.e.
each mode followed by its conjugate.  The matrix is also the exact
Jacobian of the semiclassical right-hand side, which the steady-state
Newton solver reuses.

The local constants used here, eps1 = -gamma_c/2 - i(g - Delta) etc., are
the linearization constants of this matrix; they are unrelated to the
eps ladder of :class:`phonolase.params.DerivedScalars`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .params import SystemParams

# Classification tolerance: |max_re| below MARGINAL_FRACTION * gamma_c is
# reported as marginal, never as stable.
MARGINAL_FRACTION = 1e-6


class EigenSolverFailure(RuntimeError):
    """The dense eigensolver did not converge even after a retry."""


@dataclass(frozen=True)
class StabilityReport:
    matrix: np.ndarray          # (6, 6) complex, rad/s
    eigenvalues: np.ndarray     # (6,) complex, rad/s
    max_re: float               # rad/s
    stable: bool                # max_re < 0 and not marginal
    marginal: bool


def _amplitudes(branch):
    """Accept a branch object (a1/a2/b attributes) or a 3-sequence."""
    if hasattr(branch, "a1"):
        return complex(branch.a1), complex(branch.a2), complex(branch.b)
    a1, a2, b = branch
    return complex(a1), complex(a2), complex(b)


def build_matrix(branch, params: SystemParams) -> np.ndarray:
    """The 6x6 linearization matrix at a fixed point (or any state)."""
    a1, a2, b = _amplitudes(branch)
    e1 = -(params.gamma_c / 2.0) - 1j * (params.g - params.delta_drive)
    e2 = -(params.gamma_c / 2.0) + 1j * (params.g + params.delta_drive)
    e3 = -params.gamma_m - 1j * params.omega_m
    ic = 1j * params.chi_eff
    return np.array([
        [e1, 0, ic * b, 0, ic * a2, 0],
        [0, np.conj(e1), 0, -ic * np.conj(b), 0, -ic * np.conj(a2)],
        [ic * np.conj(b), 0, e2, 0, 0, ic * a1],
        [0, -ic * b, 0, np.conj(e2), -ic * np.conj(a1), 0],
        [ic * np.conj(a2), 0, 0, ic * a1, e3, 0],
        [0, -ic * a2, -ic * np.conj(a1), 0, 0, np.conj(e3)],
    ], dtype=complex)


def spectrum(matrix, marginal_scale=0.0) -> StabilityReport:
    """All six eigenvalues; stable iff every real part is negative.

    ``marginal_scale`` (rad/s) sets the band |max_re| < marginal_scale
    reported as marginal; classification sweeps pass 1e-6 * gamma_c.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError:
        try:
            eig = scipy.linalg.eigvals(matrix, check_finite=False)
        except Exception as exc:   # pragma: no cover - LAPACK failure path
            raise EigenSolverFailure(str(exc)) from exc
    eig = np.sort_complex(eig)
    max_re = float(np.max(eig.real))
    marginal = abs(max_re) < marginal_scale
    return StabilityReport(matrix=matrix, eigenvalues=eig, max_re=max_re,
                           stable=(max_re < 0.0) and not marginal,
                           marginal=marginal)


def classify(branch, params: SystemParams) -> StabilityReport:
    """Build the matrix at ``branch`` and classify with the gamma_c-scaled
    marginality band."""
    return spectrum(build_matrix(branch, params),
                    marginal_scale=MARGINAL_FRACTION * params.gamma_c)


def conjugation_defect(eigenvalues):
    """Max distance from the spectrum to its conjugate under optimal pairing.

    The spectrum comes in conjugate pairs; this is the numerical defect of
    that symmetry (compare against 1e-9 * ||M||).
    """
    eig = np.asarray(eigenvalues, dtype=complex)
    target = np.conj(eig)
    cost = np.abs(eig[:, None] - target[None, :])
    row, col = scipy.optimize.linear_sum_assignment(cost)
    return float(cost[row, col].max())


# basis change between interleaved real coordinates (Re a1, Im a1, ...)
# and the conjugate-pair ordering (a1, a1+, a2, a2+, b, b+)
_T_BLOCK = np.array([[1.0, 1.0j], [1.0, -1.0j]])
_T = np.kron(np.eye(3), _T_BLOCK)
_T_INV = np.linalg.inv(_T)


def real_jacobian(state, params: SystemParams):
    """Jacobian of the equations of motion in interleaved real coordinates.

    Exactly the 6x6 matrix conjugated into the real basis; used by the
    steady-state Newton iteration.
    """
    m = build_matrix(state, params)
    j = _T_INV @ m @ _T
    return np.ascontiguousarray(j.real)


def max_re_of_branch(branch, params) -> float:
    return classify(branch, params).max_re


@dataclass(frozen=True)
class StabilitySweepPoint:
    omega_drive_abs: float      # rad/s
    branch: object              # SteadyStateBranch of the followed branch
    report: StabilityReport


@dataclass(frozen=True)
class StabilitySweepResult:
    points: list
    zero_crossings: list        # |Omega| values (rad/s) where max_re crosses 0


def stability_sweep(params: SystemParams, omega_grid,
                    crossing_rel_tol=1e-4) -> StabilitySweepResult:
    """max Re(eigenvalue) of the physically-followed branch along a drive grid.

    The followed branch is the continuation from Omega = 0 upward.  Zero
    crossings of max_re are bracketed by bisection to ``crossing_rel_tol``
    relative accuracy.
    """
    from . import steady   # local import; steady depends on this module

    omega_grid = np.asarray(sorted(omega_grid), dtype=float)
    points = []
    prev = None
    for om in omega_grid:
        branch = steady.follow_to(params, om, prev)
        prev = branch
        points.append(StabilitySweepPoint(
            omega_drive_abs=om, branch=branch,
            report=classify(branch, params)))

    def max_re_at(om, near):
        br = steady.follow_to(params, om, near)
        return classify(br, params).max_re

    crossings = []
    for left, right in zip(points[:-1], points[1:]):
        if left.report.max_re == 0.0 or left.report.max_re * right.report.max_re >= 0:
            continue
        lo, hi = left.omega_drive_abs, right.omega_drive_abs
        flo = left.report.max_re
        near = left.branch
        while hi - lo > crossing_rel_tol * max(abs(hi), 1e-300):
            mid = 0.5 * (lo + hi)
            fmid = max_re_at(mid, near)
            if flo * fmid <= 0:
                hi = mid
            else:
                lo, flo = mid, fmid
        crossings.append(0.5 * (lo + hi))
    return StabilitySweepResult(points=points, zero_crossings=crossings)


def stable_lasing_window(params: SystemParams, omega_max, n_scan=240,
                         rel_tol=1e-4):
    """Intervals of |Omega| where the net gain is positive and the followed
    branch is linearly stable.

    Returns a list of (low, high) in rad/s; the total length is the window
    width used for parameter-ordering comparisons.  Edges are bisected to
    ``rel_tol`` relative accuracy.
    """
    from . import lasing, steady

    omegas = np.linspace(0.0, float(omega_max), int(n_scan))

    def condition(om, near=None):
        p = params.with_drive(om)
        alpha = lasing.cubic_coefficients(p).alpha_prime
        branch = steady.follow_to(params, om, near)
        max_re = classify(branch, params).max_re
        return (alpha > 0.0) and (max_re < 0.0)

    flags = []
    prev = None
    for om in omegas:
        branch = steady.follow_to(params, om, prev)
        prev = branch
        p = params.with_drive(om)
        alpha = lasing.cubic_coefficients(p).alpha_prime
        flags.append((alpha > 0.0) and (classify(branch, params).max_re < 0.0))

    def refine(lo, hi, want_inside_high):
        # bisect the boundary between a False and True sample
        while hi - lo > rel_tol * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            if condition(mid) == want_inside_high:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    intervals = []
    i = 0
    n = len(omegas)
    while i < n:
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and flags[j + 1]:
            j += 1
        low = omegas[i] if i == 0 else refine(omegas[i - 1], omegas[i], True)
        high = omegas[j] if j == n - 1 else refine(omegas[j], omegas[j + 1], False)
        intervals.append((low, high))
        i = j + 1
    return intervals


def window_width(intervals):
    return float(sum(hi - lo for lo, hi in intervals))
