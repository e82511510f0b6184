"""Time-domain integration of the semiclassical equations of motion.

The averaged equations (with the factorization <a2 b> = <a2><b>) are

    d<a1>/dt = -[gamma_c/2 + i(g - Delta)]<a1> + i chi <a2><b>   + Omega/sqrt(2)
    d<a2>/dt = -[gamma_c/2 - i(g + Delta)]<a2> + i chi <a1><b*>  + Omega/sqrt(2)
    d<b>/dt  = -(gamma_m + i omega_m)<b>      + i chi <a2*><a1>

The integrator doubles as the independent oracle for steady states and
stability classifications.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .csvio import write_csv
from .params import SystemParams

# Divergence threshold: linear growth above threshold is physical until
# saturation terms act, so blow-up is reported as an outcome, not an error.
DIVERGENCE_LIMIT = 1e12


class StepSizeUnderflow(RuntimeError):
    """The adaptive step controller could not meet the requested tolerance."""


class SemiclassicalState(NamedTuple):
    a1: complex
    a2: complex
    b: complex


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray           # seconds, strictly increasing
    states: np.ndarray          # (n, 3) complex amplitudes (a1, a2, b)
    converged: bool
    final_residual: float       # ||rhs(final)|| / max(|Omega|, gamma_c)
    diverged: bool = False

    @property
    def final_state(self):
        return self.states[-1]


def rhs(state, params: SystemParams):
    """Time derivative of (a1, a2, b) for the averaged equations."""
    a1, a2, b = np.asarray(state, dtype=complex)
    chi = params.chi_eff
    drive = params.omega_drive_amplitude / np.sqrt(2.0)
    d1 = params.gamma_c / 2.0 + 1j * (params.g - params.delta_drive)
    d2 = params.gamma_c / 2.0 - 1j * (params.g + params.delta_drive)
    return np.array([
        -d1 * a1 + 1j * chi * a2 * b + drive,
        -d2 * a2 + 1j * chi * a1 * np.conj(b) + drive,
        -(params.gamma_m + 1j * params.omega_m) * b + 1j * chi * np.conj(a2) * a1,
    ])


def pack_state(state):
    """(a1, a2, b) complex -> interleaved real vector of length 6."""
    z = np.asarray(state, dtype=complex)
    out = np.empty(6)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def unpack_state(x):
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def rhs_real(x, params):
    """rhs on the interleaved real representation."""
    return pack_state(rhs(unpack_state(x), params))


def residual_norm(state, params):
    """||rhs|| normalized by the characteristic scale max(|Omega|, gamma_c)."""
    scale = max(abs(params.omega_drive_amplitude), params.gamma_c)
    return float(np.linalg.norm(rhs(state, params))) / scale


def integrate(initial, params: SystemParams, t_end, tol=1e-8) -> Trajectory:
    """Adaptive RK45 integration up to ``t_end`` seconds.

    Divergence (any |component| above ``DIVERGENCE_LIMIT``) terminates the
    run and is reported through ``Trajectory.diverged``.  A step-size
    underflow raises :class:`StepSizeUnderflow`.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    y0 = pack_state(initial)

    def event_diverged(t, y):
        return DIVERGENCE_LIMIT - np.max(np.abs(y))

    event_diverged.terminal = True

    # local error is controlled well below the reported tolerance so that
    # drift accumulated over many fast periods stays within it
    rtol = max(tol * 1e-3, 1e-13)
    atol = rtol * max(1.0, float(np.max(np.abs(y0))))
    sol = solve_ivp(lambda t, y: rhs_real(y, params), (0.0, t_end), y0,
                    method="RK45", rtol=rtol, atol=atol, events=event_diverged)
    if sol.status == -1:
        raise StepSizeUnderflow(sol.message)
    states = np.stack([unpack_state(col) for col in sol.y.T])
    diverged = (sol.status == 1) or not np.all(np.isfinite(sol.y))
    if diverged:
        return Trajectory(times=sol.t, states=states, converged=False,
                          final_residual=float("inf"), diverged=True)
    res = residual_norm(states[-1], params)
    return Trajectory(times=sol.t, states=states, converged=res < tol,
                      final_residual=res, diverged=False)


TRAJECTORY_COLUMNS = ("t", "re_a1", "im_a1", "re_a2", "im_a2", "re_b", "im_b")


def write_trajectory_csv(trajectory: Trajectory, path):
    rows = []
    for t, s in zip(trajectory.times, trajectory.states):
        rows.append((t, s[0].real, s[0].imag, s[1].real, s[1].imag,
                     s[2].real, s[2].imag))
    write_csv(path, TRAJECTORY_COLUMNS, rows)
