"""Fixed points of the semiclassical equations and the bistability sweep.

At a fixed point the cavity amplitudes are linear in the phonon amplitude
B0, so the full 6-real-dimensional root problem reduces to one complex
equation for B0.  Candidate B0 values come from two generators:

* the drive-strength relation |Omega|^2 = RHS(B0) swept over a
  magnitude-and-phase grid, keeping B0 wherever the RHS is numerically
  real and nonnegative, and
* an exact rearrangement of the same relation: at fixed s = |B0|^2 the
  fixed-point condition is a quadratic in B0, and roots are the
  self-consistent points |B0(s)|^2 = s, located by a dense scan plus
  bisection.

Every candidate is refined by a damped Newton iteration on the full
6-real system with the analytic Jacobian (the stability matrix evaluated
at the iterate), then residual-checked and deduplicated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import dynamics, stability
from .params import SystemParams

DEDUP_REL = 1e-6
DEDUP_FLOOR = 1e-12
RESIDUAL_REL = 1e-9


class NoConvergence(RuntimeError):
    """No seed converged to a fixed point; densify the seed set."""


@dataclass(frozen=True)
class SteadyStateBranch:
    a1: complex
    a2: complex
    b: complex
    residual: float             # max |rhs component|, rad/s * amplitude
    stable: bool | None = None  # filled by the stability module
    max_re: float | None = None

    @property
    def amplitudes(self):
        return np.array([self.a1, self.a2, self.b], dtype=complex)

    def tagged(self, report: stability.StabilityReport) -> "SteadyStateBranch":
        return replace(self, stable=report.stable, max_re=report.max_re)


@dataclass(frozen=True)
class BistabilitySweep:
    control_values: np.ndarray      # |Omega| grid, rad/s
    branches_per_point: list        # list of lists of SteadyStateBranch
    fold_points: list               # |Omega| (rad/s) where branch count changes

    @property
    def branch_counts(self):
        return [len(bs) for bs in self.branches_per_point]


def residual_scale(params, amplitudes):
    amax = float(np.max(np.abs(amplitudes))) if len(amplitudes) else 0.0
    return max(abs(params.omega_drive_amplitude),
               params.gamma_c * amax, params.gamma_c)


def linear_cavity_amplitudes(b, params: SystemParams):
    """Exact cavity amplitudes for a given phonon amplitude b."""
    chi = params.chi_eff
    drive = params.omega_drive_amplitude / np.sqrt(2.0)
    d1 = params.gamma_c / 2.0 + 1j * (params.g - params.delta_drive)
    d2 = params.gamma_c / 2.0 - 1j * (params.g + params.delta_drive)
    den = d1 * d2 + chi * chi * abs(b) ** 2
    a1 = drive * (d2 + 1j * chi * b) / den
    a2 = drive * (d1 + 1j * chi * np.conj(b)) / den
    return a1, a2


def eq9_rhs(b, params: SystemParams):
    """The drive-strength relation: the complex expression that must equal
    |Omega|^2 at a fixed point with phonon amplitude b."""
    chi = params.chi_eff
    gc, g, dd = params.gamma_c, params.g, params.delta_drive
    xi = gc / 2.0 - 1j * g
    n_val = abs(xi) ** 2 - dd ** 2 + chi ** 2 * abs(b) ** 2
    num = 2.0 * b * (params.gamma_m + 1j * params.omega_m) * \
        (n_val ** 2 + gc ** 2 * dd ** 2)
    den = 1j * chi * (xi ** 2 + (chi * b - dd) ** 2)
    return num / den


def _state_from_b(b, params):
    a1, a2 = linear_cavity_amplitudes(b, params)
    return np.array([a1, a2, b], dtype=complex)


def _b_scale(params):
    """Upper bound scale for |B0| at the current drive."""
    chi = params.chi_eff
    if chi == 0.0:
        return 0.0
    w2 = abs(params.omega_drive_amplitude) ** 2
    cube = (w2 / (2.0 * chi * params.omega_m)) ** (1.0 / 3.0)
    return 4.0 * cube + 4.0 * (abs(params.delta_drive) + params.g) / chi + 10.0


def _quadratic_roots_at_s(s, params):
    """Fixed-point B0 candidates at fixed s = |B0|^2 (exact quadratic).

    ``s`` may be a scalar or an array; returns shape (2,) or (2, n).
    """
    chi = params.chi_eff
    gc, dd = params.gamma_c, params.delta_drive
    w2 = abs(params.omega_drive_amplitude) ** 2
    xi = gc / 2.0 - 1j * params.g
    s = np.asarray(s, dtype=float)
    n_val = abs(xi) ** 2 - dd ** 2 + chi ** 2 * s
    a = 1j * chi ** 3 * w2 / 2.0
    bq = -((params.gamma_m + 1j * params.omega_m) * (n_val ** 2 + gc ** 2 * dd ** 2)
           + 1j * chi ** 2 * dd * w2)
    c = 1j * chi * (w2 / 2.0) * (xi ** 2 + dd ** 2)
    if a == 0:
        flat = np.where(bq != 0, -c / np.where(bq != 0, bq, 1.0), np.nan + 0j)
        return np.stack([flat, np.full_like(flat, np.nan + 0j)])
    disc = np.sqrt(bq * bq - 4.0 * a * c)
    return np.stack([(-bq + disc) / (2.0 * a), (-bq - disc) / (2.0 * a)])


def self_consistency_seeds(params: SystemParams, n_scan=1600):
    """Phonon-amplitude seeds from the |B0(s)|^2 = s self-consistency scan."""
    if params.chi_eff == 0.0 or params.drive_mod == 0.0:
        return [0j]
    smax = _b_scale(params) ** 2
    ss = np.concatenate([[0.0], np.geomspace(smax * 1e-14, smax, int(n_scan))])
    tracks = _quadratic_roots_at_s(ss, params)
    # keep the two quadratic roots on continuous tracks (the formula's
    # +/- assignment can swap along s)
    for j in range(1, ss.size):
        r, prev = tracks[:, j], tracks[:, j - 1]
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(prev))):
            continue
        if (abs(r[0] - prev[0]) + abs(r[1] - prev[1])
                > abs(r[1] - prev[0]) + abs(r[0] - prev[1])):
            tracks[:, j] = r[::-1]
    seeds = [0j]
    for k in range(2):
        v = np.abs(tracks[k]) ** 2 - ss
        finite = np.isfinite(v)
        for j in range(ss.size - 1):
            if not (finite[j] and finite[j + 1]):
                continue
            if v[j] == 0.0:
                seeds.append(tracks[k, j])
            elif v[j] * v[j + 1] < 0:
                ref = tracks[k, j]

                def track_root(s):
                    pair = _quadratic_roots_at_s(s, params)
                    return pair[int(np.argmin(np.abs(pair - ref)))]

                lo, hi, vlo = ss[j], ss[j + 1], v[j]
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    vm = abs(track_root(mid)) ** 2 - mid
                    if vlo * vm <= 0:
                        hi = mid
                    else:
                        lo, vlo = mid, vm
                    if hi - lo <= 1e-13 * max(hi, 1e-300):
                        break
                seeds.append(track_root(0.5 * (lo + hi)))
    return seeds


def eq9_seed_candidates(params: SystemParams, n_radius=96, n_phase=48,
                        im_tol=1e-6):
    """(|Omega|, B0) candidate pairs from the magnitude-and-phase sweep.

    At each magnitude |B0| the phase is bisected onto the curve where the
    drive-strength relation is numerically real (relative imaginary part
    below ``im_tol``); candidates with nonnegative real part are kept.
    """
    if params.chi_eff == 0.0:
        return []
    rmax = max(_b_scale(params), 1.0)
    radii = np.unique(np.concatenate([
        np.geomspace(rmax * 1e-8, rmax, n_radius // 2),
        np.linspace(rmax / n_radius, rmax, n_radius // 2),
    ]))
    phases = np.linspace(0.0, 2.0 * np.pi, n_phase + 1)

    def im_frac(r, th):
        w = eq9_rhs(r * np.exp(1j * th), params)
        return w.imag / np.maximum(np.abs(w), 1e-300)

    out = []
    for r in radii:
        frac = im_frac(r, phases)
        for k in range(n_phase):
            if frac[k] == 0.0:
                crossings = [phases[k]]
            elif frac[k] * frac[k + 1] < 0:
                lo, hi, flo = phases[k], phases[k + 1], frac[k]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    fm = float(im_frac(r, np.array([mid]))[0])
                    if flo * fm <= 0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                    if abs(fm) < 0.5 * im_tol:
                        break
                crossings = [0.5 * (lo + hi)]
            else:
                continue
            for th in crossings:
                b = r * np.exp(1j * th)
                w = eq9_rhs(b, params)
                if abs(w) > 0 and abs(w.imag) <= im_tol * abs(w) and w.real >= 0:
                    out.append((float(np.sqrt(w.real)), complex(b)))
    return out


def newton_refine(state, params: SystemParams, max_iter=80):
    """Damped Newton on the 6-real system; returns amplitudes or None."""
    x = dynamics.pack_state(state)
    if not np.all(np.isfinite(x)):
        return None
    for _ in range(max_iter):
        f = dynamics.rhs_real(x, params)
        fnorm = np.linalg.norm(f)
        scale = residual_scale(params, dynamics.unpack_state(x))
        if fnorm <= 1e-12 * scale:
            return dynamics.unpack_state(x)
        jac = stability.real_jacobian(dynamics.unpack_state(x), params)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(40):
            xn = x + lam * step
            if np.linalg.norm(dynamics.rhs_real(xn, params)) < fnorm * (1.0 - 0.25 * lam):
                break
            lam *= 0.5
        else:
            return None
        x = xn
    return None


def _dedup_key_distance(u, v):
    du = np.concatenate([u.real, u.imag])
    dv = np.concatenate([v.real, v.imag])
    return np.linalg.norm(du - dv), max(np.linalg.norm(du), np.linalg.norm(dv))


def _accept(roots, state):
    for other in roots:
        dist, size = _dedup_key_distance(other, state)
        if dist <= DEDUP_REL * size + DEDUP_FLOOR:
            return False
    return True


def solve_fixed_points(params: SystemParams, omega_drive=None, seeds=None,
                       n_scan=1600, require_convergence=True):
    """All deduplicated fixed points at the given drive.

    ``omega_drive`` (complex rad/s) overrides the drive in ``params``;
    ``seeds`` is an optional list of (a1, a2, b) states added to the
    generated candidates.  Raises :class:`NoConvergence` when nothing
    converges and ``require_convergence`` is set.
    """
    if omega_drive is not None:
        params = params.replace(omega_drive_amplitude=complex(omega_drive))
    cand_states = [np.zeros(3, dtype=complex),
                   _state_from_b(0j, params)]
    for b in self_consistency_seeds(params, n_scan=n_scan):
        cand_states.append(_state_from_b(b, params))
    target = params.drive_mod
    if target > 0:
        band = 0.05 * target
        for (w_cand, b) in eq9_seed_candidates(params):
            if abs(w_cand - target) <= band:
                cand_states.append(_state_from_b(b, params))
    if seeds:
        for s in seeds:
            cand_states.append(np.asarray(tuple(s), dtype=complex))

    roots = []
    for state in cand_states:
        refined = newton_refine(state, params)
        if refined is None:
            continue
        if _accept(roots, refined):
            roots.append(refined)
    if not roots:
        if require_convergence:
            raise NoConvergence("no seed converged; densify seeds")
        return []

    branches = []
    for amp in sorted(roots, key=lambda z: (abs(z[2]), abs(z[0]))):
        res = float(np.max(np.abs(dynamics.rhs(amp, params))))
        branch = SteadyStateBranch(a1=complex(amp[0]), a2=complex(amp[1]),
                                   b=complex(amp[2]), residual=res)
        branches.append(branch.tagged(stability.classify(branch, params)))
    return branches


def nearest_branch(branches, reference):
    """Branch closest to ``reference`` in the 6-real metric."""
    if hasattr(reference, "amplitudes"):
        ref = reference.amplitudes
    else:
        ref = np.asarray(tuple(reference), dtype=complex)
    best, best_d = None, np.inf
    for br in branches:
        d, _ = _dedup_key_distance(br.amplitudes, ref)
        if d < best_d:
            best, best_d = br, d
    return best


def follow_to(params: SystemParams, omega_abs, near=None, ramp_steps=8):
    """The physically-followed branch at drive modulus ``omega_abs``.

    Continuation from Omega = 0 upward; ``near`` short-circuits the ramp
    with a known nearby branch.
    """
    if near is None and omega_abs > 0:
        prev = None
        for om in np.linspace(0.0, omega_abs, ramp_steps + 1)[1:-1]:
            prev = _followed_point(params, om, prev)
        near = prev
    return _followed_point(params, omega_abs, near)


def _followed_point(params, omega_abs, near):
    p = params.with_drive(omega_abs)
    seeds = [tuple(near.amplitudes)] if near is not None else None
    branches = solve_fixed_points(p, seeds=seeds)
    if near is None:
        return nearest_branch(branches, (0j, 0j, 0j))
    return nearest_branch(branches, near)


def sweep_bistability(params: SystemParams, omega_min, omega_max, n_points,
                      fold_rel_tol=1e-4, n_scan=1200,
                      map_fn=None) -> BistabilitySweep:
    """All branches on a uniform |Omega| grid, with fold-point location.

    A serial continuation pre-pass collects seeds; per-point enumeration
    is independent given those seeds (``map_fn`` may parallelize it).
    Per-point convergence failures become gaps (empty branch lists), never
    an aborted sweep.  Fold points are |Omega| values where the branch
    count changes, bisected to ``fold_rel_tol`` relative accuracy.
    """
    if not (0 <= omega_min < omega_max):
        raise ValueError("need 0 <= omega_min < omega_max")
    if n_points < 2:
        raise ValueError("need n_points >= 2")
    grid = np.linspace(float(omega_min), float(omega_max), int(n_points))

    # serial pre-pass: continuation seeds per point, deterministic
    seed_sets = []
    carried = []
    for om in grid:
        seed_sets.append([tuple(s) for s in carried])
        try:
            branches = solve_fixed_points(params.with_drive(om),
                                          seeds=carried, n_scan=n_scan)
            carried = [tuple(b.amplitudes) for b in branches]
        except NoConvergence:
            carried = []

    items = [(params.with_drive(om), seeds, n_scan)
             for om, seeds in zip(grid, seed_sets)]
    mapper = map_fn if map_fn is not None else lambda f, xs: [f(x) for x in xs]
    branches_per_point = list(mapper(_enumerate_point, items))

    fold_points = _locate_folds(params, grid, branches_per_point,
                                fold_rel_tol, n_scan)
    return BistabilitySweep(control_values=grid,
                            branches_per_point=branches_per_point,
                            fold_points=fold_points)


def _enumerate_point(item):
    p, seeds, n_scan = item
    try:
        return solve_fixed_points(p, seeds=seeds, n_scan=n_scan)
    except NoConvergence:
        return []


def _count_at(params, omega_abs, n_scan):
    try:
        return len(solve_fixed_points(params.with_drive(omega_abs),
                                      n_scan=n_scan))
    except NoConvergence:
        return 0


def _locate_folds(params, grid, branches_per_point, rel_tol, n_scan):
    folds = []
    counts = [len(bs) for bs in branches_per_point]
    for i in range(len(grid) - 1):
        if counts[i] == counts[i + 1] or counts[i] == 0 or counts[i + 1] == 0:
            continue
        lo, hi = grid[i], grid[i + 1]
        clo = counts[i]
        while hi - lo > rel_tol * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            if _count_at(params, mid, n_scan) == clo:
                lo = mid
            else:
                hi = mid
        folds.append(0.5 * (lo + hi))
    return folds


STEADY_COLUMNS = ("omega_drive_hz", "branch_index", "re_a1", "im_a1",
                  "re_a2", "im_a2", "re_b0", "im_b0", "abs_b0",
                  "residual", "stable")


def branch_rows(omega_abs, branches):
    """CSV rows for one sweep point (omega in rad/s, written in Hz)."""
    from .constants import angular_to_hz
    rows = []
    for idx, br in enumerate(branches):
        rows.append((angular_to_hz(omega_abs), idx,
                     br.a1.real, br.a1.imag, br.a2.real, br.a2.imag,
                     br.b.real, br.b.imag, abs(br.b), br.residual,
                     bool(br.stable)))
    return rows
