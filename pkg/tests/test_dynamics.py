import numpy as np
import pytest

from phonolase import SystemParams, follow_to, integrate, rhs, solve_fixed_points
from phonolase.constants import hz_to_angular
from phonolase.dynamics import (Trajectory, pack_state, residual_norm,
                                rhs_real, unpack_state, write_trajectory_csv)

from conftest import BASE_HZ, MULTI_HZ, make_params


def test_rhs_origin_undriven_is_fixed_point(base_params):
    assert np.all(rhs((0, 0, 0), base_params) == 0)


def test_rhs_origin_driven():
    p = make_params(omega_drive_hz=1e9)
    drive = p.omega_drive_amplitude / np.sqrt(2)
    f = rhs((0, 0, 0), p)
    assert f[0] == pytest.approx(drive)
    assert f[1] == pytest.approx(drive)
    assert f[2] == 0


def test_rhs_decoupled_limit():
    p = make_params(chi_hz=0.0, omega_drive_hz=2e9)
    state = (1.2 - 0.3j, 0.5j, 2.0 + 1.0j)
    f = rhs(state, p)
    d1 = p.gamma_c / 2 + 1j * (p.g - p.delta_drive)
    expected = -d1 * state[0] + p.omega_drive_amplitude / np.sqrt(2)
    assert f[0] == pytest.approx(expected, rel=1e-15)


def test_pack_unpack_roundtrip(rng):
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert np.all(unpack_state(pack_state(z)) == z)


def test_integrate_stays_at_origin_undriven(base_params):
    traj = integrate((0, 0, 0), base_params, t_end=10 / base_params.gamma_m)
    assert traj.converged
    assert np.all(traj.states == 0)
    assert np.all(np.diff(traj.times) > 0)


def test_decoupled_matches_closed_form():
    # chi = 0: each cavity amplitude relaxes to its driven value as a
    # damped exponential
    p = make_params(chi_hz=0.0, omega_drive_hz=1e9)
    tol = 1e-10
    a0 = np.array([0.3 - 1.0j, -0.2j, 0.7 + 0.1j])
    t_end = 20 / p.gamma_c
    traj = integrate(a0, p, t_end=t_end, tol=tol)
    drive = p.omega_drive_amplitude / np.sqrt(2)
    d1 = p.gamma_c / 2 + 1j * (p.g - p.delta_drive)
    d2 = p.gamma_c / 2 - 1j * (p.g + p.delta_drive)
    db = p.gamma_m + 1j * p.omega_m
    stat = np.array([drive / d1, drive / d2, 0.0])
    decay = np.array([d1, d2, db])
    scale = np.max(np.abs(traj.states))
    for t, state in zip(traj.times, traj.states):
        exact = stat + (a0 - stat) * np.exp(-decay * t)
        assert np.max(np.abs(state - exact)) < 200 * tol * scale


def test_integrate_from_steady_state_has_small_residual():
    p = make_params(omega_drive_hz=2e9)
    branch = follow_to(p, hz_to_angular(2e9))
    tol = 1e-9
    traj = integrate(tuple(branch.amplitudes), p, t_end=50 / p.gamma_m, tol=tol)
    assert traj.final_residual < 10 * tol
    assert traj.converged


def test_perturbed_stable_branch_returns():
    p = make_params(omega_drive_hz=2e9)
    branch = follow_to(p, hz_to_angular(2e9))
    assert branch.stable
    start = branch.amplitudes * (1 + 1e-3)
    traj = integrate(tuple(start), p, t_end=30 / p.gamma_m, tol=1e-8)
    dist = np.linalg.norm(traj.final_state - branch.amplitudes)
    assert dist / np.linalg.norm(branch.amplitudes) < 1e-4


def test_perturbed_unstable_branch_departs():
    # far above threshold the followed fixed point is linearly unstable
    p = make_params(omega_drive_hz=12e9)
    branch = follow_to(p, hz_to_angular(12e9))
    assert branch.stable is False
    start = branch.amplitudes * (1 + 1e-6)
    traj = integrate(tuple(start), p, t_end=25 / p.gamma_m, tol=1e-8)
    dist = np.linalg.norm(traj.final_state - branch.amplitudes)
    assert dist > 1e3 * np.linalg.norm(start - branch.amplitudes) or traj.diverged


def test_fixed_point_consistency_for_all_roots():
    p = make_params(base=MULTI_HZ, omega_drive_hz=6.8e9)
    for br in solve_fixed_points(p):
        scale = max(abs(p.omega_drive_amplitude),
                    p.gamma_c * np.max(np.abs(br.amplitudes)))
        assert np.linalg.norm(rhs(br.amplitudes, p)) / scale < 1e-9


def test_tolerance_halving_keeps_classification():
    p_stable = make_params(omega_drive_hz=2e9)
    p_unstable = make_params(omega_drive_hz=12e9)
    for p, expect in ((p_stable, True), (p_unstable, False)):
        branch = follow_to(p, p.drive_mod)
        start = branch.amplitudes * (1 + 1e-4)
        outcomes = []
        for tol in (1e-8, 5e-9):
            traj = integrate(tuple(start), p, t_end=25 / p.gamma_m, tol=tol)
            back = (np.linalg.norm(traj.final_state - branch.amplitudes)
                    < np.linalg.norm(start - branch.amplitudes))
            outcomes.append(back and not traj.diverged)
        assert outcomes[0] == outcomes[1] == expect


def test_rhs_real_matches_complex(base_params, rng):
    x = rng.normal(size=6)
    f_real = rhs_real(x, base_params)
    f_cplx = rhs(unpack_state(x), base_params)
    assert np.allclose(f_real, pack_state(f_cplx), rtol=0, atol=0)


def test_invalid_arguments(base_params):
    with pytest.raises(ValueError):
        integrate((0, 0, 0), base_params, t_end=0.0)
    with pytest.raises(ValueError):
        integrate((0, 0, 0), base_params, t_end=1.0, tol=0.0)


def test_trajectory_csv(tmp_path, base_params):
    traj = integrate((1.0, 0.5j, 0.0), base_params, t_end=1 / base_params.gamma_c)
    out = tmp_path / "traj.csv"
    write_trajectory_csv(traj, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,re_a1,im_a1,re_a2,im_a2,re_b,im_b"
    assert len(lines) == 1 + len(traj.times)
    first = [float(v) for v in lines[1].split(",")]
    assert first[1] == pytest.approx(1.0)
    # 17 significant digits, lowercase scientific
    assert "e" in lines[1] and "E" not in lines[1]
