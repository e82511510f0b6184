import numpy as np
import pytest

from phonolase import (EigenSolverFailure, build_matrix, classify,
                       follow_to, solve_fixed_points, spectrum,
                       stability_sweep)
from phonolase.constants import hz_to_angular
from phonolase.dynamics import pack_state, rhs_real, unpack_state
from phonolase.stability import (_T, _T_INV, conjugation_defect,
                                 real_jacobian)

from conftest import MULTI_HZ, make_params


def test_zero_fixed_point_matrix_is_block_diagonal(base_params):
    p = base_params
    m = build_matrix((0, 0, 0), p)
    e1 = -(p.gamma_c / 2) - 1j * (p.g - p.delta_drive)
    e2 = -(p.gamma_c / 2) + 1j * (p.g + p.delta_drive)
    e3 = -p.gamma_m - 1j * p.omega_m
    expected = np.diag([e1, np.conj(e1), e2, np.conj(e2), e3, np.conj(e3)])
    assert np.array_equal(m, expected)


def test_zero_fixed_point_eigenvalues(base_params):
    p = base_params
    rep = classify((0, 0, 0), p)
    reals = np.sort(rep.eigenvalues.real)
    expected = np.sort([-p.gamma_c / 2] * 4 + [-p.gamma_m] * 2)
    assert np.allclose(reals, expected, rtol=1e-12)
    assert rep.stable
    assert rep.max_re == pytest.approx(-p.gamma_m)


def test_matrix_couplings_enter_with_amplitudes():
    p = make_params(omega_drive_hz=6e9)
    br = solve_fixed_points(p)[0]
    m = build_matrix(br, p)
    ic = 1j * p.chi_eff
    assert m[0, 2] == ic * br.b
    assert m[0, 4] == ic * br.a2
    assert m[2, 5] == ic * br.a1
    assert m[4, 0] == ic * np.conj(br.a2)
    assert m[5, 1] == -ic * br.a2


def test_spectrum_synthetic_diagonal():
    rep = spectrum(np.diag([1.0, -1.0, -2.0, -3.0, -4.0, -5.0]))
    assert rep.max_re == 1.0
    assert not rep.stable


def test_spectrum_rejects_nonfinite():
    m = np.zeros((6, 6), dtype=complex)
    m[0, 0] = np.nan
    with pytest.raises(ValueError):
        spectrum(m)


def test_marginal_band():
    m = np.diag([-1.0, -1.0, -1.0, -1.0, -1.0, 1e-9])
    rep = spectrum(m, marginal_scale=1e-6)
    assert rep.marginal and not rep.stable
    rep2 = spectrum(m, marginal_scale=1e-12)
    assert not rep2.marginal and not rep2.stable


def test_conjugation_symmetry_at_driven_branches():
    for f_om in (2e9, 6e9, 7.5e9):
        p = make_params(omega_drive_hz=f_om)
        br = solve_fixed_points(p)[0]
        rep = classify(br, p)
        defect = conjugation_defect(rep.eigenvalues)
        assert defect <= 1e-9 * np.linalg.norm(rep.matrix)


def _finite_difference_complex_jacobian(branch, p):
    x0 = pack_state(branch.amplitudes)
    scale = max(1.0, float(np.max(np.abs(x0))))
    h = 1e-6 * scale
    jac = np.empty((6, 6))
    for k in range(6):
        dx = np.zeros(6)
        dx[k] = h
        jac[:, k] = (rhs_real(x0 + dx, p) - rhs_real(x0 - dx, p)) / (2 * h)
    return _T @ jac @ _T_INV


def test_matrix_equals_finite_difference_jacobian():
    for f_om in (2e9, 6e9):
        p = make_params(omega_drive_hz=f_om)
        br = solve_fixed_points(p)[0]
        m = build_matrix(br, p)
        m_fd = _finite_difference_complex_jacobian(br, p)
        assert np.linalg.norm(m_fd - m) <= 1e-6 * np.linalg.norm(m)


def test_real_jacobian_is_real_representation(base_params, rng):
    state = rng.normal(size=3) + 1j * rng.normal(size=3)
    jac = real_jacobian(state, base_params)
    # directional derivative check against the complex rhs
    x0 = rng.normal(size=6)
    x0 = pack_state(state)
    h = 1e-7 * max(1.0, np.max(np.abs(x0)))
    for k in range(3):
        dx = np.zeros(6)
        dx[k] = h
        fd = (rhs_real(x0 + dx, base_params) - rhs_real(x0 - dx, base_params)) / (2 * h)
        assert np.allclose(jac[:, k], fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(jac)))


def test_sweep_endpoint_and_crossing():
    p = make_params()
    grid = hz_to_angular(np.linspace(0.0, 9e9, 10))
    result = stability_sweep(p, grid)
    first = result.points[0].report
    assert first.max_re == pytest.approx(-min(p.gamma_m, p.gamma_c / 2))
    signs = [pt.report.max_re for pt in result.points]
    assert signs[0] < 0 and signs[-1] > 0
    assert len(result.zero_crossings) == 1
    crossing = result.zero_crossings[0]
    # bracketed to relative 1e-4
    lo = follow_to(p, crossing * (1 - 5e-4))
    hi = follow_to(p, crossing * (1 + 5e-4), near=lo)
    assert classify(lo, p).max_re < 0 < classify(hi, p).max_re


def test_eigenvalue_continuity_along_sweep():
    p = make_params()
    grid = hz_to_angular(np.linspace(0.0, 8e9, 33))
    result = stability_sweep(p, grid)
    prev = None
    norm = max(np.linalg.norm(pt.report.matrix) for pt in result.points)
    for pt in result.points:
        eig = pt.report.eigenvalues
        if prev is not None:
            # optimal pairing between adjacent spectra moves only a little
            cost = np.abs(prev[:, None] - eig[None, :])
            import scipy.optimize
            row, col = scipy.optimize.linear_sum_assignment(cost)
            assert cost[row, col].max() < 0.05 * norm
        prev = eig


def test_mixed_stability_tags_in_multivalued_regime():
    p = make_params(base=MULTI_HZ, omega_drive_hz=6.8e9)
    tags = [classify(b, p).stable for b in solve_fixed_points(p)]
    assert any(tags) and not all(tags)
