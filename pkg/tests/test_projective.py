import math

import numpy as np
import pytest

from dubrovin.algebra import connection_matrices, pm_cup_table, pm_gw_data, quantum_connection_matrices
from dubrovin.linalg import max_norm
from dubrovin.projective import (
    check_identity,
    closed_form_parts,
    givental_matrix,
    givental_ode_residual,
    givental_truncation,
    leading_matrix,
    pm_closed_form,
    pm_flat_frame,
    pm_full_frame,
    pm_system,
    reversal,
)
from dubrovin.series import ExpOdeSystem, frobenius_chain, solve_via_block_exp, subst3_coeffs

from conftest import decode, oracle


def test_pm_system_matrices():
    s = pm_system(1)
    assert np.array_equal(s.A, [[0, 1], [0, 0]])
    assert np.array_equal(s.C, [[0, 0], [1, 0]])
    assert np.array_equal(s.A @ s.C + s.C @ s.A, np.eye(2))
    assert s.alpha == 1 and pm_system(1, hbar=2.0).alpha == -2j
    s2 = pm_system(2)
    assert np.array_equal(s2.A, np.diag([1, 1], 1)) and s2.C[2, 0] == 1 and s2.C.sum() == 1
    for m in (1, 2, 3, 4):
        s = pm_system(m)
        assert not np.linalg.matrix_power(s.A, m + 1).any()
        assert not (s.C @ s.C).any()
    with pytest.raises(ValueError):
        pm_system(0)


def test_closed_form_at_zero():
    for m in (1, 2, 3):
        assert np.array_equal(pm_closed_form(pm_system(m), 0.0, 10), np.eye(m + 1))


def test_second_order_coefficient_p1():
    sys = pm_system(1)  # alpha = 1 at hbar = sqrt(-1)
    parts = closed_form_parts(sys, 1.0, 2)
    assert np.array_equal(parts["I"] + parts["IV"] + parts["II"] + parts["III"], [[0.5, 0], [-0.5, 0.5]])
    # the same coefficient from the e^{kt} t^j table of the scaled system
    Z = subst3_coeffs(sys.ode_system(), 4, 2).table
    t2 = sum(Z[k, j] * k ** (2 - j) / math.factorial(2 - j) for k in range(5) for j in range(3))
    lead2 = np.linalg.matrix_power(-sys.A, 2) / 2
    assert np.allclose(t2, lead2 + 2 * (parts["I"] + parts["IV"] + parts["II"] + parts["III"]) / 2, atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("alpha", [1.0, 0.6 - 0.5j, -1j])
def test_closed_form_matches_block_exp(m, alpha):
    sys = pm_system(m, alpha=alpha)
    ref = solve_via_block_exp(sys.ode_system(), 0.3, 40, 1e-13)
    assert max_norm(pm_closed_form(sys, 0.3, 25) - ref) <= 1e-8


@pytest.mark.parametrize("m", [1, 2, 3])
def test_closed_form_against_oracle(m):
    ref = oracle(f"pm{m}_alpha1")
    assert max_norm(pm_closed_form(pm_system(m), complex(*ref["t"]), 25) - decode(ref["B"])) <= 1e-10


@pytest.mark.parametrize("m", [1, 2, 3])
def test_enumeration_matches_convolution(m):
    sys = pm_system(m, alpha=0.8 + 0.3j)
    assert max_norm(pm_closed_form(sys, 0.4j, 10, "enumerate") - pm_closed_form(sys, 0.4j, 10)) <= 1e-15


def test_hbar_scaling():
    t = 0.25 - 0.1j
    for hbar in (1j, 0.5 + 1.5j):
        sys = pm_system(2, hbar)
        a = 1 / sys.alpha
        ref = solve_via_block_exp(ExpOdeSystem(-a * sys.A, ((1, -a * sys.C),)), t, 40, 1e-13)
        assert max_norm(pm_closed_form(sys, t, 25) - ref) <= 1e-9


def test_low_order_terms_exact():
    for m in (1, 2, 3):
        sys = pm_system(m, alpha=0.7 + 0.2j)
        t = 0.3 - 0.4j
        expected = sum(np.linalg.matrix_power(-t * sys.A / sys.alpha, n) / math.factorial(n) for n in range(m + 1))
        assert max_norm(leading_matrix(sys, t) - (expected - t * sys.C / sys.alpha)) <= 1e-15


@pytest.mark.parametrize("m", [1, 2, 3])
def test_partition_pieces_and_missing_row(m):
    parts = closed_form_parts(pm_system(m, alpha=0.9 - 0.1j), 0.4 + 0.2j, 20)
    assert not parts["I"][m].any()  # E^{m+1}_1 never appears in I
    iv = parts["IV"].copy()
    assert iv[m, 0] != 0
    iv[m, 0] = 0
    assert not iv.any()
    assert not parts["II"][m].any()
    assert not np.delete(parts["III"], m, axis=0).any()
    assert not parts["I"][:, 1:].any()


def test_flat_frame_matches_chain():
    for m in (1, 2, 3):
        for hbar in (1j, 0.6 + 0.8j):
            t = 0.3 + 0.2j
            chain = frobenius_chain(pm_gw_data(m), [t], hbar, K=40, tol=1e-12).g_inv
            assert max_norm(pm_flat_frame(m, hbar, t).g_inv - chain) <= 1e-12


def test_frame_reversal_identity():
    # J X_{1/hbar} J = X_{-1/hbar}^{-T}
    for m in (1, 2):
        hbar, t = 0.7 + 0.4j, 0.2 - 0.3j
        J = reversal(m + 1)
        X_plus = pm_closed_form(pm_system(m, hbar, alpha=1 / hbar), t)
        X_minus = pm_closed_form(pm_system(m, hbar, alpha=-1 / hbar), t)
        assert max_norm(J @ X_plus @ J - np.linalg.inv(X_minus).T) <= 1e-12


def _full_residuals(m, hbar, t, h=1e-5):
    """Finite-difference flatness residual of the full frame, one entry per coordinate."""
    cup = connection_matrices(pm_cup_table(m))
    F = pm_full_frame(m, hbar, t).g_inv
    out = []
    for l in range(m + 1):
        e = np.zeros(m + 1, dtype=complex)
        e[l] = h
        dF = (pm_full_frame(m, hbar, t + e).g_inv - pm_full_frame(m, hbar, t - e).g_inv) / (2 * h)
        G = quantum_connection_matrices(pm_gw_data(m), [t[1]])[0] if l == 1 else cup[l]
        out.append(max_norm(dF + hbar * G @ F))
    return out


def test_full_frame_reductions():
    for m in (1, 2):
        t = np.zeros(m + 1, dtype=complex)
        assert max_norm(pm_full_frame(m, 1j, t).g_inv - np.eye(m + 1)) <= 1e-15
        t[1] = 0.3 - 0.1j
        assert max_norm(pm_full_frame(m, 1j, t).g_inv - pm_flat_frame(m, 1j, t[1]).g_inv) <= 1e-15
    with pytest.raises(ValueError):
        pm_full_frame(2, 1j, [0.1, 0.2])


def test_full_frame_p1_is_flat(rng):
    for _ in range(5):
        t = 0.3 * (rng.normal(size=2) + 1j * rng.normal(size=2))
        assert max(_full_residuals(1, 1j, t)) <= 1e-6


def test_full_frame_p2_flat_directions(rng):
    for _ in range(5):
        t = 0.3 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        res = _full_residuals(2, 1j, t)
        assert res[0] <= 1e-6 and res[2] <= 1e-6
        t[2] = 0
        assert max(_full_residuals(2, 1j, t)) <= 1e-6


def test_full_frame_p2_h2_direction_off_the_line():
    # off t^2 = 0 the cup-product matrix of H^2 does not commute with quantum
    # multiplication by H, so the product frame is not flat along t^1.
    t = np.array([0.1, 0.2, 0.3], dtype=complex)
    assert _full_residuals(2, 1j, t)[1] > 1e-3


def test_givental_small_cases():
    hbar, t = 1j, 0.5 - 0.2j
    g = givental_truncation(1, hbar, 0)
    assert np.allclose(givental_matrix(g, t), [[1, -hbar * t], [0, 1]], atol=1e-15)
    assert np.array_equal(givental_matrix(g, 0.0), np.eye(2))
    with pytest.raises(ValueError):
        givental_truncation(1, hbar, -1)


def test_givental_scalar_equation():
    for m in (1, 2):
        r = [givental_ode_residual(givental_truncation(m, 1j, d), -2.0) for d in (2, 4, 8)]
        assert r[0] > r[1] > r[2] and r[2] <= 1e-12


def test_identity_residuals():
    for m in (1, 2):
        sysm = pm_system(m, 1j)
        assert check_identity(givental_truncation(m, 1j, 8), sysm, 0.0, 25) <= 1e-15
        assert check_identity(givental_truncation(m, 1j, 8), sysm, -2.0, 40) <= 1e-6
        for t in (-2.0, -1.5, -2.5 + 0.5j):
            r = [check_identity(givental_truncation(m, 1j, d), sysm, t, 40) for d in (4, 8, 12)]
            assert r[0] > r[1] > r[2]
    with pytest.raises(ValueError):
        check_identity(givental_truncation(1, 1j, 2), pm_system(2, 1j), -2.0)


def test_identity_fails_at_default_alpha():
    # with alpha = -sqrt(-1) hbar in place of 1/hbar the identity does not hold
    sys = pm_system(1, 1j)
    g = givental_truncation(1, 1j, 8)
    B = pm_closed_form(sys, -2.0, 40)
    J = reversal(2)
    assert max_norm(givental_matrix(g, 0.0) @ J @ B.T @ J - givental_matrix(g, -2.0)) > 1e-2
