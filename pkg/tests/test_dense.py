import math

import numpy as np
import pytest
import scipy.linalg as sla

from krylovperf.dense import (
    EXP_T,
    PADE_DEGREES,
    PADE_THETA,
    T_PHI1_T,
    expm,
    expm_action_series,
    funm_hessenberg,
    pade_parameters,
    phi1_action,
    phi1m,
)
from krylovperf.errors import ValidationError


def test_pade_parameters_choose_smallest_degree():
    assert pade_parameters(0.0) == (3, 0)
    assert pade_parameters(PADE_THETA[5]) == (5, 0)
    d, h = pade_parameters(100.0)
    assert d == 13
    assert 100.0 / 2**h <= PADE_THETA[13] < 100.0 / 2 ** (h - 1)
    assert PADE_DEGREES == (3, 5, 7, 9, 13)


@pytest.mark.parametrize("scale", [1e-3, 0.2, 1.0, 3.0, 50.0, 400.0])
def test_expm_matches_scipy(rng, scale):
    A = rng.standard_normal((12, 12)) * scale / 12
    E = expm(A)
    ref = sla.expm(A)
    assert np.linalg.norm(E - ref, 1) <= 1e-12 * max(np.linalg.norm(ref, 1), 1.0)


def test_expm_diagonal_and_nilpotent():
    assert np.allclose(expm(np.diag([0.0, -1.0, 2.0])), np.diag(np.exp([0.0, -1.0, 2.0])),
                       rtol=1e-14)
    N = np.diag(np.ones(3), 1)
    ref = np.eye(4) + N + N @ N / 2 + N @ N @ N / 6
    assert np.allclose(expm(N), ref, rtol=0, atol=1e-14)


def test_expm_rejects_bad_input():
    with pytest.raises(ValidationError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        expm(np.array([[np.nan]]))


def test_series_agrees_with_pade(rng):
    A = rng.standard_normal((8, 8)) * 0.5
    v = rng.standard_normal(8)
    assert np.allclose(expm_action_series(A, v), expm(A) @ v, rtol=1e-12, atol=1e-13)


def test_phi1_scalar():
    for z in [-30.0, -1.0, -1e-6, 0.0, 1e-6, 2.0]:
        exact = 1.0 if z == 0 else math.expm1(z) / z
        assert phi1_action(np.array([[z]]), np.array([1.0]))[0] == pytest.approx(exact, rel=1e-14)


def test_phi1_against_inverse_formula(rng):
    A = rng.standard_normal((6, 6)) - 3 * np.eye(6)
    v = rng.standard_normal(6)
    ref = np.linalg.solve(A, (sla.expm(A) - np.eye(6)) @ v)
    assert np.allclose(phi1_action(A, v), ref, rtol=1e-11)
    assert np.allclose(phi1m(A) @ v, ref, rtol=1e-11)


def test_phi1_singular_matrix():
    # a generator is singular; phi_1 stays well defined
    Q = np.array([[-1.0, 1.0], [2.0, -2.0]])
    v = np.ones(2)
    assert np.allclose(phi1_action(Q, v), v, rtol=1e-14)


def test_funm_hessenberg_kinds(rng):
    H = np.triu(rng.standard_normal((7, 7)), -1)
    t = 0.7
    assert np.allclose(funm_hessenberg(H, EXP_T, t), sla.expm(t * H), rtol=1e-12)
    ref = np.linalg.solve(H, sla.expm(t * H) - np.eye(7))
    assert np.allclose(funm_hessenberg(H, T_PHI1_T, t), ref, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValidationError):
        funm_hessenberg(rng.standard_normal((4, 4)) + 5 * np.tri(4, k=-2), EXP_T, 1.0)
    with pytest.raises(ValidationError):
        funm_hessenberg(H, "sin", 1.0)
