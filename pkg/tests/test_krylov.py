import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from krylovperf.dense import EXP_T, T_PHI1_T
from krylovperf.errors import ConvergenceError, ValidationError
from krylovperf.krylov import KrylovConfig, arnoldi, bilinear_form, funm_action

from conftest import dense_exp_action, dense_tphi1_action, random_generator


def test_config_validation():
    with pytest.raises(ValidationError):
        KrylovConfig(m=0)
    with pytest.raises(ValidationError):
        KrylovConfig(tol=0)
    with pytest.raises(ValidationError):
        KrylovConfig(max_restarts=0)


def test_arnoldi_relation(rng):
    Q = random_generator(rng, 60)
    v = rng.random(60)
    dec = arnoldi(Q.T, v / np.linalg.norm(v), 12)
    assert dec.orthonormality_error() < 1e-12
    assert dec.relation_residual(Q.T) < 1e-12 * Q.norm1()
    assert np.allclose(np.tril(dec.H, -2), 0)


def test_arnoldi_requires_unit_vector(rng):
    Q = random_generator(rng, 5)
    with pytest.raises(ValidationError):
        arnoldi(Q, np.zeros(5), 3)


def test_lucky_breakdown_on_small_space():
    # e_0 spans an invariant subspace of an absorbing one-state chain block
    A = np.diag([-1.0, -2.0, -3.0])
    dec = arnoldi(A, np.array([1.0, 0, 0]), 3)
    assert dec.exact and dec.m == 1


@pytest.mark.parametrize("kind,oracle", [(EXP_T, dense_exp_action), (T_PHI1_T, dense_tphi1_action)])
@pytest.mark.parametrize("t", [0.0, 0.3, 5.0])
def test_funm_action_against_dense(rng, kind, oracle, t):
    Q = random_generator(rng, 80)
    pi0 = rng.random(80)
    pi0 /= pi0.sum()
    res = funm_action(Q.T, pi0, kind, t, KrylovConfig(m=10, max_restarts=40, tol=1e-12))
    ref = oracle(Q.toarray().T, pi0, t)
    assert np.linalg.norm(res.value - ref) <= 1e-9 * max(np.linalg.norm(ref), 1.0)
    assert res.converged


def test_restarts_are_used(rng):
    Q = random_generator(rng, 300, density=0.05, scale=5.0)
    pi0 = np.eye(300)[0]
    res = funm_action(Q.T, pi0, EXP_T, 3.0, KrylovConfig(m=5, max_restarts=100, tol=1e-10))
    assert res.restarts_used > 1
    ref = dense_exp_action(Q.toarray().T, pi0, 3.0)
    assert np.abs(res.value - ref).max() < 1e-8


def test_operator_types_agree(rng):
    Q = random_generator(rng, 40)
    v = rng.random(40)
    a = funm_action(Q.T, v, EXP_T, 1.0).value
    b = funm_action(Q.tocsr().T.tocsr(), v, EXP_T, 1.0).value
    c = funm_action(Q.toarray().T, v, EXP_T, 1.0).value
    d = funm_action(sp.linalg.aslinearoperator(Q.tocsr().T), v, EXP_T, 1.0).value
    for x in (b, c, d):
        assert np.allclose(a, x, rtol=1e-12, atol=1e-14)


def test_nonconvergence_raises_with_partial_result(rng):
    Q = random_generator(rng, 200, scale=10.0)
    with pytest.raises(ConvergenceError) as info:
        funm_action(Q.T, np.eye(200)[0], EXP_T, 10.0, KrylovConfig(m=5, max_restarts=2, tol=1e-14))
    assert info.value.result is not None
    assert len(info.value.update_norms) == 2


def test_underflow_is_not_convergence(rng):
    # with m = 2 every Ritz value is far left, e^{tH} e_1 underflows to 0
    Q = random_generator(rng, 200, scale=10.0)
    with pytest.raises(ConvergenceError, match="underflow"):
        funm_action(Q.T, np.eye(200)[0], EXP_T, 10.0, KrylovConfig(m=2, max_restarts=30))


def test_shift_invariance(rng):
    # e^{t(A + cI)} v = e^{ct} e^{tA} v
    Q = random_generator(rng, 50)
    v = rng.random(50)
    c, t = -0.7, 1.3
    a = funm_action(Q.T, v, EXP_T, t, KrylovConfig(tol=1e-12)).value
    shifted = Q.toarray().T + c * np.eye(50)
    b = funm_action(shifted, v, EXP_T, t, KrylovConfig(tol=1e-12)).value
    assert np.allclose(b, math.exp(c * t) * a, rtol=1e-10)


def test_probability_conservation(rng):
    Q = random_generator(rng, 120)
    pi0 = rng.random(120)
    pi0 /= pi0.sum()
    for t in [0.5, 4.0]:
        p = funm_action(Q.T, pi0, EXP_T, t).value
        assert abs(p.sum() - 1.0) < 1e-8
        assert p.min() > -1e-8
        assert abs(funm_action(Q.T, pi0, T_PHI1_T, t).value.sum() - t) < 1e-8 * max(t, 1)


def test_bilinear_form(rng):
    Q = random_generator(rng, 30)
    w, v = rng.random(30), rng.random(30)
    ref = w @ dense_exp_action(Q.toarray(), v, 2.0)
    assert bilinear_form(w, Q, v, EXP_T, 2.0, KrylovConfig(tol=1e-12)) == pytest.approx(ref, rel=1e-10)
    assert bilinear_form(np.zeros(30), Q, v) == 0.0


def test_no_spurious_warnings(rng):
    Q = random_generator(rng, 100)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        funm_action(Q.T, np.eye(100)[3], T_PHI1_T, 2.0)
