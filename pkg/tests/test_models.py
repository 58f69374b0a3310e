import numpy as np
import pytest

from krylovperf.errors import ValidationError
from krylovperf.models import (
    AttackModel,
    QueueModel,
    TelecomModel,
    attack_state_count,
    build_attack,
    build_model,
    build_queue,
    build_telecom,
    direction_matrix,
    with_params,
)


def _zero_rows(case):
    A = case.generator.toarray()
    return np.abs(A.sum(axis=1)).max() < 1e-12


def test_queue_structure():
    case = build_queue(QueueModel(n=5, rho1=2.0, rho2=3.0))
    A = case.generator.toarray()
    assert A[0, 1] == 3.0 and A[1, 0] == 2.0
    assert A[0, 0] == -3.0 and A[4, 4] == -2.0
    assert np.count_nonzero(A) == 5 + 2 * 4
    assert np.array_equal(case.reward, np.arange(5))
    assert case.pi0[0] == 1.0 and _zero_rows(case)


@pytest.mark.parametrize("n", [1, 2, 7, 1024])
def test_telecom_state_count(n):
    case = build_telecom(TelecomModel(n=n))
    assert case.n == 2 * n + 1
    assert _zero_rows(case)
    kinds = [lab[0] for lab in case.labels]
    assert kinds.count("normal") == n + 1 and kinds.count("detected") == n


def test_telecom_rates():
    m = TelecomModel(n=3, c=0.2, delta=0.5, gamma=0.95, tau=1.0)
    A = build_telecom(m).generator.toarray()
    # normal_0 -> detected_1 at n gamma; detected_1 -> normal_0 at c delta
    assert A[0, 1] == pytest.approx(3 * 0.95)
    assert A[1, 0] == pytest.approx(0.1)
    assert A[1, 2] == pytest.approx(0.4)
    assert A[2, 0] == pytest.approx(1.0)


def test_attack_state_counts():
    assert build_attack(AttackModel(N=3)).n == 13
    assert build_attack(AttackModel(N=50)).n == 1376
    for N in (1, 2, 5, 17):
        assert build_attack(AttackModel(N=N)).n == attack_state_count(N)


def test_attack_small_enumeration():
    case = build_attack(AttackModel(N=3))
    assert case.labels[0] == (3, 0, 0, 0)
    assert set(case.labels) >= {(0, 0, 3, 0), (0, 0, 0, 1), (0, 0, 2, 1)}
    failed = case.partitions["failed"]
    assert failed.down.size == 3
    assert case.partition.up.size == 9 and case.partition.absorbing_down
    assert _zero_rows(case)
    A = case.generator.toarray()
    # failed states are absorbing
    assert np.all(A[failed.down] == 0)


def test_attack_reward():
    case = build_attack(AttackModel(N=3))
    for lab, r in zip(case.labels, case.reward):
        g, b, _, f = lab
        assert r == (1.0 if g >= 2 * b and f == 0 else 0.0)


@pytest.mark.parametrize(
    "model,param",
    [(QueueModel(n=6), "rho2"), (QueueModel(n=6), "rho1"), (TelecomModel(n=4), "gamma"),
     (TelecomModel(n=4), "c"), (AttackModel(N=4), "lambda_c"), (AttackModel(N=4), "T_IDS")],
)
def test_direction_matches_finite_difference(model, param):
    h = 1e-6
    builder = {QueueModel: build_queue, TelecomModel: build_telecom, AttackModel: build_attack}[type(model)]
    p = getattr(model, param)
    hi = builder(with_params(model, **{param: p + h})).generator.toarray()
    lo = builder(with_params(model, **{param: p - h})).generator.toarray()
    E = direction_matrix(model, param).toarray()
    assert np.allclose(E, (hi - lo) / (2 * h), atol=1e-6)
    assert np.abs(E.sum(axis=1)).max() < 1e-12


def test_direction_rejects_size_parameter():
    with pytest.raises(ValidationError):
        direction_matrix(QueueModel(), "n")


def test_build_model_coerces_strings():
    case = build_model("queue", n="8", rho2="2.5")
    assert case.n == 8 and case.model.rho2 == 2.5
    with pytest.raises(ValidationError):
        build_model("queue", bogus=1)
    with pytest.raises(ValidationError):
        build_model("nope")


@pytest.mark.parametrize("kw", [dict(n=0), dict(rho1=-1.0)])
def test_queue_validation(kw):
    with pytest.raises(ValidationError):
        QueueModel(**kw)
