import numpy as np
import pytest
import scipy.sparse as sp

from krylovperf.ctmc import (
    StatePartition,
    build_generator,
    check_up_block_invertible,
    extract_submatrix,
    from_rate_matrix,
    indicator,
    is_irreducible,
    read_matrix_market,
    write_matrix_market,
)
from krylovperf.errors import ValidationError

from conftest import random_generator


def test_diagonal_is_negated_offdiagonal_sum(rng):
    Q = random_generator(rng, 40)
    A = Q.toarray()
    off = A - np.diag(np.diag(A))
    assert np.allclose(np.diag(A), -off.sum(axis=1), rtol=1e-15, atol=0)
    assert np.abs(Q.matvec(np.ones(40))).max() < 1e-14


def test_build_generator_sums_duplicates():
    Q = build_generator(3, [(0, 1, 1.0), (0, 1, 2.0), (2, 0, 0.5)])
    A = Q.toarray()
    assert A[0, 1] == 3.0
    assert A[0, 0] == -3.0
    assert A[1, 1] == 0.0
    assert Q.nnz == 4


@pytest.mark.parametrize("bad", [[(0, 1, -1.0)], [(1, 1, 2.0)]])
def test_build_generator_rejects(bad):
    with pytest.raises(ValidationError):
        build_generator(2, bad)


def test_build_generator_index_out_of_range():
    with pytest.raises(IndexError):
        build_generator(2, [(0, 5, 1.0)])


def test_transpose_matvec_matches_dense(rng):
    Q = random_generator(rng, 25)
    w = rng.standard_normal(25)
    assert np.allclose(Q.transpose_matvec(w), Q.toarray().T @ w, atol=1e-14)
    assert np.allclose(Q.T.matvec(w), Q.toarray().T @ w, atol=1e-14)
    assert np.isclose(Q.norm1(), np.abs(Q.toarray()).sum(axis=0).max())
    with pytest.raises(IndexError):
        Q.matvec(np.ones(24))


def test_extract_submatrix():
    R = np.array([[0, 1, 2], [3, 0, 4], [5, 6, 0]], dtype=float)
    Q = from_rate_matrix(R)
    B = extract_submatrix(Q, [0, 2], [0, 2]).toarray()
    assert np.array_equal(B, [[-3.0, 2.0], [5.0, -11.0]])


def test_partition_detects_absorbing():
    Q = build_generator(3, [(0, 1, 1.0), (1, 2, 1.0)])
    p = StatePartition.from_up(Q, [0, 1])
    assert p.absorbing_down
    q = StatePartition.from_up(build_generator(2, [(0, 1, 1.0), (1, 0, 1.0)]), [0])
    assert not q.absorbing_down
    assert np.array_equal(p.up_indicator(), indicator(3, [0, 1]))


def test_partition_overlap_rejected():
    with pytest.raises(ValidationError):
        StatePartition([0, 1], [1, 2])


def test_invertibility_report():
    Q = build_generator(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)])
    rep = check_up_block_invertible(extract_submatrix(Q, [0, 1], [0, 1]))
    assert rep.verified
    closed = build_generator(3, [(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)])
    rep = check_up_block_invertible(extract_submatrix(closed, [0, 1], [0, 1]))
    assert not rep.verified


def test_irreducibility():
    assert is_irreducible(build_generator(2, [(0, 1, 1.0), (1, 0, 2.0)]))
    assert not is_irreducible(build_generator(2, [(0, 1, 1.0)]))


def test_matrix_market_round_trip(tmp_path, rng):
    Q = random_generator(rng, 30)
    path = tmp_path / "q.mtx"
    write_matrix_market(path, Q)
    Q2 = read_matrix_market(path)
    assert np.allclose(Q.toarray(), Q2.toarray(), rtol=1e-15, atol=0)


def test_matrix_market_inconsistent_diagonal_warns(tmp_path):
    import scipy.io

    A = sp.csr_matrix(np.array([[-5.0, 1.0], [2.0, -2.0]]))
    scipy.io.mmwrite(str(tmp_path / "bad.mtx"), A)
    with pytest.warns(UserWarning):
        Q = read_matrix_market(tmp_path / "bad.mtx")
    assert Q.toarray()[0, 0] == -1.0
