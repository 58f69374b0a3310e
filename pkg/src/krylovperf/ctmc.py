"""
Sparse infinitesimal generators of continuous-time Markov chains.

A :class:`Generator` stores the off-diagonal transition rates in CSR form and
always derives the diagonal from them, so ``Q @ 1 == 0`` holds by
construction. States are 0-indexed; Matrix Market files use the usual
1-indexed convention (handled by :mod:`scipy.io`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import ValidationError

__all__ = [
    "Generator",
    "StatePartition",
    "InvertibilityReport",
    "build_generator",
    "from_rate_matrix",
    "matvec",
    "transpose_matvec",
    "extract_submatrix",
    "check_up_block_invertible",
    "is_irreducible",
    "as_distribution",
    "indicator",
    "read_matrix_market",
    "write_matrix_market",
]

DEFAULT_ROW_SUMS_TOL = 1e-10


def _offdiag_with_diagonal(n, rows, cols, vals):
    """CSR matrix from off-diagonal triplets with the negated row sums on the diagonal."""
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    Q = (off + sp.diags(diag, format="csr")).tocsr()
    Q.sort_indices()
    return Q


class _Transposed:
    """Operator view acting as ``Q.T``; shares storage with its generator."""

    def __init__(self, gen):
        self._gen = gen
        self.shape = gen.shape

    def matvec(self, w):
        return self._gen.transpose_matvec(w)

    def __matmul__(self, w):
        return self.matvec(w)

    def norm1(self):
        # ||Q^T||_1 = ||Q||_inf; for a generator this is 2 max|Q_ii|
        return float(abs(self._gen.rows).sum(axis=1).max()) if self._gen.n else 0.0

    @property
    def T(self):
        return self._gen


class Generator:
    """Immutable sparse infinitesimal generator.

    Parameters
    ----------
    rows : scipy.sparse.csr_matrix
        Full generator including the diagonal. Use :func:`build_generator`
        rather than calling this directly; it guarantees zero row sums.
    row_sums_tol : float
        Relative tolerance used when validating externally supplied data.

    Notes
    -----
    The column-compressed mirror used by :meth:`transpose_matvec` is built
    eagerly in the constructor, so instances never mutate after creation and
    can be shared between threads.
    """

    def __init__(self, rows, row_sums_tol=DEFAULT_ROW_SUMS_TOL):
        rows = sp.csr_matrix(rows, dtype=float)
        if rows.shape[0] != rows.shape[1]:
            raise ValidationError(f"generator must be square, got {rows.shape}")
        self.rows = rows
        self.n = rows.shape[0]
        self.shape = rows.shape
        self.row_sums_tol = float(row_sums_tol)
        self._cols = rows.T.tocsr()
        self._cols.sort_indices()
        self.rows.data.setflags(write=False)
        self._cols.data.setflags(write=False)

    def __repr__(self):
        return f"Generator(n={self.n}, nnz={self.rows.nnz})"

    @property
    def nnz(self):
        return self.rows.nnz

    @property
    def T(self):
        return _Transposed(self)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise IndexError(f"vector of shape {v.shape} does not match n={self.n}")
        return self.rows @ v

    def transpose_matvec(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise IndexError(f"vector of shape {w.shape} does not match n={self.n}")
        return self._cols @ w

    def __matmul__(self, v):
        return self.matvec(v)

    def norm1(self):
        """Maximum absolute column sum."""
        if self.n == 0:
            return 0.0
        return float(abs(self._cols).sum(axis=1).max())

    def diagonal(self):
        return self.rows.diagonal()

    def toarray(self):
        return self.rows.toarray()

    def tocsr(self):
        return self.rows.copy()


def build_generator(n, triplets, row_sums_tol=DEFAULT_ROW_SUMS_TOL):
    """Build a generator from off-diagonal ``(row, col, rate)`` triplets.

    Duplicate pairs are summed. Diagonal entries in ``triplets`` are rejected:
    the diagonal is always the negated off-diagonal row sum.

    Examples
    --------
    >>> build_generator(2, [(0, 1, 1.0), (1, 0, 2.0)]).toarray()
    array([[-1.,  1.],
           [ 2., -2.]])
    """
    n = int(n)
    if n < 0:
        raise ValidationError("state count must be nonnegative")
    if len(triplets):
        arr = np.asarray(triplets, dtype=float).reshape(-1, 3)
        rows = arr[:, 0]
        cols = arr[:, 1]
        vals = arr[:, 2]
        if np.any(rows != np.round(rows)) or np.any(cols != np.round(cols)):
            raise ValidationError("state indices must be integers")
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return _from_coo(n, rows, cols, vals, row_sums_tol)


def _from_coo(n, rows, cols, vals, row_sums_tol):
    if rows.size:
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n:
            raise IndexError(f"state index out of range for n={n}")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("rates must be finite")
    if np.any(rows == cols):
        raise ValidationError("diagonal entries are derived, not supplied")
    if np.any(vals < 0):
        i = int(np.flatnonzero(vals < 0)[0])
        raise ValidationError(
            f"negative off-diagonal rate {vals[i]} at ({rows[i]}, {cols[i]})"
        )
    Q = _offdiag_with_diagonal(n, rows, cols, vals)
    Q.eliminate_zeros()
    return Generator(Q, row_sums_tol)


def from_rate_matrix(R, row_sums_tol=DEFAULT_ROW_SUMS_TOL):
    """Build a generator from a (sparse or dense) matrix; its diagonal is ignored."""
    R = sp.coo_matrix(R)
    if R.shape[0] != R.shape[1]:
        raise ValidationError(f"rate matrix must be square, got {R.shape}")
    keep = R.row != R.col
    return _from_coo(
        R.shape[0], R.row[keep].astype(np.int64), R.col[keep].astype(np.int64),
        R.data[keep].astype(float), row_sums_tol,
    )


def matvec(Q, v):
    """Return ``Q @ v``."""
    return Q.matvec(v)


def transpose_matvec(Q, w):
    """Return ``Q.T @ w``."""
    return Q.transpose_matvec(w)


def _index_set(idx, n):
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index set out of range for n={n}")
    return idx


def extract_submatrix(Q, rows, cols):
    """Return the block ``Q[rows][:, cols]`` relabelled consecutively (CSR).

    The block carries no generator invariants.
    """
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q)
    r = _index_set(rows, A.shape[0])
    c = _index_set(cols, A.shape[1])
    B = A[r][:, c].tocsr()
    B.sort_indices()
    return B


@dataclass(frozen=True)
class StatePartition:
    """Split of the state space into up states and down states.

    ``absorbing_down`` records whether no transition leads from a down state
    back into an up state; use :meth:`from_up` to have it computed.
    """

    up: np.ndarray
    down: np.ndarray
    absorbing_down: bool = False

    def __post_init__(self):
        up = np.unique(np.asarray(self.up, dtype=np.int64))
        down = np.unique(np.asarray(self.down, dtype=np.int64))
        if np.intersect1d(up, down).size:
            raise ValidationError("up and down sets overlap")
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)

    @property
    def n(self):
        return self.up.size + self.down.size

    @classmethod
    def from_up(cls, Q, up):
        """Partition with ``down`` the complement of ``up``; absorption is detected."""
        n = Q.shape[0]
        up = _index_set(up, n)
        mask = np.zeros(n, dtype=bool)
        mask[up] = True
        down = np.flatnonzero(~mask)
        absorbing = True
        if down.size and up.size:
            absorbing = extract_submatrix(Q, down, np.flatnonzero(mask)).nnz == 0
        return cls(np.flatnonzero(mask), down, bool(absorbing))

    def validate(self, Q):
        n = Q.shape[0]
        if self.n != n or (self.up.size and self.up.max() >= n) or (
            self.down.size and self.down.max() >= n
        ):
            raise ValidationError(f"partition does not cover states 0..{n - 1}")
        if self.absorbing_down and self.up.size and self.down.size:
            if extract_submatrix(Q, self.down, self.up).nnz:
                raise ValidationError("down states marked absorbing but lead back to up")

    def up_indicator(self):
        return indicator(self.n, self.up)

    def down_indicator(self):
        return indicator(self.n, self.down)


def indicator(n, states):
    """0/1 vector of length ``n`` supported on ``states``."""
    r = np.zeros(n)
    r[_index_set(states, n)] = 1.0
    return r


def as_distribution(pi, n=None, tol=1e-12):
    """Validate a probability vector and return it as a float array."""
    pi = np.asarray(pi, dtype=float).ravel()
    if n is not None and pi.size != n:
        raise IndexError(f"distribution of length {pi.size} does not match n={n}")
    if not np.all(np.isfinite(pi)):
        raise ValidationError("distribution has non-finite entries")
    if np.any(pi < 0):
        raise ValidationError("distribution has negative entries")
    if abs(pi.sum() - 1.0) > tol:
        raise ValidationError(f"distribution sums to {pi.sum():.17g}, not 1")
    return pi


@dataclass(frozen=True)
class InvertibilityReport:
    """Outcome of the sufficient-condition check on an up block.

    ``verified`` is never a proof of singularity when False.
    """

    verified: bool
    reason: str
    strictly_dominant_rows: int = 0
    rows_without_exit_path: np.ndarray = field(default_factory=lambda: np.zeros(0, int))


def check_up_block_invertible(Q_u, rtol=1e-14):
    """Check sufficient conditions for nonsingularity of an up block.

    The block is nonsingular if every row is strictly diagonally dominant, or
    if all rows are weakly dominant and every state reaches a strictly
    dominant row (a state with a positive rate out of the block).
    """
    A = sp.csr_matrix(Q_u, dtype=float)
    m = A.shape[0]
    if m == 0:
        return InvertibilityReport(True, "empty block")
    d = np.abs(A.diagonal())
    off = np.asarray(abs(A).sum(axis=1)).ravel() - d
    scale = max(float(d.max()), 1.0)
    slack = rtol * scale
    strict = d > off + slack
    weak = d >= off - slack
    if strict.all():
        return InvertibilityReport(True, "strictly diagonally dominant", int(strict.sum()))
    if not weak.all():
        return InvertibilityReport(
            False, "not verified: some row is not diagonally dominant", int(strict.sum())
        )
    # reverse reachability from the strictly dominant rows via a virtual sink
    G = A.tocoo()
    keep = G.row != G.col
    src = np.concatenate([G.col[keep], np.full(int(strict.sum()), m)])
    dst = np.concatenate([G.row[keep], np.flatnonzero(strict)])
    rev = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(m + 1, m + 1))
    seen = np.zeros(m + 1, dtype=bool)
    seen[breadth_first_order(rev, m, directed=True, return_predecessors=False)] = True
    stuck = np.flatnonzero(~seen[:m])
    if stuck.size == 0:
        return InvertibilityReport(
            True, "weakly chained diagonally dominant: every state reaches an exit",
            int(strict.sum()),
        )
    return InvertibilityReport(
        False, "not verified: some states cannot leave the block",
        int(strict.sum()), stuck,
    )


def is_irreducible(Q):
    """True if the transition graph of ``Q`` is strongly connected."""
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q)
    if A.shape[0] <= 1:
        return True
    ncomp, _ = connected_components(A, directed=True, connection="strong")
    return ncomp == 1


def read_matrix_market(path, row_sums_tol=DEFAULT_ROW_SUMS_TOL):
    """Read a generator from a Matrix Market coordinate file.

    Only off-diagonal entries are used. If the file carries a diagonal that
    disagrees with the derived one by more than ``row_sums_tol`` (relative to
    the largest diagonal magnitude) a :class:`UserWarning` is emitted.
    """
    M = sp.coo_matrix(scipy.io.mmread(path))
    Q = from_rate_matrix(M, row_sums_tol)
    on = M.row == M.col
    if np.any(on):
        file_diag = np.zeros(Q.n)
        np.add.at(file_diag, M.row[on], M.data[on])
        derived = Q.diagonal()
        scale = max(float(np.abs(derived).max()), 1e-300)
        err = float(np.abs(file_diag - derived).max())
        if err > row_sums_tol * scale:
            warnings.warn(
                f"{path}: file diagonal differs from derived diagonal by {err:.3e}; "
                "using the derived one",
                stacklevel=2,
            )
    return Q


def write_matrix_market(path, Q, comment=""):
    """Write ``Q`` (diagonal included) as a real general coordinate file."""
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q)
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real",
                     symmetry="general")
