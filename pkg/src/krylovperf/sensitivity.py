"""
First-order sensitivity of measures with respect to a model parameter.

For ``g(p) = v^T f(Q(p)) w`` and a direction ``E = dQ/dp``,

    v^T D_f(Q)[E] w = [v^T 0] f([[Q, E], [0, Q]]) [0; w],

so the derivative costs one Krylov run on an operator of twice the size.
The block matrix is never formed; :class:`BlockOperator` applies it.

The run is made on the transposed block ``[[Q^T, 0], [E^T, Q^T]]`` from
``[pi0; 0]``, mirroring the orientation used for plain measures. Its top
half is ``f(Q^T) pi0``, so the plain value comes out of the same run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.sparse as sp

from .ctmc import Generator, extract_submatrix
from .errors import SpecError, ValidationError
from .krylov import KrylovConfig, funm_action
from .measures import (
    Kind,
    _failure_rates,
    _mttf_infinite,
    plan,
    solve_up_block,
)

__all__ = [
    "BlockOperator",
    "SensitivityResult",
    "as_direction",
    "measure_sensitivity",
    "mttf_sensitivity",
]


def _csr(A):
    return A.rows if isinstance(A, Generator) else sp.csr_matrix(A, dtype=float)


def as_direction(E, n=None, tol=1e-10):
    """Validate a direction matrix: square, finite, zero row sums."""
    E = sp.csr_matrix(E, dtype=float)
    if E.shape[0] != E.shape[1]:
        raise ValidationError(f"direction must be square, got {E.shape}")
    if n is not None and E.shape[0] != n:
        raise IndexError(f"direction is {E.shape[0]}x{E.shape[0]}, chain has {n} states")
    if not np.all(np.isfinite(E.data)):
        raise ValidationError("direction has non-finite entries")
    if E.shape[0]:
        sums = np.abs(np.asarray(E.sum(axis=1)).ravel())
        scale = max(float(abs(E).max()), 1.0) if E.nnz else 1.0
        if sums.max() > tol * scale:
            raise ValidationError(f"direction rows must sum to 0 (max |sum| {sums.max():.3e})")
    return E


class BlockOperator:
    """Action of ``[[A, E], [0, A]]`` on vectors of length ``2n``.

    ``BlockOperator(A, E).T`` is the action of the transposed block
    ``[[A^T, 0], [E^T, A^T]]``.
    """

    def __init__(self, A, E, transposed=False):
        self.A = _csr(A)
        self.E = sp.csr_matrix(E, dtype=float)
        if self.A.shape != self.E.shape:
            raise IndexError(f"direction shape {self.E.shape} does not match {self.A.shape}")
        n = self.A.shape[0]
        self.n = n
        self.shape = (2 * n, 2 * n)
        self.transposed = transposed
        if transposed:
            self._A = self.A.T.tocsr()
            self._E = self.E.T.tocsr()
        else:
            self._A, self._E = self.A, self.E

    @property
    def T(self):
        return BlockOperator(self.A, self.E, not self.transposed)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.n,):
            raise IndexError(f"vector of length {x.size} does not match 2n={2 * self.n}")
        x1, x2 = x[: self.n], x[self.n :]
        if self.transposed:
            return np.concatenate([self._A @ x1, self._E @ x1 + self._A @ x2])
        return np.concatenate([self._A @ x1 + self._E @ x2, self._A @ x2])

    def __matmul__(self, x):
        return self.matvec(x)

    def norm1(self):
        if not self.n:
            return 0.0
        # the heaviest block column is [E; A] (or [A^T; E^T] when transposed)
        axis = 1 if self.transposed else 0
        sA = np.asarray(abs(self.A).sum(axis=axis)).ravel()
        sE = np.asarray(abs(self.E).sum(axis=axis)).ravel()
        return float((sA + sE).max())

    def toarray(self):
        Z = sp.csr_matrix(self.A.shape)
        B = sp.bmat([[self.A, self.E], [Z, self.A]])
        return (B.T if self.transposed else B).toarray()


@dataclass
class SensitivityResult:
    derivative: float
    value: float
    diagnostics: Any = None

    def __float__(self):
        return float(self.derivative)


def measure_sensitivity(Q, spec, direction, cfg=None):
    """Derivative of a measure along ``direction = dQ/dp``.

    Parameters
    ----------
    Q : Generator
    spec : MeasureSpec
        Any measure except SteadyStateReward. MTTF_Infinite is delegated to
        :func:`mttf_sensitivity`.
    direction : sparse matrix
        ``n x n`` with zero row sums.
    cfg : KrylovConfig, optional

    Returns
    -------
    SensitivityResult
        Signed directional derivative and the plain measure value.
    """
    cfg = cfg or KrylovConfig()
    E = as_direction(direction, Q.shape[0])
    if spec.kind is Kind.STEADY_STATE_REWARD:
        raise SpecError("sensitivity of the steady-state reward is not supported")
    if spec.kind is Kind.MTTF_INFINITE:
        return mttf_sensitivity(Q, spec, E)
    p = plan(Q, spec)
    A = p.matrix
    if p.reduced:
        E_blk = extract_submatrix(E, p.states, p.states)
    else:
        E_blk = E
    # the failure-rate reward itself depends on Q: d w = E_ud 1 on u
    dw = None
    if spec.kind is Kind.EXPECTED_FAILURES:
        dw = _failure_rates(E, spec.partition)
    n = A.shape[0]
    if not np.any(p.pi0) or (not np.any(p.weights) and (dw is None or not np.any(dw))):
        return SensitivityResult(0.0, 0.0, None)
    block = BlockOperator(A, E_blk).T
    start = np.concatenate([p.pi0, np.zeros(n)])
    res = funm_action(block, start, p.fkind, p.t, cfg)
    top, bottom = res.value[:n], res.value[n:]
    derivative = float(bottom @ p.weights)
    if dw is not None:
        derivative += float(top @ dw)
    return SensitivityResult(derivative, float(top @ p.weights), res)


def mttf_sensitivity(Q, spec, direction):
    """Derivative of ``-pi0_u^T Q_u^{-1} 1`` along ``direction``.

    Uses ``d(Q_u^{-1}) = -Q_u^{-1} E_u Q_u^{-1}``, which gives
    ``pi0_u^T Q_u^{-1} E_u Q_u^{-1} 1``: two solves and one product.
    """
    if spec.kind is not Kind.MTTF_INFINITE:
        raise SpecError("mttf_sensitivity needs an MTTF_Infinite spec")
    E = as_direction(direction, Q.shape[0])
    base = _mttf_infinite(Q, spec)
    up = spec.partition.up
    Qu = extract_submatrix(Q, up, up)
    Eu = extract_submatrix(E, up, up)
    pi_u = spec.pi0[up]
    if Eu.nnz == 0 or not np.any(pi_u):
        return SensitivityResult(0.0, base.value, None)
    x, _ = solve_up_block(Qu, np.ones(up.size))
    y, _ = solve_up_block(Qu, pi_u, transpose=True)
    return SensitivityResult(float(y @ (Eu @ x)), base.value, {"solves": 2})
