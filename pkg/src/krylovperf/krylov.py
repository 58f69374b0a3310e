"""
Restarted Arnoldi approximation of ``f(A) v`` for ``f(z) = e^{tz}`` and
``f(z) = t phi_1(tz)``.

Each cycle runs ``m`` Arnoldi steps from the last basis vector of the
previous cycle. The Hessenberg matrices of all cycles are stacked into one
block lower-bidiagonal (hence still upper Hessenberg) matrix ``H_acc``,
coupled through the ``h_{m+1,m}`` entry of the preceding cycle, so that

    A [W_1 ... W_k] = [W_1 ... W_k] H_acc + h w e_{km}^T.

The correction contributed by cycle ``k`` is ``W_k`` times the trailing
block of ``beta f(H_acc) e_1``; the leading blocks do not change from one
cycle to the next because ``H_acc`` is block lower triangular.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, onenormest

from .dense import EXP_T, T_PHI1_T, expm
from .errors import ConvergenceError, ValidationError

__all__ = [
    "KrylovConfig",
    "ArnoldiDecomposition",
    "KrylovResult",
    "arnoldi",
    "funm_action",
    "bilinear_form",
]


@dataclass(frozen=True)
class KrylovConfig:
    """Restart length, cycle budget and tolerances for :func:`funm_action`.

    ``max_restarts`` bounds the total number of Arnoldi cycles, so the
    accumulated Hessenberg matrix never exceeds ``m * max_restarts``. The
    update-norm test is applied from the second cycle on, so unless the
    first cycle ends in a lucky breakdown at least two cycles are needed.
    """

    m: int = 15
    max_restarts: int = 10
    tol: float = 1e-8
    breakdown_tol: float = 1e-12

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError("restart length m must be at least 2")
        if self.max_restarts < 1:
            raise ValidationError("max_restarts must be at least 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")


@dataclass
class ArnoldiDecomposition:
    """Output of :func:`arnoldi`.

    ``basis`` holds the orthonormal vectors as rows (``j x n``); ``V`` is the
    usual column view. ``exact`` flags a lucky breakdown, in which case the
    Krylov space is invariant and ``h_next`` is zero.
    """

    basis: np.ndarray
    H: np.ndarray
    h_next: float
    v_next: Optional[np.ndarray]
    exact: bool

    @property
    def V(self):
        return self.basis.T

    @property
    def m(self):
        return self.H.shape[0]

    def relation_residual(self, A):
        """Frobenius norm of ``A V - V H - h_next v_next e_m^T``."""
        matvec, _, _ = _operator(A)
        R = np.column_stack([matvec(v) for v in self.basis]) - self.V @ self.H
        if self.v_next is not None:
            R[:, -1] -= self.h_next * self.v_next
        return float(np.linalg.norm(R))

    def orthonormality_error(self):
        """Frobenius norm of ``V^T V - I``."""
        G = self.basis @ self.basis.T
        return float(np.linalg.norm(G - np.eye(G.shape[0])))


@dataclass
class KrylovResult:
    """Approximation of ``f(A) v`` with per-cycle diagnostics.

    Attributes
    ----------
    value : ndarray
        The approximation.
    restarts_used : int
        Number of Arnoldi cycles run.
    update_norms : list of float
        2-norm of the correction added by each cycle.
    converged : bool
        True on lucky breakdown or when the last update met ``threshold``.
    threshold : float
        Stopping threshold in force at the last cycle.
    norm_estimate : float
        ``||A||_1``; a cheap bound on the spectral radius of ``A``.
    """

    value: np.ndarray
    restarts_used: int
    update_norms: list = field(default_factory=list)
    converged: bool = False
    threshold: float = float("nan")
    norm_estimate: float = float("nan")
    breakdown: bool = False


def _operator(A):
    """Return ``(matvec, n, norm1)`` for the supported operator types."""
    if hasattr(A, "matvec") and hasattr(A, "norm1"):
        return A.matvec, A.shape[0], float(A.norm1())
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        n1 = float(abs(A).sum(axis=0).max()) if A.nnz else 0.0
        return A.dot, A.shape[0], n1
    if isinstance(A, LinearOperator):
        n1 = float(onenormest(A)) if A.shape[0] > 0 else 0.0
        return A.matvec, A.shape[0], n1
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"operator must be square, got shape {A.shape}")
    return A.dot, A.shape[0], float(np.abs(A).sum(axis=0).max()) if A.size else 0.0


def _arnoldi(matvec, n, v, m, breakdown_tol, norm1):
    basis = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))
    basis[0] = v
    limit = breakdown_tol * norm1
    for j in range(m):
        w = matvec(basis[j])
        # modified Gram-Schmidt, then one full reorthogonalization pass
        for _ in range(2):
            for i in range(j + 1):
                c = basis[i] @ w
                H[i, j] += c
                w -= c * basis[i]
        h = float(np.linalg.norm(w))
        H[j + 1, j] = h
        if h <= limit:
            return ArnoldiDecomposition(basis[: j + 1], H[: j + 1, : j + 1], 0.0, None, True)
        basis[j + 1] = w / h
    return ArnoldiDecomposition(basis[:m], H[:m, :m], float(H[m, m - 1]), basis[m], False)


def arnoldi(A, v, m, breakdown_tol=1e-12):
    """Run ``m`` steps of the Arnoldi process from the unit vector ``v``.

    Parameters
    ----------
    A : operator
        A :class:`~krylovperf.ctmc.Generator`, its ``.T`` view, a
        ``BlockOperator``, a scipy sparse matrix, a ``LinearOperator`` or a
        dense array.
    v : ndarray
        Start vector; must have unit 2-norm.
    m : int
        Maximum Krylov dimension.
    breakdown_tol : float
        The process stops early (exactly) when ``h_{j+1,j}`` falls below
        ``breakdown_tol * ||A||_1``.
    """
    matvec, n, norm1 = _operator(A)
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (n,):
        raise IndexError(f"start vector of length {v.size} does not match n={n}")
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValidationError("start vector is zero")
    if abs(nv - 1.0) > 1e-12:
        raise ValidationError(f"start vector must have unit norm, got {nv:.17g}")
    return _arnoldi(matvec, n, v, int(m), breakdown_tol, norm1)


def _fe1(H, kind, t):
    """First column of ``f(H)``."""
    s = H.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        if kind == EXP_T:
            return expm(t * H)[:, 0]
        # t phi_1(tH) e_1 from the augmented exponential
        aug = np.zeros((s + 1, s + 1))
        aug[:s, :s] = t * H
        aug[0, s] = 1.0
        return t * expm(aug)[:s, s]


def funm_action(A, v, kind=EXP_T, t=1.0, cfg=None, callback: Optional[Callable] = None):
    """Approximate ``f(A) v`` by restarted Arnoldi.

    Parameters
    ----------
    A : operator
        See :func:`arnoldi`.
    v : ndarray
        Nonzero vector.
    kind : {"exp_t", "t_phi1_t"}
        ``f(z) = e^{tz}`` or ``f(z) = t phi_1(tz) = (e^{tz} - 1)/z``.
    t : float
        Nonnegative time horizon.
    cfg : KrylovConfig, optional
    callback : callable, optional
        Called as ``callback(cycle, decomposition)`` after each Arnoldi cycle.

    Returns
    -------
    KrylovResult

    Raises
    ------
    ConvergenceError
        If the cycle budget runs out; the partial result is attached.
    """
    cfg = cfg or KrylovConfig()
    if kind not in (EXP_T, T_PHI1_T):
        raise ValidationError(f"unknown function kind {kind!r}")
    if not t >= 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    matvec, n, norm1 = _operator(A)
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (n,):
        raise IndexError(f"vector of length {v.size} does not match n={n}")
    beta = float(np.linalg.norm(v))
    if beta == 0:
        raise ValidationError("cannot approximate f(A) v for v = 0")

    value = np.zeros(n)
    H_acc = np.zeros((0, 0))
    h_prev = 0.0
    start = v / beta
    norms = []
    threshold = float("nan")
    converged = False
    breakdown = False
    for cycle in range(1, cfg.max_restarts + 1):
        dec = _arnoldi(matvec, n, start, cfg.m, cfg.breakdown_tol, norm1)
        if callback is not None:
            callback(cycle, dec)
        s0 = H_acc.shape[0]
        j = dec.m
        grown = np.zeros((s0 + j, s0 + j))
        grown[:s0, :s0] = H_acc
        grown[s0:, s0:] = dec.H
        if s0:
            grown[s0, s0 - 1] = h_prev
        H_acc = grown
        coeff = beta * _fe1(H_acc, kind, t)[s0:]
        if not np.all(np.isfinite(coeff)):
            # restart Ritz values far in the right half-plane; more cycles cannot recover
            norms.append(float("inf"))
            result = KrylovResult(value, len(norms), norms, False, threshold, norm1)
            raise ConvergenceError(
                f"f(H) overflowed in cycle {cycle} (t*||A||_1 = {t * norm1:.3g}); "
                f"increase the restart length beyond {cfg.m}",
                norms, result,
            )
        value += coeff @ dec.basis
        norms.append(float(np.linalg.norm(coeff)))
        acc = float(np.linalg.norm(value))
        if acc == 0.0 and not dec.exact and t * norm1 > 1.0:
            # f(A) v cannot vanish for t > 0: the projection underflowed
            result = KrylovResult(value, len(norms), norms, False, threshold, norm1)
            raise ConvergenceError(
                f"f(H) underflowed to zero in cycle {cycle} (t*||A||_1 = {t * norm1:.3g}); "
                f"increase the restart length beyond {cfg.m}",
                norms, result,
            )
        threshold = cfg.tol * (acc if acc >= 1.0 else beta)
        if len(norms) >= 3 and norms[-1] > norms[-2] > norms[-3]:
            warnings.warn(
                f"Krylov update norms grew for two consecutive cycles: {norms[-3:]}",
                RuntimeWarning, stacklevel=2,
            )
        if dec.exact:
            converged = breakdown = True
            break
        # the first cycle yields the initial iterate, not a correction
        if cycle > 1 and norms[-1] <= threshold:
            converged = True
            break
        h_prev = dec.h_next
        start = dec.v_next

    result = KrylovResult(value, len(norms), norms, converged, threshold, norm1, breakdown)
    if not converged:
        raise ConvergenceError(
            f"no convergence after {len(norms)} cycles of length {cfg.m}: "
            f"last update {norms[-1]:.3e} > {threshold:.3e}",
            norms, result,
        )
    return result


def bilinear_form(w, A, v, kind=EXP_T, t=1.0, cfg=None):
    """Return the scalar ``w^T f(A) v``."""
    w = np.asarray(w, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    _, n, _ = _operator(A)
    if w.shape != (n,) or v.shape != (n,):
        raise IndexError("vector dimensions do not match the operator")
    if not np.any(w) or not np.any(v):
        return 0.0
    return float(w @ funm_action(A, v, kind, t, cfg).value)
