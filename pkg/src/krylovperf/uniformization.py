"""
Uniformization: transient and cumulative state probabilities from
Poisson-weighted powers of the stochastic matrix ``P = I + Q/q``.

Used as an independent reference for the Krylov results. Clarity is
preferred over speed here; there is no steady-state detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ctmc import Generator
from .errors import ResourceError, ValidationError

__all__ = ["UniformizedChain", "uniformize", "poisson_weights", "transient", "cumulative"]

MAX_TERMS = 10_000_000
_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class UniformizedChain:
    q: float
    P: sp.csr_matrix
    PT: sp.csr_matrix

    @property
    def n(self):
        return self.P.shape[0]


def uniformize(Q, safety=1.02):
    """Return the uniformized chain with ``q = safety * max_i |Q_ii|``.

    A zero generator gives ``q = 1`` and ``P = I``.
    """
    if not safety > 1:
        raise ValidationError("safety factor must exceed 1")
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q, dtype=float)
    n = A.shape[0]
    dmax = float(np.abs(A.diagonal()).max()) if n else 0.0
    q = safety * dmax if dmax > 0 else 1.0
    P = (sp.identity(n, format="csr") + A / q).tocsr()
    P.sort_indices()
    return UniformizedChain(q, P, P.T.tocsr())


def poisson_weights(lam):
    """Poisson(lam) probabilities on a window around the mode.

    Returns ``(left, w)`` where ``w[k]`` is the probability of ``left + k``.
    Weights are grown from the mode by the ratio recurrences
    ``w_{k+1} = w_k lam/(k+1)`` and ``w_{k-1} = w_k k/lam`` (accumulated
    in log space), renormalised over the window, and entries below 1e-300
    are set to zero.
    """
    if lam < 0:
        raise ValidationError("Poisson mean must be nonnegative")
    if lam == 0:
        return 0, np.ones(1)
    mode = int(np.floor(lam))
    # the pmf decays faster than exp(-x^2 / (2 lam + 2x/3)) away from the mode
    width = int(np.ceil(40.0 * np.sqrt(lam) + 40.0)) + 10
    if mode + width > MAX_TERMS:
        raise ResourceError(
            f"q*t = {lam:.3g} needs more than {MAX_TERMS} uniformization terms; "
            "split the horizon into shorter time steps"
        )
    left = max(0, mode - width)
    right = mode + width
    up = np.arange(mode + 1, right + 1, dtype=float)
    down = np.arange(mode, left, -1, dtype=float)
    log_up = np.cumsum(np.log(lam / up))
    log_down = np.cumsum(np.log(down / lam))
    logw = np.concatenate([log_down[::-1], [0.0], log_up])
    w = np.exp(logw - logw.max())
    w[w < _UNDERFLOW] = 0.0
    w /= w.sum()
    nz = np.flatnonzero(w)
    lo, hi = nz[0], nz[-1]
    return left + lo, w[lo : hi + 1]


def _check(chain, pi0, t):
    pi0 = np.asarray(pi0, dtype=float).ravel()
    if pi0.shape != (chain.n,):
        raise IndexError(f"pi0 of length {pi0.size} does not match n={chain.n}")
    if not t >= 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    return pi0


def transient(chain, pi0, t, tol=1e-8):
    """State distribution ``pi(t)`` at time ``t``.

    Terms outside ``[left, right]`` are dropped, with at most ``tol / 2`` of
    the Poisson mass discarded on each side.
    """
    pi0 = _check(chain, pi0, t)
    if t == 0:
        return pi0.copy()
    first, w = poisson_weights(chain.q * t)
    cdf = np.cumsum(w)
    tail = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    lo = int(np.searchsorted(cdf, tol / 2, side="right"))
    hi = int(np.flatnonzero(tail <= tol / 2)[0])
    lo = min(lo, hi)
    x = pi0.copy()
    for _ in range(first + lo):
        x = chain.PT @ x
    out = w[lo] * x
    for k in range(lo + 1, hi + 1):
        x = chain.PT @ x
        out += w[k] * x
    return out


def cumulative(chain, pi0, t, tol=1e-8):
    """Accumulated occupation times ``int_0^t pi(s) ds``.

    Term ``k`` has weight ``(1 - F(k)) / q`` with ``F`` the Poisson CDF.
    The series is cut at the first ``K`` with
    ``sum_{k > K} (1 - F(k)) / q <= tol``; since the weights sum to ``t``
    this bounds the discarded total time by ``tol``.
    """
    pi0 = _check(chain, pi0, t)
    if t == 0:
        return np.zeros_like(pi0)
    q = chain.q
    first, w = poisson_weights(q * t)
    # survival 1 - F(k) for k = first .. first + len(w) - 1; 1 below the window
    surv = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    # remaining time after index k: sum_{j > k} surv_j / q
    remaining = np.concatenate([np.cumsum(surv[::-1])[::-1][1:], [0.0]]) / q
    hi = int(np.flatnonzero(remaining <= tol)[0])
    x = pi0.copy()
    out = np.zeros_like(pi0)
    for _ in range(first):
        out += x
        x = chain.PT @ x
    out /= q
    for k in range(hi + 1):
        out += (surv[k] / q) * x
        x = chain.PT @ x
    return out
