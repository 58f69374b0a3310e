"""
Dense kernels for small matrices: the exponential and the phi_1 function.

These act on the projected Hessenberg matrices produced by the Krylov
engine, and double as brute-force references on small full problems.

The Padé degrees and scaling thresholds are the standard five-stage table
of Higham, "The scaling and squaring method for the matrix exponential
revisited" (SIAM J. Matrix Anal. Appl. 26, 2005), also tabulated in
Higham, "Functions of Matrices" (SIAM, 2008), Table 10.2.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, ValidationError

__all__ = [
    "PADE_DEGREES",
    "PADE_THETA",
    "PADE_COEFFS",
    "pade_parameters",
    "expm",
    "expm_action_series",
    "phi1_action",
    "phi1m",
    "funm_hessenberg",
    "EXP_T",
    "T_PHI1_T",
]

EXP_T = "exp_t"
T_PHI1_T = "t_phi1_t"

PADE_DEGREES = (3, 5, 7, 9, 13)

# max ||A||_1 for which the [d/d] approximant meets unit roundoff in double precision
PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _as_square(A, name="A"):
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be a square 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def pade_parameters(norm1):
    """Return ``(degree, squarings)`` for a matrix with the given 1-norm.

    The smallest degree whose threshold covers ``norm1`` is used unscaled;
    otherwise degree 13 with the smallest ``h`` such that
    ``norm1 / 2**h <= theta_13``.
    """
    for d in PADE_DEGREES[:-1]:
        if norm1 <= PADE_THETA[d]:
            return d, 0
    theta = PADE_THETA[13]
    if norm1 <= theta:
        return 13, 0
    h = max(0, math.ceil(math.log2(norm1 / theta)))
    while norm1 / 2.0**h > theta:
        h += 1
    while h > 0 and norm1 / 2.0 ** (h - 1) <= theta:
        h -= 1
    return 13, h


def _pade(A, d):
    n = A.shape[0]
    b = PADE_COEFFS[d]
    I = np.eye(n)
    A2 = A @ A
    if d == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
        V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) \
            + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    else:
        powers = [I, A2]
        for _ in range(2, (d + 1) // 2):
            powers.append(powers[-1] @ A2)
        U = sum(b[2 * k + 1] * powers[k] for k in range((d + 1) // 2))
        U = A @ U
        V = sum(b[2 * k] * powers[k] for k in range((d + 1) // 2))
    # LAPACK gesv: LU with partial pivoting
    return np.linalg.solve(V - U, V + U)


def expm(A):
    """Matrix exponential by Padé approximation with scaling and squaring.

    Parameters
    ----------
    A : (m, m) array_like
        Finite real matrix.

    Returns
    -------
    ndarray
        ``e^A``.
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return A
    d, h = pade_parameters(float(np.abs(A).sum(axis=0).max()))
    if h:
        A = A / 2.0**h
    F = _pade(A, d)
    for _ in range(h):
        F = F @ F
    return F


def expm_action_series(A, v, tol=1e-14, max_terms=100_000):
    """Truncated Taylor series ``sum_k A^k v / k!``.

    Plain and slow; intended as an independent check for small, modestly
    normed matrices only. Stops once the latest term is at most
    ``tol * ||result||``.
    """
    A = _as_square(A)
    v = np.asarray(v, dtype=float)
    result = v.copy()
    term = v.copy()
    for k in range(1, max_terms + 1):
        term = A @ term / k
        result = result + term
        nr = np.linalg.norm(result)
        if np.linalg.norm(term) <= tol * (nr if nr > 0 else 1.0):
            # one more term guards against a single accidental small term
            term = A @ term / (k + 1)
            return result + term
    raise ConvergenceError(f"Taylor series did not converge within {max_terms} terms")


def phi1_action(A, v):
    """Compute ``phi_1(A) v`` with ``phi_1(z) = (e^z - 1)/z``.

    Uses the augmented matrix ``[[A, v], [0, 0]]``: its exponential has
    ``phi_1(A) v`` as the last column's leading block, so no inverse of
    ``A`` is ever formed.
    """
    A = _as_square(A)
    v = np.asarray(v, dtype=float).ravel()
    m = A.shape[0]
    if v.shape != (m,):
        raise ValidationError(f"v has length {v.size}, expected {m}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("v has non-finite entries")
    aug = np.zeros((m + 1, m + 1))
    aug[:m, :m] = A
    aug[:m, m] = v
    return expm(aug)[:m, m]


def phi1m(A):
    """Full matrix ``phi_1(A)`` from the block exponential of ``[[A, I], [0, 0]]``."""
    A = _as_square(A)
    m = A.shape[0]
    aug = np.zeros((2 * m, 2 * m))
    aug[:m, :m] = A
    aug[:m, m:] = np.eye(m)
    return expm(aug)[:m, m:]


def _check_hessenberg(H):
    scale = max(float(np.abs(H).max()) if H.size else 0.0, 1.0)
    low = np.tril(H, -2)
    if low.size and np.abs(low).max() > 1e-14 * scale:
        raise ValidationError("matrix is not upper Hessenberg")


def funm_hessenberg(H, kind, t):
    """Evaluate ``f(H)`` for ``f(z) = e^{tz}`` or ``f(z) = t phi_1(tz)``.

    Parameters
    ----------
    H : (m, m) array_like
        Upper Hessenberg matrix.
    kind : {"exp_t", "t_phi1_t"}
    t : float
        Time horizon.
    """
    H = _as_square(H, "H")
    _check_hessenberg(H)
    if kind == EXP_T:
        return expm(t * H)
    if kind == T_PHI1_T:
        return t * phi1m(t * H)
    raise ValidationError(f"unknown function kind {kind!r}")
