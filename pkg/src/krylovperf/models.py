"""
Parametric CTMCs for three case studies: a finite birth-death queue, a
telecommunication switching system with detection delay, and a node-capture
attack model generated from its stochastic reward net.

Every builder works from a list of transitions that carry their rate and the
analytic partial derivatives of the rate, so the generator and all its
parameter directions come from a single source.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.sparse as sp

from .ctmc import Generator, StatePartition, build_generator, indicator
from .errors import ValidationError

__all__ = [
    "QueueModel",
    "TelecomModel",
    "AttackModel",
    "CaseStudy",
    "build_queue",
    "build_telecom",
    "build_attack",
    "build_model",
    "direction_matrix",
    "direction_from_triplets",
    "attack_state_count",
    "MODELS",
]


@dataclass(frozen=True)
class QueueModel:
    """Queue with ``n`` states (0..n-1 clients); ``rho1`` serves, ``rho2`` arrives."""

    n: int = 1024
    rho1: float = 1.0
    rho2: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("queue needs at least 2 states")
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ValidationError("queue rates must be positive")


@dataclass(frozen=True)
class TelecomModel:
    """Switching system with ``n`` components, coverage ``c`` and rates delta, gamma, tau."""

    n: int = 1024
    c: float = 0.2
    delta: float = 0.5
    gamma: float = 0.95
    tau: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("telecom model needs at least one component")
        if not 0 <= self.c <= 1:
            raise ValidationError("coverage c must lie in [0, 1]")
        if not (self.delta > 0 and self.gamma > 0 and self.tau > 0):
            raise ValidationError("telecom rates must be positive")


@dataclass(frozen=True)
class AttackModel:
    """Node-capture attack model on ``N`` nodes."""

    N: int = 50
    p_a: float = 0.7
    P_fn: float = 0.1
    P_fp: float = 0.1
    T_IDS: float = 15.0
    lambda_c: float = 0.1
    lambda_f: float = 0.2

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("attack model needs at least one node")
        for name in ("p_a", "P_fn", "P_fp"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not self.T_IDS > 0:
            raise ValidationError("T_IDS must be positive")
        if not (self.lambda_c > 0 and self.lambda_f > 0):
            raise ValidationError("attack rates must be positive")


@dataclass
class CaseStudy:
    """Everything needed to evaluate measures on a built model.

    ``partition`` is the model's default up/down split; ``partitions`` holds
    further named splits (for instance ``"failed"`` and ``"absorbing"`` on the
    attack model).
    """

    name: str
    model: object
    generator: Generator
    partition: StatePartition
    reward: np.ndarray
    pi0: np.ndarray
    labels: list
    partitions: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.generator.n


# transitions: (src, dst, rate, {param: d rate / d param})


def _queue_transitions(m):
    out = []
    for i in range(m.n - 1):
        out.append((i, i + 1, m.rho2, {"rho2": 1.0}))
        out.append((i + 1, i, m.rho1, {"rho1": 1.0}))
    return out


def _telecom_index(kind, i):
    # normal_i -> 2i, detected_i -> 2i - 1: keeps Q banded
    return 2 * i if kind == "normal" else 2 * i - 1


def _telecom_transitions(m):
    n, c, d = m.n, m.c, m.delta
    out = []
    for i in range(n + 1):
        s = _telecom_index("normal", i)
        if i < n:
            out.append((s, _telecom_index("detected", i + 1), (n - i) * m.gamma,
                        {"gamma": float(n - i)}))
        if i >= 1:
            out.append((s, _telecom_index("normal", i - 1), m.tau, {"tau": 1.0}))
    for i in range(1, n + 1):
        s = _telecom_index("detected", i)
        out.append((s, _telecom_index("normal", i - 1), c * d, {"c": d, "delta": c}))
        out.append((s, _telecom_index("normal", i), (1 - c) * d,
                    {"c": -d, "delta": 1 - c}))
    return out


def _attack_moves(m, state):
    g, b, e, f = state
    if f:
        return []
    T = m.T_IDS
    moves = []
    if g >= 1:
        moves.append(((g - 1, b + 1, e, 0), g * m.lambda_c, {"lambda_c": float(g)}))
    if b >= 1:
        moves.append(((g, b - 1, e + 1, 0), b * (1 - m.P_fn) / T,
                      {"P_fn": -b / T, "T_IDS": -b * (1 - m.P_fn) / T**2}))
    if g >= 1:
        moves.append(((g - 1, b, e + 1, 0), g * m.P_fp / T,
                      {"P_fp": g / T, "T_IDS": -g * m.P_fp / T**2}))
    if b >= 1:
        moves.append(((0, 0, e, 1), b * m.p_a * m.lambda_f,
                      {"p_a": b * m.lambda_f, "lambda_f": b * m.p_a}))
    return moves


def _attack_graph(m):
    """Breadth-first reachability from (N, 0, 0, 0); neighbour order TGB, TBE, TGE, TBF."""
    start = (m.N, 0, 0, 0)
    index = {start: 0}
    labels = [start]
    queue = deque([start])
    out = []
    while queue:
        s = queue.popleft()
        for nxt, rate, dr in _attack_moves(m, s):
            if nxt not in index:
                index[nxt] = len(labels)
                labels.append(nxt)
                queue.append(nxt)
            out.append((index[s], index[nxt], rate, dr))
    return labels, out


def attack_state_count(N):
    """Closed-form state count: live states (g, b, e) plus failed states (0, 0, e, 1)."""
    return (N + 1) * (N + 2) // 2 + N


def _generator(n, trans):
    return build_generator(n, [(i, j, r) for i, j, r, _ in trans])


def direction_from_triplets(n, triplets):
    """Sparse direction matrix from off-diagonal ``(row, col, value)`` entries.

    The diagonal is the negated row sum, so the result has zero row sums.
    Off-diagonal values may be negative.
    """
    if len(triplets):
        arr = np.asarray(triplets, dtype=float).reshape(-1, 3)
        rows, cols, vals = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    if np.any(rows == cols):
        raise ValidationError("direction diagonal is derived, not supplied")
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off.sum_duplicates()
    E = (off + sp.diags(-np.asarray(off.sum(axis=1)).ravel())).tocsr()
    E.eliminate_zeros()
    E.sort_indices()
    return E


def _direction(n, trans, param):
    return direction_from_triplets(
        n, [(i, j, dr[param]) for i, j, _, dr in trans if param in dr]
    )


def build_queue(model=None):
    """Birth-death queue, reward ``r_i = i`` and an empty queue at time 0.

    Arrivals (rate ``rho2``) fill the superdiagonal, services (rate ``rho1``)
    the subdiagonal.
    """
    m = model or QueueModel()
    trans = _queue_transitions(m)
    Q = _generator(m.n, trans)
    pi0 = np.zeros(m.n)
    pi0[0] = 1.0
    part = StatePartition.from_up(Q, np.arange(m.n))
    return CaseStudy("queue", m, Q, part, np.arange(m.n, dtype=float), pi0,
                     list(range(m.n)))


def build_telecom(model=None):
    """Telecom switching system with ``2n + 1`` states.

    States are ``normal_i`` (i failed components, i = 0..n) and
    ``detected_i`` (i = 1..n), interleaved as normal_0, detected_1,
    normal_1, ... so ``Q`` is banded. Transitions:

    * normal_i -> detected_{i+1} at ``(n - i) gamma`` (a component fails),
    * detected_i -> normal_{i-1} at ``c delta`` (covered repair),
    * detected_i -> normal_i at ``(1 - c) delta`` (switch back, still failed),
    * normal_i -> normal_{i-1} at ``tau`` for ``i >= 1`` (background repair).

    The default partition has the normal states up; the reward is the
    indicator of the detected states.
    """
    m = model or TelecomModel()
    size = 2 * m.n + 1
    trans = _telecom_transitions(m)
    Q = _generator(size, trans)
    labels = [None] * size
    for i in range(m.n + 1):
        labels[_telecom_index("normal", i)] = ("normal", i)
    for i in range(1, m.n + 1):
        labels[_telecom_index("detected", i)] = ("detected", i)
    normal = np.array([_telecom_index("normal", i) for i in range(m.n + 1)])
    detected = np.array([_telecom_index("detected", i) for i in range(1, m.n + 1)])
    part = StatePartition.from_up(Q, normal)
    pi0 = indicator(size, [_telecom_index("normal", 0)])
    return CaseStudy(
        "telecom", m, Q, part, indicator(size, detected), pi0, labels,
        {"normal": part, "detected": StatePartition.from_up(Q, detected)},
    )


def build_attack(model=None):
    """Attack model generated by breadth-first search from ``(N, 0, 0, 0)``.

    States are labelled ``(N_G, N_B, N_E, N_F)``. Failed states
    ``(0, 0, e, 1)`` are absorbing, and so is the all-evicted state
    ``(0, 0, N, 0)``. The reward is the indicator of
    ``N_G >= 2 N_B and N_F = 0``.

    Partitions: ``"absorbing"`` (default; up = states with an outgoing
    transition, which makes time-to-absorption measures finite) and
    ``"failed"`` (down = ``N_F = 1``).
    """
    m = model or AttackModel()
    labels, trans = _attack_graph(m)
    n = len(labels)
    Q = _generator(n, trans)
    has_exit = np.zeros(n, dtype=bool)
    for i, _, _, _ in trans:
        has_exit[i] = True
    absorbing = StatePartition.from_up(Q, np.flatnonzero(has_exit))
    failed = StatePartition.from_up(Q, [i for i, s in enumerate(labels) if s[3] == 0])
    reward = np.array([1.0 if (g >= 2 * b and f == 0) else 0.0 for g, b, e, f in labels])
    pi0 = indicator(n, [0])
    return CaseStudy("attack", m, Q, absorbing, reward, pi0, labels,
                     {"absorbing": absorbing, "failed": failed})


def _sized(transitions, size):
    return lambda m: (size(m), transitions(m))


def _attack_sized(m):
    labels, trans = _attack_graph(m)
    return len(labels), trans


MODELS = {
    "queue": (QueueModel, build_queue, _sized(_queue_transitions, lambda m: m.n)),
    "telecom": (TelecomModel, build_telecom,
                _sized(_telecom_transitions, lambda m: 2 * m.n + 1)),
    "attack": (AttackModel, build_attack, _attack_sized),
}


def _coerce(cls, params):
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for k, v in params.items():
        if k not in types:
            raise ValidationError(f"{cls.__name__} has no parameter {k!r}")
        out[k] = int(v) if types[k] in (int, "int") else float(v)
    return out


def build_model(name, **params):
    """Build a named case study (``queue``, ``telecom`` or ``attack``)."""
    try:
        cls, builder, _ = MODELS[name]
    except KeyError:
        raise ValidationError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    return builder(cls(**_coerce(cls, params)))


def direction_matrix(model, param):
    """Exact derivative of the generator with respect to one rate parameter.

    Parameters
    ----------
    model : QueueModel, TelecomModel or AttackModel
    param : str
        Any numeric rate parameter of the model other than the size.

    Returns
    -------
    scipy.sparse.csr_matrix
        Zero row sums, same state ordering as the built generator.
    """
    for name, (cls, _, transitions) in MODELS.items():
        if isinstance(model, cls):
            break
    else:
        raise ValidationError(f"unsupported model object {model!r}")
    allowed = [f.name for f in fields(cls) if f.type not in (int, "int")]
    if param not in allowed:
        raise ValidationError(
            f"{name} has no differentiable parameter {param!r}; choose from {allowed}"
        )
    n, trans = transitions(model)
    return _direction(n, trans, param)


def with_params(model, **changes):
    """Copy of ``model`` with some parameters replaced."""
    return replace(model, **changes)
