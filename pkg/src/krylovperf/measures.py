"""
Performability measures written as bilinear forms ``pi0^T f(Q) r``.

==================  ==================  ====================  ===============
measure             f(z)                reward                matrix
==================  ==================  ====================  ===============
InstReliability     e^{tz}              1_u                   Q
InstAvailability    e^{tz}              1_u                   Q
MTTF_Infinite       -1/z                1                     Q_u
MTTF_Finite         t phi_1(tz)         1                     Q_u
ExpectedFailures    t phi_1(tz)         Q_ud 1 (on u)         Q
Uptime              t phi_1(tz)         1_u                   Q
InstReward          e^{tz}              r                     Q
CumulativeReward    t phi_1(tz)         r                     Q
SteadyStateReward   delta(z)            r                     Q
==================  ==================  ====================  ===============

Krylov evaluation builds the Krylov space on ``Q^T`` from ``pi0`` and dots the
result with the reward, so one run serves any number of rewards.

Expected failures use the square-block form: the rate into the down set,
``w_i = sum_{j in d} Q_ij`` for up states ``i``, is integrated against the
accumulated occupation times. For an absorbing down set this equals
``pi0_u^T [t phi_1(t Q_u)] Q_ud 1``.

Uptime grows without bound as ``t`` increases on irreducible chains.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Optional

import jsonschema
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import uniformization as unif
from .ctmc import (
    Generator,
    StatePartition,
    as_distribution,
    check_up_block_invertible,
    extract_submatrix,
    indicator,
    is_irreducible,
)
from .dense import EXP_T, T_PHI1_T
from .errors import SolveError, SpecError, ValidationError
from .krylov import KrylovConfig, funm_action

__all__ = [
    "Kind",
    "MeasureSpec",
    "MeasureResult",
    "Plan",
    "plan",
    "evaluate",
    "inst_reliability",
    "inst_unreliability",
    "inst_availability",
    "mttf_infinite",
    "mttf_finite",
    "expected_failures",
    "uptime",
    "inst_reward",
    "cumulative_reward",
    "steady_state_reward",
    "steady_state_distribution",
    "measure_spec_from_dict",
    "load_schema",
]

KRYLOV = "krylov"
UNIFORMIZATION = "uniformization"
DIRECT_SOLVE_LIMIT = 100_000


class Kind(str, Enum):
    INST_RELIABILITY = "InstReliability"
    INST_AVAILABILITY = "InstAvailability"
    MTTF_INFINITE = "MTTF_Infinite"
    MTTF_FINITE = "MTTF_Finite"
    EXPECTED_FAILURES = "ExpectedFailures"
    UPTIME = "Uptime"
    INST_REWARD = "InstReward"
    CUMULATIVE_REWARD = "CumulativeReward"
    STEADY_STATE_REWARD = "SteadyStateReward"


NEEDS_PARTITION = {
    Kind.INST_RELIABILITY, Kind.INST_AVAILABILITY, Kind.MTTF_INFINITE,
    Kind.MTTF_FINITE, Kind.EXPECTED_FAILURES, Kind.UPTIME,
}
NEEDS_REWARD = {Kind.INST_REWARD, Kind.CUMULATIVE_REWARD, Kind.STEADY_STATE_REWARD}
NO_HORIZON = {Kind.MTTF_INFINITE, Kind.STEADY_STATE_REWARD}
PROBABILITY = {Kind.INST_RELIABILITY, Kind.INST_AVAILABILITY}
NONNEGATIVE = {Kind.MTTF_INFINITE, Kind.MTTF_FINITE, Kind.EXPECTED_FAILURES, Kind.UPTIME}
INSTANTANEOUS = {Kind.INST_RELIABILITY, Kind.INST_AVAILABILITY, Kind.INST_REWARD}


@dataclass(frozen=True)
class MeasureSpec:
    """What to compute: function kind, vectors and horizon."""

    kind: Kind
    pi0: np.ndarray
    t: Optional[float] = None
    partition: Optional[StatePartition] = None
    reward: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "pi0", as_distribution(self.pi0))
        if self.reward is not None:
            r = np.asarray(self.reward, dtype=float).ravel()
            if not np.all(np.isfinite(r)):
                raise ValidationError("reward has non-finite entries")
            object.__setattr__(self, "reward", r)
        if self.kind in NEEDS_PARTITION and self.partition is None:
            raise SpecError(f"{self.kind.value} needs an up/down partition")
        if self.kind in NEEDS_REWARD and self.reward is None:
            raise SpecError(f"{self.kind.value} needs a reward vector")
        if self.kind not in NO_HORIZON:
            if self.t is None:
                raise SpecError(f"{self.kind.value} needs a time horizon t")
            if not self.t >= 0:
                raise SpecError(f"time horizon must be nonnegative, got {self.t}")
        if self.kind is Kind.MTTF_INFINITE and not self.partition.absorbing_down:
            raise SpecError("MTTF_Infinite needs an absorbing down set")


@dataclass
class MeasureResult:
    value: float
    kind: Kind
    method: str = KRYLOV
    diagnostics: Any = None

    def __float__(self):
        return float(self.value)


@dataclass
class Plan:
    """A measure reduced to ``pi0^T f(A) w`` on a concrete matrix ``A``.

    ``states`` lists the original indices of the rows of ``A`` (all states
    unless the measure works on the up block).
    """

    matrix: Any
    pi0: np.ndarray
    weights: np.ndarray
    fkind: str
    t: float
    states: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    reduced: bool = False


def _check_dims(Q, spec):
    n = Q.shape[0]
    if spec.pi0.size != n:
        raise IndexError(f"pi0 has length {spec.pi0.size}, chain has {n} states")
    if spec.reward is not None and spec.reward.size != n:
        raise IndexError(f"reward has length {spec.reward.size}, chain has {n} states")
    if spec.partition is not None:
        spec.partition.validate(Q)


def _failure_rates(Q, part):
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q)
    w = A @ part.down_indicator()
    w[part.down] = 0.0
    return w


def plan(Q, spec, reduce=True):
    """Translate a matrix-function measure into a :class:`Plan`.

    With ``reduce=True`` the MTTF measures work on the up block ``Q_u``;
    otherwise every plan uses the full generator.
    """
    _check_dims(Q, spec)
    k = spec.kind
    n = Q.shape[0]
    everything = np.arange(n)
    if k is Kind.STEADY_STATE_REWARD or k is Kind.MTTF_INFINITE:
        raise SpecError(f"{k.value} is not a matrix exponential/phi_1 measure")
    t = float(spec.t)
    if k in (Kind.INST_RELIABILITY, Kind.INST_AVAILABILITY):
        return Plan(Q, spec.pi0, spec.partition.up_indicator(), EXP_T, t, everything)
    if k is Kind.INST_REWARD:
        return Plan(Q, spec.pi0, spec.reward, EXP_T, t, everything)
    if k is Kind.CUMULATIVE_REWARD:
        return Plan(Q, spec.pi0, spec.reward, T_PHI1_T, t, everything)
    if k is Kind.UPTIME:
        return Plan(Q, spec.pi0, spec.partition.up_indicator(), T_PHI1_T, t, everything)
    if k is Kind.EXPECTED_FAILURES:
        return Plan(Q, spec.pi0, _failure_rates(Q, spec.partition), T_PHI1_T, t, everything)
    if k is Kind.MTTF_FINITE:
        up = spec.partition.up
        if not reduce or not spec.partition.absorbing_down:
            return Plan(Q, spec.pi0, spec.partition.up_indicator(), T_PHI1_T, t, everything)
        Qu = extract_submatrix(Q, up, up)
        return Plan(Qu, spec.pi0[up], np.ones(up.size), T_PHI1_T, t, up, True)
    raise SpecError(f"unsupported measure kind {k!r}")


def _krylov_value(p, cfg):
    if not np.any(p.pi0) or not np.any(p.weights):
        return 0.0, None
    A = p.matrix.T if isinstance(p.matrix, Generator) else sp.csr_matrix(p.matrix).T.tocsr()
    res = funm_action(A, p.pi0, p.fkind, p.t, cfg)
    return float(res.value @ p.weights), res


def _uniformization_value(p, tol):
    chain = unif.uniformize(p.matrix)
    if p.fkind == EXP_T:
        vec = unif.transient(chain, p.pi0, p.t, tol)
    else:
        vec = unif.cumulative(chain, p.pi0, p.t, tol)
    return float(vec @ p.weights), {"q": chain.q}


def _check_range(kind, value):
    if kind in PROBABILITY:
        lo, hi, slack = 0.0, 1.0, 1e-8
    elif kind in NONNEGATIVE:
        lo, hi, slack = 0.0, np.inf, 1e-10
    else:
        return value
    if lo - slack <= value < lo:
        warnings.warn(f"{kind.value} = {value:.3e} clamped to {lo}", RuntimeWarning, stacklevel=3)
        return lo
    if hi < value <= hi + slack:
        warnings.warn(f"{kind.value} = {value:.17g} clamped to {hi}", RuntimeWarning, stacklevel=3)
        return hi
    if not lo - slack <= value <= hi + slack:
        raise SolveError(f"{kind.value} = {value!r} is outside [{lo}, {hi}]")
    return value


def evaluate(Q, spec, cfg=None, method=KRYLOV, tol=1e-8):
    """Evaluate any measure.

    Parameters
    ----------
    Q : Generator
    spec : MeasureSpec
    cfg : KrylovConfig, optional
        Used by the Krylov method.
    method : {"krylov", "uniformization"}
        Transient solver for matrix-function measures. MTTF_Infinite and
        SteadyStateReward always use a sparse linear solve.
    tol : float
        Truncation tolerance of uniformization.
    """
    kind = spec.kind
    if kind is Kind.MTTF_INFINITE:
        return _mttf_infinite(Q, spec)
    if kind is Kind.STEADY_STATE_REWARD:
        return _steady_state_reward(Q, spec)
    if kind is Kind.INST_AVAILABILITY and not is_irreducible(Q):
        warnings.warn("InstAvailability on a reducible chain coincides with reliability",
                      RuntimeWarning, stacklevel=2)
    if kind is Kind.INST_RELIABILITY and not spec.partition.absorbing_down:
        raise SpecError("InstReliability needs an absorbing down set; use InstAvailability")
    if method == KRYLOV:
        p = plan(Q, spec)
        value, diag = _krylov_value(p, cfg or KrylovConfig())
    elif method == UNIFORMIZATION:
        p = plan(Q, spec, reduce=False)
        value, diag = _uniformization_value(p, tol)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return MeasureResult(_check_range(kind, value), kind, method, diag)


def _with_kind(spec, kind):
    if spec.kind is not kind:
        raise SpecError(f"expected a {kind.value} spec, got {spec.kind.value}")
    return spec


def inst_reliability(Q, spec, cfg=None, method=KRYLOV):
    """``R(t) = pi0^T e^{tQ} 1_u`` on a chain whose down states are absorbing."""
    return evaluate(Q, _with_kind(spec, Kind.INST_RELIABILITY), cfg, method)


def inst_unreliability(Q, spec, cfg=None, method=KRYLOV):
    """``F(t) = 1 - R(t) = pi0^T e^{tQ} 1_d``."""
    res = inst_reliability(Q, spec, cfg, method)
    res.value = 1.0 - res.value
    return res


def inst_availability(Q, spec, cfg=None, method=KRYLOV):
    """``A(t) = pi0^T e^{tQ} 1_u``; warns when the chain is reducible."""
    return evaluate(Q, _with_kind(spec, Kind.INST_AVAILABILITY), cfg, method)


def mttf_finite(Q, spec, cfg=None, method=KRYLOV):
    """Expected time spent in the up set during ``[0, t]``."""
    return evaluate(Q, _with_kind(spec, Kind.MTTF_FINITE), cfg, method)


def expected_failures(Q, spec, cfg=None, method=KRYLOV):
    """Expected number of up -> down transitions in ``[0, t]``."""
    return evaluate(Q, _with_kind(spec, Kind.EXPECTED_FAILURES), cfg, method)


def uptime(Q, spec, cfg=None, method=KRYLOV):
    """``U(t) = int_0^t A(s) ds``."""
    return evaluate(Q, _with_kind(spec, Kind.UPTIME), cfg, method)


def inst_reward(Q, spec, cfg=None, method=KRYLOV):
    """``pi0^T e^{tQ} r``."""
    return evaluate(Q, _with_kind(spec, Kind.INST_REWARD), cfg, method)


def cumulative_reward(Q, spec, cfg=None, method=KRYLOV):
    """``pi0^T [t phi_1(tQ)] r``, the reward accumulated over ``[0, t]``."""
    return evaluate(Q, _with_kind(spec, Kind.CUMULATIVE_REWARD), cfg, method)


def mttf_infinite(Q, spec):
    """``-pi0_u^T Q_u^{-1} 1`` for an absorbing down set."""
    return evaluate(Q, _with_kind(spec, Kind.MTTF_INFINITE))


def steady_state_reward(Q, spec):
    """``pi^T r`` with ``pi`` the stationary distribution; ignores ``pi0``."""
    return evaluate(Q, _with_kind(spec, Kind.STEADY_STATE_REWARD))


def solve_up_block(Q_u, rhs, transpose=False):
    """Solve ``Q_u x = rhs`` (or with ``Q_u^T``), direct up to 1e5 states."""
    A = sp.csr_matrix(Q_u)
    if transpose:
        A = A.T
    A = A.tocsc()
    n = A.shape[0]
    if n <= DIRECT_SOLVE_LIMIT:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                x = spla.spsolve(A, rhs)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SolveError(f"up block is singular: {exc}") from exc
        x = np.atleast_1d(x)
        info = {"solver": "spsolve"}
    else:
        d = A.diagonal()
        if np.any(d == 0):
            raise SolveError("zero diagonal entry in up block")
        M = sp.diags(1.0 / d)
        x, code = spla.bicgstab(A, rhs, M=M, rtol=1e-10, atol=0.0, maxiter=10 * n)
        info = {"solver": "bicgstab"}
        if code != 0:
            # BiCGStab breaks down on acyclic up blocks; restarted GMRES does not
            x, code = spla.gmres(A, rhs, M=M, rtol=1e-10, atol=0.0, restart=min(n, 100),
                                 maxiter=10 * n)
            info = {"solver": "gmres"}
            if code != 0:
                raise SolveError(f"iterative up-block solve failed (code {code})")
    if not np.all(np.isfinite(x)):
        raise SolveError("up block solve produced non-finite values")
    info["residual"] = float(np.linalg.norm(A @ x - rhs))
    return x, info


def _mttf_infinite(Q, spec):
    _check_dims(Q, spec)
    up = spec.partition.up
    Qu = extract_submatrix(Q, up, up)
    report = check_up_block_invertible(Qu)
    pi_u = spec.pi0[up]
    if not np.any(pi_u):
        return MeasureResult(0.0, Kind.MTTF_INFINITE, "solve", {"report": report})
    y, info = solve_up_block(Qu, -pi_u, transpose=True)
    value = float(y.sum())
    info["report"] = report
    if not value > 0:
        raise SolveError(f"MTTF = {value!r} is not positive; Q_u is likely singular "
                         f"({report.reason})")
    return MeasureResult(value, Kind.MTTF_INFINITE, "solve", info)


def steady_state_distribution(Q):
    """Stationary distribution of an irreducible chain.

    Solves ``pi^T Q = 0`` with one balance equation replaced by
    ``pi^T 1 = 1``.
    """
    if not is_irreducible(Q):
        raise SpecError("chain is reducible: the steady state may not exist or be unique")
    A = Q.rows if isinstance(Q, Generator) else sp.csr_matrix(Q)
    n = A.shape[0]
    if n == 1:
        return np.ones(1)
    M = A.T.tolil()
    M[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    pi = spla.spsolve(M.tocsc(), b)
    if not np.all(np.isfinite(pi)):
        raise SolveError("steady-state solve produced non-finite values")
    if pi.min() < -1e-10:
        raise SolveError(f"steady-state solve produced negative probability {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _steady_state_reward(Q, spec):
    _check_dims(Q, spec)
    pi = steady_state_distribution(Q)
    return MeasureResult(float(pi @ spec.reward), Kind.STEADY_STATE_REWARD, "solve",
                         {"pi": pi})


def load_schema():
    """JSON schema for serialized measure specs."""
    text = resources.files("krylovperf").joinpath("data/measure_spec.schema.json").read_text()
    return json.loads(text)


def measure_spec_from_dict(d, Q, defaults=None):
    """Build a :class:`MeasureSpec` from its JSON form.

    Parameters
    ----------
    d : dict
        Validated against :func:`load_schema`.
    Q : Generator
        The chain the measure will be evaluated on (needed to size vectors
        and detect absorbing down sets).
    defaults : CaseStudy, optional
        Supplies ``pi0``, partition and reward when ``d`` omits them.
    """
    try:
        jsonschema.validate(d, load_schema())
    except jsonschema.ValidationError as exc:
        raise SpecError(f"invalid measure spec: {exc.message}") from exc
    n = Q.shape[0]
    if "up_states" in d and "partition" in d:
        raise SpecError("give either up_states or partition, not both")

    if "pi0" in d:
        p = d["pi0"]
        if isinstance(p, dict):
            if p["point"] >= n:
                raise IndexError(f"pi0 point {p['point']} out of range for n={n}")
            pi0 = indicator(n, [p["point"]])
        else:
            pi0 = np.asarray(p, dtype=float)
    elif defaults is not None:
        pi0 = defaults.pi0
    else:
        raise SpecError("pi0 is required")

    partition = None
    if "up_states" in d:
        partition = StatePartition.from_up(Q, d["up_states"])
    elif "partition" in d:
        named = getattr(defaults, "partitions", {}) or {}
        if d["partition"] not in named:
            raise SpecError(f"unknown partition {d['partition']!r}; have {sorted(named)}")
        partition = named[d["partition"]]
    elif defaults is not None:
        partition = defaults.partition

    reward = None
    if "reward" in d:
        r = d["reward"]
        if r == "linear":
            reward = np.arange(n, dtype=float)
        elif isinstance(r, dict):
            reward = indicator(n, r["indicator"])
        else:
            reward = np.asarray(r, dtype=float)
    elif defaults is not None:
        reward = defaults.reward

    return MeasureSpec(Kind(d["kind"]), pi0, d.get("t"), partition, reward)


def spec_to_dict(spec):
    """JSON-ready form of a spec with explicit arrays."""
    out = {"kind": spec.kind.value, "pi0": spec.pi0.tolist()}
    if spec.t is not None:
        out["t"] = spec.t
    if spec.partition is not None:
        out["up_states"] = spec.partition.up.tolist()
    elif spec.reward is not None:
        out["reward"] = spec.reward.tolist()
    return out
