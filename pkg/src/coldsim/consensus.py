"""Average-consensus algorithms: exact, compressed, and dynamically scaled.

All three are synchronous-rounds matrix iterations that preserve the
column mean of the iterate matrix, since every update moves along
``(W - I)`` directions.  Trace row ``k`` describes the state *before*
update ``k``, so row 0 is the initial condition and ``bits_cumulative``
counts the communication spent to reach that state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from coldsim.compress import CompressorSpec, apply_rows, max_norm
from coldsim.errors import ContractMismatchError, InvalidParameterError, ScalingViolationError
from coldsim.topology import MixingMatrix
from coldsim.traces import Trace


@dataclass
class ConsensusState:
    X: np.ndarray
    X_hat: np.ndarray
    k: int
    bits_sent: np.ndarray  # cumulative, per node


@dataclass(frozen=True)
class ScalingSchedule:
    """Geometric scaling ``s(k) = c_s * beta**k``."""

    c_s: float
    beta: float

    def __post_init__(self):
        if self.c_s <= 0 or not (0 < self.beta < 1):
            raise InvalidParameterError("need c_s > 0 and beta in (0, 1)")

    def value(self, k: int) -> float:
        return self.c_s * self.beta**k


def _consensus_errors(X: np.ndarray, xbar: np.ndarray):
    diff = X - xbar
    return float(np.linalg.norm(diff)), float(np.max(np.linalg.norm(diff, axis=1)))


def degrees_from_weights(m: MixingMatrix) -> np.ndarray:
    """Neighbor counts (self excluded) read off the weight sparsity."""
    nz = np.abs(m.w) > 0
    return nz.sum(axis=1) - np.diag(nz).astype(int)


def exact_gossip_run(m: MixingMatrix, X0: np.ndarray, iters: int, seed: int = None) -> Trace:
    """Uncompressed neighbor averaging ``X <- W X``.

    Every node ships its full-precision vector to each neighbor, so the
    per-node cost is ``32 d`` bits per message.
    """
    X = np.atleast_2d(np.array(X0, dtype=float))
    n, d = X.shape
    deg = degrees_from_weights(m)
    xbar = X.mean(axis=0, keepdims=True)
    bits_round = 32 * d * deg.astype(float)
    trace = Trace(algorithm="gossip", meta={"n": n, "d": d})
    bits = np.zeros(n)
    for k in range(iters):
        err, err_max = _consensus_errors(X, xbar)
        trace.append(
            iter=k,
            consensus_error=err,
            max_node_error=err_max,
            bits_cumulative=float(bits.mean()),
            seed=seed,
        )
        X = m.w @ X
        bits = bits + bits_round
    trace.final_state = ConsensusState(X=X, X_hat=None, k=iters, bits_sent=bits)
    return trace


def choco_gossip_run(
    m: MixingMatrix,
    X0: np.ndarray,
    compressor: CompressorSpec,
    gamma: float,
    iters: int,
    seed: int = 0,
    x_hat0: np.ndarray = None,
    force: bool = False,
) -> Trace:
    """Compressed gossip with error feedback.

    The innovation ``X - X_hat`` is compressed; estimates accumulate the
    decoded messages and the iterate mixes the estimates:

        X_hat <- X_hat + Q(X - X_hat)
        X     <- X + gamma (W - I) X_hat
    """
    X = np.atleast_2d(np.array(X0, dtype=float))
    n, d = X.shape
    delta = compressor.delta_contracted(d)
    if delta is None and not force:
        raise ContractMismatchError(
            f"{compressor} lacks the relative (contracted) contract required here"
        )
    lam_n = m.lambda_n
    cap = float("inf") if delta is None else (1.0 - delta) / ((1.0 + delta) * (1.0 - lam_n))
    if not (0 < gamma < cap):
        if not force:
            raise InvalidParameterError(
                f"gamma={gamma} outside (0, {cap:.6g}); pass force=True to override"
            )
        warnings.warn(f"gamma={gamma} outside the certified range (0, {cap:.6g})")
    q_weight = None
    if delta is not None and gamma * (1.0 - lam_n) < 1.0:
        q_weight = (1.0 + gamma * (1.0 - lam_n)) * delta / (1.0 - gamma * (1.0 - lam_n))

    rng = np.random.default_rng(seed)
    X_hat = np.zeros_like(X) if x_hat0 is None else np.array(x_hat0, dtype=float)
    deg = degrees_from_weights(m)
    bits_round = compressor.bit_cost(d) * deg.astype(float)
    xbar = X.mean(axis=0, keepdims=True)
    p = compressor.p if compressor.p is not None else 2.0
    trace = Trace(algorithm="choco", meta={"n": n, "d": d, "gamma": gamma, "compressor": str(compressor)})
    bits = np.zeros(n)
    for k in range(iters):
        err, err_max = _consensus_errors(X, xbar)
        X_hat = X_hat + apply_rows(compressor, X - X_hat, rng)
        innov = X_hat - X  # pairs the pre-update state with its fresh estimate
        lyap = None
        if q_weight is not None:
            lyap = q_weight * err**2 + float(np.sum(innov**2))
        trace.append(
            iter=k,
            consensus_error=err,
            max_node_error=err_max,
            lyapunov=lyap,
            innovation_max=max_norm(innov, p),
            bits_cumulative=float(bits.mean()),
            seed=seed,
        )
        X = X + gamma * (m.w @ X_hat - X_hat)
        bits = bits + bits_round
    trace.final_state = ConsensusState(X=X, X_hat=X_hat, k=iters, bits_sent=bits)
    return trace


def ccs_run(
    m: MixingMatrix,
    X0: np.ndarray,
    compressor: CompressorSpec,
    gamma: float,
    schedule: ScalingSchedule,
    iters: int,
    seed: int = 0,
    x_hat0: np.ndarray = None,
    force: bool = False,
    envelope_beta: float = None,
    envelope_c_s: float = None,
) -> Trace:
    """Compressed consensus with dynamic scaling.

    The innovation is divided by ``s(k)`` before compression so the
    compressor only ever sees the unit ball; the receiver scales the
    message back.  A scaled input outside the unit ball raises
    :class:`ScalingViolationError` carrying the iteration index.

    When ``envelope_beta`` (and optionally ``envelope_c_s``) is given,
    each row is checked against the geometric envelopes anchored at the
    initial state and violations are listed in ``meta``.
    """
    X = np.atleast_2d(np.array(X0, dtype=float))
    n, d = X.shape
    p = compressor.p if compressor.p is not None else 2.0
    if compressor.delta_absolute(d) is None and not force:
        raise ContractMismatchError(
            f"{compressor} lacks the absolute (unit-ball) contract required here"
        )
    rng = np.random.default_rng(seed)
    X_hat = np.zeros_like(X) if x_hat0 is None else np.array(x_hat0, dtype=float)
    deg = degrees_from_weights(m)
    bits_round = compressor.bit_cost(d) * deg.astype(float)
    xbar = X.mean(axis=0, keepdims=True)
    err0 = float(np.linalg.norm(X - xbar))
    c_s = envelope_c_s if envelope_c_s is not None else schedule.c_s
    violations = []
    trace = Trace(
        algorithm="ccs",
        meta={
            "n": n,
            "d": d,
            "gamma": gamma,
            "compressor": str(compressor),
            "c_s": schedule.c_s,
            "beta": schedule.beta,
        },
    )
    bits = np.zeros(n)
    for k in range(iters):
        err, err_max = _consensus_errors(X, xbar)
        innov_max = max_norm(X_hat - X, p)
        if envelope_beta is not None:
            ok = (err <= err0 * envelope_beta**k + 1e-12 * max(1.0, err0)) and (
                innov_max <= c_s * envelope_beta**k + 1e-12 * max(1.0, c_s)
            )
            if not ok:
                violations.append(k)
        s = schedule.value(k)
        trace.append(
            iter=k,
            consensus_error=err,
            max_node_error=err_max,
            innovation_max=innov_max,
            scale_s=s,
            bits_cumulative=float(bits.mean()),
            seed=seed,
        )
        delta_mat = X - X_hat
        if max_norm(delta_mat, p) > s * (1.0 + 1e-12):
            raise ScalingViolationError(k, f"||Delta/s||_max > 1 at iteration {k}: c_s too small")
        X_hat = X_hat + s * apply_rows(compressor, delta_mat / s, rng)
        X = X + gamma * (m.w @ X_hat - X_hat)
        bits = bits + bits_round
    if envelope_beta is not None:
        trace.meta["envelope_violations"] = ",".join(map(str, violations)) if violations else "none"
    trace.final_state = ConsensusState(X=X, X_hat=X_hat, k=iters, bits_sent=bits)
    return trace
