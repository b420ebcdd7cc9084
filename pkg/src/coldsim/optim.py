"""Decentralized optimizers: NIDS and its innovation-compressed variants.

The compressed runs use the node-local bookkeeping (each node only ever
combines its neighbors' transmitted messages through its row of W); the
equivalent matrix recursion is exercised separately in the tests as an
oracle for the bookkeeping.

Trace row ``j`` describes the state after the local initialization step
plus ``j`` communication rounds, so row 0 is the first post-gradient
state and ``bits_cumulative`` counts the communication spent to reach
that row's state.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from coldsim.compress import CompressorSpec, apply_rows, max_norm, row_norms
from coldsim.consensus import ScalingSchedule, degrees_from_weights
from coldsim.errors import (
    ContractMismatchError,
    DivergenceError,
    InvalidParameterError,
)
from coldsim.objective import Objective
from coldsim.topology import MixingMatrix
from coldsim.traces import Trace

ALGORITHM_IDS = {"gossip": 0, "choco": 1, "ccs": 2, "nids": 3, "cold": 4, "dyna_cold": 5}

DIVERGENCE_GUARD = 1e12


@dataclass
class AlgoState:
    """Per-node iterate bundle, stacked as n-by-d matrices."""

    X: np.ndarray
    Psi: np.ndarray
    Y_hat: np.ndarray
    Y_tilde: np.ndarray
    k: int
    bits_sent: np.ndarray


@dataclass(frozen=True)
class ColdConfig:
    """Stepsizes (and, for the dynamically scaled variant, a schedule)."""

    gamma: float
    tau: float = None
    schedule: ScalingSchedule = None

    def __post_init__(self):
        if self.gamma <= 0 or (self.tau is not None and self.tau <= 0):
            raise InvalidParameterError("stepsizes must be positive")


def _gap_and_node_error(obj: Objective, X: np.ndarray):
    xbar = X.mean(axis=0)
    gap = float(np.linalg.norm(obj.global_grad(xbar)))
    node_err = None
    if obj.optimum is not None:
        node_err = float(np.max(np.linalg.norm(X - obj.optimum, axis=1)))
    return gap, node_err


def nids_run(
    m: MixingMatrix, obj: Objective, gamma: float, X0: np.ndarray, iters: int, seed: int = None,
    record_iterates: bool = False,
) -> Trace:
    """Uncompressed gradient tracking via the lazy mixing matrix.

    Nodes exchange full-precision vectors once per round (32 d bits per
    message); the first iterate is the purely local gradient step.
    """
    if gamma > 2.0 / (obj.mu + obj.L):
        warnings.warn(f"gamma={gamma} above 2/(mu+L)={2.0 / (obj.mu + obj.L):.6g}")
    X_prev = np.atleast_2d(np.array(X0, dtype=float))
    grad_prev = obj.grad_matrix(X_prev)
    X = X_prev - gamma * grad_prev
    w_tilde = m.half_lazy
    deg = degrees_from_weights(m)
    n, d = X.shape
    bits_round = 32 * d * deg.astype(float)
    bits = np.zeros(n)
    trace = Trace(algorithm="nids", meta={"n": n, "d": d, "gamma": gamma})
    iterates = [] if record_iterates else None
    for j in range(iters):
        gap, node_err = _gap_and_node_error(obj, X)
        trace.append(
            iter=j,
            optimality_gap=gap,
            max_node_error=node_err,
            bits_cumulative=float(bits.mean()),
            seed=seed,
        )
        if record_iterates:
            iterates.append(X.copy())
        grad = obj.grad_matrix(X)
        Y = 2.0 * X - X_prev - gamma * grad + gamma * grad_prev
        X_prev, grad_prev = X, grad
        X = w_tilde @ Y
        bits = bits + bits_round
        if not np.isfinite(X).all() or np.linalg.norm(X) > DIVERGENCE_GUARD:
            raise DivergenceError(j)
    trace.final_state = AlgoState(X=X, Psi=None, Y_hat=None, Y_tilde=None, k=iters, bits_sent=bits)
    trace.iterates = iterates
    return trace


def _compressed_descent(
    m: MixingMatrix,
    obj: Objective,
    compressor: CompressorSpec,
    cfg: ColdConfig,
    X0: np.ndarray,
    iters: int,
    seed: int,
    scaled: bool,
    force: bool,
    record_iterates: bool,
    lyapunov=None,
    paper_default_schedule: bool = False,
) -> Trace:
    gamma, tau = cfg.gamma, cfg.tau
    if tau is None:
        raise InvalidParameterError("tau is required")
    X0 = np.atleast_2d(np.array(X0, dtype=float))
    n, d = X0.shape
    p = compressor.p if compressor.p is not None else 2.0
    if scaled:
        has_abs = compressor.delta_absolute(d) is not None
        has_rel = compressor.delta_contracted(d) is not None
        if not (has_abs or has_rel):
            if not force:
                raise ContractMismatchError(f"{compressor} carries neither compression contract")
            warnings.warn(f"forced: {compressor} carries neither compression contract")
        check_ball = has_abs and not has_rel  # relative contract holds on all inputs
    else:
        if compressor.delta_contracted(d) is None:
            if not force:
                raise ContractMismatchError(
                    f"{compressor} lacks the relative (contracted) contract required here"
                )
            warnings.warn(f"forced: {compressor} lacks the relative (contracted) contract")
        check_ball = False

    rng = np.random.default_rng(seed)
    grad = obj.grad_matrix(X0)
    X = X0 - gamma * grad
    Psi = np.zeros_like(X)
    Y_hat = np.zeros_like(X)
    Y_tilde = np.zeros_like(X)
    Psi_prev = Psi
    Y_prev = None

    schedule = cfg.schedule
    if scaled and paper_default_schedule:
        schedule = ScalingSchedule(3.0 * max_norm(X, p), 0.99)
    if scaled and schedule is None:
        raise InvalidParameterError("the scaled variant needs a schedule")

    deg = degrees_from_weights(m)
    bits_round = compressor.bit_cost(d) * deg.astype(float)
    bits = np.zeros(n)
    algorithm = "dyna_cold" if scaled else "cold"
    trace = Trace(
        algorithm=algorithm,
        meta={"n": n, "d": d, "gamma": gamma, "tau": tau, "compressor": str(compressor)},
    )
    if scaled:
        trace.meta["c_s"] = schedule.c_s
        trace.meta["beta"] = schedule.beta
    iterates = [] if record_iterates else None
    violations = []
    for j in range(iters):
        grad = obj.grad_matrix(X)
        Y = X - gamma * grad - gamma * Psi
        gap, node_err = _gap_and_node_error(obj, X)
        innov = Y_hat - Y
        lyap = lyapunov.value(X, Psi, Psi_prev, Y_hat, Y_prev) if lyapunov is not None else None
        s = schedule.value(j) if scaled else None
        trace.append(
            iter=j,
            optimality_gap=gap,
            max_node_error=node_err,
            lyapunov=lyap,
            innovation_max=max_norm(innov, p),
            scale_s=s,
            bits_cumulative=float(bits.mean()),
            seed=seed,
        )
        if record_iterates:
            iterates.append(X.copy())
        if scaled:
            scaled_in = (Y - Y_hat) / s
            if check_ball:
                norms = row_norms(scaled_in, p)
                if np.max(norms) > 1.0 + 1e-12:
                    violations.append(j)
                    scaled_in = np.where(norms > 1.0, scaled_in / norms, scaled_in)
            q = apply_rows(compressor, scaled_in, rng)
            Y_hat = Y_hat + s * q
            Y_tilde = Y_tilde + tau * s * (q - m.w @ q)
        else:
            q = apply_rows(compressor, Y - Y_hat, rng)
            Y_hat = Y_hat + q
            Y_tilde = Y_tilde + tau * (q - m.w @ q)
        Psi_prev = Psi
        Psi = Psi + Y_tilde
        X = X - gamma * grad - gamma * Psi
        Y_prev = Y
        bits = bits + bits_round
        if not np.isfinite(X).all() or np.linalg.norm(X) > DIVERGENCE_GUARD:
            raise DivergenceError(j)
    if scaled:
        trace.meta["scaling_violations"] = ",".join(map(str, violations)) if violations else "none"
    trace.final_state = AlgoState(X=X, Psi=Psi, Y_hat=Y_hat, Y_tilde=Y_tilde, k=iters, bits_sent=bits)
    trace.iterates = iterates
    return trace


def cold_run(
    m: MixingMatrix,
    obj: Objective,
    compressor: CompressorSpec,
    cfg: ColdConfig,
    X0: np.ndarray,
    iters: int,
    seed: int = 0,
    force: bool = False,
    record_iterates: bool = False,
    lyapunov=None,
) -> Trace:
    """Innovation-compressed gradient tracking.

    Per round each node compresses the innovation of its fused iterate
    ``y = x - gamma (grad + psi)`` against the running estimate, ships
    only that message, and applies the two-stepsize correction.
    """
    return _compressed_descent(
        m, obj, compressor, cfg, X0, iters, seed,
        scaled=False, force=force, record_iterates=record_iterates, lyapunov=lyapunov,
    )


def dyna_cold_run(
    m: MixingMatrix,
    obj: Objective,
    compressor: CompressorSpec,
    cfg: ColdConfig,
    X0: np.ndarray,
    iters: int,
    seed: int = 0,
    force: bool = False,
    record_iterates: bool = False,
    lyapunov=None,
    paper_default_schedule: bool = False,
) -> Trace:
    """Scaled variant: the innovation is divided by ``s(k)`` before
    compression and the decoded message is scaled back.

    Works with absolute-contract compressors (the scaling keeps their
    input inside the unit ball) and with relative-contract ones (for
    which any positive schedule is legal).  When the scaled input of an
    absolute-contract compressor leaves the unit ball the row is clamped
    back and the iteration index is flagged in ``meta``; the run keeps
    going since a violation is a diagnostic, not a hard fault.

    ``paper_default_schedule=True`` resolves the schedule
    ``s(k) = 3 ||X^1||_max 0.99^k`` from the post-initialization iterate.
    """
    return _compressed_descent(
        m, obj, compressor, cfg, X0, iters, seed,
        scaled=True, force=force, record_iterates=record_iterates, lyapunov=lyapunov,
        paper_default_schedule=paper_default_schedule,
    )


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------


def fixed_point_residual(state: AlgoState, m: MixingMatrix, obj: Objective):
    """Residuals that all vanish exactly at the optimizer's fixed point:
    disagreement, estimate mismatch, and dual-gradient mismatch."""
    r1 = float(np.linalg.norm(state.X - m.w @ state.X))
    r2 = float(np.linalg.norm(state.Y_hat - state.X))
    r3 = float(np.linalg.norm(state.Psi + obj.grad_matrix(state.X)))
    return r1, r2, r3


class LyapunovEvaluator:
    """Weighted-norm energies whose per-step contraction certifies rates.

    ``variant`` selects the weight combination: ``thm2`` (relative
    contract, unbiased), ``thm3`` (relative contract, biased; requires
    ``4 sqrt(delta) / (1 - delta) < 1``) or ``thm5`` (the scaled
    variant's primary energy).  Requires the objective's optimum.
    """

    def __init__(self, m: MixingMatrix, obj: Objective, gamma: float, tau: float,
                 delta: float, variant: str = "thm2"):
        if variant not in ("thm2", "thm3", "thm5"):
            raise InvalidParameterError(f"unknown Lyapunov variant {variant!r}")
        if obj.optimum is None:
            raise InvalidParameterError("Lyapunov evaluation needs the objective's optimum")
        if tau * gamma * (1.0 - m.lambda_n) >= 1.0:
            raise InvalidParameterError("tau * gamma too large: the dual weight loses nonnegativity")
        self.variant = variant
        self.gamma = gamma
        self.tau = tau
        self.delta = delta
        self.X_star = np.tile(obj.optimum, (obj.n, 1))
        self.Psi_star = -obj.grad_matrix(self.X_star)
        self.theta = m.pinv_i_minus_w() / tau - gamma * np.eye(m.n)
        self.i_minus_w = np.eye(m.n) - m.w
        if variant == "thm3":
            if not (0 <= delta < 1) or 4.0 * math.sqrt(delta) / (1.0 - delta) >= 1.0:
                raise InvalidParameterError("bias too large for the biased-rate energy")
            self.delta_prime = 4.0 * math.sqrt(delta) / (1.0 - delta)

    @staticmethod
    def _qf(A: np.ndarray, M: np.ndarray) -> float:
        return float(np.sum(A * (M @ A)))

    def value(self, X, Psi, Psi_prev=None, Y_hat=None, Y_prev=None) -> float:
        g = self.gamma
        Xt = X - self.X_star
        Pt = Psi - self.Psi_star
        base = float(np.sum(Xt * Xt)) / g
        if self.variant == "thm5":
            return base + self._qf(Pt, self.theta + 0.5 * g * np.eye(self.theta.shape[0]))
        if self.variant == "thm2":
            e = base + self._qf(Pt, self.theta + g * np.eye(self.theta.shape[0]))
            if Psi_prev is not None:
                e += self._qf(Psi - Psi_prev, self.theta)
            if Y_hat is not None and Y_prev is not None and self.delta < 1:
                w = 2.0 * (1.0 + self.delta) * self.tau / (1.0 - self.delta)
                e += w * self._qf(Y_hat - Y_prev, self.i_minus_w)
            return e
        # thm3
        dp = self.delta_prime
        e = base + self._qf(Pt, self.theta + (1.0 - math.sqrt(dp) / 2.0) * g * np.eye(self.theta.shape[0]))
        if Psi_prev is not None:
            e += self._qf(Psi - Psi_prev, self.theta)
        if Y_hat is not None and Y_prev is not None and self.delta > 0:
            w = (1.0 + self.delta - 4.0 * math.sqrt(self.delta)) / (2.0 * g * math.sqrt(self.delta * dp))
            e += w * float(np.sum((Y_hat - Y_prev) ** 2))
        return e


def compute_lyapunov(
    curr: AlgoState,
    prev: AlgoState,
    m: MixingMatrix,
    obj: Objective,
    cfg: ColdConfig,
    delta: float,
    variant: str = "thm2",
) -> float:
    """One-off evaluation of the certified energy on a state pair."""
    ev = LyapunovEvaluator(m, obj, cfg.gamma, cfg.tau, delta, variant)
    Y_prev = None
    if prev is not None:
        grad_prev = obj.grad_matrix(prev.X)
        Y_prev = prev.X - cfg.gamma * grad_prev - cfg.gamma * prev.Psi
    return ev.value(
        curr.X,
        curr.Psi,
        prev.Psi if prev is not None else None,
        curr.Y_hat,
        Y_prev,
    )


# ----------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------


def save_state(state: AlgoState, algorithm: str, path) -> None:
    """Flat little-endian binary: int64 header (n, d, k, algorithm id),
    then X, Psi, Y_hat, Y_tilde and the per-node bit ledger as float64."""
    n, d = state.X.shape
    with open(path, "wb") as fp:
        fp.write(struct.pack("<4q", n, d, state.k, ALGORITHM_IDS[algorithm]))
        for arr in (state.X, state.Psi, state.Y_hat, state.Y_tilde):
            fp.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fp.write(np.ascontiguousarray(state.bits_sent, dtype="<f8").tobytes())


def load_state(path):
    """Inverse of :func:`save_state`; returns (state, algorithm)."""
    with open(path, "rb") as fp:
        n, d, k, algo_id = struct.unpack("<4q", fp.read(32))
        mats = [np.frombuffer(fp.read(8 * n * d), dtype="<f8").reshape(n, d).copy() for _ in range(4)]
        bits = np.frombuffer(fp.read(8 * n), dtype="<f8").copy()
    algorithm = {v: k2 for k2, v in ALGORITHM_IDS.items()}[algo_id]
    return AlgoState(X=mats[0], Psi=mats[1], Y_hat=mats[2], Y_tilde=mats[3], k=k, bits_sent=bits), algorithm
