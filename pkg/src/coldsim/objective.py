"""Local cost oracles with curvature constants and ground-truth optima.

Every objective bundles ``n`` per-node gradient/value oracles together
with constants ``mu <= L`` such that each local cost is ``mu``-strongly
convex and ``L``-smooth, plus the global optimum when it is available in
closed form or cheap to solve for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from coldsim.errors import InvalidParameterError, NoConvergenceError


@dataclass
class Objective:
    """n local cost functions over R^d with shared curvature constants."""

    n: int
    d: int
    mu: float
    L: float
    _grad: callable = field(repr=False)
    _value: callable = field(repr=False)
    optimum: np.ndarray = None

    def __post_init__(self):
        if not (0 < self.mu <= self.L):
            raise InvalidParameterError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self._grad(i, np.asarray(x, dtype=float))

    def local_value(self, i: int, x: np.ndarray) -> float:
        return float(self._value(i, np.asarray(x, dtype=float)))

    def grad_matrix(self, X: np.ndarray) -> np.ndarray:
        """Stacked gradients: row i is the local gradient at row i of X."""
        X = np.asarray(X, dtype=float)
        return np.stack([self._grad(i, X[i]) for i in range(self.n)])

    def global_grad(self, x: np.ndarray) -> np.ndarray:
        return sum(self._grad(i, x) for i in range(self.n))

    def global_value(self, x: np.ndarray) -> float:
        return sum(self.local_value(i, x) for i in range(self.n))


def quadratic_consensus(X0: np.ndarray) -> Objective:
    """Each node pulls toward its own anchor: ``f_i(x) = ||x - x0_i||^2``.

    The optimum is the anchor mean and the curvature is exactly 2 on
    both sides.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n, d = X0.shape

    def grad(i, x):
        return 2.0 * (x - X0[i])

    def value(i, x):
        return float(np.sum((x - X0[i]) ** 2))

    return Objective(n=n, d=d, mu=2.0, L=2.0, _grad=grad, _value=value, optimum=X0.mean(axis=0))


def quadratic_objective(As, bs) -> Objective:
    """Explicit quadratics ``f_i(x) = x'A_i x / 2 - b_i'x`` (A_i SPD)."""
    As = [np.asarray(a, dtype=float) for a in As]
    bs = [np.asarray(b, dtype=float) for b in bs]
    n = len(As)
    d = As[0].shape[0]
    eigs = [np.linalg.eigvalsh(a) for a in As]
    mu = min(float(e[0]) for e in eigs)
    L = max(float(e[-1]) for e in eigs)
    opt = np.linalg.solve(sum(As), sum(bs))

    def grad(i, x):
        return As[i] @ x - bs[i]

    def value(i, x):
        return float(0.5 * x @ As[i] @ x - bs[i] @ x)

    return Objective(n=n, d=d, mu=mu, L=L, _grad=grad, _value=value, optimum=opt)


def synthetic_quadratic(n: int, d: int, mu: float, L: float, seed: int = 0) -> Objective:
    """Seeded random quadratics whose averaged Hessian spans exactly [mu, L].

    All nodes share one eigenbasis; the first two eigenvalues are pinned
    to mu and L on every node so each local cost also satisfies the
    declared constants, and the remaining directions are drawn uniformly
    from [mu, L].
    """
    if not (0 < mu <= L):
        raise InvalidParameterError("need 0 < mu <= L")
    if d < 2 and mu != L:
        raise InvalidParameterError("d >= 2 required to span a nontrivial [mu, L]")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    As, bs = [], []
    for _i in range(n):
        diag = rng.uniform(mu, L, size=d)
        diag[0] = mu
        if d > 1:
            diag[1] = L
        As.append((q * diag) @ q.T)
        bs.append(rng.standard_normal(d))
    return quadratic_objective(As, bs)


def two_class_blobs(m: int, d: int, seed: int = 0, separation: float = 2.0):
    """Synthetic two-cluster dataset: features (m, d) and 0/1 labels."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(m) < 0.5).astype(int)
    center = rng.standard_normal(d)
    center *= separation / max(np.linalg.norm(center), 1e-12)
    feats = rng.standard_normal((m, d)) + np.where(labels[:, None] == 1, center, -center)
    return feats, labels


def load_csv_dataset(path) -> tuple:
    """Rows of ``label,feat_1,...,feat_d``; returns (features, labels)."""
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    return raw[:, 1:], raw[:, 0].astype(int)


def logistic_objective(
    features: np.ndarray,
    labels: np.ndarray,
    n_nodes: int,
    r: float = 0.1,
    partition: str = "label",
    seed: int = 0,
    solve_optimum: bool = True,
    tol: float = 1e-10,
) -> Objective:
    """Ridge-regularized logistic regression split across ``n_nodes``.

    Each local cost is the node's average cross-entropy plus
    ``r/2 ||x||^2``, so mu = r exactly and L = r plus the worst node's
    ``lambda_max(H_i'H_i) / (4 m_i)``.  ``partition='label'`` sorts the
    samples by label before slicing, which makes the local datasets
    heterogeneous; ``'random'`` shuffles instead.
    """
    H = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    m, d = H.shape
    if m < n_nodes:
        raise InvalidParameterError("need at least one sample per node")
    if r <= 0:
        raise InvalidParameterError("ridge weight must be positive")
    if partition == "label":
        order = np.argsort(y, kind="stable")
    elif partition == "random":
        order = np.random.default_rng(seed).permutation(m)
    else:
        raise InvalidParameterError(f"unknown partition {partition!r}")
    chunks = np.array_split(order, n_nodes)
    if any(len(c) == 0 for c in chunks):
        raise InvalidParameterError("empty partition")
    Hs = [H[c] for c in chunks]
    ys = [y[c] for c in chunks]

    L = r + max(float(np.linalg.eigvalsh(Hi.T @ Hi)[-1]) / (4.0 * len(Hi)) for Hi in Hs)

    def sigmoid(z):
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def grad(i, x):
        z = Hs[i] @ x
        return Hs[i].T @ (sigmoid(z) - ys[i]) / len(Hs[i]) + r * x

    def value(i, x):
        z = Hs[i] @ x
        # log(1 + e^z) - y z, computed stably
        ce = np.logaddexp(0.0, z) - ys[i] * z
        return float(np.mean(ce) + 0.5 * r * np.dot(x, x))

    obj = Objective(n=n_nodes, d=d, mu=r, L=L, _grad=grad, _value=value, optimum=None)
    if solve_optimum:
        obj.optimum = centralized_optimum(obj, tol=tol)
    return obj


def centralized_optimum(obj: Objective, tol: float = 1e-10, max_iters: int = 10**6) -> np.ndarray:
    """Gradient descent with stepsize 2/(mu+L) until the global gradient
    norm drops below ``tol``.

    The descent is on the sum of the n local costs, whose curvature
    constants are n times the per-node ones, so the stepsize is
    ``2 / (n (mu + L))``.
    """
    step = 2.0 / (obj.n * (obj.mu + obj.L))
    x = np.zeros(obj.d)
    for _ in range(max_iters):
        g = obj.global_grad(x)
        if np.linalg.norm(g) <= tol:
            return x
        x = x - step * g
    raise NoConvergenceError(f"centralized solver did not reach tol={tol} in {max_iters} iterations")
