"""Communication graphs, Metropolis mixing matrices and spectral statistics.

A mixing matrix is admissible when it is symmetric, doubly stochastic
with ``null(I - W) = span(1)``, and has all eigenvalues in ``(-1, 1]``.
The Metropolis construction below guarantees all three on any connected
graph; :func:`check_mixing_assumptions` re-validates arbitrary matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coldsim.errors import InvalidParameterError

GRAPH_KINDS = ("erdos_renyi", "ring", "path", "complete")


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes ``0..n-1`` with no self-loops."""

    n: int
    edges: frozenset

    def __post_init__(self):
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n):
                raise InvalidParameterError(f"bad edge ({i}, {j}) for n={self.n}")

    def neighbors(self, i: int) -> list:
        return sorted(
            {j for (a, j) in self.edges if a == i} | {a for (a, j) in self.edges if j == i}
        )

    def degree(self, i: int) -> int:
        return sum(1 for (a, b) in self.edges if a == i or b == i)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for (a, b) in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        adj = {i: [] for i in range(self.n)}
        for (a, b) in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def to_text(self) -> str:
        """Edge-list format: first line ``n=<count>``, then one ``i j`` pair per line."""
        lines = [f"n={self.n}"]
        lines += [f"{i} {j}" for (i, j) in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("n="):
            raise InvalidParameterError("graph text must start with 'n=<count>'")
        n = int(lines[0][2:])
        edges = set()
        for ln in lines[1:]:
            a, b = (int(tok) for tok in ln.split())
            edges.add((min(a, b), max(a, b)))
        return cls(n, frozenset(edges))


def _edge(i: int, j: int) -> tuple:
    return (i, j) if i < j else (j, i)


def build_graph(kind: str, n: int, seed: int = 0) -> Graph:
    """Build a connected graph of the given kind.

    ``erdos_renyi`` samples each edge i.i.d. with probability
    ``2 ln(n) / n`` and resamples the whole graph until it comes out
    connected, so the distribution is the plain model conditioned on
    connectivity.  Deterministic given ``seed``.
    """
    if n < 2:
        raise InvalidParameterError(f"need at least 2 nodes, got {n}")
    if kind == "ring":
        if n == 2:
            return Graph(2, frozenset({(0, 1)}))
        return Graph(n, frozenset(_edge(i, (i + 1) % n) for i in range(n)))
    if kind == "path":
        return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))
    if kind == "complete":
        return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))
    if kind == "erdos_renyi":
        p = 2.0 * math.log(n) / n
        rng = np.random.default_rng(seed)
        while True:
            mask = rng.random((n, n)) < p
            edges = frozenset((i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j])
            g = Graph(n, edges)
            if g.is_connected():
                return g
    raise InvalidParameterError(f"unknown graph kind {kind!r}")


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass drops below ``tol``.
    Returns eigenvalues sorted in descending order and the matching
    eigenvector columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (n * n + 1):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    vals = np.diag(a).copy()
    order = np.argsort(vals)[::-1]
    return vals[order], v[:, order]


@dataclass
class MixingMatrix:
    """Symmetric doubly-stochastic weight matrix with spectral statistics.

    ``eigenvalues`` are sorted descending (so ``eigenvalues[0] == 1`` for
    an admissible matrix); ``rho`` is the spectral gap ``1 - lambda2``.
    Treated as immutable after construction.
    """

    w: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    _pinv_i_minus_w: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, w: np.ndarray) -> "MixingMatrix":
        w = np.array(w, dtype=float)
        vals, vecs = jacobi_eigh(w)
        return cls(w=w, eigenvalues=vals, eigenvectors=vecs)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda_n(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def rho(self) -> float:
        return 1.0 - self.lambda2

    @property
    def half_lazy(self) -> np.ndarray:
        """The lazy variant ``(I + W) / 2`` used by the faster gossip update."""
        return 0.5 * (np.eye(self.n) + self.w)

    def pinv_i_minus_w(self) -> np.ndarray:
        """Pseudoinverse of ``I - W`` from the stored eigendecomposition.

        Directions with ``1 - eigenvalue`` below 1e-10 are zeroed.
        """
        if self._pinv_i_minus_w is None:
            gaps = 1.0 - self.eigenvalues
            inv = 1.0 / np.where(np.abs(gaps) > 1e-10, gaps, np.inf)
            v = self.eigenvectors
            self._pinv_i_minus_w = (v * inv) @ v.T
        return self._pinv_i_minus_w


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis rule: ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges.

    Diagonal entries absorb the remaining mass so each row sums to one.
    """
    if not g.is_connected():
        raise InvalidParameterError("metropolis_weights requires a connected graph")
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for (i, j) in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return MixingMatrix.from_matrix(w)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_mixing_assumptions(m: MixingMatrix, tol: float = 1e-9) -> ValidationReport:
    """Validate symmetry, the consensus property and the spectral property.

    Failures are reported, never raised: the report carries a measured
    residual per check.
    """
    w = m.w
    n = m.n
    sym_res = float(np.max(np.abs(w - w.T)))
    ones = np.ones(n)
    cons_res = float(np.max(np.abs((np.eye(n) - w) @ ones)))
    # null(I - W) = span(1) <=> exactly one unit eigenvalue, i.e. rank(I - W) = n - 1
    near_one = int(np.sum(np.abs(1.0 - m.eigenvalues) <= 1e-10))
    rank = n - near_one
    consensus_ok = cons_res < tol and rank == n - 1
    lam = m.eigenvalues
    spec_res = float(max(lam[0] - 1.0, -1.0 - lam[-1], 0.0))
    spectral_ok = lam[0] <= 1.0 + tol and lam[-1] > -1.0 + 1e-12
    return ValidationReport(
        checks=(
            CheckResult("symmetry", sym_res < tol, sym_res),
            CheckResult("consensus", consensus_ok, cons_res),
            CheckResult("spectral", spectral_ok, spec_res),
        )
    )
