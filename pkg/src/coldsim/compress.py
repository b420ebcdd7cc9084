"""Quantizers and sparsifiers with exact bit accounting.

Two contract classes are supported and validated statistically:

- *relative* (contracted): ``E||Q(x) - x||^2 <= delta * ||x||^2`` for all
  ``x``, with ``delta in [0, 1)``;
- *absolute*: ``||Q(x) - x||_p <= delta`` whenever ``||x||_p <= 1``
  (nothing is promised outside the unit ball).

Every built-in spec declares closed-form constants for the contracts it
carries; :func:`estimate_delta_contraction` and
:func:`estimate_delta_absolute` cross-check them by Monte Carlo search
over adversarial direction families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coldsim.errors import ContractMismatchError, InvalidInputError, InvalidParameterError

KINDS = (
    "nearest_rounding",
    "binary",
    "unbiased_stochastic",
    "biased_stochastic",
    "topk",
    "randomk",
    "identity",
)


@dataclass(frozen=True)
class CompressedMessage:
    """Decoded payload of one per-node message plus its exact encoded size."""

    payload: np.ndarray
    bits: int


@dataclass(frozen=True)
class CompressorSpec:
    """Immutable description of a compressor.

    ``u`` is the resolution of the stochastic quantizers, ``p`` the norm
    order they normalize with, ``phi`` the shrink factor of the biased
    variant (``None`` picks the standard choice for the norm order),
    ``xi`` a deterministic dither value (``None`` draws uniform dither),
    ``levels`` the grid of a rounding quantizer and ``l`` the number of
    coordinates a sparsifier keeps.  ``scalar_bits`` is the cost of one
    full-precision scalar.
    """

    kind: str
    u: float = None
    p: float = 2.0
    phi: float = None
    xi: float = None
    levels: tuple = None
    l: int = None
    scalar_bits: int = 32
    origin: str = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown compressor kind {self.kind!r}")
        if self.kind in ("unbiased_stochastic", "biased_stochastic"):
            if self.u is None or self.u < 1:
                raise InvalidParameterError("stochastic quantizers need resolution u >= 1")
        if self.kind == "nearest_rounding":
            if not self.levels:
                raise InvalidParameterError("nearest_rounding needs a nonempty level set")
            object.__setattr__(self, "levels", tuple(sorted(float(q) for q in self.levels)))
        if self.kind in ("topk", "randomk") and (self.l is None or self.l < 1):
            raise InvalidParameterError("sparsifiers need l >= 1 kept coordinates")

    # ------------------------------------------------------------------
    # contracts
    # ------------------------------------------------------------------

    def resolved_phi(self, d: int) -> float:
        """Shrink factor, defaulting per norm order when unset."""
        if self.phi is not None:
            return self.phi
        if self.p == 2:
            return 1.0 + d / (4.0 * self.u**2)
        return 1.0 + d ** (1.0 / self.p) / self.u

    def delta_contracted(self, d: int):
        """Closed-form relative-contract constant, or None if not carried.

        The sup-norm stochastic quantizer uses the exact supremum of the
        mean-square relative error, ``(sqrt(1 + (d-1)/u^2) - 1) / 2``;
        the 2-norm variant uses the standard ``d / (4 u^2)`` bound.
        """
        if self.kind == "identity":
            return 0.0
        if self.kind in ("topk", "randomk"):
            return 1.0 - min(self.l, d) / d
        if self.kind == "unbiased_stochastic":
            if self.p == 2:
                return d / (4.0 * self.u**2)
            if math.isinf(self.p):
                return 0.5 * (math.sqrt(1.0 + (d - 1) / self.u**2) - 1.0)
            return None
        if self.kind == "biased_stochastic":
            phi = self.resolved_phi(d)
            if self.p == 2 and self.xi is None:
                # shrink by phi = 1 + omega turns the unbiased mean-square
                # bound omega into the contraction 1 - 1/phi
                omega = d / (4.0 * self.u**2)
                return (omega / (1.0 + omega)) if self.phi is None else None
            if math.isinf(self.p) and self.xi == 0.5:
                # exact supremum for round-to-nearest followed by 1/phi shrink
                s = (d - 1) / (4.0 * self.u**2)
                return ((1.0 - 1.0 / phi) ** 2 + s) / (1.0 + s)
            return None
        return None

    def delta_absolute(self, d: int):
        """Closed-form absolute-contract constant for this spec's norm order."""
        if self.kind == "identity":
            return 0.0
        if self.kind == "binary":
            return 0.5  # sup-norm error of the half-unit sign quantizer
        if self.kind == "nearest_rounding":
            if not math.isinf(self.p):
                return None
            return _grid_cover_radius(np.array(self.levels))
        if self.kind in ("topk", "randomk"):
            if math.isinf(self.p):
                return None  # (1 - l/d)^(1/p) degenerates to 1
            return (1.0 - min(self.l, d) / d) ** (1.0 / self.p)
        if self.kind == "unbiased_stochastic":
            return d ** (1.0 / self.p) / self.u
        if self.kind == "biased_stochastic":
            phi = self.resolved_phi(d)
            if not math.isinf(self.p):
                return None
            if self.xi == 1.0 and self.phi is None:
                return 1.0 / (self.u + 1.0)
            if self.xi == 0.5:
                u = int(round(self.u))
                edges = [(0.5 + r * (1.0 - 1.0 / phi)) / u for r in range(0, u)]
                return max(edges + [abs(1.0 - 1.0 / phi)])
            return None
        return None

    def has_contract(self, contract: str, d: int) -> bool:
        if contract == "delta_contracted":
            delta = self.delta_contracted(d)
        elif contract == "bounded_absolute":
            delta = self.delta_absolute(d)
        else:
            raise InvalidParameterError(f"unknown contract {contract!r}")
        return delta is not None

    # ------------------------------------------------------------------
    # bit accounting (payload only, no headers)
    # ------------------------------------------------------------------

    def bit_cost(self, d: int) -> int:
        """Exact encoded size in bits of one compressed d-vector."""
        if d < 1:
            raise InvalidParameterError("dimension must be >= 1")
        b = self.scalar_bits
        if self.kind == "identity":
            return b * d
        if self.kind == "binary":
            return d
        if self.kind == "nearest_rounding":
            return math.ceil(math.log2(len(self.levels))) * d
        if self.kind in ("unbiased_stochastic", "biased_stochastic"):
            # u = 2^(l-1) encodes each coordinate with l+1 bits, plus one
            # full-precision scalar for the norm
            l = math.ceil(math.log2(self.u)) + 1 if self.u > 1 else 1
            return (l + 1) * d + b
        if self.kind in ("topk", "randomk"):
            return min(self.l, d) * (b + math.ceil(math.log2(d)))
        raise InvalidParameterError(self.kind)

    # ------------------------------------------------------------------
    # string form
    # ------------------------------------------------------------------

    def __str__(self) -> str:
        if self.origin is not None:
            return self.origin
        p_str = "inf" if math.isinf(self.p) else f"{self.p:g}"
        if self.kind == "identity":
            return "identity"
        if self.kind == "binary":
            return "binary"
        if self.kind == "unbiased_stochastic":
            return f"unbiased:u={self.u:g},p={p_str}"
        if self.kind == "biased_stochastic":
            extra = ""
            if self.phi is not None:
                extra += f",phi={self.phi:g}"
            if self.xi is not None:
                extra += f",xi={self.xi:g}"
            return f"biased:u={self.u:g},p={p_str}{extra}"
        if self.kind == "topk":
            return f"topk:l={self.l}"
        if self.kind == "randomk":
            return f"randk:l={self.l}"
        return f"round:levels={';'.join(f'{q:g}' for q in self.levels)}"


def _grid_cover_radius(levels: np.ndarray) -> float:
    """Largest distance from a point of [-1, 1] to the level set."""
    pts = [-1.0, 1.0]
    inside = levels[(levels > -1.0) & (levels < 1.0)]
    ext = np.unique(np.concatenate([inside, np.array([-1.0, 1.0])]))
    pts.extend(0.5 * (ext[1:] + ext[:-1]))
    return max(float(np.min(np.abs(levels - x))) for x in pts)


# ----------------------------------------------------------------------
# built-ins and parsing
# ----------------------------------------------------------------------

_INF = float("inf")


def builtin(name: str) -> CompressorSpec:
    """The four benchmark compressors by their usual short names."""
    name = name.upper()
    if name == "C1":
        return CompressorSpec("unbiased_stochastic", u=2.0, p=_INF)
    if name == "C2":
        return CompressorSpec("biased_stochastic", u=2.0, p=_INF, phi=1.5, xi=0.5)
    if name == "C3":
        levels = [2.0**i for i in range(-3, 4)]
        return CompressorSpec("nearest_rounding", levels=tuple(sorted([-q for q in levels] + levels)), p=_INF)
    if name == "C4":
        return CompressorSpec("binary", p=_INF)
    raise InvalidParameterError(f"unknown builtin compressor {name!r}")


def parse_compressor(text: str) -> CompressorSpec:
    """Parse specs like ``binary``, ``unbiased:u=2,p=inf``, ``topk:l=10``.

    ``C1``..``C4`` resolve to the benchmark aliases; ``round:grid=a:h:b``
    builds a uniform grid from ``a`` to ``b`` with spacing ``h``;
    ``log:min=-3,max=3`` builds the signed powers-of-two grid.
    """
    text = text.strip()
    if text.upper() in ("C1", "C2", "C3", "C4"):
        return builtin(text)
    spec = _parse_body(text)
    object.__setattr__(spec, "origin", text)
    return spec


def _parse_body(text: str) -> CompressorSpec:
    head, _, rest = text.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not _ or not k:
                raise InvalidParameterError(f"bad compressor parameter {item!r} in {text!r}")
            kv[k.strip()] = v.strip()

    def fnum(s):
        return _INF if s in ("inf", "Inf", "INF") else float(s)

    if head == "binary":
        return CompressorSpec("binary", p=_INF)
    if head == "identity":
        return CompressorSpec("identity")
    if head == "unbiased":
        return CompressorSpec("unbiased_stochastic", u=float(kv.pop("u")), p=fnum(kv.pop("p", "2")))
    if head == "biased":
        p = fnum(kv.pop("p", "2"))
        return CompressorSpec(
            "biased_stochastic",
            u=float(kv.pop("u")),
            p=p,
            phi=float(kv["phi"]) if "phi" in kv else None,
            xi=float(kv["xi"]) if "xi" in kv else (0.5 if math.isinf(p) else None),
        )
    if head == "round":
        if "levels" in kv:
            levels = tuple(float(t) for t in kv.pop("levels").split(";"))
            return CompressorSpec("nearest_rounding", levels=levels, p=_INF)
        grid = kv.pop("grid")
        a, h, b = (float(t) for t in grid.split(":"))
        count = int(round((b - a) / h)) + 1
        return CompressorSpec("nearest_rounding", levels=tuple(a + h * i for i in range(count)), p=_INF)
    if head == "log":
        lo, hi = int(kv.pop("min")), int(kv.pop("max"))
        pos = [2.0**i for i in range(lo, hi + 1)]
        return CompressorSpec("nearest_rounding", levels=tuple(sorted([-q for q in pos] + pos)), p=_INF)
    if head == "topk":
        return CompressorSpec("topk", l=int(kv.pop("l")), p=fnum(kv.pop("p", "2")))
    if head == "randk":
        return CompressorSpec("randomk", l=int(kv.pop("l")), p=fnum(kv.pop("p", "2")))
    raise InvalidParameterError(f"unknown compressor spec {text!r}")


# ----------------------------------------------------------------------
# compression
# ----------------------------------------------------------------------


def row_norms(x: np.ndarray, p: float) -> np.ndarray:
    """Per-row p-norms (keepdims); the matrix max-norm is their maximum."""
    if math.isinf(p):
        return np.max(np.abs(x), axis=-1, keepdims=True)
    return np.sum(np.abs(x) ** p, axis=-1, keepdims=True) ** (1.0 / p)


def max_norm(x: np.ndarray, p: float) -> float:
    """Matrix max-norm: the largest row p-norm."""
    return float(np.max(row_norms(np.atleast_2d(x), p)))


_rownorm = row_norms


def apply_rows(spec: CompressorSpec, x: np.ndarray, rng: np.random.Generator = None) -> np.ndarray:
    """Apply the compressor row-wise; accepts 1-D or 2-D input."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("compressor input must be finite")
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    d = X.shape[1]

    if spec.kind == "identity":
        out = X.copy()
    elif spec.kind == "binary":
        out = np.where(X >= 0, 0.5, -0.5)
    elif spec.kind == "nearest_rounding":
        out = _nearest(np.array(spec.levels), X)
    elif spec.kind in ("unbiased_stochastic", "biased_stochastic"):
        norm = _rownorm(X, spec.p)
        safe = np.where(norm > 0, norm, 1.0)
        t = spec.u * np.abs(X) / safe
        if spec.xi is None:
            if rng is None:
                raise InvalidParameterError("stochastic quantizer needs an rng")
            dither = rng.random(X.shape)
        else:
            dither = spec.xi
        out = (safe * np.sign(X) / spec.u) * np.floor(t + dither)
        out = np.where(norm > 0, out, 0.0)
        if spec.kind == "biased_stochastic":
            out = out / spec.resolved_phi(d)
    elif spec.kind == "topk":
        keep = min(spec.l, d)
        order = np.argsort(-np.abs(X), axis=1, kind="stable")
        out = np.zeros_like(X)
        rows = np.arange(X.shape[0])[:, None]
        idx = order[:, :keep]
        out[rows, idx] = X[rows, idx]
    elif spec.kind == "randomk":
        if rng is None:
            raise InvalidParameterError("random sparsifier needs an rng")
        keep = min(spec.l, d)
        out = np.zeros_like(X)
        for r in range(X.shape[0]):
            idx = rng.choice(d, size=keep, replace=False)
            out[r, idx] = X[r, idx]
    else:
        raise InvalidParameterError(spec.kind)
    return out[0] if squeeze else out


def _nearest(levels: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-coordinate nearest level; ties break toward the smaller magnitude."""
    idx = np.searchsorted(levels, x)
    lo = levels[np.clip(idx - 1, 0, len(levels) - 1)]
    hi = levels[np.clip(idx, 0, len(levels) - 1)]
    dlo = np.abs(x - lo)
    dhi = np.abs(x - hi)
    pick_lo = (dlo < dhi) | ((dlo == dhi) & (np.abs(lo) <= np.abs(hi)))
    return np.where(pick_lo, lo, hi)


def compress(spec: CompressorSpec, x: np.ndarray, rng: np.random.Generator = None) -> CompressedMessage:
    """Compress one d-vector; the message carries its exact bit size."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("compress expects a 1-D vector; use apply_rows for matrices")
    return CompressedMessage(payload=apply_rows(spec, x, rng), bits=spec.bit_cost(x.shape[0]))


# ----------------------------------------------------------------------
# contract validators
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    stderr: float


def _direction_batches(d: int, rng: np.random.Generator, n_dirs: int) -> np.ndarray:
    """Adversarial direction mix: sphere, Gaussian, heavy tails, sparse, spikes."""
    dirs = []
    counts = [n_dirs // 5] * 4 + [n_dirs - 4 * (n_dirs // 5)]
    g = rng.standard_normal((counts[0], d))
    dirs.append(g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300))
    dirs.append(rng.standard_normal((counts[1], d)))
    dirs.append(rng.standard_t(df=1.5, size=(counts[2], d)))
    sparse = rng.standard_normal((counts[3], d))
    mask = rng.random((counts[3], d)) < 0.2
    sparse = np.where(mask, sparse, 0.0)
    sparse[np.all(sparse == 0, axis=1)] = 1.0
    dirs.append(sparse)
    # one dominant coordinate plus a swept shelf of small equal entries
    spikes = np.zeros((counts[4], d))
    shelf = np.geomspace(1e-3, 1.0, counts[4])
    spikes[:, :] = shelf[:, None]
    spikes[:, 0] = 1.0
    dirs.append(spikes)
    return np.concatenate(dirs, axis=0)


def estimate_delta_contraction(
    spec: CompressorSpec, d: int, trials: int = 10_000, rng: np.random.Generator = None
) -> DeltaEstimate:
    """Worst observed mean-square relative error over adversarial directions.

    For stochastic compressors the per-direction mean is estimated from
    repeated draws; the returned stderr is the standard error of the
    worst direction's mean.
    """
    if trials < 1000:
        raise InvalidParameterError("need at least 1000 trials")
    if spec.delta_contracted(d) is None:
        raise ContractMismatchError(f"{spec} does not carry the relative contract")
    rng = rng or np.random.default_rng(0)
    stochastic = spec.kind in ("unbiased_stochastic", "biased_stochastic", "randomk") and (
        spec.xi is None or spec.kind == "randomk"
    )
    reps = 64 if stochastic else 1
    n_dirs = max(16, trials // reps)
    dirs = _direction_batches(d, rng, n_dirs)
    norms2 = np.sum(dirs**2, axis=1)
    keep = norms2 > 0
    dirs, norms2 = dirs[keep], norms2[keep]

    acc = np.zeros(dirs.shape[0])
    acc2 = np.zeros(dirs.shape[0])
    for _ in range(reps):
        q = apply_rows(spec, dirs, rng)
        ratios = np.sum((q - dirs) ** 2, axis=1) / norms2
        acc += ratios
        acc2 += ratios**2
    means = acc / reps
    i = int(np.argmax(means))
    var = max(0.0, acc2[i] / reps - means[i] ** 2)
    se = math.sqrt(var / reps) if reps > 1 else 0.0
    return DeltaEstimate(float(means[i]), se)


def estimate_delta_absolute(
    spec: CompressorSpec, d: int, p: float, trials: int = 10_000, rng: np.random.Generator = None
) -> DeltaEstimate:
    """Worst observed p-norm error over sampled points of the unit p-ball."""
    if trials < 1000:
        raise InvalidParameterError("need at least 1000 trials")
    if spec.delta_absolute(d) is None:
        raise ContractMismatchError(f"{spec} does not carry the absolute contract")
    rng = rng or np.random.default_rng(0)
    n = trials
    pts = rng.uniform(-1.0, 1.0, size=(n, d))
    if not math.isinf(p):
        nrm = _rownorm(pts, p)
        scale = rng.random((n, 1)) ** (1.0 / d)
        pts = pts / np.maximum(nrm, 1e-300) * scale
    # boundary and axis points, plus grid midpoints for rounding quantizers
    extra = [np.ones((1, d)), -np.ones((1, d)), np.eye(d)[: min(d, 32)]]
    if spec.kind == "nearest_rounding":
        lv = np.array(spec.levels)
        mids = 0.5 * (lv[1:] + lv[:-1])
        mids = mids[(mids >= -1) & (mids <= 1)]
        for mval in mids[:64]:
            extra.append(np.full((1, d), mval))
    pts = np.concatenate([pts] + extra, axis=0)
    if not math.isinf(p):
        nrm = _rownorm(pts, p)
        pts = np.where(nrm > 1, pts / np.maximum(nrm, 1e-300), pts)
    q = apply_rows(spec, pts, rng)
    errs = _rownorm(q - pts, p).ravel()
    return DeltaEstimate(float(np.max(errs)), 0.0)
