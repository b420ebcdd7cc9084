"""Closed-form rate certificates and empirical trace certification.

Each ``*_rate`` / ``*_schedule`` function transcribes one convergence
theorem: given the compression constant, the mixing matrix's spectral
statistics and (optionally) user stepsizes, it returns the certified
per-step contraction factor together with every intermediate constant,
plus a validity flag for the theorem's preconditions.  When stepsizes
are omitted, the theorem's own endorsed choice is used and the
certificate is valid by construction.

All arithmetic is plain 64-bit floating point; precondition checks use
the exact open/closed bounds the theorems state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coldsim.consensus import ScalingSchedule
from coldsim.errors import InvalidParameterError
from coldsim.topology import MixingMatrix
from coldsim.traces import Trace

_FIELDS = ("theorem", "sigma_or_beta", "gamma", "tau", "schedule_c", "schedule_beta", "valid", "reason")


@dataclass
class RateCertificate:
    theorem: str
    sigma_or_beta: float
    valid: bool
    reason: str = ""
    gamma: float = None
    tau: float = None
    schedule_c: float = None
    schedule_beta: float = None
    constants: dict = field(default_factory=dict)

    def serialize(self) -> str:
        """Flat ``key=value`` block (embeddable in trace headers)."""
        lines = [f"theorem={self.theorem}", f"sigma_or_beta={self.sigma_or_beta!r}", f"valid={int(self.valid)}"]
        if self.reason:
            lines.append(f"reason={self.reason}")
        for name in ("gamma", "tau", "schedule_c", "schedule_beta"):
            v = getattr(self, name)
            if v is not None:
                lines.append(f"{name}={v!r}")
        for k, v in self.constants.items():
            lines.append(f"{k}={v!r}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "RateCertificate":
        kv = {}
        for line in text.strip().splitlines():
            k, _, v = line.strip().partition("=")
            if _:
                kv[k] = v
        cert = cls(
            theorem=kv.pop("theorem"),
            sigma_or_beta=float(kv.pop("sigma_or_beta")),
            valid=bool(int(kv.pop("valid"))),
            reason=kv.pop("reason", ""),
        )
        for name in ("gamma", "tau", "schedule_c", "schedule_beta"):
            if name in kv:
                setattr(cert, name, float(kv.pop(name)))
        cert.constants = {k: float(v) for k, v in kv.items()}
        return cert


def lemma13_constants(p: float, n: int, d: int):
    """Norm-equivalence pair (c_bar, c_lower) between the max-row-p norm
    and the Frobenius norm, split at p = 2."""
    if p < 1:
        raise InvalidParameterError("norm order must be >= 1")
    if p < 2:
        return d ** (1.0 / p - 0.5), math.sqrt(n)
    exponent = 0.5 if math.isinf(p) else 0.5 - 1.0 / p
    return 1.0, math.sqrt(n) * d**exponent


def _check_delta(delta: float):
    if not (0.0 <= delta < 1.0):
        raise InvalidParameterError(f"compression constant must be in [0, 1), got {delta}")


def choco_rate(delta: float, m: MixingMatrix, gamma: float = None) -> RateCertificate:
    """Contraction factor of compressed gossip with error feedback.

    Without ``gamma`` the endorsed stepsize
    ``(1 - delta) / ((3 + delta)(1 - lambda_n))`` is used, giving
    ``sigma = 1 - (1 - delta) rho / (2 (1 - lambda_n))``.
    """
    _check_delta(delta)
    lam_n, rho = m.lambda_n, m.rho
    one_minus = 1.0 - lam_n
    cap = (1.0 - delta) / ((1.0 + delta) * one_minus)
    valid, reason = True, ""
    if gamma is None:
        gamma = (1.0 - delta) / ((3.0 + delta) * one_minus)
        sigma = 1.0 - (1.0 - delta) * rho / (2.0 * one_minus)
    else:
        if not (0.0 < gamma < cap):
            valid, reason = False, f"gamma outside (0, {cap!r})"
        a = 1.0 - 2.0 * gamma * rho / (1.0 + gamma * one_minus)
        b = delta * (1.0 + gamma * one_minus) / (1.0 - gamma * one_minus) if gamma * one_minus < 1 else math.inf
        sigma = max(a, b)
    q = delta * (1.0 + gamma * one_minus) / (1.0 - gamma * one_minus) if gamma * one_minus < 1 else math.inf
    if valid and not (0.0 < sigma < 1.0):
        valid, reason = False, f"contraction factor {sigma!r} not in (0, 1)"
    return RateCertificate(
        theorem="t1",
        sigma_or_beta=sigma,
        valid=valid,
        reason=reason,
        gamma=gamma,
        constants={"delta": delta, "rho": rho, "lambda_n": lam_n, "q": q, "gamma_cap": cap},
    )


def cold_rate_unbiased(
    mu: float, L: float, delta: float, m: MixingMatrix, gamma: float = None, tau: float = None
) -> RateCertificate:
    """Contraction factor for the unbiased relative-contract compressors.

    Endorsed defaults: ``gamma = 1/(2L)`` and
    ``tau = (1 - delta)^2 / (2 gamma (24 delta + 1))``, giving
    ``sigma = max(L/(mu+L), 1 - (1-delta)^2 rho / (4 (1 + 24 delta)))``.
    """
    if not (0 < mu <= L):
        raise InvalidParameterError("need 0 < mu <= L")
    _check_delta(delta)
    rho, lam_n = m.rho, m.lambda_n
    endorsed = gamma is None and tau is None
    if gamma is None:
        gamma = 1.0 / (2.0 * L)
    if tau is None:
        tau = (1.0 - delta) ** 2 / (2.0 * gamma * (24.0 * delta + 1.0))
    tau_cap = (1.0 - delta) ** 2 / (2.0 * gamma * (24.0 * delta + (1.0 - delta) ** 2))
    valid, reason = True, ""
    if endorsed:
        sigma = max(L / (mu + L), 1.0 - (1.0 - delta) ** 2 * rho / (4.0 * (1.0 + 24.0 * delta)))
    else:
        if not (0.0 < gamma < 1.0 / (mu + L)):
            valid, reason = False, f"gamma outside (0, {1.0 / (mu + L)!r})"
        elif not (0.0 < tau < tau_cap):
            valid, reason = False, f"tau outside (0, {tau_cap!r})"
        sigma = max(1.0 - 2.0 * mu * L * gamma / (mu + L), 1.0 - gamma * tau * rho / 2.0)
    if valid and not (0.0 < sigma < 1.0):
        valid, reason = False, f"contraction factor {sigma!r} not in (0, 1)"
    theta_min = 1.0 / (tau * (1.0 - lam_n)) - gamma
    theta_max = 1.0 / (tau * rho) - gamma
    return RateCertificate(
        theorem="t2",
        sigma_or_beta=sigma,
        valid=valid,
        reason=reason,
        gamma=gamma,
        tau=tau,
        constants={
            "delta": delta,
            "rho": rho,
            "lambda_n": lam_n,
            "mu": mu,
            "L": L,
            "tau_cap": tau_cap,
            "theta_min": theta_min,
            "theta_max": theta_max,
        },
    )


def cold_rate_biased(
    mu: float, L: float, delta: float, m: MixingMatrix, gamma: float = None, tau: float = None
) -> RateCertificate:
    """Contraction factor for biased relative-contract compressors.

    Needs ``delta_prime = 4 sqrt(delta) / (1 - delta) < 1``; otherwise
    the certificate is returned invalid with that explanation.  Defaults
    sit at half the stepsize caps.
    """
    if not (0 < mu <= L):
        raise InvalidParameterError("need 0 < mu <= L")
    _check_delta(delta)
    rho, lam_n = m.rho, m.lambda_n
    delta_prime = 4.0 * math.sqrt(delta) / (1.0 - delta)
    gamma_cap = (1.0 - delta) / (mu + L)
    if gamma is None:
        gamma = 0.5 * gamma_cap
    tau_cap = (1.0 - delta) / (2.0 * gamma * (1.0 - lam_n))
    if tau is None:
        tau = 0.5 * tau_cap
    valid, reason = True, ""
    if delta_prime >= 1.0:
        valid, reason = False, f"bias too large: delta_prime={delta_prime!r} >= 1"
    elif not (0.0 < gamma < gamma_cap):
        valid, reason = False, f"gamma outside (0, {gamma_cap!r})"
    elif not (0.0 < tau < tau_cap):
        valid, reason = False, f"tau outside (0, {tau_cap!r})"
    sigma = max(
        1.0 - 2.0 * mu * L * gamma / (mu + L),
        1.0 - gamma * tau * rho * (1.0 - math.sqrt(min(delta_prime, 1.0))),
    )
    if valid and not (0.0 < sigma < 1.0):
        valid, reason = False, f"contraction factor {sigma!r} not in (0, 1)"
    return RateCertificate(
        theorem="t3",
        sigma_or_beta=sigma,
        valid=valid,
        reason=reason,
        gamma=gamma,
        tau=tau,
        constants={
            "delta": delta,
            "delta_prime": delta_prime,
            "rho": rho,
            "lambda_n": lam_n,
            "mu": mu,
            "L": L,
        },
    )


def ccs_schedule(
    delta: float, p: float, n: int, d: int, m: MixingMatrix, gamma: float = None
) -> RateCertificate:
    """Stepsize, decay floor and scale rule for scaled compressed consensus.

    The scale rule is ``c_s >= ||X0 - mean||_F / varsigma`` (the report
    stores ``varsigma``; apply it with :func:`ccs_scale`).  The default
    stepsize backs 0.1% off the cap so the decay floor stays strictly
    below one even on a unit-spectral-gap graph, where the cap itself is
    the knife edge.
    """
    _check_delta(delta)
    rho = m.rho
    c_bar, c_lower = lemma13_constants(p, n, d)
    c_p = c_bar * c_lower
    cap = math.inf if delta == 0.0 else (1.0 - delta) * rho / (2.0 * delta * (1.0 + 2.0 * c_p))
    valid, reason = True, ""
    if gamma is None:
        gamma = 1.0 if delta == 0.0 else min(1.0, 0.999 * cap)
    elif not (0.0 < gamma <= min(cap, 1.0)):
        valid, reason = False, f"gamma outside (0, {min(cap, 1.0)!r}]"
    leftover = 1.0 - (1.0 + 2.0 * gamma) * delta
    if leftover <= 0.0:
        valid, reason = False, "scale split degenerate: (1 + 2 gamma) delta >= 1"
        beta_floor = math.inf
        varsigma = math.nan
    else:
        beta_floor = max(
            1.0 - gamma * rho / 2.0 + 2.0 * delta * gamma**2 * c_p / leftover,
            (1.0 + delta) / 2.0 + delta * gamma * (1.0 + 2.0 * c_p / rho),
        )
        varsigma = delta * c_lower / rho + leftover / (4.0 * gamma)
    if valid and not (0.0 < beta_floor < 1.0):
        valid, reason = False, f"decay floor {beta_floor!r} not in (0, 1)"
    return RateCertificate(
        theorem="t4",
        sigma_or_beta=beta_floor,
        valid=valid,
        reason=reason,
        gamma=gamma,
        schedule_beta=beta_floor,
        constants={
            "delta": delta,
            "rho": rho,
            "c_bar": c_bar,
            "c_lower": c_lower,
            "c_p": c_p,
            "varsigma": varsigma,
            "gamma_cap": cap,
        },
    )


def ccs_scale(cert: RateCertificate, x0_centered_norm: float, innovation0_max: float = 0.0) -> float:
    """Smallest certified initial scale for a given starting point.

    ``innovation0_max`` is ``||X0 - X_hat0||_max``; the scale must also
    cover it so the very first compressor input stays in the unit ball.
    """
    return max(x0_centered_norm / cert.constants["varsigma"], innovation0_max)


def dyna_cold_schedule(
    mu: float, L: float, delta: float, p: float, n: int, d: int, m: MixingMatrix
) -> RateCertificate:
    """Stepsizes, decay factor and scale constants for the scaled optimizer.

    Valid only while ``delta_prime = 64 delta (1 + delta) c_p /
    ((1 - delta)^3 rho) < 1``; an invalid certificate reports the largest
    admissible ``delta`` for this graph in its reason.  The split
    constant reads the product ``c_bar * c_lower`` in the denominator of
    ``varsigma_1`` (the reading that normalizes the second energy map).
    """
    if not (0 < mu <= L):
        raise InvalidParameterError("need 0 < mu <= L")
    _check_delta(delta)
    rho, lam_n = m.rho, m.lambda_n
    c_bar, c_lower = lemma13_constants(p, n, d)
    c_p = c_bar * c_lower
    tau = 2.0 * mu * L / (rho * (mu + L))
    gamma = min(2.0 / (mu + L), 1.0 / (2.0 * tau * (1.0 - lam_n)), tau * (1.0 - lam_n) / L**2)
    tau_tilde = gamma * tau * (1.0 - lam_n)
    nu = max(1.0 - 2.0 * mu * L * gamma / (mu + L), 1.0 - 0.5 * gamma * tau * rho)
    delta_prime = 64.0 * delta * (1.0 + delta) * c_p / ((1.0 - delta) ** 3 * rho)
    valid, reason = True, ""
    if delta_prime >= 1.0:
        valid = False
        reason = (
            f"delta_prime={delta_prime!r} >= 1; largest admissible delta here is "
            f"{_max_dyna_delta(c_p, rho)!r}"
        )
    beta = 0.5 + max(
        2.0 * nu / (4.0 - delta_prime * tau_tilde * rho),
        delta / (1.0 + delta) + 16.0 * delta * tau_tilde * c_p / ((1.0 - delta) ** 2 * (1.0 - nu)),
    )
    denom = (1.0 - delta) ** 3 * (1.0 - tau_tilde) - 16.0 * delta * (1.0 + delta) * tau_tilde * c_p
    varsigma1 = 8.0 * c_bar * gamma * tau_tilde * nu * (1.0 + delta) / denom if denom > 0 else math.inf
    varsigma2 = (1.0 - nu) * gamma / (2.0 * c_lower * delta) if delta > 0 else math.inf
    varsigma = 0.5 * (varsigma1 + varsigma2)
    if valid and (denom <= 0 or not (0.0 < beta < 1.0) or not (0.0 < nu < 1.0) or tau_tilde > 0.5):
        valid, reason = False, "decay factor preconditions failed"
    return RateCertificate(
        theorem="t5",
        sigma_or_beta=beta,
        valid=valid,
        reason=reason,
        gamma=gamma,
        tau=tau,
        schedule_beta=beta,
        constants={
            "delta": delta,
            "delta_prime": delta_prime,
            "rho": rho,
            "lambda_n": lam_n,
            "mu": mu,
            "L": L,
            "c_bar": c_bar,
            "c_lower": c_lower,
            "c_p": c_p,
            "nu": nu,
            "tau_tilde": tau_tilde,
            "varsigma1": varsigma1,
            "varsigma2": varsigma2,
            "varsigma": varsigma,
        },
    )


def _max_dyna_delta(c_p: float, rho: float) -> float:
    lo, hi = 0.0, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 64.0 * mid * (1.0 + mid) * c_p < (1.0 - mid) ** 3 * rho:
            lo = mid
        else:
            hi = mid
    return lo


def dyna_initial_constants(cert: RateCertificate, e1_anchor: float, e2_anchor: float):
    """Anchor the two-energy envelope and derive the run schedule.

    Returns ``(c_tilde, c, schedule)`` with ``c = varsigma * c_tilde``;
    the run scales by ``sqrt(c beta^k)`` so the squared innovation stays
    under ``c beta^k`` whenever the induction premises hold.  The anchors
    are stored into the certificate for envelope certification.
    """
    varsigma = cert.constants["varsigma"]
    if not math.isfinite(varsigma):
        raise InvalidParameterError("scale split is degenerate (exact compressor); any schedule works")
    c_tilde = max(e1_anchor, e2_anchor / varsigma)
    c = varsigma * c_tilde
    beta = cert.schedule_beta
    schedule = ScalingSchedule(math.sqrt(c), math.sqrt(beta))
    cert.constants["c_tilde"] = c_tilde
    cert.constants["c"] = c
    cert.schedule_c = schedule.c_s
    return c_tilde, c, schedule


# ----------------------------------------------------------------------
# trace certification
# ----------------------------------------------------------------------


@dataclass
class CertReport:
    mode: str
    passed: bool
    bound: float
    fitted: float = None
    violations: list = field(default_factory=list)
    details: str = ""


def _fit_log_rate(values: np.ndarray, burn_in: int) -> float:
    v = values[burn_in:]
    keep = np.isfinite(v) & (v > 1e-13)
    if keep.sum() < 2:
        raise InvalidParameterError("not enough usable values to fit a rate")
    k = np.arange(len(v), dtype=float)[keep]
    y = np.log(v[keep])
    slope = np.polyfit(k, y, 1)[0]
    return float(math.exp(slope))


def certify_trace(
    trace: Trace,
    cert: RateCertificate,
    burn_in: int = 10,
    mode: str = "fitted_rate",
    column: str = None,
    margin: float = 0.0,
) -> CertReport:
    """Check an empirical trace against a certificate.

    ``fitted_rate`` least-squares the log of the governed column past
    ``burn_in`` and compares the per-step factor against the certified
    one (within ``margin``).  ``per_step_envelope`` asserts the
    geometric envelope at every iteration with 1e-12 floating slack;
    for the scaled algorithms it checks both certified inequalities
    (error column and innovation column).
    """
    factor = cert.sigma_or_beta
    if mode == "fitted_rate":
        col = column or ("consensus_error" if cert.theorem in ("t1", "t4") and not np.isfinite(
            trace.column("lyapunov")).any() else "lyapunov")
        values = trace.column(col)
        if not np.isfinite(values).any():
            raise InvalidParameterError(f"trace has no usable column {col!r}")
        fitted = _fit_log_rate(values, burn_in)
        return CertReport(
            mode=mode,
            passed=fitted <= factor + margin,
            bound=factor,
            fitted=fitted,
            details=f"fitted={fitted!r} vs certified={factor!r} (margin={margin})",
        )
    if mode != "per_step_envelope":
        raise InvalidParameterError(f"unknown mode {mode!r}")

    checks = []
    if cert.theorem == "t4":
        err = trace.column("consensus_error")
        checks.append(("consensus_error", err, float(err[0])))
        if cert.schedule_c is not None:
            innov = trace.column("innovation_max")
            checks.append(("innovation_max", innov, float(cert.schedule_c)))
    elif cert.theorem == "t5":
        e1 = trace.column("lyapunov")
        checks.append(("lyapunov", e1, float(cert.constants.get("c_tilde", e1[0]))))
        if "c" in cert.constants:
            e2 = trace.column("innovation_max") ** 2
            checks.append(("innovation_sq", e2, float(cert.constants["c"])))
    else:
        col = column or "lyapunov"
        values = trace.column(col)
        checks.append((col, values, float(values[0])))

    violations = []
    for name, values, anchor in checks:
        slack = 1e-12 * max(1.0, anchor)
        bounds = anchor * factor ** np.arange(len(values), dtype=float)
        bad = np.flatnonzero(np.isfinite(values) & (values > bounds + slack))
        violations.extend((name, int(k)) for k in bad)
    return CertReport(
        mode=mode,
        passed=not violations,
        bound=factor,
        violations=violations,
        details="envelope holds at every iteration" if not violations else f"{len(violations)} violations",
    )
