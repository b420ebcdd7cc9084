import math

import numpy as np
import pytest

from coldsim import compress, consensus, theory
from coldsim.errors import InvalidParameterError
from coldsim.theory import RateCertificate

INF = float("inf")


def test_choco_rate_default_ring4(ring4):
    cert = theory.choco_rate(0.0, ring4)
    assert abs(cert.gamma - 0.25) < 1e-12
    assert abs(cert.sigma_or_beta - 0.75) < 1e-12
    assert cert.valid


def test_choco_rate_complete4(complete4):
    cert = theory.choco_rate(0.5, complete4)
    assert abs(cert.gamma - 1 / 7) < 1e-12
    assert abs(cert.sigma_or_beta - 0.75) < 1e-12


def test_choco_rate_explicit_gamma_near_cap(ring4):
    cap = 1.0 / (1.0 - ring4.lambda_n)
    cert = theory.choco_rate(0.0, ring4, gamma=0.999 * cap)
    assert cert.valid
    # at the cap the compressed regime degenerates to plain mixing
    expected = 1.0 - 2 * 0.999 * cap * ring4.rho / (1.0 + 0.999 * cap * (1.0 - ring4.lambda_n))
    assert abs(cert.sigma_or_beta - expected) < 1e-12
    assert not theory.choco_rate(0.0, ring4, gamma=2.0 * cap).valid


def test_choco_rate_rejects_bad_delta(ring4):
    with pytest.raises(InvalidParameterError):
        theory.choco_rate(1.0, ring4)


def test_cold_rate_unbiased_delta0_mu_eq_L(ring4):
    cert = theory.cold_rate_unbiased(2.0, 2.0, 0.0, ring4)
    assert abs(cert.sigma_or_beta - max(0.5, 1.0 - ring4.rho / 4.0)) < 1e-12


def test_cold_rate_unbiased_quarter_delta(ring4):
    # second branch: 1 - (1 - 1/4)^2 rho / (4 (1 + 24/4)) = 1 - (9/16) rho / 28
    cert = theory.cold_rate_unbiased(1.0, 2.0, 0.25, ring4)
    second = 1.0 - (9.0 / 16.0) * ring4.rho / 28.0
    assert abs(cert.sigma_or_beta - max(2.0 / 3.0, second)) < 1e-12


def test_cold_rate_unbiased_independent_reevaluation(ring4):
    mu, L, delta = 2.0, 2.0, 0.3
    cert = theory.cold_rate_unbiased(mu, L, delta, ring4)
    gamma = 1.0 / (2.0 * L)
    tau = (1 - delta) ** 2 / (2 * gamma * (24 * delta + 1))
    assert abs(cert.gamma - gamma) < 1e-15
    assert abs(cert.tau - tau) < 1e-15
    sigma = max(L / (mu + L), 1 - (1 - delta) ** 2 * ring4.rho / (4 * (1 + 24 * delta)))
    assert abs(cert.sigma_or_beta - sigma) < 1e-15


def test_cold_rate_unbiased_explicit_bounds(ring4):
    bad = theory.cold_rate_unbiased(1.0, 2.0, 0.0, ring4, gamma=1.0, tau=0.1)
    assert not bad.valid
    good = theory.cold_rate_unbiased(1.0, 2.0, 0.0, ring4, gamma=0.2, tau=1.0)
    assert good.valid
    assert abs(good.sigma_or_beta - max(1 - 2 * 0.2 * 2 / 3, 1 - 0.2 * 1.0 * ring4.rho / 2)) < 1e-12


def test_cold_rate_biased_cases(ring4):
    zero = theory.cold_rate_biased(1.0, 2.0, 0.0, ring4, gamma=0.1, tau=0.5)
    assert zero.valid
    assert zero.constants["delta_prime"] == 0.0
    ok = theory.cold_rate_biased(1.0, 2.0, 0.04, ring4)
    assert ok.valid
    assert abs(ok.constants["delta_prime"] - (0.8 / 0.96)) < 1e-12
    bad = theory.cold_rate_biased(1.0, 2.0, 0.1, ring4)
    assert not bad.valid
    assert "bias too large" in bad.reason


def test_biased_matches_unbiased_mu_branch_at_zero(ring4):
    # identical curvature branch; the network branch of the biased reading is
    # the tighter one at zero compression
    gamma, tau = 0.1, 0.5
    u = theory.cold_rate_unbiased(1.0, 2.0, 0.0, ring4, gamma=gamma, tau=tau)
    b = theory.cold_rate_biased(1.0, 2.0, 0.0, ring4, gamma=gamma, tau=tau)
    mu_branch = 1 - 2 * 1.0 * 2.0 * gamma / 3.0
    assert abs(min(u.sigma_or_beta, mu_branch) - min(b.sigma_or_beta, mu_branch)) < 1e-12
    assert b.sigma_or_beta <= u.sigma_or_beta + 1e-12


@pytest.mark.parametrize("maker", [
    lambda d, m: theory.choco_rate(d, m).sigma_or_beta,
    lambda d, m: theory.cold_rate_unbiased(1.0, 5.0, d, m).sigma_or_beta,
])
def test_rates_degrade_with_coarser_compression(maker, er20):
    grid = np.arange(0.0, 0.95, 0.05)
    sigmas = [maker(float(d), er20) for d in grid]
    assert all(b >= a - 1e-12 for a, b in zip(sigmas, sigmas[1:]))


def test_lemma13_norm_equivalence(rng):
    for p in (1.0, 1.5, 2.0, 3.0, INF):
        n, d = 7, 5
        c_bar, c_lower = theory.lemma13_constants(p, n, d)
        for _ in range(200):
            a = rng.standard_normal((n, d)) * rng.uniform(0.1, 10)
            mx = compress.max_norm(a, p)
            fro = float(np.linalg.norm(a))
            assert mx <= c_bar * fro + 1e-12
            assert fro <= c_lower * mx + 1e-12


def test_ccs_schedule_delta0(complete4):
    cert = theory.ccs_schedule(0.0, INF, 4, 2, complete4)
    assert cert.gamma == 1.0
    assert abs(cert.sigma_or_beta - max(1.0 - complete4.rho / 2.0, 0.5)) < 1e-12
    assert math.isfinite(cert.constants["varsigma"])


def test_ccs_schedule_binary_complete(complete4):
    cert = theory.ccs_schedule(0.5, INF, 4, 2, complete4)
    assert cert.valid
    assert cert.sigma_or_beta < 1.0
    assert abs(cert.constants["c_p"] - 2.0 * math.sqrt(2.0)) < 1e-12


def test_ccs_schedule_gamma_above_cap(complete4):
    cap = (1 - 0.5) * complete4.rho / (2 * 0.5 * (1 + 2 * 2 * math.sqrt(2)))
    cert = theory.ccs_schedule(0.5, INF, 4, 2, complete4, gamma=1.5 * cap)
    assert not cert.valid


def test_ccs_scale_rule(ring4):
    cert = theory.ccs_schedule(0.5, INF, 4, 2, ring4)
    assert theory.ccs_scale(cert, 4.37, 0.0) == pytest.approx(4.37 / cert.constants["varsigma"])
    assert theory.ccs_scale(cert, 0.1, 2.0) == 2.0


def test_dyna_schedule_delta0_closed_form(complete4):
    cert = theory.dyna_cold_schedule(1.0, 2.0, 0.0, INF, 4, 2, complete4)
    nu = cert.constants["nu"]
    assert abs(cert.sigma_or_beta - (1.0 + nu) / 2.0) < 1e-15
    assert cert.valid


def test_dyna_schedule_grid_quantizer(complete4):
    cert = theory.dyna_cold_schedule(1.0, 2.0, 0.005, INF, 4, 2, complete4)
    assert cert.valid
    assert abs(cert.constants["delta_prime"] - 0.9234) < 2e-3
    assert 0 < cert.sigma_or_beta < 1


def test_dyna_schedule_binary_invalid(complete4):
    cert = theory.dyna_cold_schedule(1.0, 2.0, 0.5, INF, 4, 2, complete4)
    assert not cert.valid
    assert "largest admissible delta" in cert.reason


def test_dyna_initial_constants(complete4):
    cert = theory.dyna_cold_schedule(1.0, 2.0, 0.005, INF, 4, 2, complete4)
    c_tilde, c, sched = theory.dyna_initial_constants(cert, e1_anchor=3.0, e2_anchor=1.0)
    varsigma = cert.constants["varsigma"]
    assert c_tilde == max(3.0, 1.0 / varsigma)
    assert c == varsigma * c_tilde
    assert sched.c_s == math.sqrt(c)
    assert sched.beta == math.sqrt(cert.sigma_or_beta)


def test_certificates_are_pure(er20):
    a = theory.cold_rate_unbiased(1.0, 10.0, 0.3, er20)
    b = theory.cold_rate_unbiased(1.0, 10.0, 0.3, er20)
    assert a.serialize() == b.serialize()


def test_certificate_serialization_roundtrip(ring4):
    cert = theory.ccs_schedule(0.5, INF, 4, 2, ring4)
    cert.schedule_c = 1.25
    text = cert.serialize()
    back = RateCertificate.from_text(text)
    assert back.theorem == cert.theorem
    assert back.sigma_or_beta == cert.sigma_or_beta
    assert back.schedule_c == 1.25
    assert back.constants == cert.constants


def test_certify_fitted_gossip(ring4, rng):
    tr = consensus.exact_gossip_run(ring4, rng.standard_normal((4, 3)), 80)
    cert = RateCertificate(theorem="t1", sigma_or_beta=1 / 3, valid=True)
    report = theory.certify_trace(tr, cert, burn_in=5, mode="fitted_rate",
                                  column="consensus_error", margin=0.01)
    assert report.passed
    assert abs(report.fitted - 1 / 3) < 0.01


def test_certify_constant_trace_fails():
    from coldsim.traces import Trace

    tr = Trace(algorithm="gossip")
    for k in range(50):
        tr.append(iter=k, consensus_error=1.0)
    cert = RateCertificate(theorem="t1", sigma_or_beta=0.9, valid=True)
    rep = theory.certify_trace(tr, cert, mode="fitted_rate", column="consensus_error")
    assert not rep.passed
    rep2 = theory.certify_trace(tr, cert, mode="per_step_envelope", column="consensus_error")
    assert not rep2.passed and rep2.violations


def test_certify_missing_column_errors(ring4, rng):
    tr = consensus.exact_gossip_run(ring4, rng.standard_normal((4, 2)), 10)
    cert = RateCertificate(theorem="t2", sigma_or_beta=0.9, valid=True)
    with pytest.raises(InvalidParameterError):
        theory.certify_trace(tr, cert, mode="fitted_rate", column="lyapunov")


def test_choco_sigma_two_algebraic_forms_agree(rng):
    # dual arithmetic route: the reported factor also equals the raw
    # max{1-(1+delta/q) gamma rho, delta+(q+delta) gamma (1-lambda_n)} split
    from coldsim import topology

    for seed in range(30):
        m = topology.metropolis_weights(topology.build_graph("erdos_renyi", 10, seed=seed))
        delta = float(rng.uniform(0.01, 0.9))
        cap = (1 - delta) / ((1 + delta) * (1 - m.lambda_n))
        gamma = float(rng.uniform(0.1, 0.99)) * cap
        cert = theory.choco_rate(delta, m, gamma=gamma)
        x = gamma * (1 - m.lambda_n)
        q = (1 + x) * delta / (1 - x)
        raw = max(1 - (1 + delta / q) * gamma * m.rho, delta + (q + delta) * x)
        assert abs(cert.sigma_or_beta - raw) < 1e-12
