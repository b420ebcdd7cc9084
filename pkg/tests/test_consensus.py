import numpy as np
import pytest

from coldsim import compress, consensus, theory, topology
from coldsim.consensus import ScalingSchedule
from coldsim.errors import ContractMismatchError, InvalidParameterError, ScalingViolationError


def test_schedule_validation():
    with pytest.raises(InvalidParameterError):
        ScalingSchedule(0.0, 0.5)
    with pytest.raises(InvalidParameterError):
        ScalingSchedule(1.0, 1.0)
    assert ScalingSchedule(2.0, 0.5).value(3) == 0.25


def test_gossip_consensual_start_stays(ring4):
    X0 = np.tile([1.5, -2.0], (4, 1))
    tr = consensus.exact_gossip_run(ring4, X0, 20)
    assert np.max(tr.column("consensus_error")) < 1e-14


def test_gossip_path2_one_step():
    m = topology.metropolis_weights(topology.build_graph("path", 2))
    tr = consensus.exact_gossip_run(m, np.array([[0.0], [2.0]]), 2)
    assert np.allclose(tr.final_state.X, [[1.0], [1.0]])
    assert tr.column("consensus_error")[1] < 1e-14


def test_gossip_ring4_rate_matches_spectrum(ring4, rng):
    tr = consensus.exact_gossip_run(ring4, rng.standard_normal((4, 3)), 60)
    fitted = theory._fit_log_rate(tr.column("consensus_error"), 5)
    assert abs(fitted - 1 / 3) < 0.01


def test_gossip_bits_ledger(ring4, rng):
    tr = consensus.exact_gossip_run(ring4, rng.standard_normal((4, 3)), 5)
    bits = tr.column("bits_cumulative")
    # ring: every node has 2 neighbors, d=3 -> 192 bits per node per round
    assert np.allclose(np.diff(bits), 2 * 32 * 3)
    assert bits[0] == 0


@pytest.mark.filterwarnings("ignore:gamma=1.0 outside")
def test_choco_identity_matches_gossip(er20, rng):
    X0 = rng.standard_normal((20, 4))
    tg = consensus.exact_gossip_run(er20, X0, 100)
    tc = consensus.choco_gossip_run(
        er20, X0, compress.parse_compressor("identity"), 1.0, 100, force=True
    )
    assert np.max(np.abs(tg.column("consensus_error") - tc.column("consensus_error"))) < 1e-12


def test_choco_gamma_guard(er20, rng):
    spec = compress.parse_compressor("identity")
    with pytest.raises(InvalidParameterError):
        consensus.choco_gossip_run(er20, rng.standard_normal((20, 2)), spec, 5.0, 5)
    with pytest.raises(ContractMismatchError):
        consensus.choco_gossip_run(
            er20, rng.standard_normal((20, 2)), compress.parse_compressor("binary"), 0.1, 5
        )


def test_choco_consensual_fixed_point(ring4):
    X0 = np.tile([0.25, 0.5], (4, 1))
    tr = consensus.choco_gossip_run(
        ring4, X0, compress.parse_compressor("identity"), 0.5, 10, x_hat0=X0.copy(), force=True
    )
    assert np.max(tr.column("consensus_error")) < 1e-14
    assert np.max(np.abs(tr.final_state.X - X0)) < 1e-14


def test_mean_preservation_all_algorithms(er20, rng):
    X0 = rng.standard_normal((20, 3))
    mean0 = X0.mean(axis=0)
    runs = [
        consensus.exact_gossip_run(er20, X0, 50),
        consensus.choco_gossip_run(er20, X0, compress.parse_compressor("biased:u=2,p=2"), 0.05, 50),
        consensus.ccs_run(
            er20, X0, compress.parse_compressor("binary"), 0.01,
            ScalingSchedule(50.0, 0.999), 50,
        ),
    ]
    for tr in runs:
        drift = np.linalg.norm(tr.final_state.X.mean(axis=0) - mean0)
        assert drift < 1e-9 * max(1.0, np.linalg.norm(X0))


def test_choco_theorem_contraction_small(ring4, rng):
    # averaged energy must contract at least at the certified factor
    spec = compress.parse_compressor("biased:u=2,p=2")
    delta = spec.delta_contracted(3)
    cert = theory.choco_rate(delta, ring4)
    X0 = rng.standard_normal((4, 3))
    traces = [
        consensus.choco_gossip_run(ring4, X0, spec, cert.gamma, 120, seed=s) for s in range(20)
    ]
    E = np.stack([t.column("lyapunov") for t in traces]).mean(axis=0)
    ratios = E[1:] / E[:-1]
    assert np.max(ratios[10:]) <= cert.sigma_or_beta + 0.02


def test_ccs_identity_matches_choco(er20, rng):
    X0 = rng.standard_normal((20, 3))
    ident = compress.parse_compressor("identity")
    tc = consensus.choco_gossip_run(er20, X0, ident, 0.3, 80)
    ts = consensus.ccs_run(er20, X0, ident, 0.3, ScalingSchedule(4.0, 0.9), 80)
    assert np.max(np.abs(tc.column("consensus_error") - ts.column("consensus_error"))) < 1e-10


def test_ccs_contract_guard(er20, rng):
    with pytest.raises(ContractMismatchError):
        consensus.ccs_run(
            er20, rng.standard_normal((20, 2)), compress.parse_compressor("biased:u=2,p=2"),
            0.1, ScalingSchedule(1.0, 0.99), 5,
        )


def test_ccs_scaling_violation_raised(ring4):
    # adversarial start far larger than the scale triggers the guard at k=0
    X0 = np.array([[100.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ScalingViolationError) as info:
        consensus.ccs_run(
            ring4, X0, compress.parse_compressor("binary"), 0.05, ScalingSchedule(0.5, 0.999), 10
        )
    assert info.value.iteration == 0


def test_ccs_envelope_binary_ring(ring4, rng):
    # deterministic geometric envelopes on both the error and the innovation
    spec = compress.builtin("C4")
    X0 = rng.standard_normal((4, 2))
    cert = theory.ccs_schedule(spec.delta_absolute(2), spec.p, 4, 2, ring4)
    assert cert.valid
    xbar = X0.mean(axis=0, keepdims=True)
    c_s = theory.ccs_scale(cert, float(np.linalg.norm(X0 - xbar)))
    cert.schedule_c = c_s
    tr = consensus.ccs_run(
        ring4, X0, spec, cert.gamma, ScalingSchedule(c_s, cert.schedule_beta), 300,
        x_hat0=X0, envelope_beta=cert.schedule_beta, envelope_c_s=c_s,
    )
    assert tr.meta["envelope_violations"] == "none"
    report = theory.certify_trace(tr, cert, mode="per_step_envelope")
    assert report.passed


def test_compressed_bits_ledger(er20, rng):
    spec = compress.builtin("C4")
    X0 = rng.standard_normal((20, 5))
    tr = consensus.ccs_run(er20, X0, spec, 0.01, ScalingSchedule(50.0, 0.999), 6)
    deg = consensus.degrees_from_weights(er20)
    per_round = spec.bit_cost(5) * deg.astype(float)
    assert np.allclose(np.diff(tr.column("bits_cumulative")), per_round.mean())
    assert np.allclose(tr.final_state.bits_sent, 6 * per_round)


def test_single_update_preserves_mean_from_any_state(er20, rng):
    # per-step invariant behind mean preservation: one round of each update
    # from arbitrary (X, X_hat) leaves the column mean unchanged
    spec = compress.builtin("C4")
    for _ in range(50):
        X = rng.standard_normal((20, 3))
        X_hat = rng.standard_normal((20, 3))
        mean0 = X.mean(axis=0)
        for step in (
            lambda: er20.w @ X,
            lambda: X + 0.2 * (er20.w @ X_hat - X_hat),
        ):
            assert np.allclose(step().mean(axis=0), mean0, atol=1e-12)
