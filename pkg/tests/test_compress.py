import math

import numpy as np
import pytest

from coldsim import compress
from coldsim.compress import CompressorSpec, builtin, parse_compressor
from coldsim.errors import ContractMismatchError, InvalidInputError, InvalidParameterError

INF = float("inf")


def test_binary_example():
    msg = compress.compress(parse_compressor("binary"), np.array([0.3, -0.2]))
    assert msg.payload.tolist() == [0.5, -0.5]
    assert msg.bits == 2


def test_identity_is_exact(rng):
    x = rng.standard_normal(17)
    msg = compress.compress(parse_compressor("identity"), x)
    assert np.array_equal(msg.payload, x)
    assert msg.bits == 32 * 17


def test_nonfinite_input_rejected():
    with pytest.raises(InvalidInputError):
        compress.compress(parse_compressor("binary"), np.array([1.0, np.nan]))


def test_nearest_rounding_tie_breaks_toward_smaller_magnitude():
    spec = CompressorSpec("nearest_rounding", levels=(-1.0, 0.0, 1.0), p=INF)
    out = compress.apply_rows(spec, np.array([0.5, -0.5, 0.25, 0.75]))
    assert out.tolist() == [0.0, 0.0, 0.0, 1.0]


def test_nearest_rounding_clamps_outside_coverage():
    spec = parse_compressor("log:min=-3,max=3")
    out = compress.apply_rows(spec, np.array([100.0, -50.0, 0.0]))
    # 0 is equidistant between -1/8 and 1/8; equal magnitudes fall to the lower level
    assert out.tolist() == [8.0, -8.0, -0.125]


def test_zero_vector_to_stochastic_quantizers(rng):
    for text in ("unbiased:u=2,p=inf", "biased:u=2,p=inf"):
        spec = parse_compressor(text)
        msg = compress.compress(spec, np.zeros(4), rng)
        assert np.array_equal(msg.payload, np.zeros(4))
        assert msg.bits == spec.bit_cost(4)


def test_unbiasedness_monte_carlo():
    # sample mean of the stochastic quantizer must match x per coordinate
    spec = parse_compressor("unbiased:u=2,p=inf")
    rng = np.random.default_rng(7)
    x = np.array([1.0, 0.5, -0.3, 0.05])
    draws = 100_000
    tiled = np.tile(x, (draws, 1))
    q = compress.apply_rows(spec, tiled, rng)
    mean = q.mean(axis=0)
    se = q.std(axis=0, ddof=1) / math.sqrt(draws)
    assert np.all(np.abs(mean - x) <= 4 * se + 1e-9)


def test_bit_costs_match_closed_forms():
    assert builtin("C1").bit_cost(100) == 332
    assert builtin("C3").bit_cost(100) == 400
    assert builtin("C4").bit_cost(1) == 1
    assert parse_compressor("topk:l=10").bit_cost(100) == 10 * (32 + 7)
    assert parse_compressor("randk:l=10").bit_cost(100) == 10 * (32 + 7)
    with pytest.raises(InvalidParameterError):
        builtin("C1").bit_cost(0)


def test_declared_constants():
    assert parse_compressor("identity").delta_contracted(8) == 0.0
    assert parse_compressor("topk:l=4").delta_contracted(8) == 0.5
    assert parse_compressor("unbiased:u=2,p=2").delta_contracted(4) == 0.25
    assert parse_compressor("binary").delta_absolute(8) == 0.5
    assert parse_compressor("round:grid=-1:0.01:1").delta_absolute(3) <= 0.005 + 1e-12
    # sup-norm stochastic quantizer: exact mean-square supremum
    assert abs(builtin("C1").delta_contracted(1)) < 1e-15
    d20 = builtin("C1").delta_contracted(20)
    assert abs(d20 - 0.5 * (math.sqrt(1 + 19 / 4) - 1)) < 1e-15


def test_contract_mismatch_errors(rng):
    with pytest.raises(ContractMismatchError):
        compress.estimate_delta_contraction(parse_compressor("binary"), 4, 1000, rng)
    with pytest.raises(ContractMismatchError):
        compress.estimate_delta_absolute(parse_compressor("biased:u=2,p=2"), 4, 2.0, 1000, rng)
    with pytest.raises(InvalidParameterError):
        compress.estimate_delta_contraction(parse_compressor("identity"), 4, 10, rng)


def test_estimator_identity_and_topk(rng):
    est = compress.estimate_delta_contraction(parse_compressor("identity"), 8, 2000, rng)
    assert est.value == 0.0
    est = compress.estimate_delta_contraction(parse_compressor("topk:l=4"), 8, 2000, rng)
    assert est.value <= 0.5 + 1e-12


def test_estimator_unbiased_p2(rng):
    spec = parse_compressor("unbiased:u=2,p=2")
    est = compress.estimate_delta_contraction(spec, 4, 5000, rng)
    assert est.value <= 0.25 + 3 * est.stderr + 1e-9


def test_estimator_absolute(rng):
    assert compress.estimate_delta_absolute(parse_compressor("binary"), 8, INF, 2000, rng).value <= 0.5 + 1e-12
    assert compress.estimate_delta_absolute(parse_compressor("identity"), 8, INF, 2000, rng).value == 0.0
    grid = parse_compressor("round:grid=-1:0.01:1")
    est = compress.estimate_delta_absolute(grid, 4, INF, 2000, rng)
    assert est.value <= 0.005 + 1e-12


def test_uniform_grid_error_bound_exhaustive():
    # brute force over a fine sweep of the unit interval: the nearest-level
    # error never exceeds half the spacing
    grid = parse_compressor("round:grid=-1:0.01:1")
    xs = np.linspace(-1, 1, 40_001).reshape(-1, 1)
    out = compress.apply_rows(grid, xs)
    assert np.max(np.abs(out - xs)) <= 0.005 + 1e-12


def test_determinism_bit_for_bit():
    spec = parse_compressor("unbiased:u=2,p=inf")
    x = np.linspace(-1, 1, 33)
    a = compress.apply_rows(spec, x, np.random.default_rng(99))
    b = compress.apply_rows(spec, x, np.random.default_rng(99))
    assert a.tobytes() == b.tobytes()


def test_topk_scale_covariance(rng):
    spec = parse_compressor("topk:l=3")
    x = rng.standard_normal(10)
    base = compress.apply_rows(spec, x)
    for c in (0.5, 2.0, 1e6):
        assert np.allclose(compress.apply_rows(spec, c * x), c * base, rtol=1e-15)


def test_topk_deterministic_ties():
    spec = parse_compressor("topk:l=2")
    x = np.array([1.0, -1.0, 1.0, 0.5])
    out = compress.apply_rows(spec, x)
    # stable order keeps the earliest of the tied coordinates
    assert out.tolist() == [1.0, -1.0, 0.0, 0.0]


def test_randomk_scale_covariance_same_stream(rng):
    spec = parse_compressor("randk:l=3")
    x = rng.standard_normal(10)
    a = compress.apply_rows(spec, x, np.random.default_rng(5))
    b = compress.apply_rows(spec, 3.0 * x, np.random.default_rng(5))
    assert np.allclose(3.0 * a, b, rtol=1e-15)


def test_parser_roundtrip():
    for text in (
        "binary",
        "identity",
        "unbiased:u=2,p=inf",
        "biased:u=2,p=inf",
        "round:grid=-1:0.01:1",
        "log:min=-3,max=3",
        "topk:l=10",
        "randk:l=10",
    ):
        spec = parse_compressor(text)
        again = parse_compressor(str(spec))
        assert again.kind == spec.kind
        assert again.levels == spec.levels
        assert (again.u, again.p, again.l) == (spec.u, spec.p, spec.l)
    with pytest.raises(InvalidParameterError):
        parse_compressor("bogus:x=1")
    with pytest.raises((InvalidParameterError, KeyError)):
        parse_compressor("topk:badkey")


def test_builtin_aliases_match_table():
    c2 = builtin("C2")
    assert c2.kind == "biased_stochastic" and c2.xi == 0.5 and c2.phi == 1.5
    assert builtin("C3").kind == "nearest_rounding" and len(builtin("C3").levels) == 14
    assert builtin("C4").kind == "binary"


@pytest.mark.parametrize("name", ["C1", "C2", "C3", "C4"])
@pytest.mark.parametrize("d", [1, 4, 64])
def test_contract_soundness_all_builtins(name, d, rng):
    # the Monte Carlo worst case must stay below every declared constant
    spec = builtin(name)
    dc = spec.delta_contracted(d)
    if dc is not None:
        est = compress.estimate_delta_contraction(spec, d, 10_000, rng)
        assert est.value <= dc + 3 * est.stderr + 1e-9
    da = spec.delta_absolute(d)
    if da is not None:
        est = compress.estimate_delta_absolute(spec, d, spec.p, 10_000, rng)
        assert est.value <= da + 1e-9
