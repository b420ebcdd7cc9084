"""What each compressor promises, and what it actually does.

Prints the declared contract constants of the built-in compressors next
to Monte Carlo worst-case estimates, plus their exact bit costs.
"""

import numpy as np

from coldsim import compress
from coldsim.compress import builtin, parse_compressor

d = 16
rng = np.random.default_rng(0)

specs = [
    ("C1 (stochastic quantizer)", builtin("C1")),
    ("C2 (shrink-scaled quantizer)", builtin("C2")),
    ("C3 (log grid)", builtin("C3")),
    ("C4 (1-bit sign)", builtin("C4")),
    ("top-k, k=d/2", parse_compressor(f"topk:l={d // 2}")),
    ("uniform grid 0.01", parse_compressor("round:grid=-1:0.01:1")),
]

print(f"{'compressor':<30}{'bits/vec':>9}{'rel. declared':>15}{'rel. measured':>15}"
      f"{'abs. declared':>15}{'abs. measured':>15}")
for label, spec in specs:
    bits = spec.bit_cost(d)
    dc = spec.delta_contracted(d)
    da = spec.delta_absolute(d)
    mc_rel = (
        f"{compress.estimate_delta_contraction(spec, d, 10_000, rng).value:.4f}"
        if dc is not None else "-"
    )
    mc_abs = (
        f"{compress.estimate_delta_absolute(spec, d, spec.p, 10_000, rng).value:.4f}"
        if da is not None else "-"
    )
    print(f"{label:<30}{bits:>9}"
          f"{'-' if dc is None else format(dc, '.4f'):>15}{mc_rel:>15}"
          f"{'-' if da is None else format(da, '.4f'):>15}{mc_abs:>15}")

print("\nThe declared relative constants are suprema: the measured worst case")
print("always stays below them, and approaches them on adversarial inputs.")
