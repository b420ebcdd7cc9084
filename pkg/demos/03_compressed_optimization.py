"""Compressed gradient tracking on a heterogeneous logistic problem.

Reproduces the benchmark story at desk scale: with relative-contract
compressors the compressed optimizer is nearly indistinguishable from
the uncompressed baseline per iteration, while costing far fewer bits;
with the 1-bit quantizer only the dynamically scaled variant converges.
"""

import numpy as np

from coldsim import compress, objective, optim, topology
from coldsim.optim import ColdConfig

n, d = 20, 10
mix = topology.metropolis_weights(topology.build_graph("erdos_renyi", n, seed=0))
feats, labels = objective.two_class_blobs(200, d, seed=0)
obj = objective.logistic_objective(feats, labels, n, r=0.1, partition="label")
print(f"logistic task: n={n}, d={d}, mu={obj.mu}, L={obj.L:.3f}")

gamma = 1.0 / (2 * obj.L)
tau = 1.0 / (2 * gamma * (1 - mix.lambda_n))
X0 = np.zeros((n, d))


def first_hit(trace, eps=1e-4):
    gaps = trace.column("optimality_gap")
    hit = np.flatnonzero(gaps <= eps)
    return (int(hit[0]), float(trace.column("bits_cumulative")[hit[0]])) if hit.size else (None, None)


runs = {"uncompressed": optim.nids_run(mix, obj, gamma, X0, 3000)}
for name in ("C1", "C2"):
    runs[name] = optim.cold_run(mix, obj, compress.builtin(name), ColdConfig(gamma, tau), X0, 3000, seed=0)

# the 1-bit quantizer needs dynamic scaling and gentler stepsizes
tau_s = 2 * obj.mu * obj.L / (mix.rho * (obj.mu + obj.L))
gamma_s = min(2 / (obj.mu + obj.L), 1 / (2 * tau_s * (1 - mix.lambda_n)), tau_s * (1 - mix.lambda_n) / obj.L**2)
runs["C4 + scaling"] = optim.dyna_cold_run(
    mix, obj, compress.builtin("C4"), ColdConfig(gamma_s, tau_s), X0, 3000, seed=0,
    paper_default_schedule=True,
)

print(f"\n{'run':<16}{'iters to 1e-4':>14}{'bits/node to 1e-4':>20}")
for label, trace in runs.items():
    k, bits = first_hit(trace)
    print(f"{label:<16}{str(k):>14}{('%.3g' % bits) if bits else '-':>20}")

print("\nThe 1-bit run transmits ~32x fewer bits per message; the scaled")
print("schedule is what lets it converge at all.")
