"""Rate certificates and trace certification end to end.

Builds a certificate for a compressed optimizer run, executes the run,
and checks the empirical energy against the certified contraction both
as a fitted rate and as a per-step envelope.
"""

import numpy as np

from coldsim import compress, objective, optim, theory, topology
from coldsim.optim import ColdConfig, LyapunovEvaluator

n, d = 10, 8
mix = topology.metropolis_weights(topology.build_graph("erdos_renyi", n, seed=1))
obj = objective.synthetic_quadratic(n, d, 1.0, 10.0, seed=2)
spec = compress.builtin("C1")
delta = spec.delta_contracted(d)

cert = theory.cold_rate_unbiased(obj.mu, obj.L, delta, mix)
print("certificate:")
print("\n".join("  " + line for line in cert.serialize().splitlines()))

ev = LyapunovEvaluator(mix, obj, cert.gamma, cert.tau, delta, "thm2")
X0 = np.random.default_rng(3).standard_normal((n, d))
trace = optim.cold_run(mix, obj, spec, ColdConfig(cert.gamma, cert.tau), X0, 400,
                       seed=0, lyapunov=ev)

report = theory.certify_trace(trace, cert, burn_in=10, mode="fitted_rate", margin=0.02)
print(f"\nfitted check : {'PASS' if report.passed else 'FAIL'} -- {report.details}")

# the scaled consensus theorem gives a true per-step envelope
ring = topology.metropolis_weights(topology.build_graph("ring", 4))
binary = compress.builtin("C4")
cert4 = theory.ccs_schedule(binary.delta_absolute(2), binary.p, 4, 2, ring)
X0 = np.random.default_rng(7).standard_normal((4, 2))
c_s = theory.ccs_scale(cert4, float(np.linalg.norm(X0 - X0.mean(axis=0, keepdims=True))))
cert4.schedule_c = c_s
from coldsim.consensus import ScalingSchedule, ccs_run

tr4 = ccs_run(ring, X0, binary, cert4.gamma, ScalingSchedule(c_s, cert4.schedule_beta), 500, x_hat0=X0)
report4 = theory.certify_trace(tr4, cert4, mode="per_step_envelope")
print(f"envelope check: {'PASS' if report4.passed else 'FAIL'} -- {report4.details}")
