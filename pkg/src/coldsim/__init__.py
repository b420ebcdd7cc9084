"""Simulator for communication-compressed decentralized optimization.

The library is organized around the moving parts of a synchronous
peer-to-peer optimization round:

- :mod:`coldsim.topology` -- communication graphs, Metropolis mixing
  matrices and their spectral statistics.
- :mod:`coldsim.compress` -- quantizers and sparsifiers with exact bit
  accounting and statistical contract validators.
- :mod:`coldsim.objective` -- local cost oracles with strong-convexity /
  smoothness constants and ground-truth optima.
- :mod:`coldsim.consensus` -- exact gossip, compressed gossip with error
  feedback, and compressed consensus with dynamic scaling.
- :mod:`coldsim.optim` -- NIDS and its innovation-compressed variants
  (with and without dynamic scaling).
- :mod:`coldsim.theory` -- closed-form stepsize bounds, contraction
  factors and scaling schedules, plus empirical trace certification.
- :mod:`coldsim.harness` -- config-driven experiment runner behind the
  ``coldsim`` command line tool.
"""

from coldsim.errors import (
    ContractMismatchError,
    DivergenceError,
    InvalidParameterError,
    NoConvergenceError,
    ScalingViolationError,
)

__all__ = [
    "ContractMismatchError",
    "DivergenceError",
    "InvalidParameterError",
    "NoConvergenceError",
    "ScalingViolationError",
]

__version__ = "0.1.0"
