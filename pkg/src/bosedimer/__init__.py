"""Driven-dissipative Bose-Hubbard dimer with collective loss.

Simulation layers for a coherently driven two-mode Kerr system whose only
(default) loss channel is the collective jump operator a1 + a2: exact
mean-field flow in the large-N limit, truncated-Fock-space master equation
and quantum-jump unraveling, truncated Wigner stochastic sampling, and
parity-sectored Liouvillian spectral analysis.
"""

from bosedimer.core import DimerParams, ModeState, bare_params, from_site_basis, to_site_basis

__version__ = "0.1.0"

__all__ = [
    "DimerParams",
    "ModeState",
    "bare_params",
    "from_site_basis",
    "to_site_basis",
    "__version__",
]
