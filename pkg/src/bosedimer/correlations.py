"""Second-order coherence g2_j(tau) from the steady state via quantum regression.

A detection in mode j collapses the steady state to
rho'_j = a_j rho_ss a_j^dag / <a_j^dag a_j>_ss; propagating rho'_j under the
full generator and reading out the same occupation gives
g2_j(tau) = <a_j^dag a_j>_{rho'(tau)} / <a_j^dag a_j>_ss.  Propagation reuses
integrate_master, so there is no second evolution code path.  The eigenmode
variant expands rho'_j over a truncated set of generator eigenmodes instead;
a harvested complex mode whose conjugate partner fell outside the truncation
is completed analytically (Hermiticity of rho'_j forces the partner term to
be the exact conjugate), keeping the curve real.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import DimerParams
from .fock import (FockSpace, _rho_matrix, build_operators, integrate_master,
                   steady_state)
from .spectra import REAL_IM_TOL, SpectrumResult, eigenmode_expansion

MODE_LABELS = ("1", "2", "A", "B")

#: steady-state occupations below this are rejected (g2 undefined)
OCCUPATION_FLOOR = 1e-12
#: allowed imaginary residue of the normalized trace curve
REAL_TOL = 1e-8
#: default delay horizon, in units of 1/gamma
DEFAULT_TAU_SPAN = 20.0
#: default number of grid points over [0, tau_max]
DEFAULT_TAU_POINTS = 500


@dataclasses.dataclass(frozen=True)
class G2Curve:
    """Normalized two-time intensity correlation over a delay grid."""

    mode_label: str
    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.mode_label not in MODE_LABELS:
            raise ValueError(f"mode_label must be one of {MODE_LABELS}")
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.ndim != 1 or values.shape != taus.shape:
            raise ValueError("taus and values must be matching 1-D arrays")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)


def normalize_mode(mode) -> str:
    label = str(mode).upper()
    if label not in MODE_LABELS:
        raise ValueError(f"unknown mode label {mode!r}; expected one of {MODE_LABELS}")
    return label


def mode_operator(mode, space: FockSpace):
    """Annihilation operator for a mode label (site 1/2, collective A/B)."""
    ops = build_operators(space)
    return {"1": ops.a1, "2": ops.a2, "A": ops.a_a, "B": ops.a_b}[normalize_mode(mode)]


def post_detection_state(rho, a_op):
    """Collapsed state after one detection: (a rho a^dag / <a^dag a>, <a^dag a>)."""
    m = _rho_matrix(rho)
    occupation = float(np.trace((a_op.T.conj() @ a_op) @ m).real)
    if occupation < OCCUPATION_FLOOR:
        raise ValueError(
            f"steady-state occupation {occupation:.2e} below {OCCUPATION_FLOOR:.0e};"
            " g2 is undefined for an unoccupied mode")
    collapsed = (a_op @ m) @ a_op.T.conj()
    collapsed = 0.5 * (collapsed + collapsed.conj().T)
    return collapsed / occupation, occupation


def _real_curve(values: np.ndarray) -> np.ndarray:
    residue = float(np.abs(values.imag).max())
    if residue > REAL_TOL * max(1.0, float(np.abs(values.real).max())):
        raise RuntimeError(f"g2 trace has imaginary residue {residue:.2e}")
    return values.real.copy()


def _tau_grid_defaults(p: DimerParams, tau_max, sample_interval):
    if tau_max is None:
        tau_max = DEFAULT_TAU_SPAN / p.gamma
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    if sample_interval is None:
        sample_interval = tau_max / (DEFAULT_TAU_POINTS - 1)
    return tau_max, sample_interval


def g2(mode, p: DimerParams, space: FockSpace, tau_max: float | None = None,
       sample_interval: float | None = None, rho_ss=None,
       rel_tol: float = 1e-8) -> G2Curve:
    """Direct quantum-regression curve: collapse, propagate, read out.

    rho_ss defaults to the computed steady state; passing it explicitly both
    saves recomputation across modes and covers generators whose null space
    needs analytic construction.
    """
    tau_max, sample_interval = _tau_grid_defaults(p, tau_max, sample_interval)
    label = normalize_mode(mode)
    a_op = mode_operator(label, space)
    if rho_ss is None:
        rho_ss = steady_state(p, space)
    collapsed, occupation = post_detection_state(rho_ss, a_op)
    n_op = (a_op.T.conj() @ a_op).tocsr()
    series = integrate_master(collapsed, p, space, t_final=tau_max,
                              sample_interval=sample_interval, rel_tol=rel_tol,
                              extra_observables={"n_mode": n_op})
    values = _real_curve(series.extras["n_mode"] / occupation)
    return G2Curve(label, series.times, values)


def g2_via_eigenmodes(mode, p: DimerParams, space: FockSpace,
                      spectrum: SpectrumResult, tau_max: float | None = None,
                      sample_interval: float | None = None,
                      rho_ss=None) -> G2Curve:
    """Same curve from the eigenmode expansion of the collapsed state.

    Restricting the expansion to the k modes carried by `spectrum` shows how
    many slow modes dominate the measured coherence.
    """
    if not np.isfinite(spectrum.left_modes).all():
        raise ValueError("spectrum must carry left eigenvectors (left=True)")
    tau_max, sample_interval = _tau_grid_defaults(p, tau_max, sample_interval)
    label = normalize_mode(mode)
    a_op = mode_operator(label, space)
    if rho_ss is None:
        rho_ss = spectrum.steady_mode()
    collapsed, occupation = post_detection_state(rho_ss, a_op)
    coeffs = eigenmode_expansion(collapsed, spectrum)
    n_op = a_op.T.conj() @ a_op
    weights = coeffs * np.array([np.trace(n_op @ m) for m in spectrum.modes])

    lams = spectrum.eigenvalues
    # conjugate-closure bookkeeping: a complex eigenvalue whose partner was
    # not harvested contributes twice its real part (the partner term is the
    # exact conjugate for a Hermitian initial state)
    pair_tol = 1e-6 * max(p.gamma, float(np.abs(lams).max()))
    complex_mask = np.abs(lams.imag) > REAL_IM_TOL * p.gamma
    unpaired = np.array([
        complex_mask[j]
        and not np.any(np.abs(lams - np.conj(lams[j])) < pair_tol)
        for j in range(lams.size)])

    n_steps = int(np.floor(tau_max / sample_interval + 1e-9)) + 1
    taus = np.arange(n_steps) * sample_interval
    phases = np.exp(np.outer(taus, lams))
    closed = phases[:, ~unpaired] @ weights[~unpaired]
    open_part = 2.0 * (phases[:, unpaired] @ weights[unpaired]).real
    values = _real_curve(closed / occupation) + open_part / occupation
    return G2Curve(label, taus, values)
