"""Truncated Wigner ensemble: Langevin drift, Wigner sampling, Heun stepping.

The drift keeps the symmetric-ordering shift (|alpha|^2 - 1) of the cubic
term verbatim, and the noise is independent per site mode by default.  The
collective variant, where the gamma channel drives both sites with one
shared complex noise, is available as a switch: a nonlocal loss channel
would canonically produce cross-correlated diffusion, and keeping both lets
the two be compared without re-deriving the equations.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import DimerParams, bare_params

#: integrator step ceiling in units of 1/gamma (also the default step)
MAX_DT = 1e-3
#: a trajectory whose amplitude passes this is aborted and reported
DIVERGENCE_LIMIT = 1e6
#: supported noise correlation variants
NOISE_MODES = ("independent", "collective")

_CHUNK_BYTES = 2e8


@dataclasses.dataclass(frozen=True)
class PhasePoint:
    """One phase-space sample (bare, unrescaled site amplitudes)."""

    alpha1: complex
    alpha2: complex

    def __post_init__(self):
        a1, a2 = complex(self.alpha1), complex(self.alpha2)
        if not (math.isfinite(abs(a1)) and math.isfinite(abs(a2))):
            raise ValueError("phase-space amplitudes must be finite")
        object.__setattr__(self, "alpha1", a1)
        object.__setattr__(self, "alpha2", a2)


def _drift(a1, a2, p: DimerParams, f_bare: float, u_bare: float):
    lin = 1j * p.delta - 0.5 * p.gamma - 0.5 * p.kappa
    cpl = 1j * p.j_coupling - 0.5 * p.gamma
    d1 = (lin - 2j * u_bare * (np.abs(a1) ** 2 - 1.0)) * a1 + cpl * a2 - 1j * f_bare
    d2 = (lin - 2j * u_bare * (np.abs(a2) ** 2 - 1.0)) * a2 + cpl * a1 + 1j * f_bare
    return d1, d2


def twa_drift(pt: PhasePoint, p: DimerParams) -> PhasePoint:
    """Deterministic part of the Langevin flow at one phase point."""
    f_bare, u_bare = bare_params(p)
    d1, d2 = _drift(pt.alpha1, pt.alpha2, p, f_bare, u_bare)
    return PhasePoint(complex(d1), complex(d2))


def sample_wigner(alpha1_0: complex, alpha2_0: complex, n_traj: int,
                  seed=None):
    """Coherent-state Wigner samples, one substream per trajectory.

    Each mode gets alpha_0 + (xi_x + i xi_y)/2 with standard-normal
    quadrature draws (variance 1/4 per quadrature).  The per-trajectory
    substreams match the ones twa_ensemble uses, so its initial ensemble can
    be reproduced exactly.
    """
    seeds = np.random.SeedSequence(seed).spawn(n_traj)
    a1 = np.empty(n_traj, complex)
    a2 = np.empty(n_traj, complex)
    for i, s in enumerate(seeds):
        z = np.random.default_rng(s).standard_normal(4)
        a1[i] = alpha1_0 + 0.5 * (z[0] + 1j * z[1])
        a2[i] = alpha2_0 + 0.5 * (z[2] + 1j * z[3])
    return a1, a2


@dataclasses.dataclass(frozen=True)
class TwaSeries:
    """Trajectory-averaged phase-space expectations with standard errors.

    n_a/n_b are symmetric-order corrected occupations (mean |alpha|^2 - 1/2);
    diverged trajectories are dropped from every statistic and counted.
    """

    times: np.ndarray
    mean_a_a: np.ndarray
    mean_a_b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    stderr: dict
    n_traj: int
    n_diverged: int


def _noise_weights(p: DimerParams, noise: str, dt: float):
    # per-quadrature scale c makes E|w|^2 = 2 c^2 = rate * dt / 2 per channel
    c_total = 0.5 * math.sqrt((p.gamma + p.kappa) * dt)
    c_shared = 0.5 * math.sqrt(p.gamma * dt)
    c_local = 0.5 * math.sqrt(p.kappa * dt)
    if noise == "independent":
        return c_total, 0.0, 0.0
    return 0.0, c_shared, c_local


def twa_ensemble(alpha1_0: complex, alpha2_0: complex, p: DimerParams,
                 t_final: float, dt: float | None = None, n_traj: int = 1000,
                 seed=None, sample_interval: float | None = None,
                 noise: str = "independent") -> TwaSeries:
    """Stochastic Heun integration of the Wigner ensemble.

    Fixed step (dt <= 1e-3/gamma), additive noise applied once per step to
    both the predictor and the corrector.  Trajectories are bit-reproducible
    for a given seed regardless of chunking because every trajectory draws
    its initial point and noise path from its own seed substream.
    """
    if noise not in NOISE_MODES:
        raise ValueError(f"noise must be one of {NOISE_MODES}, got {noise!r}")
    if dt is None:
        dt = MAX_DT / p.gamma
    if dt > MAX_DT / p.gamma * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt:.2e} exceeds the {MAX_DT:.0e}/gamma ceiling")
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if n_traj < 2:
        raise ValueError("need at least 2 trajectories for standard errors")
    PhasePoint(alpha1_0, alpha2_0)  # finiteness check

    n_steps = max(1, int(round(t_final / dt)))
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    every = max(1, int(round(sample_interval / dt)))
    n_samples = n_steps // every + 1
    times = np.arange(n_samples) * (every * dt)

    f_bare, u_bare = bare_params(p)
    c_ind, c_shared, c_local = _noise_weights(p, noise, dt)
    # collective noise with local loss needs a third normal pair per step
    n_normals = 6 if (noise == "collective" and p.kappa > 0) else 4

    seeds = np.random.SeedSequence(seed).spawn(n_traj)
    chunk = int(max(16, min(1024, _CHUNK_BYTES / (n_steps * n_normals * 8))))

    sums = np.zeros((4, n_samples), complex)    # aA, aB, |aA|^2, |aB|^2
    sumsq = np.zeros((6, n_samples))            # re/im aA, re/im aB, nA, nB
    kept = 0
    n_diverged = 0
    for start in range(0, n_traj, chunk):
        batch = seeds[start:start + chunk]
        c = len(batch)
        noise_block = np.empty((c, n_steps, n_normals))
        a1 = np.empty(c, complex)
        a2 = np.empty(c, complex)
        for i, s in enumerate(batch):
            rng = np.random.default_rng(s)
            z0 = rng.standard_normal(4)
            a1[i] = alpha1_0 + 0.5 * (z0[0] + 1j * z0[1])
            a2[i] = alpha2_0 + 0.5 * (z0[2] + 1j * z0[3])
            noise_block[i] = rng.standard_normal((n_steps, n_normals))

        samp1 = np.empty((c, n_samples), complex)
        samp2 = np.empty((c, n_samples), complex)
        alive = np.ones(c, bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(n_steps + 1):
                if s % every == 0 and s // every < n_samples:
                    samp1[:, s // every] = a1
                    samp2[:, s // every] = a2
                if s == n_steps:
                    break
                z = noise_block[:, s, :]
                w1 = c_ind * (z[:, 0] + 1j * z[:, 1]) \
                    + c_shared * (z[:, 0] + 1j * z[:, 1]) \
                    + c_local * (z[:, 2] + 1j * z[:, 3])
                if n_normals == 6:
                    w2 = c_shared * (z[:, 0] + 1j * z[:, 1]) \
                        + c_local * (z[:, 4] + 1j * z[:, 5])
                else:
                    w2 = c_ind * (z[:, 2] + 1j * z[:, 3]) \
                        + c_shared * (z[:, 0] + 1j * z[:, 1])
                d1, d2 = _drift(a1, a2, p, f_bare, u_bare)
                e1 = a1 + dt * d1 + w1
                e2 = a2 + dt * d2 + w2
                g1, g2 = _drift(e1, e2, p, f_bare, u_bare)
                n1 = a1 + 0.5 * dt * (d1 + g1) + w1
                n2 = a2 + 0.5 * dt * (d2 + g2) + w2
                bad = ~(np.isfinite(n1.real) & np.isfinite(n1.imag)
                        & np.isfinite(n2.real) & np.isfinite(n2.imag)) \
                    | (np.abs(n1) > DIVERGENCE_LIMIT) \
                    | (np.abs(n2) > DIVERGENCE_LIMIT)
                newly = bad & alive
                if newly.any():
                    alive &= ~newly
                    n1 = np.where(alive, n1, 0.0)
                    n2 = np.where(alive, n2, 0.0)
                a1 = np.where(alive, n1, a1 * 0.0)
                a2 = np.where(alive, n2, a2 * 0.0)

        n_diverged += int((~alive).sum())
        if alive.any():
            s1, s2 = samp1[alive], samp2[alive]
            a_b = (s1 + s2) / math.sqrt(2.0)
            a_a = (s1 - s2) / math.sqrt(2.0)
            n_a_tr = np.abs(a_a) ** 2
            n_b_tr = np.abs(a_b) ** 2
            kept += int(alive.sum())
            sums[0] += a_a.sum(axis=0)
            sums[1] += a_b.sum(axis=0)
            sums[2] += n_a_tr.sum(axis=0)
            sums[3] += n_b_tr.sum(axis=0)
            sumsq[0] += (a_a.real**2).sum(axis=0)
            sumsq[1] += (a_a.imag**2).sum(axis=0)
            sumsq[2] += (a_b.real**2).sum(axis=0)
            sumsq[3] += (a_b.imag**2).sum(axis=0)
            sumsq[4] += (n_a_tr**2).sum(axis=0)
            sumsq[5] += (n_b_tr**2).sum(axis=0)

    if kept < 2:
        raise RuntimeError(
            f"only {kept} trajectories survived the divergence guard")

    mean_a_a = sums[0] / kept
    mean_a_b = sums[1] / kept
    n_a = sums[2].real / kept - 0.5
    n_b = sums[3].real / kept - 0.5

    def se(sq, mean):
        var = np.maximum(sq / kept - np.abs(mean) ** 2, 0.0)
        return np.sqrt(var / max(kept - 1, 1))

    stderr = {
        "re_a_a": se(sumsq[0], mean_a_a.real),
        "im_a_a": se(sumsq[1], mean_a_a.imag),
        "re_a_b": se(sumsq[2], mean_a_b.real),
        "im_a_b": se(sumsq[3], mean_a_b.imag),
        "n_a": se(sumsq[4], sums[2].real / kept),
        "n_b": se(sumsq[5], sums[3].real / kept),
    }
    return TwaSeries(times, mean_a_a, mean_a_b, n_a, n_b, stderr,
                     n_traj, n_diverged)
