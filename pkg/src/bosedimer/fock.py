"""Exact quantum layer on a truncated two-mode Fock space.

Operators and Hamiltonians are sparse; density matrices are dense. Basis
ordering is row-major over occupations (n1, n2) and fixed for the whole run.
All generators take bare drive/interaction strengths from the scaling family
(F = f_tilde sqrt(N), U = u_tilde / N).
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import DimerParams, bare_params

_SQRT2 = math.sqrt(2.0)


class TruncationError(RuntimeError):
    """Raised when results show the Fock cutoff is too small."""


class DegenerateSteadyStateError(RuntimeError):
    """Raised when the numerical Liouvillian nullspace is not one dimensional."""


@dataclasses.dataclass(frozen=True)
class FockSpace:
    """Truncated occupation lattice for the two site modes."""

    nmax1: int
    nmax2: int

    def __post_init__(self):
        if self.nmax1 < 1 or self.nmax2 < 1:
            raise ValueError("per-mode cutoffs must be at least 1")

    @property
    def dim(self) -> int:
        return (self.nmax1 + 1) * (self.nmax2 + 1)

    def index(self, n1: int, n2: int) -> int:
        if not (0 <= n1 <= self.nmax1 and 0 <= n2 <= self.nmax2):
            raise ValueError(f"occupation ({n1}, {n2}) outside the truncation")
        return n1 * (self.nmax2 + 1) + n2

    @classmethod
    def for_params(cls, p: DimerParams, margin: int = 5) -> "FockSpace":
        # populations scale like n_scale with rescaled amplitudes of order
        # max(1, f_tilde); verified downstream by the doubling test
        nmax = math.ceil(3.0 * p.n_scale * max(1.0, p.f_tilde**2)) + margin
        return cls(nmax, nmax)


@dataclasses.dataclass(frozen=True)
class StateVector:
    """Normalized pure state on the truncated lattice."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"state vector norm deviates from 1 by {abs(nrm - 1.0):.2e}")
        object.__setattr__(self, "vector", v)


@dataclasses.dataclass(frozen=True)
class DensityOperator:
    """Hermitian unit-trace matrix; positivity is checked where it matters."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > 1e-10 * scale:
            raise ValueError("density matrix is not Hermitian to 1e-10")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise ValueError("density matrix trace deviates from 1 beyond 1e-10")
        object.__setattr__(self, "matrix", m)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def expectation(self, op) -> complex:
        return complex(np.trace(op @ self.matrix))


@dataclasses.dataclass(frozen=True)
class ModeOperators:
    """Annihilation operators: site modes and the derived collective modes."""

    a1: sparse.csr_matrix
    a2: sparse.csr_matrix
    a_b: sparse.csr_matrix
    a_a: sparse.csr_matrix


def _ladder(nmax: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1.0, nmax + 1)), 1, format="csr")


def build_operators(space: FockSpace) -> ModeOperators:
    i1 = sparse.identity(space.nmax1 + 1, format="csr")
    i2 = sparse.identity(space.nmax2 + 1, format="csr")
    a1 = sparse.kron(_ladder(space.nmax1), i2, format="csr")
    a2 = sparse.kron(i1, _ladder(space.nmax2), format="csr")
    a_b = ((a1 + a2) / _SQRT2).tocsr()
    a_a = ((a1 - a2) / _SQRT2).tocsr()
    return ModeOperators(a1, a2, a_b, a_a)


def _occupations(space: FockSpace):
    n1 = np.repeat(np.arange(space.nmax1 + 1.0), space.nmax2 + 1)
    n2 = np.tile(np.arange(space.nmax2 + 1.0), space.nmax1 + 1)
    return n1, n2


def build_hamiltonian_12(p: DimerParams, space: FockSpace) -> sparse.csr_matrix:
    """Site-basis Hamiltonian with bare drive and interaction strengths."""
    f_bare, u_bare = bare_params(p)
    ops = build_operators(space)
    n1, n2 = _occupations(space)
    diag = -p.delta * (n1 + n2) + u_bare * (n1 * (n1 - 1) + n2 * (n2 - 1))
    hop = (ops.a1.T @ ops.a2).tocsr()
    drive = (ops.a1 - ops.a2).tocsr()
    h = sparse.diags(diag, format="csr") - p.j_coupling * (hop + hop.T) \
        + f_bare * (drive + drive.T)
    return h.tocsr()


def build_hamiltonian_BA(p: DimerParams, space: FockSpace) -> sparse.csr_matrix:
    """Collective-mode form of the Hamiltonian on the same site lattice.

    Every term is assembled either as X^T X or as a T + T^T pair so the
    result is symmetric exactly, not just to round-off.
    """
    f_bare, u_bare = bare_params(p)
    ops = build_operators(space)
    b, a = ops.a_b, ops.a_a
    n_b = (b.T @ b).tocsr()
    n_a = (a.T @ a).tocsr()
    pb = (b @ b).tocsr()
    pa = (a @ a).tocsr()
    quart_b = (pb.T @ pb).tocsr()  # normal-ordered: lowering acts first
    quart_a = (pa.T @ pa).tocsr()
    cross = (pb.T @ pa).tocsr()
    y = (n_b @ n_a).tocsr()
    h = (-p.delta - p.j_coupling) * n_b + (-p.delta + p.j_coupling) * n_a \
        + _SQRT2 * f_bare * (a + a.T) \
        + 0.5 * u_bare * (quart_b + quart_a + cross + cross.T + 2.0 * (y + y.T))
    return h.tocsr()


def _jump_operators(p: DimerParams, space: FockSpace):
    """(rate, operator) pairs for the collective and local loss channels."""
    ops = build_operators(space)
    channels = [(p.gamma, (ops.a1 + ops.a2).tocsr())]
    if p.kappa:
        channels.append((p.kappa, ops.a1))
        channels.append((p.kappa, ops.a2))
    return channels


def _rho_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    if isinstance(rho, StateVector):
        return np.outer(rho.vector, rho.vector.conj())
    return np.asarray(rho, dtype=complex)


def lindblad_rhs(rho, p: DimerParams, space: FockSpace) -> np.ndarray:
    """Master-equation generator applied to a dense density matrix."""
    m = _rho_matrix(rho)
    h = build_hamiltonian_12(p, space)
    out = -1j * (h @ m - m @ h)
    for rate, c in _jump_operators(p, space):
        cm = c @ m
        cc = (c.T.conj() @ c).tocsr()
        out += rate * (cm @ c.T.conj() - 0.5 * (cc @ m + m @ cc))
    return out


def coherent_state(alpha1: complex, alpha2: complex, space: FockSpace) -> StateVector:
    """Truncated product coherent state, renormalized."""
    def mode(alpha, nmax):
        c = np.empty(nmax + 1, dtype=complex)
        c[0] = 1.0
        for n in range(1, nmax + 1):
            c[n] = c[n - 1] * alpha / math.sqrt(n)
        return c * math.exp(-0.5 * abs(alpha) ** 2)

    vec = np.kron(mode(alpha1, space.nmax1), mode(alpha2, space.nmax2))
    tail = 1.0 - float(np.vdot(vec, vec).real)
    if tail > 1e-8:
        warnings.warn(f"coherent-state tail mass {tail:.2e} beyond the cutoff",
                      RuntimeWarning, stacklevel=2)
    return StateVector(vec / np.linalg.norm(vec))


def _sample_grid(t_final: float, interval: float) -> np.ndarray:
    n = int(math.floor(t_final / interval + 1e-9)) + 1
    return np.arange(n) * interval


@dataclasses.dataclass(frozen=True)
class MasterSeries:
    """Expectation time series from direct master-equation integration."""

    times: np.ndarray
    mean_a_a: np.ndarray
    mean_a_b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    rho_final: DensityOperator
    trace_drift: float
    extras: dict


def integrate_master(rho0, p: DimerParams, space: FockSpace, t_final: float,
                     sample_interval: float | None = None, rel_tol: float = 1e-8,
                     extra_observables: dict | None = None) -> MasterSeries:
    """Adaptive integration of the master equation with sampled expectations."""
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    m0 = _rho_matrix(rho0)
    dim = space.dim
    if m0.shape != (dim, dim):
        raise ValueError(f"density matrix shape {m0.shape} does not match dim {dim}")

    h = build_hamiltonian_12(p, space)
    channels = [(rate, c, (c.T.conj() @ c).tocsr()) for rate, c in _jump_operators(p, space)]

    def rhs(t, y):
        m = y.reshape(dim, dim)
        out = -1j * (h @ m - m @ h)
        for rate, c, cc in channels:
            out += rate * ((c @ m) @ c.T.conj() - 0.5 * (cc @ m + m @ cc))
        return out.ravel()

    times = _sample_grid(t_final, sample_interval)
    sol = solve_ivp(rhs, (0.0, t_final), m0.ravel(), method="RK45",
                    rtol=rel_tol, atol=1e-10, t_eval=times)
    if not sol.success:
        raise RuntimeError(f"master-equation integration failed: {sol.message}")

    ops = build_operators(space)
    extra_observables = extra_observables or {}
    n_t = times.size
    mean_a_a = np.empty(n_t, complex)
    mean_a_b = np.empty(n_t, complex)
    n_a = np.empty(n_t)
    n_b = np.empty(n_t)
    extras = {k: np.empty(n_t, complex) for k in extra_observables}
    na_op = (ops.a_a.T.conj() @ ops.a_a).tocsr()
    nb_op = (ops.a_b.T.conj() @ ops.a_b).tocsr()
    for k in range(n_t):
        m = sol.y[:, k].reshape(dim, dim)
        mean_a_a[k] = np.trace(ops.a_a @ m)
        mean_a_b[k] = np.trace(ops.a_b @ m)
        n_a[k] = np.trace(na_op @ m).real
        n_b[k] = np.trace(nb_op @ m).real
        for name, op in extra_observables.items():
            extras[name][k] = np.trace(op @ m)

    m_fin = sol.y[:, -1].reshape(dim, dim)
    drift = abs(np.trace(m_fin).real - 1.0)
    m_fin = 0.5 * (m_fin + m_fin.conj().T)
    m_fin = m_fin / np.trace(m_fin).real
    lam_min = float(np.linalg.eigvalsh(m_fin)[0])
    if lam_min < -1e-6:
        raise TruncationError(
            f"final state has eigenvalue {lam_min:.2e}; enlarge the Fock cutoff")
    return MasterSeries(times, mean_a_a, mean_a_b, n_a, n_b,
                        DensityOperator(m_fin), float(drift), extras)


def steady_state(p: DimerParams, space: FockSpace) -> DensityOperator:
    """Unique null mode of the vectorized generator, Hermitized and normalized."""
    from . import spectra  # deferred: spectra depends on this module's operators

    lio = spectra.build_liouvillian(p, space)
    res = spectra.leading_eigenvalues(lio, k=2, gamma=p.gamma)
    lam = res.eigenvalues
    zero = np.abs(lam) < 1e-9 * p.gamma
    if zero.sum() != 1:
        raise DegenerateSteadyStateError(
            f"nullspace dimension {int(zero.sum())} (eigenvalues {lam})")
    vec = res.eigenvectors[:, int(np.flatnonzero(zero)[0])]
    m = vec.reshape(space.dim, space.dim)
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr) < 1e-12:
        raise DegenerateSteadyStateError("null mode is traceless; not a state")
    m = m / tr
    residual = np.linalg.norm(lio.matrix @ m.ravel())
    if residual > 1e-9:
        raise TruncationError(f"steady-state residual {residual:.2e} exceeds 1e-9")
    return DensityOperator(m)


@dataclasses.dataclass(frozen=True)
class JumpEnsemble:
    """Trajectory-averaged expectations with per-sample standard errors."""

    times: np.ndarray
    mean_a_a: np.ndarray
    mean_a_b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    stderr: dict
    n_traj: int
    n_jumps: int


class _EigPropagator:
    """Non-Hermitian segment propagator via eigendecomposition.

    exp(-i H_eff t) applied through V diag(e^{-i w t}) V^{-1}; exact up to
    the decomposition's round-off, so sample stepping is a single matrix
    product and jump-time refinement reuses the same factors.
    """

    def __init__(self, h_eff: np.ndarray, dt: float):
        self.w, self.v = np.linalg.eig(h_eff)
        self.vinv = np.linalg.inv(self.v)
        cond = np.linalg.cond(self.v)
        if cond > 1e10:
            raise np.linalg.LinAlgError(f"eigenbasis condition number {cond:.2e}")
        self.step_matrix = self.v @ (np.exp(-1j * self.w * dt)[:, None] * self.vinv)
        self.dt = dt

    def step(self, psi_block: np.ndarray) -> np.ndarray:
        return self.step_matrix @ psi_block

    def advance(self, psi: np.ndarray, dt: float) -> np.ndarray:
        return self.v @ (np.exp(-1j * self.w * dt) * (self.vinv @ psi))

    def norm2_in_step(self, psi: np.ndarray):
        c = self.vinv @ psi

        def norm2(tau):
            return float(np.linalg.norm(self.v @ (np.exp(-1j * self.w * tau) * c)) ** 2)

        return norm2


class _OdePropagator:
    """Fallback segment propagator using adaptive integration."""

    def __init__(self, h_eff: np.ndarray, dt: float):
        self.h_eff = h_eff
        self.dt = dt

    def _solve(self, psi, dt):
        return solve_ivp(lambda t, y: -1j * (self.h_eff @ y), (0.0, dt), psi,
                         method="RK45", rtol=1e-10, atol=1e-12, dense_output=True)

    def step(self, psi_block: np.ndarray) -> np.ndarray:
        out = np.empty_like(psi_block)
        for k in range(psi_block.shape[1]):
            out[:, k] = self._solve(psi_block[:, k], self.dt).sol(self.dt)
        return out

    def advance(self, psi: np.ndarray, dt: float) -> np.ndarray:
        return self._solve(psi, dt).sol(dt)

    def norm2_in_step(self, psi: np.ndarray):
        sol = self._solve(psi, self.dt).sol

        def norm2(tau):
            return float(np.linalg.norm(sol(tau)) ** 2)

        return norm2


def _refine_jump_time(norm2, threshold: float, t_hi: float) -> float:
    # squared norm decays monotonically between jumps, so the first sample
    # crossing brackets the root; refine to 1e-10 relative accuracy
    f = lambda tau: norm2(tau) - threshold
    if f(0.0) <= 0.0:
        return 0.0
    return brentq(f, 0.0, t_hi, xtol=1e-10 * max(t_hi, 1e-6), rtol=1e-12)


def quantum_jump_ensemble(psi0, p: DimerParams, space: FockSpace, t_final: float,
                          n_traj: int, seed: int, sample_interval: float | None = None,
                          chunk_size: int = 256, method: str = "eig") -> JumpEnsemble:
    """Photon-counting unraveling averaged over deterministic substreams.

    Each trajectory owns a spawned RNG substream, so results are
    bit-reproducible for a given (seed, n_traj, grid) regardless of chunking.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    vec0 = psi0.vector if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=complex)
    dim = space.dim
    if vec0.shape != (dim,):
        raise ValueError(f"state shape {vec0.shape} does not match dim {dim}")

    h_eff = np.asarray(build_hamiltonian_12(p, space).todense(), dtype=complex)
    channels = _jump_operators(p, space)
    for rate, c in channels:
        h_eff -= 0.5j * rate * np.asarray((c.T.conj() @ c).todense())
    times = _sample_grid(t_final, sample_interval)
    n_t = times.size

    if method == "eig":
        try:
            prop = _EigPropagator(h_eff, sample_interval)
        except np.linalg.LinAlgError:
            prop = _OdePropagator(h_eff, sample_interval)
    elif method == "ode":
        prop = _OdePropagator(h_eff, sample_interval)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    ops = build_operators(space)
    a_a = np.asarray(ops.a_a.todense())
    a_b = np.asarray(ops.a_b.todense())
    jump_mats = [np.asarray(c.todense()) for _, c in channels]
    rates = np.array([rate for rate, _ in channels])

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_traj)]
    acc = {k: np.zeros(n_t) for k in
           ("re_a", "im_a", "re_b", "im_b", "n_a", "n_b",
            "re_a2", "im_a2", "re_b2", "im_b2", "n_a2", "n_b2")}
    n_jumps = 0

    def record(psi_block, k):
        norm2 = np.einsum("ij,ij->j", psi_block.conj(), psi_block).real
        pa = a_a @ psi_block
        pb = a_b @ psi_block
        ea = np.einsum("ij,ij->j", psi_block.conj(), pa) / norm2
        eb = np.einsum("ij,ij->j", psi_block.conj(), pb) / norm2
        na = np.einsum("ij,ij->j", pa.conj(), pa).real / norm2
        nb = np.einsum("ij,ij->j", pb.conj(), pb).real / norm2
        for key, val in (("re_a", ea.real), ("im_a", ea.imag), ("re_b", eb.real),
                         ("im_b", eb.imag), ("n_a", na), ("n_b", nb)):
            acc[key][k] += val.sum()
            acc[key + "2"][k] += (val**2).sum()

    for start in range(0, n_traj, chunk_size):
        width = min(chunk_size, n_traj - start)
        block = np.tile(vec0[:, None], (1, width)).astype(complex)
        thresholds = np.array([streams[start + j].uniform() for j in range(width)])
        record(block, 0)
        for k in range(1, n_t):
            prev = block.copy()
            block = prop.step(block)
            norm2 = np.einsum("ij,ij->j", block.conj(), block).real
            crossed = np.flatnonzero(norm2 < thresholds)
            for j in crossed:
                rng = streams[start + j]
                psi = prev[:, j]
                t_left = sample_interval
                while True:
                    norm2_fn = prop.norm2_in_step(psi)
                    tau = _refine_jump_time(norm2_fn, thresholds[j], t_left)
                    psi_j = prop.advance(psi, tau)
                    weights = rates * np.array([np.linalg.norm(c @ psi_j) ** 2
                                                for c in jump_mats])
                    channel = rng.choice(len(jump_mats), p=weights / weights.sum())
                    psi_j = jump_mats[channel] @ psi_j
                    psi_j /= np.linalg.norm(psi_j)
                    n_jumps += 1
                    thresholds[j] = rng.uniform()
                    t_left = t_left - tau
                    psi = prop.advance(psi_j, t_left)
                    if np.linalg.norm(psi) ** 2 >= thresholds[j]:
                        break
                    psi = psi_j
                block[:, j] = psi
            record(block, k)

    def stats(key):
        mean = acc[key] / n_traj
        var = np.maximum(acc[key + "2"] / n_traj - mean**2, 0.0)
        stderr = np.sqrt(var / n_traj) if n_traj > 1 else np.zeros(n_t)
        return mean, stderr

    re_a, se_re_a = stats("re_a")
    im_a, se_im_a = stats("im_a")
    re_b, se_re_b = stats("re_b")
    im_b, se_im_b = stats("im_b")
    na, se_na = stats("n_a")
    nb, se_nb = stats("n_b")
    stderr = {"re_a_a": se_re_a, "im_a_a": se_im_a, "re_a_b": se_re_b,
              "im_a_b": se_im_b, "n_a": se_na, "n_b": se_nb}
    return JumpEnsemble(times, re_a + 1j * im_a, re_b + 1j * im_b, na, nb,
                        stderr, n_traj, n_jumps)
