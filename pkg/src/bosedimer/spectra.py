"""Liouvillian superoperator: assembly, parity blocks, leading eigenvalues.

The density matrix is vectorized row-wise (C order), so a sandwich
C1 rho C2 maps to (C1 kron C2^T) vec(rho).  The weak Z2 symmetry (signed
site swap) splits the vectorized space into parity sectors; the change of
basis uses the dyad orbits of the parity superoperator, under which the
cross-sector blocks cancel exactly in floating point because mirrored
matrix elements are assembled from identical float products.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

from .core import DimerParams
from .fock import FockSpace, _jump_operators, _occupations, build_hamiltonian_12

_SQRT2 = math.sqrt(2.0)

#: dense eigensolver below this block dimension (fast and unconditionally robust)
DENSE_CUTOFF = 600
#: dense fallback ceiling when the iterative solver fails to converge
DENSE_FALLBACK_CUTOFF = 4000
#: default assembly memory cap in bytes
MEMORY_CAP = 4e9


class LiouvillianSizeError(MemoryError):
    """Raised when the assembled superoperator would exceed the memory cap."""


class EigensolverError(RuntimeError):
    """Raised when eigenvalues cannot be computed to the required residual."""


def vectorize(rho: np.ndarray) -> np.ndarray:
    m = np.asarray(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("vectorize expects a square matrix")
    return m.ravel()


def unvectorize(v: np.ndarray) -> np.ndarray:
    vec = np.asarray(v).ravel()
    dim = math.isqrt(vec.size)
    if dim * dim != vec.size:
        raise ValueError(f"length {vec.size} is not a perfect square")
    return vec.reshape(dim, dim)


def parity_operator(space: FockSpace) -> sparse.csr_matrix:
    """Signed swap P |n1, n2> = (-1)^(n1+n2) |n2, n1>; the bonding-mode parity."""
    if space.nmax1 != space.nmax2:
        raise ValueError("parity requires equal cutoffs on the two modes")
    n1, n2 = _occupations(space)
    cols = np.arange(space.dim)
    rows = (n2 * (space.nmax2 + 1) + n1).astype(int)
    signs = (-1.0) ** (n1 + n2)
    return sparse.csr_matrix((signs, (rows, cols)), shape=(space.dim, space.dim))


def parity_superoperator(space: FockSpace) -> sparse.csr_matrix:
    p = parity_operator(space)
    return sparse.kron(p, p.conj(), format="csr")


def _dyad_orbits(space: FockSpace):
    """Swap image, sign, and orbit classification for every basis dyad."""
    n1, n2 = _occupations(space)
    dim = space.dim
    state_swap = (n2 * (space.nmax2 + 1) + n1).astype(int)
    state_sign = (-1.0) ** (n1 + n2).astype(int)
    x = np.arange(dim * dim)
    i, j = np.divmod(x, dim)
    sigma = state_swap[i] * dim + state_swap[j]
    sign = state_sign[i] * state_sign[j]
    return sigma, sign


def _sector_bases(space: FockSpace):
    """Sparse orthonormal bases (columns) of the +/- parity eigenspaces."""
    sigma, sign = _dyad_orbits(space)
    x = np.arange(sigma.size)
    fixed = x[sigma == x]
    reps = x[x < sigma]
    u = 1.0 / _SQRT2
    # + sector: fixed dyads, then symmetrized pairs; - sector: antisymmetrized pairs
    rows_p = np.concatenate([fixed, reps, sigma[reps]])
    cols_p = np.concatenate([np.arange(fixed.size),
                             fixed.size + np.arange(reps.size),
                             fixed.size + np.arange(reps.size)])
    vals_p = np.concatenate([np.ones(fixed.size), np.full(reps.size, u),
                             u * sign[reps]])
    d_plus = fixed.size + reps.size
    basis_p = sparse.csr_matrix((vals_p, (rows_p, cols_p)), shape=(sigma.size, d_plus))
    rows_m = np.concatenate([reps, sigma[reps]])
    cols_m = np.concatenate([np.arange(reps.size), np.arange(reps.size)])
    vals_m = np.concatenate([np.full(reps.size, u), -u * sign[reps]])
    basis_m = sparse.csr_matrix((vals_m, (rows_m, cols_m)), shape=(sigma.size, reps.size))
    permutation = np.concatenate([fixed, reps, reps])
    return basis_p, basis_m, permutation


@dataclasses.dataclass(frozen=True)
class LiouvillianMatrix:
    """Vectorized generator with its parity-sector bookkeeping.

    sector_permutation lists the representative dyad index of each orbit
    basis vector, + sector first; sector_sizes = (d+, d-) sum to dim^2.
    """

    matrix: sparse.csr_matrix
    space: FockSpace
    sector_permutation: np.ndarray | None
    sector_sizes: tuple | None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _estimate_nnz(h: sparse.csr_matrix, channels, dim: int) -> int:
    total = 2 * h.nnz * dim
    for _, c in channels:
        cc = (c.T.conj() @ c).tocsr()
        total += c.nnz**2 + 2 * cc.nnz * dim
    return total


#: COLAMD splu fill measured on the 25.2k-dim parity block (75M LU nonzeros)
SPLU_FILL_ANCHOR = (25200, 194.0)


def _lu_bytes(nnz: int, dim: int) -> float:
    # fill factor extrapolated linearly in dim from the measured anchor
    anchor_dim, anchor_fill = SPLU_FILL_ANCHOR
    return 16.0 * nnz * anchor_fill * (dim / anchor_dim)


def ensure_feasible(p: DimerParams, space: FockSpace,
                    memory_cap: float = MEMORY_CAP) -> None:
    """Abort with size estimates before any large allocation happens.

    Checks both the assembled generator and the splu fill of one parity
    block, the two allocations that dominate spectral work.
    """
    h = build_hamiltonian_12(p, space)
    channels = _jump_operators(p, space)
    dim = space.dim
    est_nnz = _estimate_nnz(h, channels, dim)
    est_bytes = 32 * est_nnz
    if est_bytes > memory_cap:
        raise LiouvillianSizeError(
            f"estimated {est_bytes / 1e9:.1f} GB for dim^2 = {dim**2} "
            f"exceeds the {memory_cap / 1e9:.1f} GB cap")
    block_lu = _lu_bytes(est_nnz // 2, dim**2 // 2)
    if block_lu > memory_cap:
        raise LiouvillianSizeError(
            f"shift-invert factorization of a {dim**2 // 2}-dim parity block "
            f"needs an estimated {block_lu / 1e9:.1f} GB; exceeds the "
            f"{memory_cap / 1e9:.1f} GB cap")


def build_liouvillian(p: DimerParams, space: FockSpace,
                      memory_cap: float = MEMORY_CAP) -> LiouvillianMatrix:
    """Sparse matrix of the master-equation generator, row-wise convention."""
    ensure_feasible(p, space, memory_cap)
    h = build_hamiltonian_12(p, space)
    channels = _jump_operators(p, space)
    dim = space.dim
    eye = sparse.identity(dim, format="csr")
    lio = -1j * (sparse.kron(h, eye) - sparse.kron(eye, h.T))
    # channels sharing a rate are swap partners; assembling them as one term
    # keeps the mirrored matrix elements bitwise paired, so the parity
    # sectors decouple exactly rather than to round-off
    by_rate: dict = {}
    for rate, c in channels:
        by_rate.setdefault(rate, []).append(c)
    for rate, group in by_rate.items():
        sandwich = sum(sparse.kron(c, c.conj()) for c in group)
        cc = sum((c.T.conj() @ c).tocsr() for c in group)
        lio = lio + rate * (sandwich - 0.5 * sparse.kron(cc, eye)
                            - 0.5 * sparse.kron(eye, cc.T))
    lio = lio.tocsr()
    if space.nmax1 == space.nmax2:
        basis_p, basis_m, permutation = _sector_bases(space)
        sizes = (basis_p.shape[1], basis_m.shape[1])
    else:
        permutation, sizes = None, None
    return LiouvillianMatrix(lio, space, permutation, sizes)


def sector_decompose(lio: LiouvillianMatrix):
    """Diagonal blocks (L+, L-) of the generator in the parity orbit basis."""
    if lio.sector_sizes is None:
        raise ValueError("parity sectors require equal cutoffs on the two modes")
    basis_p, basis_m, _ = _sector_bases(lio.space)
    l_plus = (basis_p.T @ lio.matrix @ basis_p).tocsr()
    l_minus = (basis_m.T @ lio.matrix @ basis_m).tocsr()
    cross = (basis_p.T @ lio.matrix @ basis_m).tocsr()
    defect = 0.0 if cross.nnz == 0 else float(np.abs(cross.data).max())
    if defect > 1e-13:
        raise RuntimeError(
            f"cross-sector entries up to {defect:.2e}: generator does not "
            "commute with the parity superoperator")
    l_plus.eliminate_zeros()
    l_minus.eliminate_zeros()
    return l_plus, l_minus


@dataclasses.dataclass(frozen=True)
class EigenvalueSet:
    """Leading eigenpairs of one matrix, ordered by ascending |Re|."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray


def _order(vals: np.ndarray) -> np.ndarray:
    return np.lexsort((np.abs(vals.imag), np.abs(vals.real)))


def _polish_clusters(m, vals, vecs, residuals, tol: float, gamma: float):
    """Re-solve inaccurate Ritz pairs with shifts at their own estimates.

    The base harvest shifts at -1e-6 gamma, where the near-null steady mode
    dominates the transformed spectrum and caps the accuracy of everything
    else near eps * |lambda - sigma|^2 / |sigma - 0|; re-targeting each
    failing cluster restores machine-level residuals at one extra
    factorization per cluster.
    """
    mc = m.tocsc()
    vals, vecs, residuals = vals.copy(), vecs.copy(), residuals.copy()
    for _ in range(8):
        bad = np.flatnonzero(residuals > tol)
        if bad.size == 0:
            break
        center = vals[bad[np.argmax(residuals[bad])]]
        cluster = bad[np.abs(vals[bad] - center) <= 0.3 * gamma]
        sigma = center + 1e-4j * gamma * (1.0 if center.imag >= 0 else -1.0)
        try:
            w, x = sla.eigs(mc, k=min(cluster.size + 2, m.shape[0] - 2), sigma=sigma,
                            which="LM", v0=np.ascontiguousarray(vecs[:, cluster[0]]))
        except (sla.ArpackNoConvergence, RuntimeError):
            break
        x = x / np.linalg.norm(x, axis=0)
        r_new = np.linalg.norm(m @ x - x * w, axis=0)
        improved = False
        taken: set = set()
        for idx in cluster:
            free = [j for j in range(w.size) if j not in taken]
            j = min(free, key=lambda r: abs(w[r] - vals[idx]))
            close = abs(w[j] - vals[idx]) < 1e-3 * max(gamma, abs(vals[idx]))
            if close and r_new[j] < residuals[idx]:
                vals[idx], vecs[:, idx], residuals[idx] = w[j], x[:, j], r_new[j]
                taken.add(j)
                improved = True
        if not improved:
            break
    return vals, vecs, residuals


def leading_eigenvalues(matrix, k: int, gamma: float = 1.0,
                        residual_tol: float | None = 1e-8) -> EigenvalueSet:
    """k eigenvalues closest to zero via shift-invert, with dense fallback.

    residual_tol=None reports residuals without enforcing them (used by the
    sweeps, which re-polish only the eigenvalues they classify).
    """
    m = matrix.matrix if isinstance(matrix, LiouvillianMatrix) else matrix
    dim = m.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, dim)

    def dense_pairs():
        vals, vecs = np.linalg.eig(np.asarray(m.todense()))
        keep = np.argsort(np.abs(vals))[:k]
        return vals[keep], vecs[:, keep]

    dense_used = dim <= DENSE_CUTOFF or k >= dim - 1
    if dense_used:
        vals, vecs = dense_pairs()
    else:
        lu_est = _lu_bytes(m.nnz, dim)
        if lu_est > MEMORY_CAP:
            raise LiouvillianSizeError(
                f"shift-invert factorization at dim {dim} needs an estimated "
                f"{lu_est / 1e9:.1f} GB; exceeds the {MEMORY_CAP / 1e9:.1f} GB cap")
        sigma = -1e-6 * gamma
        v0 = np.full(dim, 1.0 / math.sqrt(dim), dtype=complex)
        mc = m.tocsc()
        try:
            vals, vecs = sla.eigs(mc, k=k, sigma=sigma, which="LM", v0=v0,
                                  ncv=min(dim - 1, max(4 * k + 4, 40)))
        except (sla.ArpackNoConvergence, RuntimeError) as exc:
            if dim <= DENSE_FALLBACK_CUTOFF:
                vals, vecs = dense_pairs()
                dense_used = True
            else:
                raise EigensolverError(f"shift-invert failed at dim {dim}: {exc}") from exc

    vecs = vecs / np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    if residual_tol is not None and residuals.max() > residual_tol:
        if not dense_used:
            vals, vecs, residuals = _polish_clusters(m, vals, vecs, residuals,
                                                     residual_tol, gamma)
        if residuals.max() > residual_tol and not dense_used:
            # deep harvests hit the sigma~0 accuracy wall wholesale; finish
            # each straggler with a dedicated shift
            for idx in np.flatnonzero(residuals > residual_tol):
                try:
                    w, x, r = refine_eigenpair(m, vals[idx], vecs[:, idx], gamma)
                except EigensolverError:
                    continue
                if r < residuals[idx]:
                    vals[idx], vecs[:, idx], residuals[idx] = w, x, r
        if residuals.max() > residual_tol and not dense_used and dim <= DENSE_FALLBACK_CUTOFF:
            vals, vecs = dense_pairs()
            vecs = vecs / np.linalg.norm(vecs, axis=0)
            residuals = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
        if residuals.max() > residual_tol:
            raise EigensolverError(
                f"eigenpair residual {residuals.max():.2e} exceeds {residual_tol:.0e}")
    order = _order(vals)
    return EigenvalueSet(vals[order], vecs[:, order], residuals[order])


def refine_eigenpair(matrix, lam: complex, vec: np.ndarray, gamma: float = 1.0):
    """Re-solve one eigenpair with a dedicated shift at its own estimate."""
    m = matrix.matrix if isinstance(matrix, LiouvillianMatrix) else matrix
    sigma = complex(lam) + 1e-4j * gamma * (1.0 if lam.imag >= 0 else -1.0)
    try:
        w, x = sla.eigs(m.tocsc(), k=2, sigma=sigma, which="LM",
                        v0=np.ascontiguousarray(vec))
    except (sla.ArpackNoConvergence, RuntimeError) as exc:
        raise EigensolverError(f"refinement at {lam:.4e} failed: {exc}") from exc
    j = int(np.argmin(np.abs(w - lam)))
    if abs(w[j] - lam) > 1e-2 * max(gamma, abs(lam)):
        raise EigensolverError(
            f"refinement drifted from {lam:.4e} to {w[j]:.4e}")
    out = x[:, j] / np.linalg.norm(x[:, j])
    return w[j], out, float(np.linalg.norm(m @ out - w[j] * out))


@dataclasses.dataclass(frozen=True)
class SpectrumResult:
    """Merged sector eigenpairs of the generator, ascending |Re|.

    modes/left_modes hold the un-vectorized right/left eigenmatrices in the
    full dyad basis; sectors is +1/-1 per eigenvalue.
    """

    eigenvalues: np.ndarray
    sectors: np.ndarray
    modes: np.ndarray
    left_modes: np.ndarray
    residuals: np.ndarray

    def steady_mode(self) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.eigenvalues)))
        m = self.modes[idx]
        m = 0.5 * (m + m.conj().T)
        return m / np.trace(m).real


def _match_left_eigenvectors(res: EigenvalueSet, res_t: EigenvalueSet,
                             m_t=None, gamma: float = 1.0) -> np.ndarray:
    """Globally assign transpose eigenpairs to the right set by eigenvalue.

    The transpose harvest carries extra columns because tie-breaking at the
    k-th modulus can keep different members of a conjugate pair in the two
    runs; rectangular assignment absorbs that.
    """
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(res.eigenvalues[:, None] - res_t.eigenvalues[None, :])
    rows, cols = linear_sum_assignment(cost)
    errs = cost[rows, cols]
    tol = 1e-5 * max(1.0, np.abs(res.eigenvalues).max())
    if errs.max() > tol and m_t is not None:
        # an ill-conditioned pair can pass the residual gate on both sides
        # with different eigenvalue errors; re-solve the left vector at the
        # right harvest's value so each biorthogonal pair shares one
        # eigenvalue
        for i in np.flatnonzero(errs > tol):
            r, c = rows[i], cols[i]
            try:
                w, x, _ = refine_eigenpair(m_t, res.eigenvalues[r],
                                           res_t.eigenvectors[:, c], gamma)
            except EigensolverError:
                continue
            res_t.eigenvalues[c] = w
            res_t.eigenvectors[:, c] = x
        cost = np.abs(res.eigenvalues[:, None] - res_t.eigenvalues[None, :])
        rows, cols = linear_sum_assignment(cost)
        errs = cost[rows, cols]
    if errs.max() > tol:
        raise EigensolverError(f"left/right eigenvalue mismatch up to {errs.max():.2e}")
    left = np.empty_like(res.eigenvectors)
    left[:, rows] = res_t.eigenvectors[:, cols]
    return left


def _sector_eigenpairs(block, basis, k: int, gamma: float, left: bool,
                       residual_tol):
    res = leading_eigenvalues(block, k=k, gamma=gamma, residual_tol=residual_tol)
    full_right = basis @ res.eigenvectors
    if left:
        m_t = block.T.tocsr()
        res_t = leading_eigenvalues(m_t, k=res.eigenvalues.size + 4,
                                    gamma=gamma, residual_tol=residual_tol)
        full_left = basis @ _match_left_eigenvectors(res, res_t, m_t, gamma)
    else:
        full_left = np.full_like(full_right, np.nan)
    return res.eigenvalues, full_right, full_left, res.residuals


def liouvillian_spectrum(p: DimerParams, space: FockSpace, k: int = 6,
                         left: bool = True, residual_tol: float | None = 1e-8,
                         memory_cap: float = MEMORY_CAP) -> SpectrumResult:
    """Leading eigenmodes of both parity sectors, mapped back to dyad space."""
    lio = build_liouvillian(p, space, memory_cap=memory_cap)
    basis_p, basis_m, _ = _sector_bases(space)
    l_plus, l_minus = sector_decompose(lio)
    vals_p, right_p, left_p, res_p = _sector_eigenpairs(
        l_plus, basis_p, k, p.gamma, left, residual_tol)
    vals_m, right_m, left_m, res_m = _sector_eigenpairs(
        l_minus, basis_m, k, p.gamma, left, residual_tol)
    vals = np.concatenate([vals_p, vals_m])
    sectors = np.concatenate([np.ones(vals_p.size, int), -np.ones(vals_m.size, int)])
    right = np.concatenate([right_p.T, right_m.T])
    left_all = np.concatenate([left_p.T, left_m.T])
    residuals = np.concatenate([res_p, res_m])
    order = _order(vals)
    dim = space.dim
    zero = np.abs(vals[order]) < 1e-9 * max(p.gamma, 1.0)
    if not zero.any() or sectors[order][np.flatnonzero(zero)[0]] != 1:
        raise EigensolverError("no zero eigenvalue found in the + sector")
    return SpectrumResult(vals[order], sectors[order],
                          right[order].reshape(-1, dim, dim),
                          left_all[order].reshape(-1, dim, dim),
                          residuals[order])


def eigenmode_expansion(rho0, spectrum: SpectrumResult) -> np.ndarray:
    """Biorthogonal coefficients c_j of rho0 over the computed eigenmodes.

    rho(t) ~ sum_j c_j exp(lambda_j t) rho_j with the transpose pairing
    <l, r> = vec(l)^T vec(r); the overlap matrix is solved as a whole so
    near-degenerate clusters stay consistent.
    """
    from .fock import DensityOperator  # local import to avoid cycle at load

    m = rho0.matrix if isinstance(rho0, DensityOperator) else np.asarray(rho0, complex)
    k = spectrum.eigenvalues.size
    right = spectrum.modes.reshape(k, -1).T
    left = spectrum.left_modes.reshape(k, -1).T
    overlap = left.T @ right
    cond = np.linalg.cond(overlap)
    if cond > 1e12:
        raise EigensolverError(f"biorthogonal overlap condition number {cond:.2e}")
    return np.linalg.solve(overlap, left.T @ vectorize(m))


GAP_SWEEP_DTYPE = np.dtype([
    ("n_scale", float), ("f_tilde", float),
    ("re_l1p", float), ("re_l2p", float), ("im_l2p", float),
    ("re_l1m", float), ("im_l1m", float),
    ("residual_max", float), ("ok", bool),
])

#: desk-scale default scaling grid
DEFAULT_N_VALUES = (1.0, 2.0, 3.0, 5.0, 8.0)
#: classification threshold: eigenvalues with |Im| below this are "real"
REAL_IM_TOL = 1e-7


def classify_gaps(vals: np.ndarray, sectors: np.ndarray, gamma: float):
    """(l1p, l2p, l1m): slowest real +, slowest oscillatory +, slowest -."""
    tol_zero = 1e-9 * gamma
    tol_real = REAL_IM_TOL * gamma
    l1p = l2p = l1m = None
    for lam, sec in zip(vals, sectors):
        if abs(lam) < tol_zero:
            continue
        if sec == 1 and abs(lam.imag) < tol_real and l1p is None:
            l1p = lam
        elif sec == 1 and abs(lam.imag) >= tol_real and l2p is None:
            l2p = complex(lam.real, abs(lam.imag))
        elif sec == -1 and l1m is None:
            l1m = lam
        if l1p is not None and l2p is not None and l1m is not None:
            break
    return l1p, l2p, l1m


#: largest per-mode cutoff whose sector blocks still factorize in desk memory
SWEEP_NMAX_CAP = 14


def truncation_for(p: DimerParams, nmax: int | None = None) -> FockSpace:
    """Sweep truncation rule, nmax = min(14, 8 + ceil(1.2 N)).

    Populations scale like N with order-one rescaled amplitudes, so the
    cutoff needs N plus a tail allowance; the cap is where sparse LU of a
    sector block stops fitting in desk memory.  Convergence of the slow
    classified eigenvalues under this rule is checked by cutoff ladders in
    the test suite rather than per call.
    """
    if nmax is None:
        nmax = min(SWEEP_NMAX_CAP, 8 + math.ceil(1.2 * p.n_scale))
    return FockSpace(nmax, nmax)


def gap_point(p: DimerParams, space: FockSpace, k: int = 20,
              residual_tol: float = 1e-8, memory_cap: float = MEMORY_CAP,
              k_cap: int = 64, sectors: str = "both"):
    """(l1p, l2p, l1m, worst classified residual) at one parameter point.

    Harvests k Ritz pairs per sector without enforcing residuals, classifies
    the three gaps of interest, then refines only those until they meet the
    tolerance; refining a full harvest would cost one factorization per
    straggler for eigenvalues the sweep never uses.

    Shift-invert ranks by |lambda - sigma|, so an oscillatory pair with small
    |Re| can sit beyond k slow real modes of smaller modulus.  The harvest is
    therefore enlarged (doubling k, up to k_cap) until the covered disk
    encloses each classified gap with a 1.2x modulus margin.

    sectors restricts the work to one symmetry block ("plus", "minus"); gaps
    living in the skipped block come back as None.  Factorizing the other
    block costs more than every remaining step combined, so sweeps that only
    chase lambda_1^- should not pay for the + sector.
    """
    if sectors not in ("both", "plus", "minus"):
        raise ValueError(f"unknown sector selection {sectors!r}")
    lio = build_liouvillian(p, space, memory_cap=memory_cap)
    l_plus, l_minus = sector_decompose(lio)
    empty = EigenvalueSet(np.empty(0, complex),
                          np.empty((0, 0), complex), np.empty(0))
    k_p, k_m = k, max(6, k // 2)
    res_p = res_m = empty
    if sectors != "minus":
        res_p = leading_eigenvalues(l_plus, k=k_p, gamma=p.gamma,
                                    residual_tol=None)
    if sectors != "plus":
        res_m = leading_eigenvalues(l_minus, k=k_m, gamma=p.gamma,
                                    residual_tol=None)

    def classify_current():
        vals = np.concatenate([res_p.eigenvalues, res_m.eigenvalues])
        sectors = np.concatenate([np.ones(res_p.eigenvalues.size, int),
                                  -np.ones(res_m.eigenvalues.size, int)])
        order = _order(vals)
        return classify_gaps(vals[order], sectors[order], p.gamma)

    def covered(res_set, gaps):
        radius = float(np.abs(res_set.eigenvalues).max())
        return all(g is None or radius >= 1.2 * abs(g) for g in gaps)

    l1p, l2p, l1m = classify_current()
    while True:
        need_p = sectors != "minus" and (
            l1p is None or l2p is None or not covered(res_p, (l1p, l2p)))
        need_m = sectors != "plus" and (
            l1m is None or not covered(res_m, (l1m,)))
        grew = False
        if need_p and k_p < min(k_cap, l_plus.shape[0] - 2):
            k_p = min(2 * k_p, k_cap)
            res_p = leading_eigenvalues(l_plus, k=k_p, gamma=p.gamma,
                                        residual_tol=None)
            grew = True
        if need_m and k_m < min(k_cap, l_minus.shape[0] - 2):
            k_m = min(2 * k_m, k_cap)
            res_m = leading_eigenvalues(l_minus, k=k_m, gamma=p.gamma,
                                        residual_tol=None)
            grew = True
        if not grew:
            break
        l1p, l2p, l1m = classify_current()

    def refined(lam, block, res_set):
        if lam is None:
            return None, 0.0
        src = res_set.eigenvalues
        # conjugate partners are interchangeable for the table
        dist = np.minimum(np.abs(src - lam), np.abs(src - np.conj(lam)))
        idx = int(np.argmin(dist))
        residual = float(res_set.residuals[idx])
        value = src[idx]
        if residual > residual_tol:
            value, _, residual = refine_eigenpair(block, value,
                                                  res_set.eigenvectors[:, idx],
                                                  gamma=p.gamma)
            if residual > residual_tol:
                raise EigensolverError(
                    f"classified eigenvalue residual {residual:.2e}")
        return complex(value.real, abs(value.imag)), residual

    l1p, r1 = refined(l1p, l_plus, res_p)
    l2p, r2 = refined(l2p, l_plus, res_p)
    l1m, r3 = refined(l1m, l_minus, res_m)
    return l1p, l2p, l1m, max(r1, r2, r3)


def gap_sweep(p_base: DimerParams, f_grid, n_values=DEFAULT_N_VALUES, k: int = 20,
              nmax: int | None = None, memory_cap: float = MEMORY_CAP,
              sectors: str = "both") -> np.ndarray:
    """Leading-gap table over (N, f_tilde); per-point failures marked, not fatal."""
    rows = []
    for n_scale in n_values:
        for f in np.asarray(f_grid, dtype=float):
            p = p_base.replace(f_tilde=float(f), n_scale=float(n_scale))
            row = (p.n_scale, p.f_tilde, np.nan, np.nan, np.nan, np.nan, np.nan,
                   np.nan, False)
            try:
                l1p, l2p, l1m, res = gap_point(p, truncation_for(p, nmax), k=k,
                                               residual_tol=1e-8,
                                               memory_cap=memory_cap,
                                               sectors=sectors)
                row = (p.n_scale, p.f_tilde,
                       l1p.real if l1p is not None else np.nan,
                       l2p.real if l2p is not None else np.nan,
                       l2p.imag if l2p is not None else np.nan,
                       l1m.real if l1m is not None else np.nan,
                       l1m.imag if l1m is not None else np.nan,
                       res, True)
            except (EigensolverError, LiouvillianSizeError, RuntimeError):
                pass
            rows.append(row)
    return np.array(rows, dtype=GAP_SWEEP_DTYPE)


def scaling_fit(n_values, lambda_values):
    """Power-law fit |lambda| = prefactor * N^beta in log-log coordinates."""
    n = np.asarray(n_values, dtype=float)
    lam = np.asarray(lambda_values, dtype=float)
    if n.size < 3 or n.size != lam.size:
        raise ValueError("need at least 3 matched (N, lambda) points")
    if (n <= 0).any() or (lam <= 0).any():
        raise ValueError("scaling fit requires positive N and |lambda|")
    x, y = np.log(n), np.log(lam)
    beta, intercept = np.polyfit(x, y, 1)
    fitted = beta * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(beta), float(math.exp(intercept)), r_squared
