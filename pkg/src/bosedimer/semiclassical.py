"""Mean-field layer: flow, fixed points, stability, instability window.

In the large-n_scale limit the rescaled mode amplitudes b = alpha_b,
a = alpha_a obey the coupled equations (u = u_tilde, f = f_tilde)

    i db/dt = (-delta - J - i gamma) b + u (|b|^2 b + a^2 b* + 2|a|^2 b)
    i da/dt = (-delta + J) a + u (|a|^2 a + b^2 a* + 2|b|^2 a) + sqrt(2) f

plus an optional -(kappa/2) alpha damping of each mode when local loss is
switched on.  Only the symmetric mode is damped; the drive enters only the
antisymmetric one.  The flow is equivariant under b -> -b.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np
from scipy import optimize, signal
from scipy.integrate import solve_ivp

from bosedimer.core import DimerParams, ModeState, from_site_basis

_SQRT2 = math.sqrt(2.0)


class IntegrationError(RuntimeError):
    """Adaptive integration failed; `time` holds the last reached time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class Stability(enum.Enum):
    ATTRACTIVE = "attractive"
    STABLE_NON_ATTRACTIVE = "stable_non_attractive"
    REPULSIVE = "repulsive"


@dataclasses.dataclass(frozen=True)
class FixedPoint:
    state: ModeState
    jacobian_eigenvalues: np.ndarray  # 4 complex values
    stability: Stability
    symmetry_breaking: bool


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled mean-field trajectory."""

    times: np.ndarray
    alpha_b: np.ndarray
    alpha_a: np.ndarray
    sample_interval: float

    def __post_init__(self):
        if not (len(self.times) == len(self.alpha_b) == len(self.alpha_a)):
            raise ValueError("times and amplitude arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def states(self) -> tuple[ModeState, ...]:
        return tuple(ModeState(b, a) for b, a in zip(self.alpha_b, self.alpha_a))

    def observable(self, name: str) -> np.ndarray:
        if name == "abs_b":
            return np.abs(self.alpha_b)
        if name == "abs_a":
            return np.abs(self.alpha_a)
        if name == "re_a":
            return np.real(self.alpha_a)
        raise ValueError(f"unknown observable {name!r}; use abs_b, abs_a, or re_a")


@dataclasses.dataclass(frozen=True)
class SweepResult:
    """Structured sample table plus per-task integration failures."""

    table: np.ndarray
    failures: tuple[tuple[float, int, str], ...] = ()


def _rhs_arrays(b, a, p: DimerParams):
    """Vectorized flow right-hand side; b, a are same-shape complex arrays."""
    d, j, u, f = p.delta, p.j_coupling, p.u_tilde, p.f_tilde
    bb2 = np.abs(b) ** 2
    aa2 = np.abs(a) ** 2
    db = -1j * ((-d - j - 1j * p.gamma) * b + u * (bb2 * b + a * a * np.conj(b) + 2.0 * aa2 * b))
    da = -1j * ((-d + j) * a + u * (aa2 * a + b * b * np.conj(a) + 2.0 * bb2 * a) + _SQRT2 * f)
    if p.kappa:
        db = db - 0.5 * p.kappa * b
        da = da - 0.5 * p.kappa * a
    return db, da


def mean_field_rhs(state: ModeState, p: DimerParams) -> ModeState:
    """Time derivative of the rescaled amplitudes at the given state."""
    db, da = _rhs_arrays(np.asarray(state.alpha_b), np.asarray(state.alpha_a), p)
    return ModeState(complex(db), complex(da))


def _flat_rhs(t, y, p, n):
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.concatenate(_rhs_arrays(y[:n], y[n:], p))
    if not np.all(np.isfinite(out.view(np.float64))):
        # non-finite derivatives send the adaptive controller into a NaN
        # step-size loop; fail fast instead
        raise IntegrationError("non-finite derivative (diverging amplitude)", t)
    return out


def _integrate_batch(b0, a0, p, t_final, rel_tol, t_eval, t0=0.0):
    """Integrate a batch of initial conditions jointly; returns (nt, 2, n)."""
    b0 = np.atleast_1d(np.asarray(b0, dtype=complex))
    a0 = np.atleast_1d(np.asarray(a0, dtype=complex))
    n = b0.size
    y0 = np.concatenate((b0, a0))
    sol = solve_ivp(
        _flat_rhs,
        (t0, t_final),
        y0,
        method="RK45",
        rtol=rel_tol,
        atol=1e-11,
        t_eval=t_eval,
        args=(p, n),
        dense_output=False,
    )
    if not sol.success:
        reached = sol.t[-1] if sol.t.size else t0
        raise IntegrationError(sol.message, reached)
    return sol.y.reshape(2, n, -1).transpose(2, 0, 1)


def integrate(
    state0: ModeState,
    p: DimerParams,
    t_final: float,
    rel_tol: float = 1e-9,
    sample_interval: float | None = None,
) -> Trajectory:
    """Adaptive flow integration sampled on a uniform grid."""
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if not 0 < rel_tol <= 1e-3:
        raise ValueError(f"rel_tol must lie in (0, 1e-3], got {rel_tol}")
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    n_s = int(np.floor(t_final / sample_interval + 1e-9)) + 1
    t_eval = np.arange(n_s) * sample_interval
    ys = _integrate_batch([state0.alpha_b], [state0.alpha_a], p, t_final, rel_tol, t_eval)
    return Trajectory(t_eval, ys[:, 0, 0], ys[:, 1, 0], sample_interval)


def _symmetric_amplitude(p: DimerParams) -> float:
    """Real negative root of u x^3 + (J - delta) x + sqrt(2) f = 0.

    Closed radical form polished by Newton; the radical alone cancels badly
    for small drive.
    """
    c = p.j_coupling - p.delta
    if not c > 0:
        raise ValueError(f"requires j_coupling - delta > 0, got {c}")
    u, d = p.u_tilde, _SQRT2 * p.f_tilde
    if u == 0.0:
        return -d / c
    pc, qc = c / u, d / u
    disc = math.sqrt((qc / 2.0) ** 2 + (pc / 3.0) ** 3)
    x = float(np.cbrt(-qc / 2.0 + disc) + np.cbrt(-qc / 2.0 - disc))
    scale = max(1.0, abs(u * x**3), abs(c * x), abs(d))
    for _ in range(3):
        fx = u * x**3 + c * x + d
        if abs(fx) < 1e-13 * scale:
            break
        x -= fx / (3.0 * u * x**2 + c)
    return x


def symmetric_fp_eigenvalues(p: DimerParams) -> np.ndarray:
    """Closed-form Jacobian eigenvalues at the symmetric fixed point.

    Returns [lam_b_plus, lam_b_minus, lam_a_plus, lam_a_minus]; the
    antisymmetric pair is purely imaginary, and +Im lam_a_plus is the
    mean-field oscillation frequency around the fixed point.
    """
    x = _symmetric_amplitude(p)
    y = p.u_tilde * x * x
    theta = 2.0 * y - (p.delta + p.j_coupling)
    root_b = np.sqrt(complex(y * y - theta * theta))
    phi = p.j_coupling - p.delta + 2.0 * y
    omega_a = math.sqrt(max(phi * phi - y * y, 0.0))
    lam_b_plus = -p.gamma + root_b
    lam_b_minus = -p.gamma - root_b
    return np.array([lam_b_plus, lam_b_minus, 1j * omega_a, -1j * omega_a])


def _classify(eigvals: np.ndarray, gamma: float) -> Stability:
    tol = 1e-7 * gamma
    re = np.real(eigvals)
    if np.any(re > tol):
        return Stability.REPULSIVE
    if np.all(re < -tol):
        return Stability.ATTRACTIVE
    return Stability.STABLE_NON_ATTRACTIVE


def fixed_point_symmetric(p: DimerParams) -> FixedPoint:
    """Symmetric (alpha_b = 0) stationary point with its linearization."""
    if p.kappa != 0.0:
        raise ValueError("closed-form symmetric fixed point assumes kappa = 0")
    x = _symmetric_amplitude(p)
    eigvals = symmetric_fp_eigenvalues(p)
    state = ModeState(0.0 + 0.0j, complex(x))
    rhs = mean_field_rhs(state, p)
    residual = abs(rhs.alpha_b) + abs(rhs.alpha_a)
    if residual > 1e-10 * max(1.0, abs(x)):
        raise RuntimeError(f"stationarity residual {residual:.2e} too large")
    return FixedPoint(state, eigvals, _classify(eigvals, p.gamma), symmetry_breaking=False)


def general_jacobian(state: ModeState, p: DimerParams) -> np.ndarray:
    """Jacobian of the extended flow in the (b, b*, a, a*) basis."""
    b, a = complex(state.alpha_b), complex(state.alpha_a)
    d, j, u, g, k = p.delta, p.j_coupling, p.u_tilde, p.gamma, p.kappa
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = -1j * (-d - j - 1j * g + 2.0 * u * (abs(b) ** 2 + abs(a) ** 2)) - 0.5 * k
    m[0, 1] = -1j * u * (b * b + a * a)
    m[0, 2] = -2j * u * (a * np.conj(b) + np.conj(a) * b)
    m[0, 3] = -2j * u * a * b
    m[1, 0] = np.conj(m[0, 1])
    m[1, 1] = np.conj(m[0, 0])
    m[1, 2] = np.conj(m[0, 3])
    m[1, 3] = np.conj(m[0, 2])
    m[2, 0] = m[0, 2]
    m[2, 1] = -2j * u * a * b
    m[2, 2] = -1j * (-d + j + 2.0 * u * (abs(a) ** 2 + abs(b) ** 2)) - 0.5 * k
    m[2, 3] = -1j * u * (a * a + b * b)
    m[3, 0] = np.conj(m[2, 1])
    m[3, 1] = np.conj(m[2, 0])
    m[3, 2] = np.conj(m[2, 3])
    m[3, 3] = np.conj(m[2, 2])
    return m


def _stationarity_real(z, p):
    state_b = z[0] + 1j * z[1]
    state_a = z[2] + 1j * z[3]
    db, da = _rhs_arrays(np.asarray(state_b), np.asarray(state_a), p)
    return [db.real, db.imag, da.real, da.imag]


def find_symmetry_breaking_fixed_points(p: DimerParams, sb_tol: float = 1e-6) -> list[FixedPoint]:
    """Multi-start root finding for stationary states with alpha_b != 0.

    Returns deduplicated fixed points with |alpha_b| above threshold, each
    together with its mirror under alpha_b -> -alpha_b; empty when the only
    stationary state is the symmetric one.
    """
    starts = []
    try:
        x_sym = _symmetric_amplitude(p)
    except ValueError:
        x_sym = -1.0
    for mag_b in (0.25, 0.5, 0.8, 1.2):
        for phase in (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi):
            b0 = mag_b * np.exp(1j * phase)
            for scale_a in (1.0, 1.4):
                starts.append((b0, scale_a * x_sym))
    rng = np.random.default_rng(987654321)
    for _ in range(24):
        mags = rng.uniform(0.0, 2.0, size=2)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=2)
        state = from_site_basis(mags[0] * np.exp(1j * phases[0]), mags[1] * np.exp(1j * phases[1]))
        starts.append((state.alpha_b, state.alpha_a))

    roots: list[tuple[complex, complex]] = []

    def _known(b, a):
        return any(abs(b - rb) + abs(a - ra) < 1e-8 for rb, ra in roots)

    for b0, a0 in starts:
        z0 = [b0.real, b0.imag, np.real(a0), np.imag(a0)]
        sol = optimize.root(_stationarity_real, z0, args=(p,), method="hybr", tol=1e-13)
        if not sol.success:
            continue
        b = sol.x[0] + 1j * sol.x[1]
        a = sol.x[2] + 1j * sol.x[3]
        residual = np.max(np.abs(_stationarity_real(sol.x, p)))
        if residual > 1e-10 or abs(b) <= sb_tol:
            continue
        if not _known(b, a):
            roots.append((b, a))
        if not _known(-b, a):
            roots.append((-b, a))

    points = []
    for b, a in sorted(roots, key=lambda r: (round(r[0].real, 10), round(r[0].imag, 10))):
        state = ModeState(b, a)
        eigvals = np.linalg.eigvals(general_jacobian(state, p))
        order = np.argsort(-eigvals.real)
        points.append(
            FixedPoint(state, eigvals[order], _classify(eigvals, p.gamma), symmetry_breaking=True)
        )
    return points


def _growth_rate(f_tilde: float, p: DimerParams) -> float:
    """Largest real part among the symmetric-mode eigenvalues at drive f_tilde."""
    eig = symmetric_fp_eigenvalues(p.replace(f_tilde=f_tilde))
    return float(np.max(eig.real[:2]))


def instability_window(p: DimerParams) -> tuple[float, float] | None:
    """Drive interval where the symmetric fixed point loses linear stability.

    Bisection on the sign of the leading symmetric-sector growth rate to
    absolute tolerance 1e-4*gamma; returns None when no sign change exists.
    The growth rate is bounded by -gamma + (delta+J)/sqrt(3), so the scan
    range only needs to cover the drive strengths reaching that maximum.
    """
    g, dj, u = p.gamma, p.delta + p.j_coupling, p.u_tilde
    f_max = 4.0 * g
    if u > 0 and dj * dj > 3.0 * g * g:
        y_up = (2.0 * dj + math.sqrt(dj * dj - 3.0 * g * g)) / 3.0
        x_up = -math.sqrt(y_up / u)
        f_up = -(u * x_up**3 + (p.j_coupling - p.delta) * x_up) / _SQRT2
        f_max = max(f_max, 1.5 * f_up)
    grid = np.linspace(0.0, f_max, 1025)
    values = np.array([_growth_rate(f, p) for f in grid])
    crossings = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            continue
        if values[i] * values[i + 1] < 0 or (values[i + 1] == 0.0 and values[i] != 0.0):
            lo, hi = grid[i], grid[i + 1]
            flo = values[i]
            while hi - lo > 1e-4 * g:
                mid = 0.5 * (lo + hi)
                fmid = _growth_rate(mid, p)
                if fmid == 0.0:
                    lo = hi = mid
                    break
                if flo * fmid < 0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            crossings.append(0.5 * (lo + hi))
    if len(crossings) < 2:
        return None
    return crossings[0], crossings[1]


def reduced_antibonding_rhs(alpha_a: complex, p: DimerParams) -> complex:
    """Decoupled antisymmetric-mode flow valid on the alpha_b = 0 manifold."""
    d, j, u, f = p.delta, p.j_coupling, p.u_tilde, p.f_tilde
    return -1j * ((-d + j + u * abs(alpha_a) ** 2) * alpha_a + _SQRT2 * f)


def antibonding_energy(alpha_a: complex, p: DimerParams) -> float:
    """Classical energy generating the reduced flow; conserved along it."""
    d, j, u, f = p.delta, p.j_coupling, p.u_tilde, p.f_tilde
    return (
        (j - d) * abs(alpha_a) ** 2
        + 0.5 * u * abs(alpha_a) ** 4
        + _SQRT2 * f * 2.0 * np.real(alpha_a)
    )


def linearized_bonding_rhs(delta_b: complex, alpha_a: complex, p: DimerParams) -> complex:
    """Linearized symmetric-mode flow around the alpha_b = 0 manifold.

    The antisymmetric amplitude acts as a parametric drive on the
    fluctuation delta_b.
    """
    d, j, u, g = p.delta, p.j_coupling, p.u_tilde, p.gamma
    out = -1j * (
        (-d - j - 1j * g) * delta_b
        + u * (2.0 * abs(alpha_a) ** 2 * delta_b + alpha_a**2 * np.conj(delta_b))
    )
    if p.kappa:
        out -= 0.5 * p.kappa * delta_b
    return out


def limit_cycle_period(traj: Trajectory, observable: str = "abs_a") -> float | None:
    """Oscillation period from maxima spacing over the final trajectory third.

    None when the oscillation amplitude is below 1e-6 or the maxima are not
    equally spaced to 1% (no clean single period).
    """
    y_full = traj.observable(observable)
    n = len(y_full)
    start = 2 * n // 3
    y = y_full[start:]
    t = traj.times[start:]
    amp = 0.5 * (np.max(y) - np.min(y))
    if amp < 1e-6:
        return None
    peaks, _ = signal.find_peaks(y, prominence=0.5 * amp)
    if len(peaks) < 4:
        return None
    dt = traj.sample_interval
    refined = []
    for i in peaks:
        if i == 0 or i == len(y) - 1:
            continue
        denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
        shift = 0.0 if denom == 0 else 0.5 * (y[i - 1] - y[i + 1]) / denom
        refined.append(t[i] + shift * dt)
    spacings = np.diff(refined)
    mean = float(np.mean(spacings))
    if np.std(spacings) > 0.01 * mean:
        return None
    return mean


def _random_site_ics(rng: np.random.Generator, n_ic: int):
    mags = rng.uniform(0.0, 2.0, size=(n_ic, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_ic, 2))
    a1 = mags[:, 0] * np.exp(1j * phases[:, 0])
    a2 = mags[:, 1] * np.exp(1j * phases[:, 1])
    b0 = (a1 + a2) / _SQRT2
    a0 = (a1 - a2) / _SQRT2
    return b0, a0


def _sample_post_transient(p, b0, a0, t_transient, t_sample, sample_interval, rel_tol=1e-9):
    """Evolve a batch past the transient, then sample uniformly.

    Falls back to per-IC integration when the joint solve fails so a single
    pathological initial condition cannot poison the batch.
    """
    n_s = int(np.floor(t_sample / sample_interval + 1e-9)) + 1
    t_eval = t_transient + np.arange(n_s) * sample_interval
    t_final = float(t_eval[-1])
    failures = []
    try:
        ys = _integrate_batch(b0, a0, p, t_final, rel_tol, t_eval)
    except IntegrationError:
        n = len(b0)
        ys = np.full((n_s, 2, n), np.nan, dtype=complex)
        for i in range(n):
            try:
                ys[:, :, i : i + 1] = _integrate_batch(
                    b0[i : i + 1], a0[i : i + 1], p, t_final, rel_tol, t_eval
                )
            except IntegrationError as exc:
                failures.append((i, str(exc)))
    return t_eval, ys, failures


def order_parameter_sweep(
    p: DimerParams,
    f_grid,
    n_ic: int = 100,
    t_transient: float | None = None,
    t_sample: float | None = None,
    seed: int = 0,
    sample_interval: float | None = None,
) -> SweepResult:
    """Post-transient |alpha_b|, |alpha_a| samples over random ICs per drive.

    Initial conditions are uniform in site-amplitude magnitude on [0, 2]
    with uniform phases.
    """
    if n_ic < 1:
        raise ValueError("n_ic must be at least 1")
    f_grid = np.atleast_1d(np.asarray(f_grid, dtype=float))
    if t_transient is None:
        t_transient = 100.0 / p.gamma
    if t_sample is None:
        t_sample = 50.0 / p.gamma
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    dtype = [
        ("f_tilde", "f8"),
        ("ic_index", "i8"),
        ("t", "f8"),
        ("abs_alpha_b", "f8"),
        ("abs_alpha_a", "f8"),
    ]
    children = np.random.SeedSequence(seed).spawn(len(f_grid))
    blocks = []
    failures = []
    for fi, f_val in enumerate(f_grid):
        rng = np.random.default_rng(children[fi])
        b0, a0 = _random_site_ics(rng, n_ic)
        pf = p.replace(f_tilde=float(f_val))
        t_eval, ys, fails = _sample_post_transient(
            pf, b0, a0, t_transient, t_sample, sample_interval
        )
        failures.extend((float(f_val), ic, msg) for ic, msg in fails)
        n_s = len(t_eval)
        block = np.zeros(n_s * n_ic, dtype=dtype)
        block["f_tilde"] = f_val
        block["ic_index"] = np.repeat(np.arange(n_ic), n_s)
        block["t"] = np.tile(t_eval, n_ic)
        block["abs_alpha_b"] = np.abs(ys[:, 0, :]).T.reshape(-1)
        block["abs_alpha_a"] = np.abs(ys[:, 1, :]).T.reshape(-1)
        blocks.append(block)
    table = np.concatenate(blocks)
    ok = ~np.isnan(table["abs_alpha_b"])
    return SweepResult(table[ok], tuple(failures))


def phase_portrait(
    p: DimerParams,
    n_ic: int = 100,
    seed: int = 0,
    t_transient: float | None = None,
    t_sample: float | None = None,
    sample_interval: float | None = None,
) -> SweepResult:
    """Post-transient phase-space point cloud for both modes."""
    if n_ic < 1:
        raise ValueError("n_ic must be at least 1")
    if t_transient is None:
        t_transient = 100.0 / p.gamma
    if t_sample is None:
        t_sample = 50.0 / p.gamma
    if sample_interval is None:
        sample_interval = 1e-2 / p.gamma
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    b0, a0 = _random_site_ics(rng, n_ic)
    t_eval, ys, fails = _sample_post_transient(p, b0, a0, t_transient, t_sample, sample_interval)
    failures = tuple((p.f_tilde, ic, msg) for ic, msg in fails)
    n_s = len(t_eval)
    dtype = [("mode", "U1"), ("ic_index", "i8"), ("t", "f8"), ("re", "f8"), ("im", "f8")]
    rows = np.zeros(2 * n_s * n_ic, dtype=dtype)
    for mi, (mode, amps) in enumerate((("B", ys[:, 0, :]), ("A", ys[:, 1, :]))):
        sl = slice(mi * n_s * n_ic, (mi + 1) * n_s * n_ic)
        rows["mode"][sl] = mode
        rows["ic_index"][sl] = np.repeat(np.arange(n_ic), n_s)
        rows["t"][sl] = np.tile(t_eval, n_ic)
        rows["re"][sl] = amps.T.reshape(-1).real
        rows["im"][sl] = amps.T.reshape(-1).imag
    ok = ~np.isnan(rows["re"])
    return SweepResult(rows[ok], failures)
