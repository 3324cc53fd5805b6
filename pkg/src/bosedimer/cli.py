"""Batch front end: one run directory per invocation, manifest included.

Every subcommand resolves its full parameter set (config file, then flag
overrides), runs one pipeline, and writes CSV/JSON artifacts plus a
manifest.json recording the subcommand, resolved parameters, seed, code
version, output paths, and wall-clock duration.  Re-running with the same
resolved parameters and seed reproduces the data files byte for byte: all
stochastic runners draw from deterministic substreams of the recorded seed,
and floats are written with 17 significant digits (lossless for float64).

On failure a machine-readable error record {"error", "message"} goes to
stderr and the exit code is nonzero.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, analysis, core, correlations, fock, semiclassical, spectra, twa

#: lossless float64 formatting for every CSV cell
FLOAT_FMT = ".17g"

#: CLI-side sampling default for the mean-field cloud commands; the library
#: default of 1e-2/gamma would put ~5e5 rows per drive value in the artifact
CLOUD_SAMPLE_INTERVAL = 0.5


class ComplexParam(click.ParamType):
    """Accepts anything python's complex() does, e.g. -1, 0.3+0.2j."""

    name = "complex"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return complex(str(value).replace(" ", ""))
        except ValueError:
            self.fail(f"{value!r} is not a complex amplitude", param, ctx)


COMPLEX = ComplexParam()


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FMT)
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    """UTF-8, comma-separated, '.' decimal, header row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_table(path: Path, table: np.ndarray) -> None:
    write_csv(path, table.dtype.names, table)


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_params(config_path, overrides: dict) -> core.DimerParams:
    """Config file first, explicit flags override its values."""
    p = core.load_config(config_path) if config_path else core.DimerParams()
    changes = {k: v for k, v in overrides.items() if v is not None}
    try:
        return p.replace(**changes) if changes else p
    except ValueError as exc:
        raise core.ConfigError(str(exc)) from exc


def _apply_threads(threads: int | None) -> int:
    """Cap the linear-algebra worker pools; default is all cores.

    numpy's pool may already be bound by the time the CLI runs; the
    environment caps late-initializing backends and any worker processes.
    """
    n = threads if threads is not None and threads > 0 else (os.cpu_count() or 1)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    return n


def _run_dir(out_dir, subcommand: str) -> Path:
    if out_dir is not None:
        path = Path(out_dir)
    else:
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y%m%d-%H%M%S-%f")
        path = Path("out") / f"{subcommand}-{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(run_dir: Path, subcommand: str, parameters: dict, seed, outputs, t0: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "parameters": parameters,
        "seed": seed,
        "version": __version__,
        "outputs": list(outputs),
        "duration_seconds": time.perf_counter() - t0,
    }
    write_json(run_dir / "manifest.json", manifest)
    click.echo(str(run_dir.resolve()))


def _check_evolve_memory(space: fock.FockSpace, method: str) -> None:
    # dense propagator (jump) or the stacked adaptive-solver state (master)
    est = 16.0 * space.dim**2 * (12 if method == "jump" else 10)
    if est > spectra.MEMORY_CAP:
        raise MemoryError(
            f"estimated {est / 1e9:.1f} GB for truncation "
            f"{space.nmax1}x{space.nmax2} exceeds the {spectra.MEMORY_CAP / 1e9:.1f} GB cap")


def common_options(command):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="JSON parameter file; flags override its values."),
        click.option("--seed", type=int, default=0, show_default=True,
                     help="Master seed for stochastic subcommands."),
        click.option("--threads", type=int, default=None, envvar="BOSEDIMER_THREADS",
                     help="Worker-pool size for the linear-algebra backends "
                          "(default: all cores; env: BOSEDIMER_THREADS)."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Run directory (default: out/<subcommand>-<utc-timestamp>)."),
    ]
    for opt in reversed(opts):
        command = opt(command)
    return command


def physics_options(command):
    for key in reversed(sorted(core.CONFIG_DEFAULTS)):
        flag = "--" + key.replace("_", "-")
        command = click.option(flag, type=float, default=None,
                               help=f"Override parameter {key} (default {core.CONFIG_DEFAULTS[key]}).")(command)
    return command


@click.group()
@click.version_option(version=__version__, prog_name="bosedimer")
def cli():
    """Driven-dissipative Bose-Hubbard dimer batch runner."""


@cli.command("sweep")
@common_options
@physics_options
@click.option("--f-min", type=float, default=0.0, show_default=True, help="Drive grid start.")
@click.option("--f-max", type=float, default=2.0, show_default=True, help="Drive grid end.")
@click.option("--f-points", type=int, default=21, show_default=True, help="Drive grid size.")
@click.option("--n-ic", type=int, default=100, show_default=True, help="Random initial conditions per drive value.")
@click.option("--t-transient", type=float, default=None, help="Settle time before sampling (default 100/gamma).")
@click.option("--t-sample", type=float, default=None, help="Sampled window after the transient (default 50/gamma).")
@click.option("--sample-interval", type=float, default=None,
              help=f"Sampling step (default {CLOUD_SAMPLE_INTERVAL}/gamma).")
def cmd_sweep(config_path, seed, threads, out_dir, f_min, f_max, f_points, n_ic,
              t_transient, t_sample, sample_interval, **phys):
    """Mean-field order-parameter samples over a drive grid.

    Passing --f-tilde pins the sweep to that single drive value instead of
    the --f-min/--f-max grid.
    """
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    if phys["f_tilde"] is not None:
        f_grid = np.array([p.f_tilde])
    else:
        f_grid = np.linspace(f_min, f_max, f_points)
    t_transient = 100.0 / p.gamma if t_transient is None else t_transient
    t_sample = 50.0 / p.gamma if t_sample is None else t_sample
    sample_interval = CLOUD_SAMPLE_INTERVAL / p.gamma if sample_interval is None else sample_interval
    result = semiclassical.order_parameter_sweep(
        p, f_grid, n_ic=n_ic, t_transient=t_transient, t_sample=t_sample,
        seed=seed, sample_interval=sample_interval)
    run_dir = _run_dir(out_dir, "sweep")
    write_table(run_dir / "sweep.csv", result.table)
    outputs = ["sweep.csv"]
    if result.failures:
        write_json(run_dir / "failures.json",
                   {"failures": [{"f_tilde": f, "ic_index": i, "message": m}
                                 for f, i, m in result.failures]})
        outputs.append("failures.json")
    parameters = {**p.as_dict(), "f_grid": [float(f) for f in f_grid], "n_ic": n_ic,
                  "t_transient": t_transient, "t_sample": t_sample,
                  "sample_interval": sample_interval, "threads": n_threads}
    _finish(run_dir, "sweep", parameters, seed, outputs, t0)


@cli.command("portrait")
@common_options
@physics_options
@click.option("--n-ic", type=int, default=100, show_default=True, help="Random initial conditions.")
@click.option("--t-transient", type=float, default=None, help="Settle time before sampling (default 100/gamma).")
@click.option("--t-sample", type=float, default=None, help="Sampled window after the transient (default 50/gamma).")
@click.option("--sample-interval", type=float, default=None,
              help=f"Sampling step (default {CLOUD_SAMPLE_INTERVAL}/gamma).")
def cmd_portrait(config_path, seed, threads, out_dir, n_ic, t_transient, t_sample,
                 sample_interval, **phys):
    """Post-transient phase-space clouds of both collective modes."""
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    t_transient = 100.0 / p.gamma if t_transient is None else t_transient
    t_sample = 50.0 / p.gamma if t_sample is None else t_sample
    sample_interval = CLOUD_SAMPLE_INTERVAL / p.gamma if sample_interval is None else sample_interval
    result = semiclassical.phase_portrait(
        p, n_ic=n_ic, seed=seed, t_transient=t_transient, t_sample=t_sample,
        sample_interval=sample_interval)
    run_dir = _run_dir(out_dir, "portrait")
    write_table(run_dir / "portrait.csv", result.table)
    outputs = ["portrait.csv"]
    if result.failures:
        write_json(run_dir / "failures.json",
                   {"failures": [{"f_tilde": f, "ic_index": i, "message": m}
                                 for f, i, m in result.failures]})
        outputs.append("failures.json")
    parameters = {**p.as_dict(), "n_ic": n_ic, "t_transient": t_transient,
                  "t_sample": t_sample, "sample_interval": sample_interval,
                  "threads": n_threads}
    _finish(run_dir, "portrait", parameters, seed, outputs, t0)


@cli.command("fixed-points")
@common_options
@physics_options
@click.option("--sb-tol", type=float, default=1e-6, show_default=True,
              help="Symmetry-breaking detection tolerance on |alpha_b|.")
def cmd_fixed_points(config_path, seed, threads, out_dir, sb_tol, **phys):
    """Mean-field fixed points and the limit-cycle coexistence window."""
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    points = [("symmetric", semiclassical.fixed_point_symmetric(p))]
    points += [("symmetry_breaking", fp)
               for fp in semiclassical.find_symmetry_breaking_fixed_points(p, sb_tol=sb_tol)]
    window = semiclassical.instability_window(p)

    def record(label, fp):
        eigs = np.sort_complex(fp.jacobian_eigenvalues)
        return {"label": label,
                "alpha_b": [fp.state.alpha_b.real, fp.state.alpha_b.imag],
                "alpha_a": [fp.state.alpha_a.real, fp.state.alpha_a.imag],
                "stability": fp.stability.value,
                "symmetry_breaking": fp.symmetry_breaking,
                "jacobian_eigenvalues": [[w.real, w.imag] for w in eigs]}

    payload = {"window": None if window is None else [window[0], window[1]],
               "fixed_points": [record(label, fp) for label, fp in points]}
    header = ["label", "re_alpha_b", "im_alpha_b", "re_alpha_a", "im_alpha_a",
              "stability", "symmetry_breaking"]
    header += [f"{part}_eig_{i}" for i in range(1, 5) for part in ("re", "im")]
    rows = []
    for rec in payload["fixed_points"]:
        row = [rec["label"], *rec["alpha_b"], *rec["alpha_a"],
               rec["stability"], rec["symmetry_breaking"]]
        for re_im in rec["jacobian_eigenvalues"]:
            row += re_im
        rows.append(row)
    run_dir = _run_dir(out_dir, "fixed-points")
    write_json(run_dir / "fixed_points.json", payload)
    write_csv(run_dir / "fixed_points.csv", header, rows)
    parameters = {**p.as_dict(), "sb_tol": sb_tol, "threads": n_threads}
    _finish(run_dir, "fixed-points", parameters, seed,
            ["fixed_points.json", "fixed_points.csv"], t0)


TIME_SERIES_HEADER = ("t", "re_alpha_a", "im_alpha_a", "re_alpha_b", "im_alpha_b",
                      "n_a", "n_b")
STDERR_HEADER = ("se_re_alpha_a", "se_im_alpha_a", "se_re_alpha_b", "se_im_alpha_b",
                 "se_n_a", "se_n_b")


def _series_columns(series):
    return (series.times, series.mean_a_a.real, series.mean_a_a.imag,
            series.mean_a_b.real, series.mean_a_b.imag, series.n_a, series.n_b)


def _stderr_columns(stderr: dict):
    return tuple(stderr[key] for key in ("re_a_a", "im_a_a", "re_a_b", "im_a_b",
                                         "n_a", "n_b"))


@cli.command("evolve")
@common_options
@physics_options
@click.option("--method", type=click.Choice(["master", "jump", "twa"]), default="master",
              show_default=True, help="Integration backend.")
@click.option("--alpha1", type=COMPLEX, default="-1", show_default=True,
              help="Initial coherent amplitude on site 1.")
@click.option("--alpha2", type=COMPLEX, default="0", show_default=True,
              help="Initial coherent amplitude on site 2.")
@click.option("--t-final", type=float, default=None, help="Evolution time (default 20/gamma).")
@click.option("--n-traj", type=int, default=1000, show_default=True,
              help="Trajectories for jump/twa.")
@click.option("--nmax", type=int, default=None,
              help="Fock cutoff per mode for master/jump (default: occupation-based rule).")
@click.option("--sample-interval", type=float, default=None,
              help="Output grid step (default 1e-2/gamma).")
@click.option("--dt", type=float, default=None, help="Fixed step for twa (default 1e-3/gamma).")
@click.option("--twa-noise", type=click.Choice(["independent", "collective"]),
              default="independent", show_default=True,
              help="Noise decomposition for twa.")
@click.option("--rel-tol", type=float, default=1e-8, show_default=True,
              help="Adaptive tolerance for master.")
def cmd_evolve(config_path, seed, threads, out_dir, method, alpha1, alpha2, t_final,
               n_traj, nmax, sample_interval, dt, twa_noise, rel_tol, **phys):
    """Quantum time evolution: master equation, jump unraveling, or truncated Wigner."""
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    t_final = 20.0 / p.gamma if t_final is None else t_final
    sample_interval = 1e-2 / p.gamma if sample_interval is None else sample_interval
    meta: dict = {"method": method}
    header = list(TIME_SERIES_HEADER)
    if method == "twa":
        series = twa.twa_ensemble(alpha1, alpha2, p, t_final, dt=dt, n_traj=n_traj,
                                  seed=seed, sample_interval=sample_interval,
                                  noise=twa_noise)
        columns = _series_columns(series) + _stderr_columns(series.stderr)
        header += STDERR_HEADER
        meta.update(n_traj=series.n_traj, n_diverged=series.n_diverged, noise=twa_noise)
    else:
        space = spectra.truncation_for(p, nmax)
        _check_evolve_memory(space, method)
        psi0 = fock.coherent_state(alpha1, alpha2, space)
        meta["truncation"] = [space.nmax1, space.nmax2]
        if method == "jump":
            series = fock.quantum_jump_ensemble(psi0, p, space, t_final, n_traj=n_traj,
                                                seed=seed, sample_interval=sample_interval)
            columns = _series_columns(series) + _stderr_columns(series.stderr)
            header += STDERR_HEADER
            meta.update(n_traj=series.n_traj, n_jumps=series.n_jumps)
        else:
            series = fock.integrate_master(psi0, p, space, t_final,
                                           sample_interval=sample_interval,
                                           rel_tol=rel_tol)
            columns = _series_columns(series)
            meta["trace_drift"] = series.trace_drift
    run_dir = _run_dir(out_dir, "evolve")
    write_csv(run_dir / "evolve.csv", header, zip(*columns))
    write_json(run_dir / "evolve.json", meta)
    parameters = {**p.as_dict(), "method": method,
                  "alpha1": [alpha1.real, alpha1.imag],
                  "alpha2": [alpha2.real, alpha2.imag],
                  "t_final": t_final, "n_traj": n_traj, "nmax": nmax,
                  "sample_interval": sample_interval, "dt": dt,
                  "twa_noise": twa_noise, "rel_tol": rel_tol, "threads": n_threads}
    _finish(run_dir, "evolve", parameters, seed, ["evolve.csv", "evolve.json"], t0)


@cli.command("spectrum-liouville")
@common_options
@physics_options
@click.option("--f-min", type=float, default=0.5, show_default=True, help="Drive grid start.")
@click.option("--f-max", type=float, default=1.55, show_default=True, help="Drive grid end.")
@click.option("--f-points", type=int, default=5, show_default=True, help="Drive grid size.")
@click.option("--n-values", default="1,2,3,5,8", show_default=True,
              help="Comma-separated scaling parameters N.")
@click.option("--nmax", type=int, default=None,
              help="Fock cutoff per mode (default: occupation-based rule per N).")
@click.option("--k", type=int, default=20, show_default=True,
              help="Ritz pairs harvested per parity sector.")
@click.option("--sectors", type=click.Choice(["both", "plus", "minus"]), default="both",
              show_default=True, help="Parity sectors to factorize.")
def cmd_spectrum(config_path, seed, threads, out_dir, f_min, f_max, f_points,
                 n_values, nmax, k, sectors, **phys):
    """Liouvillian gap table over (N, drive) plus power-law scaling fits.

    Passing --f-tilde pins the sweep to that single drive value instead of
    the --f-min/--f-max grid.
    """
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    try:
        n_list = [float(x) for x in n_values.split(",") if x.strip()]
    except ValueError as exc:
        raise core.ConfigError(f"--n-values must be comma-separated numbers: {exc}") from exc
    if phys["f_tilde"] is not None:
        f_grid = np.array([p.f_tilde])
    else:
        f_grid = np.linspace(f_min, f_max, f_points)
    for n in n_list:
        pn = p.replace(n_scale=float(n))
        spectra.ensure_feasible(pn, spectra.truncation_for(pn, nmax))
    table = spectra.gap_sweep(p, f_grid, n_values=n_list, k=k, nmax=nmax,
                              sectors=sectors)
    fits = []
    for f_val in f_grid:
        at_f = table[(table["f_tilde"] == f_val) & table["ok"]]
        for gap, column in (("lambda_2_plus", "re_l2p"), ("lambda_1_minus", "re_l1m")):
            good = at_f[np.isfinite(at_f[column]) & (np.abs(at_f[column]) > 0)]
            if len(good) < 3:
                continue
            beta, prefactor, r_squared = spectra.scaling_fit(
                good["n_scale"], np.abs(good[column]))
            fits.append({"f_tilde": float(f_val), "gap": gap, "beta": beta,
                         "prefactor": prefactor, "r_squared": r_squared,
                         "n_values": [float(n) for n in good["n_scale"]]})
    run_dir = _run_dir(out_dir, "spectrum-liouville")
    write_table(run_dir / "gaps.csv", table)
    write_json(run_dir / "scaling.json", {"fits": fits})
    parameters = {**p.as_dict(), "f_grid": [float(f) for f in f_grid],
                  "n_values": n_list, "nmax": nmax, "k": k, "sectors": sectors,
                  "threads": n_threads}
    _finish(run_dir, "spectrum-liouville", parameters, seed,
            ["gaps.csv", "scaling.json"], t0)


@cli.command("g2")
@common_options
@physics_options
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(list(correlations.MODE_LABELS)), default=("1", "B"),
              show_default=True, help="Detected mode; repeatable.")
@click.option("--tau-max", type=float, default=None, help="Delay span (default 20/gamma).")
@click.option("--nmax", type=int, default=None,
              help="Fock cutoff per mode (default: occupation-based rule).")
@click.option("--sample-interval", type=float, default=None,
              help="Delay grid step (default tau_max/499).")
@click.option("--rel-tol", type=float, default=1e-8, show_default=True,
              help="Adaptive tolerance for the regression propagation.")
def cmd_g2(config_path, seed, threads, out_dir, modes, tau_max, nmax, sample_interval,
           rel_tol, **phys):
    """Steady-state second-order coherence curves."""
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    p = _resolve_params(config_path, phys)
    space = spectra.truncation_for(p, nmax)
    rho_ss = fock.steady_state(p, space)
    residual = float(np.linalg.norm(fock.lindblad_rhs(rho_ss, p, space)))
    rows = []
    occupations = {}
    for mode in modes:
        curve = correlations.g2(mode, p, space, tau_max=tau_max,
                                sample_interval=sample_interval, rho_ss=rho_ss,
                                rel_tol=rel_tol)
        a_op = correlations.mode_operator(curve.mode_label, space)
        occupations[curve.mode_label] = rho_ss.expectation(a_op.T.conj() @ a_op).real
        rows += [(curve.mode_label, tau, val)
                 for tau, val in zip(curve.taus, curve.values)]
    run_dir = _run_dir(out_dir, "g2")
    write_csv(run_dir / "g2.csv", ("mode", "tau", "g2"), rows)
    write_json(run_dir / "g2.json",
               {"truncation": [space.nmax1, space.nmax2],
                "steady_state_residual": residual,
                "occupations": occupations})
    parameters = {**p.as_dict(), "modes": list(modes), "tau_max": tau_max,
                  "nmax": nmax, "sample_interval": sample_interval,
                  "rel_tol": rel_tol, "threads": n_threads}
    _finish(run_dir, "g2", parameters, seed, ["g2.csv", "g2.json"], t0)


@cli.command("fft")
@common_options
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV with a uniform time column.")
@click.option("--column", "columns", multiple=True, required=True,
              help="Series column; give twice for (real, imaginary) parts.")
@click.option("--time-column", default="t", show_default=True, help="Time axis column.")
@click.option("--window", type=click.Choice(["none", "hann"]), default="none",
              show_default=True, help="Taper applied before transforming.")
@click.option("--rel-height", type=float, default=analysis.DEFAULT_REL_HEIGHT,
              show_default=True, help="Peak threshold relative to the tallest line.")
def cmd_fft(config_path, seed, threads, out_dir, input_path, columns, time_column,
            window, rel_height):
    """One-sided spectrum of a previously emitted time series."""
    t0 = time.perf_counter()
    n_threads = _apply_threads(threads)
    if len(columns) > 2:
        raise click.UsageError("--column accepts at most two columns (real, imaginary)")
    data = np.genfromtxt(input_path, delimiter=",", names=True)
    names = data.dtype.names or ()
    for name in (time_column, *columns):
        if name not in names:
            raise ValueError(f"column {name!r} not in {input_path}; available: {list(names)}")
    times = data[time_column]
    if times.size < 2:
        raise ValueError("need at least two samples")
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12 * max(1.0, abs(dt))):
        raise ValueError(f"time column {time_column!r} is not uniformly sampled")
    series = data[columns[0]].astype(complex)
    if len(columns) == 2:
        series += 1j * data[columns[1]]
    spec = analysis.fourier_spectrum(series, dt, window=None if window == "none" else window)
    peaks = analysis.detect_peaks(spec, rel_height=rel_height)
    run_dir = _run_dir(out_dir, "fft")
    write_csv(run_dir / "spectrum.csv", ("omega", "magnitude"),
              zip(spec.frequencies, spec.magnitudes))
    write_csv(run_dir / "peaks.csv", ("omega", "height"), peaks)
    parameters = {"input": str(input_path), "columns": list(columns),
                  "time_column": time_column, "window": window,
                  "rel_height": rel_height, "dt": dt, "threads": n_threads}
    _finish(run_dir, "fft", parameters, seed, ["spectrum.csv", "peaks.csv"], t0)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> int:
    """Entry point returning an exit code; errors become JSON records on stderr."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        _emit_error("Abort", "interrupted")
        return 130
    except click.ClickException as exc:
        _emit_error(type(exc).__name__, exc.format_message())
        return exc.exit_code or 2
    except Exception as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
