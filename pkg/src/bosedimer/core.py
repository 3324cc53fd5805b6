"""Parameter bookkeeping, scaling conventions, and mode-basis transforms.

All frequencies are quoted in units of the collective loss rate gamma and
times in units of 1/gamma; gamma itself stays configurable so nothing in
the formulas hard-codes the unit choice.  The scaling family

    F = f_tilde * sqrt(n_scale),    U = u_tilde / n_scale

connects bare Hamiltonian constants (F, U) to the rescaled quantities
(f_tilde, u_tilde) that remain finite as n_scale grows; the combination
F*sqrt(U) = f_tilde*sqrt(u_tilde) is independent of n_scale.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os

_SQRT2 = math.sqrt(2.0)

#: Keys accepted in a parameter file, with their defaults.
CONFIG_DEFAULTS = {
    "delta": 0.8,
    "j_coupling": 1.1,
    "u_tilde": 1.0,
    "f_tilde": 0.5,
    "gamma": 1.0,
    "kappa": 0.0,
    "n_scale": 1.0,
}


class ConfigError(ValueError):
    """Raised when a parameter file is malformed or has unknown keys."""


@dataclasses.dataclass(frozen=True)
class DimerParams:
    """Model constants of the driven dimer.

    delta       pump-mode detuning Delta = omega_p - omega_c
    j_coupling  inter-site tunneling J
    u_tilde     rescaled Kerr interaction (u_tilde = U * n_scale), >= 0
    f_tilde     rescaled coherent drive amplitude (f_tilde = F / sqrt(n_scale))
    gamma       collective loss rate, > 0 (the frequency unit by convention)
    kappa       optional local per-site loss rate, >= 0 (off by default)
    n_scale     scaling parameter N > 0; real-valued since it only enters
                through the F, U rescaling
    """

    delta: float = 0.8
    j_coupling: float = 1.1
    u_tilde: float = 1.0
    f_tilde: float = 0.5
    gamma: float = 1.0
    kappa: float = 0.0
    n_scale: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.n_scale > 0:
            raise ValueError(f"n_scale must be positive, got {self.n_scale}")
        if self.u_tilde < 0:
            raise ValueError(f"u_tilde must be nonnegative, got {self.u_tilde}")

    def replace(self, **changes) -> "DimerParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class ModeState:
    """Rescaled amplitudes of the collective modes.

    alpha_b is the lossy symmetric combination, alpha_a the driven
    antisymmetric one: alpha_b = (alpha_1 + alpha_2)/sqrt(2),
    alpha_a = (alpha_1 - alpha_2)/sqrt(2).
    """

    alpha_b: complex
    alpha_a: complex


def to_site_basis(state: ModeState) -> tuple[complex, complex]:
    """Site amplitudes (alpha_1, alpha_2) of a symmetric/antisymmetric state."""
    alpha1 = (state.alpha_b + state.alpha_a) / _SQRT2
    alpha2 = (state.alpha_b - state.alpha_a) / _SQRT2
    return alpha1, alpha2


def from_site_basis(alpha1: complex, alpha2: complex) -> ModeState:
    """Inverse of to_site_basis."""
    return ModeState(alpha_b=(alpha1 + alpha2) / _SQRT2, alpha_a=(alpha1 - alpha2) / _SQRT2)


def bare_params(p: DimerParams) -> tuple[float, float]:
    """Bare drive and interaction (F, U) = (f_tilde*sqrt(N), u_tilde/N)."""
    if not p.n_scale > 0:
        raise ValueError(f"n_scale must be positive, got {p.n_scale}")
    return p.f_tilde * math.sqrt(p.n_scale), p.u_tilde / p.n_scale


def load_config(path: str | os.PathLike) -> DimerParams:
    """Read a strict JSON parameter file.

    Only the keys in CONFIG_DEFAULTS are accepted; an unknown (e.g.
    misspelled) key aborts before any computation rather than silently
    falling back to a default. Missing keys take their defaults.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return params_from_mapping(raw, source=str(path))


def params_from_mapping(raw: dict, source: str = "config") -> DimerParams:
    """Validate a key/value mapping against the config schema."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object/mapping")
    unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}; allowed keys are {sorted(CONFIG_DEFAULTS)}")
    values = dict(CONFIG_DEFAULTS)
    for key, val in raw.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{source}: key {key!r} must be a number, got {val!r}")
        values[key] = float(val)
    try:
        return DimerParams(**values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
