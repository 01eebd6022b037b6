"""Experiment configuration files.

A config is an INI file with fixed sections for the model, schedule,
simulation, quadrature and output, plus one section per experiment
holding its knobs and pass/fail thresholds. Missing keys fall back to
the documented defaults in ``EXPERIMENT_DEFAULTS``.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

EXPERIMENTS = ("coeff", "met", "clt", "estimate", "tail", "poisson", "hitting")

# thresholds default to the values used by the acceptance suite
EXPERIMENT_DEFAULTS: dict[str, dict[str, str]] = {
    "coeff": {"agreement_tol": "1e-10", "harmonic_tol": "1e-4", "expected_K": "none",
              "expected_K_tol": "1e-8"},
    "met": {"tests": "cos, indicator", "max_final_mse.cos": "0.01",
            "max_final_mse.indicator": "none", "max_final_mse.one": "none"},
    "clt": {"T": "400", "max_ks": "0.12", "bins": "30", "hist_lo": "-4", "hist_hi": "4"},
    "estimate": {"theta_min": "0.01", "theta_max": "10", "projection_floor": "1e-6",
                 "consistency_replicates": "20", "max_final_median": "0.15",
                 "normality_T": "400", "max_ks": "0.12", "bins": "30"},
    "tail": {"delta": "0.5", "max_final_fraction": "0.05"},
    "poisson": {"max_relative_gap": "1e-5"},
    "hitting": {"x_start": "1.0", "target": "0.0", "dt": "1e-4", "T_max": "50",
                "max_standard_errors": "3"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _optional(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    alpha: float = 1.0
    sigma: float = 1.0
    eps: tuple[float, ...] = (0.2, 0.1, 0.05)
    x0: float = 0.0
    horizon_constant: float = 1.0
    horizon_exponent: float = 1.5
    dt_divisor: float = 20.0
    n_replicates: int = 50
    base_seed: int = 0
    workers: int = 1
    length: float | None = None
    max_spacing: float | None = None
    tol: float = 1e-12
    out_dir: str = "out"
    formats: tuple[str, ...] = ("json", "csv", "dat")
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in ("alpha", "sigma", "horizon_constant", "dt_divisor", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.horizon_exponent < 0:
            raise ConfigError("horizon_exponent must be non-negative")
        if not self.eps:
            raise ConfigError("eps list is empty")
        if any(e <= 0 for e in self.eps) or any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps list must be positive and strictly decreasing")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be non-negative")
        for name in ("length", "max_spacing"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        bad = set(self.formats) - {"json", "csv", "dat"}
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        for sec, vals in self.params.items():
            if sec not in EXPERIMENT_DEFAULTS:
                raise ConfigError(f"unknown section [{sec}]")
            unknown = set(vals) - set(EXPERIMENT_DEFAULTS[sec])
            if unknown:
                raise ConfigError(f"unknown keys in [{sec}]: {sorted(unknown)}")

    def param(self, key: str, section: str | None = None) -> str:
        sec = section or self.experiment
        return self.params.get(sec, {}).get(key, EXPERIMENT_DEFAULTS[sec][key])

    def number(self, key: str, section: str | None = None) -> float | None:
        text = self.param(key, section)
        try:
            return _optional(text)
        except ValueError:
            raise ConfigError(f"[{section or self.experiment}] {key} = {text!r} is not a number") from None

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["experiment"] = {"name": self.experiment}
        cp["model"] = {"alpha": _fmt(self.alpha), "sigma": _fmt(self.sigma), "eps": _fmt(self.eps),
                       "x0": _fmt(self.x0)}
        cp["schedule"] = {"horizon_constant": _fmt(self.horizon_constant),
                          "horizon_exponent": _fmt(self.horizon_exponent)}
        cp["simulation"] = {"dt_divisor": _fmt(self.dt_divisor), "n_replicates": str(self.n_replicates),
                            "base_seed": str(self.base_seed), "workers": str(self.workers)}
        cp["quadrature"] = {"length": _fmt(self.length), "max_spacing": _fmt(self.max_spacing),
                            "tol": _fmt(self.tol)}
        cp["output"] = {"directory": self.out_dir, "formats": ", ".join(self.formats)}
        for sec in sorted(self.params):
            cp[sec] = dict(sorted(self.params[sec].items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None

        def get(sec, key, conv, default):
            if not cp.has_option(sec, key):
                return default
            raw = cp.get(sec, key)
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(f"[{sec}] {key} = {raw!r} is invalid") from None

        if not cp.has_option("experiment", "name"):
            raise ConfigError("missing [experiment] name")
        known = {"experiment", "model", "schedule", "simulation", "quadrature", "output"}
        params = {s: dict(cp[s]) for s in cp.sections() if s not in known}
        return cls(
            experiment=cp.get("experiment", "name").strip(),
            alpha=get("model", "alpha", float, 1.0),
            sigma=get("model", "sigma", float, 1.0),
            eps=get("model", "eps", _floats, (0.2, 0.1, 0.05)),
            x0=get("model", "x0", float, 0.0),
            horizon_constant=get("schedule", "horizon_constant", float, 1.0),
            horizon_exponent=get("schedule", "horizon_exponent", float, 1.5),
            dt_divisor=get("simulation", "dt_divisor", float, 20.0),
            n_replicates=get("simulation", "n_replicates", int, 50),
            base_seed=get("simulation", "base_seed", int, 0),
            workers=get("simulation", "workers", int, 1),
            length=get("quadrature", "length", _optional, None),
            max_spacing=get("quadrature", "max_spacing", _optional, None),
            tol=get("quadrature", "tol", float, 1e-12),
            out_dir=get("output", "directory", str.strip, "out"),
            formats=get("output", "formats", lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
                        ("json", "csv", "dat")),
            params=params,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_ini(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
