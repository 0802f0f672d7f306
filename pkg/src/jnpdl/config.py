"""Experiment configuration: flat key=value files merged with CLI flags.

Unknown keys are rejected so typos fail loudly; missing keys fall back
to the documented defaults.  Flag values override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ValidationError
from .training import Hyperparams


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def parse_atoms_per_class(text: str):
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValidationError("atoms_per_class must hold at least one integer")
    values = []
    for p in parts:
        try:
            values.append(int(p))
        except ValueError:
            raise ValidationError(f"atoms_per_class: bad integer {p!r}") from None
    return values[0] if len(values) == 1 else values


_HYPER_PARSERS = {
    "s_p": int, "q": int, "alpha1": float, "alpha2": float, "alpha3": float,
    "beta": float, "lambda1": float, "lambda2": float, "sigma": float,
    "k1": int, "k2": int, "k2_proj": int, "T": int, "T_pre": int, "tol": float,
    "seed": int, "atoms_per_class": parse_atoms_per_class,
    "learn_projection": _parse_bool,
    "coder_max_iters": int, "coder_max_sweeps": int, "coder_tol": float,
    "prox_tau": float, "trust_radius": float, "proj_iters": int,
    "epsilon_div": float,
}

_OPTION_PARSERS = {
    # paths
    "data": str, "model": str, "out_model": str, "out_trace": str,
    "out_metrics": str, "out_coeffs": str, "out_data": str, "out_test_data": str,
    # evaluation
    "set_mode": str, "frames_per_set": int, "mode": str,
    # synthetic data
    "classes": int, "per_class": int, "per_class_test": int, "dim": int,
    "separation": float, "correlation": float,
    # execution
    "threads": int,
}

CONFIG_KEYS = {**_HYPER_PARSERS, **_OPTION_PARSERS}

_OPTION_DEFAULTS = {
    "set_mode": "l2_fast",
    "frames_per_set": 50,
    "mode": "l1",
    "classes": 3,
    "per_class": 30,
    "per_class_test": 0,
    "dim": 20,
    "separation": 5.0,
    "correlation": 0.0,
    "threads": 1,
}

assert set(_HYPER_PARSERS) == {f.name for f in fields(Hyperparams)}


@dataclass
class ExperimentConfig:
    hyper: Hyperparams
    options: dict = field(default_factory=dict)

    def option(self, key: str, default=None):
        if key in self.options:
            return self.options[key]
        return _OPTION_DEFAULTS.get(key, default)

    def require(self, key: str):
        value = self.option(key)
        if value is None:
            raise ValidationError(f"missing required setting {key!r}")
        return value


def parse_config_file(path) -> dict:
    """key=value lines; '#' comments and blank lines ignored; values typed."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in CONFIG_KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = CONFIG_KEYS[key](raw)
            except ValidationError:
                raise
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: bad value {raw!r} for {key!r}"
                ) from None
    return values


def build_config(file_values: dict | None = None, flag_values: dict | None = None) -> ExperimentConfig:
    """Merge typed values (defaults < file < flags) into a config."""
    merged: dict = {}
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in CONFIG_KEYS:
                raise ValidationError(f"unknown config key {key!r}")
            merged[key] = value
    hyper_kwargs = {k: v for k, v in merged.items() if k in _HYPER_PARSERS}
    options = {k: v for k, v in merged.items() if k in _OPTION_PARSERS}
    return ExperimentConfig(hyper=Hyperparams(**hyper_kwargs), options=options)
