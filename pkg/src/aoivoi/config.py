"""JSON run configuration.

Example::

    {
      "system": {"arrival_rate": 10, "beta": 0.5, "phi_variant": "mixture"},
      "classes": [
        {"probability": 0.5, "value": 100, "decay": 0.1,
         "service": {"type": "exponential", "rate": 0.1}},
        {"probability": 0.5, "value": 1, "decay": 1,
         "service": {"type": "deterministic", "duration": 2}}
      ],
      "solver": {"tol": 1e-10, "max_iter": 200, "beta_grid": "0:0.999:41"},
      "simulator": {"epochs": 1000000, "seed": 1}
    }

``arrival_rate`` may be the string ``"inf"`` for generate-at-will sampling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import PHI_VARIANTS, ClassSpec, Deterministic, Exponential, SpecError, SystemSpec
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL


class ConfigError(ValueError):
    """A configuration problem, prefixed with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunConfig:
    spec: SystemSpec
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    beta_grid: list | None = None
    epochs: int = 1_000_000
    seed: int = 0
    extra: dict = field(default_factory=dict)


def parse_beta_grid(text) -> list:
    """``"start:stop:count"`` (inclusive, evenly spaced) or an explicit list."""
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    else:
        parts = str(text).split(":")
        if len(parts) != 3:
            raise ValueError(f"beta grid must look like start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 0:
            raise ValueError("beta grid count must be non-negative")
        values = [float(v) for v in np.linspace(start, stop, count)]
    return values


def _number(obj: dict, key: str, path: str, default=None, allow_inf=False) -> float:
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}", "missing required field")
    v = obj[key]
    if allow_inf and isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _service(obj, path: str):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    kind = str(obj.get("type", "")).lower()
    try:
        if kind == "exponential":
            return Exponential(_number(obj, "rate", path))
        if kind == "deterministic":
            return Deterministic(_number(obj, "duration", path))
    except SpecError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"expected 'exponential' or 'deterministic', got {obj.get('type')!r}")


def spec_from_dict(data: dict, beta: float | None = None, phi_variant: str | None = None) -> SystemSpec:
    if not isinstance(data, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    system = data.get("system")
    if not isinstance(system, dict):
        raise ConfigError("system", "missing or not an object")
    classes_raw = data.get("classes")
    if not isinstance(classes_raw, list) or not classes_raw:
        raise ConfigError("classes", "expected a non-empty array")
    classes = []
    for k, c in enumerate(classes_raw):
        path = f"classes[{k}]"
        if not isinstance(c, dict):
            raise ConfigError(path, "expected an object")
        service = _service(c.get("service"), f"{path}.service")
        try:
            classes.append(
                ClassSpec(
                    probability=_number(c, "probability", path),
                    value=_number(c, "value", path),
                    decay=_number(c, "decay", path),
                    service=service,
                )
            )
        except SpecError as exc:
            raise ConfigError(path, str(exc)) from None
    total = math.fsum(c.probability for c in classes)
    if abs(total - 1.0) > 1e-12:
        raise ConfigError("classes[*].probability", f"probabilities sum to {total!r}, not 1")
    rate = _number(system, "arrival_rate", "system", allow_inf=True)
    if beta is None:
        beta = _number(system, "beta", "system", default=0.0)
    if phi_variant is None:
        phi_variant = system.get("phi_variant", "mixture")
    phi_variant = str(phi_variant).replace("-", "_")
    if phi_variant not in PHI_VARIANTS:
        raise ConfigError("system.phi_variant", f"expected one of {PHI_VARIANTS}, got {phi_variant!r}")
    try:
        return SystemSpec(tuple(classes), rate, beta, phi_variant)
    except SpecError as exc:
        raise ConfigError("system", str(exc)) from None


def config_from_dict(data: dict, beta: float | None = None, phi_variant: str | None = None) -> RunConfig:
    spec = spec_from_dict(data, beta=beta, phi_variant=phi_variant)
    solver = data.get("solver", {}) or {}
    sim = data.get("simulator", {}) or {}
    if not isinstance(solver, dict):
        raise ConfigError("solver", "expected an object")
    if not isinstance(sim, dict):
        raise ConfigError("simulator", "expected an object")
    grid = None
    if "beta_grid" in solver:
        try:
            grid = parse_beta_grid(solver["beta_grid"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver.beta_grid", str(exc)) from None
    epochs = sim.get("epochs", 1_000_000)
    seed = sim.get("seed", 0)
    if isinstance(epochs, bool) or not isinstance(epochs, int):
        raise ConfigError("simulator.epochs", f"expected an integer, got {epochs!r}")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("simulator.seed", f"expected an unsigned 64-bit integer, got {seed!r}")
    max_iter = solver.get("max_iter", DEFAULT_MAX_ITER)
    if isinstance(max_iter, bool) or not isinstance(max_iter, int) or max_iter < 1:
        raise ConfigError("solver.max_iter", f"expected a positive integer, got {max_iter!r}")
    tol = _number(solver, "tol", "solver", default=DEFAULT_TOL)
    if not tol > 0:
        raise ConfigError("solver.tol", "must be positive")
    return RunConfig(spec=spec, tol=tol, max_iter=max_iter, beta_grid=grid, epochs=epochs, seed=seed)


def load_config(path, beta: float | None = None, phi_variant: str | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return config_from_dict(data, beta=beta, phi_variant=phi_variant)
