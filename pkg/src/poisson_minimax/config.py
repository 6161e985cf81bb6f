"""Run configuration: one JSON file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .boundary import DpConfig
from .errors import ConfigError
from .fode import DEFAULT_STEPS
from .lfd import LfdConfig
from .model import Costs, Model

_DP_FIELDS = {f.name for f in dataclasses.fields(DpConfig)}


@dataclass(frozen=True)
class RunConfig:
    lambda0: float
    lambda1: float
    a: float
    b: float
    seed: int = 20240601
    n_paths: int = 1_000_000
    saddle_paths: int = 100_000
    dp: dict = field(default_factory=dict)
    fode_steps: int = DEFAULT_STEPS
    phi_tol: float = 1e-3
    prescan_points: int = 32
    psi_grid: tuple[float, float, int] | None = None
    output_dir: str | None = None
    alpha_star: float | None = None
    beta_star: float | None = None

    def __post_init__(self):
        # building the embedded types runs their validation
        Model(self.lambda0, self.lambda1)
        costs = Costs(self.a, self.b)
        self.lfd_config()
        if (self.alpha_star is None) != (self.beta_star is None):
            raise ConfigError("alpha_star and beta_star must be given together",
                              field="alpha_star" if self.alpha_star is None else "beta_star")
        if self.alpha_star is not None and not (
                0 < self.alpha_star < costs.threshold < self.beta_star):
            raise ConfigError("need 0 < alpha_star < b/a < beta_star", field="alpha_star")

    @property
    def model(self) -> Model:
        return Model(self.lambda0, self.lambda1)

    @property
    def costs(self) -> Costs:
        return Costs(self.a, self.b)

    @property
    def dp_config(self) -> DpConfig:
        unknown = set(self.dp) - _DP_FIELDS
        if unknown:
            raise ConfigError(f"unknown dp setting(s): {sorted(unknown)}",
                              field=f"dp.{sorted(unknown)[0]}")
        try:
            return DpConfig(**self.dp)
        except ConfigError as e:
            raise ConfigError(str(e), field=f"dp.{e.field}") from None

    def lfd_config(self, workers: int = 1) -> LfdConfig:
        return LfdConfig(
            dp=self.dp_config,
            fode_steps=self.fode_steps,
            seed=self.seed,
            n_paths=self.n_paths,
            saddle_paths=self.saddle_paths,
            phi_tol=self.phi_tol,
            prescan_points=self.prescan_points,
            psi_grid=self.psi_grid,
            workers=workers,
        )

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        del d["output_dir"]  # location only; results must not depend on it
        d["psi_grid"] = list(self.psi_grid) if self.psi_grid is not None else None
        return d


_NUMERIC = {"lambda0", "lambda1", "a", "b", "phi_tol", "alpha_star", "beta_star"}
_INTEGER = {"seed", "n_paths", "saddle_paths", "fode_steps", "prescan_points"}


def _coerce(raw: dict) -> dict:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    out = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown setting {key!r}", field=key)
        if key in _NUMERIC:
            if value is None and key in ("alpha_star", "beta_star"):
                out[key] = value
                continue
            if isinstance(value, bool) or not isinstance(value, int | float):
                raise ConfigError(f"{key} must be a number, got {value!r}", field=key)
            value = float(value)
            if not math.isfinite(value):
                raise ConfigError(f"{key} must be finite", field=key)
        elif key in _INTEGER:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer, got {value!r}", field=key)
            if key == "seed" and not 0 <= value < 2**64:
                raise ConfigError("seed must fit in 64 unsigned bits", field=key)
            if key != "seed" and value < 1:
                raise ConfigError(f"{key} must be positive", field=key)
        elif key == "output_dir":
            if value is not None and not isinstance(value, str):
                raise ConfigError("output_dir must be a string", field=key)
        elif key == "dp":
            if not isinstance(value, dict):
                raise ConfigError("dp must be an object", field=key)
        elif key == "psi_grid" and value is not None:
            if not (isinstance(value, list | tuple) and len(value) == 3):
                raise ConfigError("psi_grid must be [min, max, count]", field=key)
            lo, hi, count = value
            if not isinstance(count, int) or count < 2:
                raise ConfigError("psi_grid count must be an integer >= 2", field=key)
            value = (float(lo), float(hi), count)
        out[key] = value
    for key in ("lambda0", "lambda1", "a", "b"):
        if key not in out:
            raise ConfigError(f"missing required setting {key!r}", field=key)
    return out


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config and apply non-None ``overrides``."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}", field="config") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return RunConfig(**_coerce(raw))
