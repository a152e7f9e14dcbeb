"""Run configuration: dataclass defaults, a flat key-value config file, and
CLI overrides with precedence CLI > file > defaults.

Config files hold one ``key = value`` assignment per line; blank lines and
``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError


@dataclass
class RunConfig:
    grid_csv: str = ""
    values_csv: str = ""
    enso_csv: str = ""
    start: str = ""
    end: str = ""
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    log_level: str = "INFO"

    trim_k: int = 12
    seasonal_period: int = 365
    acf_max_lag: int = 50
    level: float = 0.05
    null_reps: int = 1000

    ordering: str = "zone-then-spiral"
    spiral_first_step: str = "col"
    weight_kind: str = "adjacency"
    weight_scale: float = 1.0
    adjacency: str = "rook"

    bergsma_estimator: str = "u"
    bergsma_max_rows: int = 1500
    bergsma_allow_large: bool = False
    perm_scheme: str = "columns"
    december_to_next_djf: bool = True
    focus_grids: str = ""
    write_panels: bool = True

    def validate(self, require_inputs: bool = False) -> "RunConfig":
        if require_inputs:
            for name in ("grid_csv", "values_csv"):
                value = getattr(self, name)
                if not value:
                    raise ValidationError(f"config: {name} is required")
                if not Path(value).exists():
                    raise ValidationError(f"config: {name} path does not exist: {value}")
            if not self.start or not self.end:
                raise ValidationError("config: start and end dates are required")
        if self.enso_csv and not Path(self.enso_csv).exists():
            raise ValidationError(f"config: enso_csv path does not exist: {self.enso_csv}")
        if self.trim_k < 1:
            raise ValidationError("config: trim_k must be >= 1")
        if self.seasonal_period < 2:
            raise ValidationError("config: seasonal_period must be >= 2")
        if not 0 < self.level < 1:
            raise ValidationError("config: level must be in (0, 1)")
        if self.null_reps < 1:
            raise ValidationError("config: null_reps must be >= 1")
        if self.threads < 1:
            raise ValidationError("config: threads must be >= 1")
        if self.ordering not in ("raster", "spiral", "zone-then-spiral", "zone-then-raster"):
            raise ValidationError(f"config: unknown ordering {self.ordering!r}")
        if self.weight_kind not in ("adjacency", "expdecay"):
            raise ValidationError(f"config: unknown weight_kind {self.weight_kind!r}")
        if self.weight_scale <= 0:
            raise ValidationError("config: weight_scale must be positive")
        if self.adjacency not in ("rook", "queen"):
            raise ValidationError(f"config: unknown adjacency {self.adjacency!r}")
        if self.bergsma_estimator not in ("u", "v"):
            raise ValidationError(f"config: unknown bergsma_estimator {self.bergsma_estimator!r}")
        if self.perm_scheme not in ("columns", "rows", "rows-joint"):
            raise ValidationError(f"config: unknown perm_scheme {self.perm_scheme!r}")
        if self.spiral_first_step not in ("col", "row"):
            raise ValidationError(f"config: unknown spiral_first_step {self.spiral_first_step!r}")
        return self

    def digest(self) -> str:
        text = "\n".join(f"{f.name}={getattr(self, f.name)!r}"
                         for f in dataclasses.fields(self))
        return hashlib.sha256(text.encode()).hexdigest()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in dataclasses.fields(self)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def _coerce(name: str, raw: str, target_type: type):
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError as exc:
        raise ValidationError(f"config key {name}: cannot parse {raw!r} as {target_type.__name__}") from exc


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file does not exist: {path}")
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in dataclasses.fields(RunConfig)}
    out: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in fields:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw, types[key])
    return out


def resolve_config(file_values: dict | None = None, cli_values: dict | None = None) -> RunConfig:
    """Merge defaults, config-file values, and CLI overrides (highest wins)."""
    merged = dataclasses.asdict(RunConfig())
    for source in (file_values or {}, cli_values or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in merged:
                raise ValidationError(f"unknown config key {key!r}")
            merged[key] = value
    return RunConfig(**merged)
