"""Pipeline configuration.

The config file is INI-style key/value text with a single ``[pipeline]``
section; every key below may be set there or through an environment
variable ``CONDYLETRAJ_<KEY>`` (upper case), which wins over the file.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

from .errors import InvalidArgument

ENV_PREFIX = "CONDYLETRAJ_"


@dataclass(frozen=True)
class PipelineConfig:
    median_window: int = 5
    lowpass_harmonics: float = 5.0
    lowpass_order: int = 2
    fallback_period_s: float = 6.0
    velocity_threshold_fraction: float = 0.2
    min_phase_duration_s: float = 0.3
    closed_level_fraction: float = 0.1
    triple_window: int = 3
    spline_p: float = 0.1
    top_fraction: float = 0.05
    missing_frame_tolerance: float = 0.1
    coverage_threshold: float = 0.5
    asymmetry_threshold_mm: float = 2.5
    displacement_norm_mm: float = 14.0
    msd_mode: str = "polyline"
    point: str = "iscom"
    axial_only: bool = False

    def __post_init__(self):
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise InvalidArgument("median_window must be a positive odd integer")
        if not 0 < self.spline_p <= 1:
            raise InvalidArgument("spline_p must be in (0, 1]")
        if self.point not in ("iscom", "top"):
            raise InvalidArgument("point must be 'iscom' or 'top'")
        if self.msd_mode not in ("polyline", "points"):
            raise InvalidArgument("msd_mode must be 'polyline' or 'points'")
        if self.triple_window < 1 or self.triple_window % 2 == 0:
            raise InvalidArgument("triple_window must be a positive odd integer")

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _coerce(field, raw):
    if field.type in ("bool", bool):
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise InvalidArgument(f"{field.name}: not a boolean: {raw!r}")
    kind = {"int": int, "float": float, "str": str}.get(field.type, str)
    try:
        return kind(str(raw).strip())
    except ValueError:
        raise InvalidArgument(f"{field.name}: cannot parse {raw!r}") from None


def load_config(path=None, overrides=None, environ=None):
    """File values, then environment, then explicit ``overrides``."""
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise InvalidArgument(f"cannot read config {path}: {exc}") from None
        if parser.sections() and "pipeline" not in parser:
            raise InvalidArgument(f"{path}: expected a [pipeline] section")
        for key, raw in (parser["pipeline"].items() if "pipeline" in parser else []):
            if key not in fields:
                raise InvalidArgument(f"{path}: unknown config key {key!r}")
            values[key] = _coerce(fields[key], raw)
    environ = os.environ if environ is None else environ
    for name, f in fields.items():
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _coerce(f, raw)
    for name, val in (overrides or {}).items():
        if val is not None:
            values[name] = val
    return PipelineConfig(**values)


def dump_config(cfg):
    lines = ["[pipeline]"]
    lines += [f"{k} = {v}" for k, v in cfg.to_dict().items()]
    return "\n".join(lines) + "\n"
