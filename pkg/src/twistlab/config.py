"""Experiment configuration: a flat ``key = value`` text format.

Lines are ``section.name = value``; ``#`` starts a comment.  The metric is
read from ``metric.path`` (relative to the config file) or given inline with
``metric.u.<k1>.<k2>.cos = ...`` style keys.  Unknown keys are errors, so a
misspelt key cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .metric import MetricSpec, SpecFormatError, load_metric_spec, parse_metric_spec


class ConfigError(ValueError):
    """Parse or validation error; ``line``/``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


def _int(s):
    return int(s, 10)


def _bool(s):
    s = s.lower()
    if s in ("true", "yes", "1"):
        return True
    if s in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _pair(s):
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated integers, got {s!r}")
    return (_int(parts[0]), _int(parts[1]))


def _auto_float(s):
    return None if s.lower() == "auto" else float(s)


def _opt_int(s):
    return None if s.lower() == "auto" else _int(s)


# key -> (parser, default)
SCHEMA = {
    "metric.path": (str, None),
    "reduction.v": (_pair, (1, 0)),
    "reduction.R": (float, 2.0),
    "reduction.margin": (float, 1.0),
    "reduction.tol": (float, 1e-10),
    "ham.P": (_auto_float, None),
    "ham.factor_cap": (_int, 1024),
    "ham.audit_grid": (_int, 64),
    "ham.tol": (float, 1e-11),
    "section.grid": (_int, 8),
    "section.tol": (float, 1e-10),
    "rotation.x": (float, 0.0),
    "rotation.y": (float, 0.5),
    "rotation.N": (_int, 10_000),
    "scan.y_min": (float, -1.0),
    "scan.y_max": (float, 1.0),
    "scan.levels": (_int, 40),
    "scan.seeds_per_level": (_int, 1),
    "scan.N": (_int, 4000),
    "scan.Q": (_int, 50),
    "scan.density": (float, 0.02),
    "scan.lipschitz_max": (float, 50.0),
    "scan.rotation_tol": (float, 1e-6),
    "connect.M_plus": (_int, 10_000),
    "connect.M_minus": (_int, 10_000),
    "connect.refine": (_bool, False),
    "connect.max_seeds": (_opt_int, None),
    "reconstruct.samples_per_unit": (_int, 16),
    "reconstruct.window": (_int, 200),
    "run.seed": (_int, 0),
    "output.dir": (str, "out"),
}

METRIC_PREFIX = "metric."


@dataclass
class ExperimentConfig:
    metric: MetricSpec
    values: dict
    text: str
    path: Path | None = None
    metric_source: str = "inline"
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def v(self):
        return self.values["reduction.v"]

    @property
    def hash(self):
        """sha256 of the canonical form (sorted resolved values plus metric)."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def canonical(self):
        from .metric import format_metric_spec

        lines = [f"{k} = {self.values[k]!r}" for k in sorted(self.values) if k != "metric.path"]
        return "\n".join(lines) + "\n" + format_metric_spec(self.metric)

    def with_values(self, **kw):
        vals = dict(self.values)
        for k, v in kw.items():
            vals[k.replace("__", ".")] = v
        return ExperimentConfig(self.metric, vals, self.text, self.path, self.metric_source,
                                self.explicit | set(vals))


def parse_config(text, base_dir=None, path=None):
    values = {k: d for k, (_, d) in SCHEMA.items()}
    explicit = set()
    metric_lines = []
    metric_path_loc = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, col)
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        vcol = line.index("=") + 2 + (len(line.split("=", 1)[1]) - len(line.split("=", 1)[1].lstrip()))
        if key in explicit:
            raise ConfigError(f"duplicate key {key!r}", lineno, col)
        if key.startswith(METRIC_PREFIX) and key != "metric.path":
            metric_lines.append((lineno, col, key[len(METRIC_PREFIX):] + " = " + value))
            explicit.add(key)
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno, col)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno, vcol)
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as e:
            raise ConfigError(f"bad value for {key!r}: {e}", lineno, vcol) from None
        if key == "metric.path":
            metric_path_loc = (lineno, vcol)
        explicit.add(key)

    if values["metric.path"] is not None and metric_lines:
        raise ConfigError("give either metric.path or inline metric coefficients, not both",
                          metric_lines[0][0], metric_lines[0][1])
    if values["metric.path"] is not None:
        mp = Path(values["metric.path"])
        if not mp.is_absolute() and base_dir is not None:
            mp = Path(base_dir) / mp
        if not mp.is_file():
            raise ConfigError(f"metric file not found: {mp}", *metric_path_loc)
        try:
            metric = load_metric_spec(mp)
        except SpecFormatError as e:
            raise ConfigError(f"in metric file {mp}: {e}") from None
        source = str(mp)
    else:
        metric = MetricSpec.flat()
        if metric_lines:
            try:
                metric = parse_metric_spec("\n".join(m[2] for m in metric_lines))
            except SpecFormatError as e:
                lineno, col, _ = metric_lines[e.line - 1]
                raise ConfigError(str(e).split(": ", 1)[-1], lineno, col) from None
        source = "inline"
    cfg = ExperimentConfig(metric, values, text, Path(path) if path else None, source, explicit)
    validate(cfg)
    return cfg


def load_config(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), base_dir=p.parent, path=p)


def validate(cfg):
    v = cfg.values
    a, b = v["reduction.v"]
    if (a, b) == (0, 0) or math.gcd(abs(a), abs(b)) != 1:
        raise ConfigError(f"v not prime: ({a},{b})")
    for key in ("reduction.R", "reduction.margin", "reduction.tol", "ham.tol", "section.tol",
                "scan.density", "scan.lipschitz_max", "scan.rotation_tol"):
        if not (v[key] > 0 and math.isfinite(v[key])):
            raise ConfigError(f"{key} must be positive and finite, got {v[key]!r}")
    if v["ham.P"] is not None and not v["ham.P"] > 0:
        raise ConfigError(f"ham.P must be positive, got {v['ham.P']!r}")
    for key in ("ham.factor_cap", "ham.audit_grid", "section.grid", "scan.levels",
                "scan.seeds_per_level", "scan.Q", "reconstruct.samples_per_unit"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be at least 1, got {v[key]}")
    for key in ("rotation.N", "scan.N"):
        if v[key] < 2:
            raise ConfigError(f"{key} must be at least 2, got {v[key]}")
    for key in ("connect.M_plus", "connect.M_minus", "reconstruct.window"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be at least 1, got {v[key]}")
    if v["connect.max_seeds"] is not None and v["connect.max_seeds"] < 1:
        raise ConfigError("connect.max_seeds must be at least 1")
    if not v["scan.y_max"] > v["scan.y_min"]:
        raise ConfigError(f"scan range is degenerate: [{v['scan.y_min']}, {v['scan.y_max']}]")
    if v["run.seed"] < 0 or v["run.seed"] >= 2 ** 64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    return cfg
