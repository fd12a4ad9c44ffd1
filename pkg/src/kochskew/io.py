"""Plain-text configuration, run manifests and result emitters."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, KochSkewError
from .geometry import max_fiber_b

ENV_OUT = "KOCHSKEW_OUT"
MANIFEST = "manifest.json"
VERSION = "0.1.0"


def _float(s):
    return float(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if s.strip().lower() in ("", "none", "default") else float(s)


def _point(s):
    parts = [p for p in s.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError("expected two numbers 'x, y'")
    return (float(parts[0]), float(parts[1]))


def _levels(s):
    s = s.strip()
    if ".." in s:
        a, b = s.split("..")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(p) for p in s.replace(",", " ").split())


def _choice(*opts):
    def conv(s):
        s = s.strip()
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return s
    return conv


def _in_open(lo, hi):
    return lambda v: lo < v < hi, f"must lie in ({lo:g},{hi:g})"


def _positive():
    return lambda v: v > 0, "must be positive"


def _nonneg():
    return lambda v: v >= 0, "must be non-negative"


def _fmt_levels(v):
    return " ".join(str(n) for n in v)


# key: (converter, default, check or None, formatter or None, description)
PARAMS = {
    "alpha": (_float, 3.0, _in_open(2, 4), None, "Koch contraction ratio"),
    "level": (int, 2, (lambda v: v >= 1, "must be >= 1"), None, "pre-fractal level n"),
    "b": (_opt_float, None, (lambda v: v is None or v > 0, "must be positive"), None,
          "fiber aspect b (default tan(theta/2))"),
    "h": (_opt_float, None, (lambda v: v is None or v > 0, "must be positive"), None,
          "time step (default h0 alpha^{-2n})"),
    "shell": (_opt_float, None, (lambda v: v is None or v > 0, "must be positive"), None,
              "local-time shell width (default 3 sqrt(h))"),
    "tmax": (_float, 1.0, _positive(), None, "horizon"),
    "delta_n": (_float, 0.0, _nonneg(), None, "killing drift rate"),
    "c_n": (_float, 0.0, _nonneg(), None, "elastic rate"),
    "kill_mode": (_choice("AbsorbOuter", "ElasticClock", "ReflectInterface", "AbsorbInterface"),
                  "AbsorbOuter", None, None, "termination model"),
    "nu_eval": (_choice("sigma-side", "constant"), "sigma-side", None, None, "nu evaluation"),
    "seed": (int, 0, _nonneg(), None, "master seed"),
    "paths": (int, 1000, _positive(), None, "number of paths"),
    "x0": (_point, (0.5, -math.sqrt(3.0) / 6.0), None, lambda v: f"{v[0]!r}, {v[1]!r}",
           "start point"),
    "aggregate": (_bool, True, None, lambda v: "true" if v else "false", "merge far-field steps"),
    "bridge": (_bool, True, None, lambda v: "true" if v else "false", "bridge crossing test"),
    "kappa": (_float, 5.0, (lambda v: v >= 3, "must be >= 3"), None, "far-field safety factor"),
    "kappa_L": (_float, 1.0, _positive(), None, "local-time calibration factor"),
    "h0": (_float, 6.561e-4, _positive(), None, "level step prefactor"),
    "levels": (_levels, (2, 3, 4), (lambda v: len(v) >= 1 and all(n >= 1 for n in v),
                                    "need levels >= 1"), _fmt_levels, "study levels"),
    "horizon": (_float, 0.05, _positive(), None, "study horizon"),
    "robin_c0": (_float, 1.0, _positive(), None, "Robin reference rate"),
}


def defaults() -> dict:
    return {k: v[1] for k, v in PARAMS.items()}


def _convert(key: str, val: str, lineno):
    if key not in PARAMS:
        raise ConfigError(f"unknown key {key!r}", lineno)
    conv, _, check, _, _ = PARAMS[key]
    try:
        v = conv(val)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: type mismatch for {val!r} ({e})", lineno) from None
    if check is not None and not check[0](v):
        raise ConfigError(f"{key} = {val} {check[1]}", lineno)
    return v


def _check_b(out: dict, lineno):
    if out["b"] is not None:
        bmax = max_fiber_b(out["alpha"])
        if out["b"] > bmax:
            raise ConfigError(f"b = {out['b']} must be <= tan(theta/2) = {bmax:.12g}", lineno)


def parse_config(text: str) -> dict:
    """Parse `key = value` lines (with `#` comments) into a validated parameter dict."""
    out = defaults()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        out[key] = _convert(key, val, lineno)
        seen[key] = lineno
    _check_b(out, seen.get("b"))
    return out


def override(params: dict, values: dict) -> dict:
    """Copy of params with string values (e.g. from command-line flags) validated and applied."""
    out = dict(params)
    for key, val in values.items():
        out[key] = _convert(key, str(val), None)
    _check_b(out, None)
    return out


def emit_config(params: dict) -> str:
    lines = []
    for key, (_, _, _, fmt, desc) in PARAMS.items():
        v = params[key]
        if v is None:
            s = "none"
        elif fmt is not None:
            s = fmt(v)
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{key} = {s}  # {desc}")
    return "\n".join(lines) + "\n"


def output_root(path: str | None = None) -> Path:
    return Path(path or os.environ.get(ENV_OUT) or "kochskew-out")


# ---------------------------------------------------------------- emitters

def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    try:
        return f"{float(v):.12g}" if not isinstance(v, str) else v
    except (TypeError, ValueError):
        return str(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        if len(r) != len(header):
            raise KochSkewError(f"row has {len(r)} fields, header has {len(header)}")
        lines.append(",".join(fmt_value(v) for v in r))
    return "\n".join(lines) + "\n"


SURVIVAL_HEADER = ("t", "survival", "ci_lo", "ci_hi")


def survival_csv(curve) -> str:
    return csv_text(SURVIVAL_HEADER, curve.rows())


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "as_dict"):
        return o.as_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def json_text(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_json_default,
                                                   allow_nan=True))),
                      indent=2, sort_keys=True) + "\n"


@dataclass
class RunManifest:
    params: dict
    seed: int
    command: str
    version: str = VERSION
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0
    checksums: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "version": self.version, "started": self.started, "wall_clock": self.wall_clock,
                "checksums": self.checksums, "config": emit_config(self.params)}

    @classmethod
    def load(cls, path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        params = parse_config(d["config"])
        return cls(params, d["seed"], d["command"], d["version"], d["started"], d["wall_clock"],
                   d["checksums"])


def _write(path: Path, text: str) -> str:
    try:
        path.write_text(text)
    except OSError as e:
        raise KochSkewError(f"cannot write {path}: {e}") from e
    return hashlib.sha256(text.encode()).hexdigest()


def emit_results(directory, manifest: RunManifest, tables: dict | None = None,
                 curves: dict | None = None, summaries: dict | None = None,
                 texts: dict | None = None) -> list[Path]:
    """Write CSV tables, survival-curve CSVs, JSON summaries and raw text files, then the manifest.

    tables: name -> (header, rows); curves: name -> SurvivalCurve; summaries: name -> object;
    texts: file name -> text (SVG sketches, vertex rings).
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise KochSkewError(f"cannot create {d}: {e}") from e
    written = []
    out = {}
    for name, (header, rows) in (tables or {}).items():
        out[f"{name}.csv"] = csv_text(header, rows)
    for name, curve in (curves or {}).items():
        out[f"{name}.csv"] = survival_csv(curve)
    for name, obj in (summaries or {}).items():
        out[f"{name}.json"] = json_text(obj)
    out.update(texts or {})
    if MANIFEST in out:
        raise KochSkewError(f"{MANIFEST} is reserved")
    for fname, text in out.items():
        p = d / fname
        manifest.checksums[fname] = _write(p, text)
        written.append(p)
    manifest.wall_clock = time.time() - manifest.started
    p = d / MANIFEST
    _write(p, json_text(manifest.as_dict()))
    written.append(p)
    return written
