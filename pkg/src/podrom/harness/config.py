"""Flat key-value experiment configuration.

The file format is one ``key = value`` pair per line; ``#`` starts a comment.
Times may be written relative to the snapshot window length T: the forms
``T``, ``T/4``, ``4T``, ``4*T`` and plain floats are accepted wherever a
T-relative quantity makes sense.  Patched-grid segments are semicolon
separated ``start,end,dt`` triplets whose entries are fractions of T
(``0,1/32,1/128; 1/32,23/32,1/64; 23/32,1,1/128``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

_T_EXPR = re.compile(r"^\s*(?:(\d+(?:\.\d+)?)\s*\*?\s*)?T\s*(?:/\s*(\d+(?:\.\d+)?))?\s*$")


def parse_t_relative(text: str, T: float) -> float:
    """Evaluate a float literal or a T-relative expression like ``4T`` or ``T/4``."""
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _T_EXPR.match(text)
    if not m:
        raise ValueError(f"cannot parse time expression {text!r}")
    num = float(m.group(1)) if m.group(1) else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * T / den


def parse_fraction(text: str) -> float:
    """A plain number or a rational ``p/q``."""
    text = text.strip()
    if "/" in text:
        p, q = text.split("/")
        return float(p) / float(q)
    return float(text)


def parse_segments(text: str) -> list[tuple[float, float, float]]:
    """Segments as fractions of T: ``start,end,dt; start,end,dt; ...``"""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = [parse_fraction(b) for b in part.split(",")]
        if len(bits) != 3:
            raise ValueError(f"segment {part!r} is not start,end,dt")
        out.append((bits[0], bits[1], bits[2]))
    if not out:
        raise ValueError("empty segment list")
    return out


@dataclass
class ExperimentConfig:
    problem: str = "heat"
    nu: float = 1.0
    n: int = 16
    degree: int = 1
    method: str = "bdf2"
    step: str = "auto"                # float or "auto" (= T/8192)
    T_span: str = "auto"              # float or "auto" (estimate a period)
    grid_kind: str = "uniform"
    grid_M: int = 32
    grid_segments: str = ""
    snapshots_kind: str = "fd"
    snapshots_tau: str = "T"
    snapshots_w0: str = "initial"
    pod_rank_tol: float = 1e-12
    rom_r: int = 0                    # 0 means use rom_threshold
    rom_threshold: float = 1e-3
    rom_init: str = "h1_project"
    sampling_density: int = 2048
    horizon_periods: float = 2.0
    spinup_time: float = 60.0
    spinup_step: float = 0.02
    newton_tol: float = 1e-12
    report_floor: bool = False
    debug_dumps: bool = False
    seed: int = 0
    extras: dict = field(default_factory=dict)

    KEY_MAP = {
        "problem": "problem",
        "nu": "nu",
        "n": "n",
        "degree": "degree",
        "method": "method",
        "step": "step",
        "T_span": "T_span",
        "grid.kind": "grid_kind",
        "grid.M": "grid_M",
        "grid.segments": "grid_segments",
        "snapshots.kind": "snapshots_kind",
        "snapshots.tau": "snapshots_tau",
        "snapshots.w0": "snapshots_w0",
        "pod.rank_tol": "pod_rank_tol",
        "rom.r": "rom_r",
        "rom.threshold": "rom_threshold",
        "rom.init": "rom_init",
        "sampling.density": "sampling_density",
        "horizon.periods": "horizon_periods",
        "spinup.time": "spinup_time",
        "spinup.step": "spinup_step",
        "newton_tol": "newton_tol",
        "report_floor": "report_floor",
        "debug.dumps": "debug_dumps",
        "seed": "seed",
    }

    def validate(self) -> None:
        if self.problem not in ("heat", "cubic", "modulated", "brusselator"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.n < 1 or self.degree not in (1, 2):
            raise ValueError("bad mesh parameters")
        if self.method not in ("bdf1", "bdf2"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.grid_kind not in ("uniform", "equidistributed", "patched"):
            raise ValueError(f"unknown grid kind {self.grid_kind!r}")
        if self.grid_kind == "patched" and not self.grid_segments:
            raise ValueError("patched grids need grid.segments")
        if self.grid_kind != "patched" and self.grid_M < 1:
            raise ValueError("grid.M must be positive")
        if self.snapshots_kind not in ("fd", "derivative"):
            raise ValueError(f"unknown snapshot kind {self.snapshots_kind!r}")
        if self.snapshots_w0 not in ("initial", "mean"):
            raise ValueError(f"unknown w0 kind {self.snapshots_w0!r}")
        if self.rom_r < 0:
            raise ValueError("rom.r must be 0 (use threshold) or positive")
        if self.rom_r == 0 and self.rom_threshold <= 0:
            raise ValueError("rom.threshold must be positive when rom.r is 0")
        if self.sampling_density < 1 or self.horizon_periods <= 0:
            raise ValueError("bad sampling settings")
        if self.problem != "brusselator" and self.T_span == "auto":
            raise ValueError("T_span=auto only makes sense for the brusselator")

    def to_dict(self) -> dict:
        out = {}
        for key, attr in self.KEY_MAP.items():
            out[key] = getattr(self, attr)
        out.update(self.extras)
        return out


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(name: str, raw: str, current):
    if isinstance(current, bool):
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"bad boolean for {name}: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        attr = ExperimentConfig.KEY_MAP.get(key)
        if attr is None:
            cfg.extras[key] = raw
            continue
        assert attr in known
        setattr(cfg, attr, _coerce(key, raw, getattr(cfg, attr)))
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return parse_config_text(f.read())
