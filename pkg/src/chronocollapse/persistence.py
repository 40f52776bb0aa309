"""File formats and random streams.

Collapse records are plain text::

    #version=1
    #a=1.0
    ...
    1.5<TAB>1<TAB>-0.25

Reals are written as shortest round-trip decimals, so write -> parse -> write
is byte-exact.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, RecordFormatError, RecordOrderingError, RecordVersionError
from .grw import CollapseEvent, CollapseRecord
from .state import GridSpec, ModelParams, PotentialSpec

RECORD_VERSION = "1"
_HEADER_KEYS = (
    "version", "a", "lambda", "mass", "hbar", "potential", "max_substep",
    "num_points", "x_min", "dx", "num_particles", "t_start", "t_end",
)


def fmt_real(x) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# collapse records


def format_record(record: CollapseRecord) -> str:
    p, g = record.params, record.grid
    header = {
        "version": RECORD_VERSION,
        "a": fmt_real(p.a),
        "lambda": fmt_real(p.rate),
        "mass": fmt_real(p.mass),
        "hbar": fmt_real(p.hbar),
        "potential": p.potential.describe(),
        "max_substep": fmt_real(p.max_substep),
        "num_points": str(g.num_points),
        "x_min": fmt_real(g.x_min),
        "dx": fmt_real(g.dx),
        "num_particles": str(g.num_particles),
        "t_start": fmt_real(record.t_start),
        "t_end": fmt_real(record.t_end),
    }
    lines = [f"#{key}={header[key]}" for key in _HEADER_KEYS]
    for ev in record.events:
        lines.append(f"{fmt_real(ev.time)}\t{int(ev.particle)}\t{fmt_real(ev.center)}")
    return "\n".join(lines) + "\n"


def write_record(record: CollapseRecord, sink) -> int:
    """Write ``record`` to a path or text stream; returns the byte count."""
    text = format_record(record)
    data = text.encode("utf-8")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(data)
    else:
        sink.write(text)
    return len(data)


def parse_record(source) -> CollapseRecord:
    """Inverse of :func:`write_record`. ``source`` is a path, stream or text."""
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                           and os.path.exists(source)):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()

    header: Dict[str, str] = {}
    events: List[CollapseEvent] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            if events:
                raise RecordFormatError("header line after event lines", lineno)
            key, sep, value = line[1:].partition("=")
            if not sep or key not in _HEADER_KEYS:
                raise RecordFormatError(f"bad header line {line!r}", lineno)
            if key in header:
                raise RecordFormatError(f"duplicate header key {key!r}", lineno)
            if key == "version" and value != RECORD_VERSION:
                raise RecordVersionError(
                    f"record version {value!r}, this reader handles {RECORD_VERSION!r}", lineno
                )
            header[key] = value
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RecordFormatError("event line needs time<TAB>particle<TAB>center", lineno)
        try:
            t, particle, z = float(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise RecordFormatError(str(exc), lineno) from None
        if not (math.isfinite(t) and math.isfinite(z)):
            raise RecordFormatError("non-finite value", lineno)
        if "num_particles" in header and not 1 <= particle <= int(header["num_particles"]):
            raise RecordFormatError(
                f"particle {particle} outside [1, {header['num_particles']}]", lineno
            )
        if events and not t > events[-1].time:
            raise RecordOrderingError("event times must strictly increase", lineno)
        events.append(CollapseEvent(t, particle, z))

    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise RecordFormatError(f"missing header keys: {', '.join(missing)}")
    try:
        params = ModelParams(
            a=float(header["a"]),
            rate=float(header["lambda"]),
            mass=float(header["mass"]),
            hbar=float(header["hbar"]),
            potential=PotentialSpec.parse(header["potential"]),
            max_substep=float(header["max_substep"]),
        )
        grid = GridSpec(
            int(header["num_points"]), float(header["x_min"]), float(header["dx"]),
            int(header["num_particles"]),
        )
        return CollapseRecord(params, grid, tuple(events),
                              float(header["t_start"]), float(header["t_end"]))
    except (ValueError, IndexError) as exc:
        raise RecordFormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# random streams


def split_stream(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible generator for trajectory ``index`` of a run."""
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if int(index) < 0:
        raise ValueError("stream index must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


# ---------------------------------------------------------------------------
# CSV


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_real(value)
    return str(value)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    data = format_csv(header, rows).encode("utf-8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Every knob of an experiment run. Keys in config files match field names
    (``lambda`` is accepted for ``rate``)."""

    # model
    a: float = 1.0
    rate: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    potential: str = "harmonic"
    omega: float = 1.0
    max_substep: float = 1e-3
    # grid
    num_points: int = 256
    x_min: float = -16.0
    dx: float = 0.125
    num_particles: int = 1
    # ensemble
    duration: float = 30.0
    trajectories: int = 200
    seed: Optional[int] = None
    min_events: int = 15
    max_events: int = 0
    washout: int = 5
    # initial (forward) states and backward test states: Gaussian packets
    init_center_min: float = -2.0
    init_center_max: float = 2.0
    init_width_min: float = 0.5
    init_width_max: float = 2.0
    test_state: str = "gaussian"
    test_center_min: float = -2.0
    test_center_max: float = 2.0
    test_width_min: float = 0.5
    test_width_max: float = 2.0
    # analysis
    alpha: float = 0.01
    direction: str = "forward"
    sample_interval: float = 0.1
    mc_runs: int = 100000
    oracle_models: int = 3
    oracle_max_dim: int = 4
    oracle_max_steps: int = 6
    model_file: str = ""
    # output
    out: str = "out"

    def __post_init__(self):
        checks = {
            "a": self.a > 0, "rate": self.rate >= 0, "mass": self.mass > 0,
            "hbar": self.hbar > 0, "omega": self.omega > 0, "max_substep": self.max_substep > 0,
            "num_points": self.num_points >= 2, "dx": self.dx > 0,
            "num_particles": self.num_particles >= 1, "duration": self.duration > 0,
            "trajectories": self.trajectories >= 1, "min_events": self.min_events >= 0,
            "max_events": self.max_events >= 0, "washout": self.washout >= 0,
            "init_width_min": self.init_width_min > 0,
            "init_width_max": self.init_width_max >= self.init_width_min,
            "init_center_max": self.init_center_max >= self.init_center_min,
            "test_width_min": self.test_width_min > 0,
            "test_width_max": self.test_width_max >= self.test_width_min,
            "test_center_max": self.test_center_max >= self.test_center_min,
            "alpha": 0 < self.alpha < 1, "sample_interval": self.sample_interval > 0,
            "mc_runs": self.mc_runs >= 1, "oracle_models": self.oracle_models >= 1,
            "oracle_max_dim": 2 <= self.oracle_max_dim <= 16,
            "oracle_max_steps": self.oracle_max_steps >= 1,
        }
        for key, ok in checks.items():
            if not ok:
                raise ConfigError(key, f"invalid value {getattr(self, key)!r}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f.name, "must be finite")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if self.potential.split(":")[0] not in ("free", "harmonic", "tabulated"):
            raise ConfigError("potential", f"unknown potential {self.potential!r}")
        if self.test_state not in ("gaussian", "forward_final"):
            raise ConfigError("test_state", "must be 'gaussian' or 'forward_final'")
        if self.direction not in ("forward", "backward"):
            raise ConfigError("direction", "must be 'forward' or 'backward'")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("seed", "no seed given (use --seed, the config file or CHRONO_SEED)")
        return self.seed

    def merged(self, values: Mapping[str, Any]) -> "RunConfig":
        """Copy with ``values`` (raw strings or typed) applied on top."""
        return replace(self, **coerce_values(values))

    def grid(self) -> GridSpec:
        return GridSpec(self.num_points, self.x_min, self.dx, self.num_particles)

    def params(self) -> ModelParams:
        if self.potential == "harmonic":
            pot = PotentialSpec.harmonic(self.omega)
        else:
            try:
                pot = PotentialSpec.parse(self.potential)
            except ValueError as exc:
                raise ConfigError("potential", str(exc)) from None
        return ModelParams(self.a, self.rate, self.mass, self.hbar, pot, self.max_substep)

    def items(self):
        for f in fields(self):
            key = "lambda" if f.name == "rate" else f.name
            yield key, getattr(self, f.name)

    def to_text(self) -> str:
        lines = []
        for key, value in self.items():
            lines.append(f"{key} = {'' if value is None else _cell(value)}")
        return "\n".join(lines) + "\n"


def _type_name(t) -> str:
    if isinstance(t, str):
        return t
    if t in (float, int, str):
        return t.__name__
    return "Optional[int]"


_FIELD_TYPES = {f.name: _type_name(f.type) for f in fields(RunConfig)}
_ALIASES = {"lambda": "rate", "T": "duration"}


def coerce_values(values: Mapping[str, Any]) -> Dict[str, Any]:
    out = {}
    for raw_key, value in values.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key not in _FIELD_TYPES:
            raise ConfigError(raw_key, "unknown configuration key")
        kind = _FIELD_TYPES[key]
        try:
            if not isinstance(value, str):
                out[key] = value
            elif kind == "float":
                out[key] = float(value)
            elif kind == "int":
                out[key] = int(value)
            elif kind == "Optional[int]":
                out[key] = None if value.strip() == "" else int(value)
            else:
                out[key] = value.strip()
        except ValueError:
            raise ConfigError(raw_key, f"cannot parse {value!r} as {kind}") from None
        if isinstance(out[key], float) and not math.isfinite(out[key]):
            raise ConfigError(raw_key, "must be finite")
    return out


def parse_config_text(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        values[key] = value.strip()
    coerce_values(values)  # validate keys and types early
    return values


def load_config(path, base: Optional[RunConfig] = None) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    return (base or RunConfig()).merged(values)


# ---------------------------------------------------------------------------
# discrete model files


def parse_model_text(text: str):
    """Read a discrete model definition.

    Format (``#`` comments)::

        labels = S F D C
        outcome_labels = S F D C       # optional
        povm = basis                   # or 'custom' followed by effect blocks
        effect                         # custom POVM only, one block per effect
        row = 1 0 0 0                  # complex entries, e.g. 0.5j or 1-2j
        ...
        end
        step collapse=yes              # one block per step
        unitary = identity             # or dim 'row =' lines
        end
    """
    from .discrete import DiscreteModel, Step, basis_povm

    labels = outcome_labels = None
    povm_kind = "basis"
    effects: List[np.ndarray] = []
    steps: List[tuple] = []
    block = None  # ("effect"|"step", rows, collapse, identity)

    def parse_row(value, lineno):
        try:
            return [complex(tok) for tok in value.split()]
        except ValueError:
            raise RecordFormatError(f"bad matrix row {value!r}", lineno) from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if block is not None:
            if line == "end":
                kind, rows, collapse, identity = block
                d = len(labels)
                if identity:
                    mat = np.eye(d, dtype=complex)
                elif len(rows) != d or any(len(r) != d for r in rows):
                    raise RecordFormatError(f"{kind} needs {d} rows of {d} entries", lineno)
                else:
                    mat = np.array(rows, dtype=complex)
                if kind == "effect":
                    effects.append(mat)
                else:
                    steps.append((mat, collapse))
                block = None
                continue
            key, _, value = (s.strip() for s in line.partition("="))
            if key == "row":
                block[1].append(parse_row(value, lineno))
            elif key == "unitary" and value == "identity" and block[0] == "step":
                block = (block[0], block[1], block[2], True)
            else:
                raise RecordFormatError(f"unexpected {line!r} inside {block[0]} block", lineno)
            continue
        if labels is None and not line.startswith("labels"):
            raise RecordFormatError("'labels = ...' must come first", lineno)
        if line == "effect":
            block = ("effect", [], False, False)
        elif line.startswith("step"):
            opts = dict(tok.split("=", 1) for tok in line.split()[1:] if "=" in tok)
            collapse = opts.get("collapse", "yes").lower() in ("yes", "true", "1")
            block = ("step", [], collapse, False)
        else:
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep:
                raise RecordFormatError(f"unexpected line {line!r}", lineno)
            if key == "labels":
                labels = value.split()
            elif key == "outcome_labels":
                outcome_labels = tuple(value.split())
            elif key == "povm":
                if value not in ("basis", "custom"):
                    raise RecordFormatError("povm must be 'basis' or 'custom'", lineno)
                povm_kind = value
            else:
                raise RecordFormatError(f"unknown key {key!r}", lineno)
    if block is not None:
        raise RecordFormatError(f"unterminated {block[0]} block")
    if labels is None:
        raise RecordFormatError("no labels given")
    povm = basis_povm(len(labels)) if povm_kind == "basis" else tuple(effects)
    try:
        return DiscreteModel(
            tuple(Step(u, povm if collapse else None) for u, collapse in steps),
            tuple(labels),
            povm_labels=outcome_labels,
        )
    except ValueError as exc:
        raise RecordFormatError(str(exc)) from None


def load_model(path):
    return parse_model_text(Path(path).read_text(encoding="utf-8"))
