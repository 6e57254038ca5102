"""
Reading and writing hypnograms, hypnodensities, manifests and reports.

This is the only place that touches files. Parsers reject structural
problems (gaps, negative probabilities, bad row sums) and report the
1-based line number of the offending row.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .core import (
    N_STAGES,
    ROW_SUM_TOL,
    STAGE_NAMES,
    Hypnodensity,
    Hypnogram,
    RecordingBundle,
    Stage,
)
from .errors import (
    AlignmentError,
    ConfigError,
    EmptyBundle,
    EmptyInput,
    InvalidStage,
    IoError,
    NormalizationError,
    ParseError,
    SequenceError,
    SerializationError,
)

__all__ = [
    "REPORT_SCHEMA",
    "Manifest",
    "parse_hypnogram_csv",
    "parse_hypnogram_lines",
    "parse_hypnodensity_csv",
    "format_hypnogram_csv",
    "format_hypnodensity_csv",
    "read_manifest",
    "load_bundle",
    "write_report_json",
    "read_report_json",
]

REPORT_SCHEMA = 1
HYPNOGRAM_HEADER = ("epoch", "stage")
HYPNODENSITY_HEADER = ("epoch",) + STAGE_NAMES


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 ({exc})") from None
    if text.startswith("\ufeff"):
        text = text[1:]
    return text


def _rows(text):
    """Yield (line_number, fields) for non-blank lines; LF and CRLF both accepted."""
    for lineno, line in enumerate(_decode(text).split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        yield lineno, [f.strip() for f in line.split(",")]


def _check_header(rows, expected):
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise EmptyInput("no header line") from None
    if tuple(h.lower() for h in header) != tuple(h.lower() for h in expected):
        raise ParseError(f"expected header {','.join(expected)!r}, got {','.join(header)!r}", lineno)


def _epoch_index(token, expected, lineno):
    try:
        epoch = int(token)
    except ValueError:
        raise ParseError(f"epoch {token!r} is not an integer", lineno) from None
    if epoch != expected:
        kind = "duplicate or out-of-order" if epoch < expected else "gap before"
        raise SequenceError(f"{kind} epoch {epoch}, expected {expected}", lineno)


def parse_hypnogram_csv(text, epoch_duration_s: float = 30.0) -> Hypnogram:
    """Parse an ``epoch,stage`` CSV into a :class:`Hypnogram`.

    Epoch indices must run 0, 1, 2, ... without gaps; stage tokens are
    case-insensitive (W, N1, N2, N3, REM, MASK).
    """
    rows = _rows(text)
    _check_header(rows, HYPNOGRAM_HEADER)
    stages = []
    for lineno, fields in rows:
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        _epoch_index(fields[0], len(stages), lineno)
        try:
            stages.append(Stage.from_token(fields[1]))
        except InvalidStage:
            raise ParseError(f"unknown stage token {fields[1]!r}", lineno) from None
    if not stages:
        raise EmptyInput("hypnogram has a header but no epochs")
    return Hypnogram(stages, epoch_duration_s)


def parse_hypnogram_lines(text, epoch_duration_s: float = 30.0) -> Hypnogram:
    """Parse a headerless file holding one stage token per line."""
    stages = []
    for lineno, fields in _rows(text):
        if len(fields) != 1:
            raise ParseError(f"expected a single stage token, got {len(fields)} fields", lineno)
        try:
            stages.append(Stage.from_token(fields[0]))
        except InvalidStage:
            raise ParseError(f"unknown stage token {fields[0]!r}", lineno) from None
    if not stages:
        raise EmptyInput("hypnogram file is empty")
    return Hypnogram(stages, epoch_duration_s)


def parse_hypnodensity_csv(text, epoch_duration_s: float = 30.0) -> Hypnodensity:
    """Parse an ``epoch,W,N1,N2,N3,REM`` CSV into a :class:`Hypnodensity`."""
    rows = _rows(text)
    _check_header(rows, HYPNODENSITY_HEADER)
    probs = []
    for lineno, fields in rows:
        if len(fields) != N_STAGES + 1:
            raise ParseError(f"expected {N_STAGES + 1} fields, got {len(fields)}", lineno)
        _epoch_index(fields[0], len(probs), lineno)
        try:
            row = [float(f) for f in fields[1:]]
        except ValueError:
            raise ParseError("probability is not a decimal number", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite probability", lineno)
        if any(v < 0 for v in row):
            raise ParseError("negative probability", lineno)
        total = math.fsum(row)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise NormalizationError(f"row sums to {total!r}", lineno)
        probs.append(row)
    if not probs:
        raise EmptyInput("hypnodensity has a header but no epochs")
    return Hypnodensity(np.array(probs), epoch_duration_s)


def format_hypnogram_csv(hyp: Hypnogram) -> str:
    lines = [",".join(HYPNOGRAM_HEADER)]
    lines += [f"{i},{name}" for i, name in enumerate(hyp.labels())]
    return "\n".join(lines) + "\n"


def format_hypnodensity_csv(hd: Hypnodensity) -> str:
    # repr() is the shortest string that round-trips the float exactly
    lines = [",".join(HYPNODENSITY_HEADER)]
    lines += [f"{i}," + ",".join(repr(float(v)) for v in row) for i, row in enumerate(hd.probs)]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Manifest:
    """One recording: its epoch length plus the scorer and model files."""

    recording_id: str
    epoch_duration_s: float = 30.0
    scorers: tuple = ()
    models: tuple = ()
    hypnogram_format: str = "csv"
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.hypnogram_format not in ("csv", "lines"):
            raise ConfigError(f"unknown hypnogram format {self.hypnogram_format!r}")
        for kind in ("scorers", "models"):
            entries = tuple((str(n), str(p)) for n, p in getattr(self, kind))
            names = [n for n, _ in entries]
            if len(set(names)) != len(names):
                raise ConfigError(f"duplicate {kind[:-1]} names in manifest {self.recording_id!r}")
            if any(not p for _, p in entries):
                raise ConfigError(f"empty path in {kind} of manifest {self.recording_id!r}")
            object.__setattr__(self, kind, entries)
        object.__setattr__(self, "base_dir", Path(self.base_dir))

    @property
    def scorer_names(self) -> list[str]:
        return [n for n, _ in self.scorers]

    @property
    def model_names(self) -> list[str]:
        return [n for n, _ in self.models]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir=".") -> "Manifest":
        try:
            return cls(
                recording_id=str(data["recording_id"]),
                epoch_duration_s=float(data.get("epoch_duration_s", 30.0)),
                scorers=tuple((e["name"], e["path"]) for e in data.get("scorers", [])),
                models=tuple((e["name"], e["path"]) for e in data.get("models", [])),
                hypnogram_format=data.get("hypnogram_format", "csv"),
                base_dir=Path(base_dir),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed manifest: missing or invalid field {exc}") from None


def read_manifest(path) -> Manifest:
    """Load a manifest JSON file; relative data paths resolve against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise IoError(path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return Manifest.from_dict(data, base_dir=path.parent)


def _read(manifest: Manifest, rel) -> bytes:
    path = manifest.base_dir / rel
    try:
        return path.read_bytes()
    except (FileNotFoundError, IsADirectoryError):
        raise IoError(path, f"recording {manifest.recording_id!r}: cannot read") from None


def load_bundle(manifest: Manifest) -> RecordingBundle:
    """Read every file named in ``manifest`` and return an aligned bundle."""
    if not manifest.scorers and not manifest.models:
        raise EmptyBundle(f"manifest {manifest.recording_id!r} lists no scorers and no models")
    parse_hyp = parse_hypnogram_csv if manifest.hypnogram_format == "csv" else parse_hypnogram_lines
    dur = manifest.epoch_duration_s
    scorers, models = {}, {}
    for name, rel in manifest.scorers:
        scorers[name] = parse_hyp(_read(manifest, rel), dur)
    for name, rel in manifest.models:
        models[name] = parse_hypnodensity_csv(_read(manifest, rel), dur)
    try:
        return RecordingBundle(manifest.recording_id, dur, scorers, models)
    except AlignmentError as exc:
        raise AlignmentError(f"recording {manifest.recording_id!r}: {exc}") from None


def _prepare(obj, path):
    """Convert to plain JSON types, rounding floats to 6 significant digits."""
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return None if obj is None else bool(obj)
    if isinstance(obj, (Integral, np.integer)):
        return int(obj)
    if isinstance(obj, (Real, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise SerializationError(path or "<root>")
        return float(f"{value:.6g}")
    if isinstance(obj, str):
        return obj
    if isinstance(obj, Mapping):
        return {str(k): _prepare(v, f"{path}.{k}" if path else str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_prepare(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    raise TypeError(f"cannot serialise {type(obj).__name__} at {path or '<root>'}")


def write_report_json(report: Mapping[str, Any]) -> bytes:
    """Serialise a report deterministically (sorted keys, 6 significant digits).

    A top-level ``"schema"`` field is added when absent.
    """
    body = dict(report)
    body.setdefault("schema", REPORT_SCHEMA)
    text = json.dumps(_prepare(body, ""), sort_keys=True, indent=2, allow_nan=False)
    return (text + "\n").encode("utf-8")


def read_report_json(data) -> dict:
    return json.loads(_decode(data))
