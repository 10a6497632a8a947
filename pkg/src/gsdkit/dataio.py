"""Dataset ingestion, result serialisation and random stream derivation."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
FLOAT_DIGITS = 12
DEFAULT_MC = 10_000
DEFAULT_SMALL_SIZES = (12, 24, 50)

_MASK64 = (1 << 64) - 1


class DataError(ValueError):
    """Input data failed validation."""


@dataclass
class Dataset:
    stimuli: list  # [(stimulus_id, counts ndarray of length 5)]
    name: str = ""
    source_format: str = "counts"

    def __post_init__(self):
        seen = set()
        for sid, counts in self.stimuli:
            if sid in seen:
                raise DataError(f"duplicate stimulus_id {sid!r}")
            seen.add(sid)
            counts = np.asarray(counts)
            if counts.shape != (5,) or np.any(counts < 0) or counts.sum() < 1:
                raise DataError(f"invalid counts for stimulus {sid!r}: {counts}")

    def __len__(self):
        return len(self.stimuli)

    def __iter__(self):
        return iter(self.stimuli)

    @property
    def ids(self):
        return [sid for sid, _ in self.stimuli]

    def counts_matrix(self) -> np.ndarray:
        return np.array([c for _, c in self.stimuli], dtype=np.int64).reshape(-1, 5)


@dataclass
class RunConfig:
    mc: int = DEFAULT_MC
    seed: int = 0
    model: str = "gsd"
    small_sizes: tuple = DEFAULT_SMALL_SIZES
    alpha_grid: tuple = field(default_factory=lambda: tuple(np.round(np.arange(1, 1001) / 1000, 3)))
    bin_width: float = 0.05
    threads: int = 1

    def __post_init__(self):
        if self.mc < 1:
            raise ValueError("mc must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("alpha_grid")
        d.pop("threads")
        d["small_sizes"] = list(self.small_sizes)
        return d


def stimulus_hash(stimulus_id: str) -> int:
    """64-bit BLAKE2b digest of the UTF-8 stimulus id (little-endian)."""
    digest = hashlib.blake2b(str(stimulus_id).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_stream(seed: int, stimulus_id: str, replicate: int) -> np.random.Generator:
    """Independent PCG64 stream for one (seed, stimulus, replicate) triple.

    The entropy words are ``[seed, blake2b64(stimulus_id), replicate]`` fed to
    numpy's ``SeedSequence``, whose hashing mixes them into the PCG64 state.
    Identical inputs give identical streams on every platform.
    """
    if replicate < 0:
        raise ValueError("replicate must be non-negative")
    ss = np.random.SeedSequence([int(seed) & _MASK64, stimulus_hash(stimulus_id), int(replicate)])
    return np.random.Generator(np.random.PCG64(ss))


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy) & _MASK64


# ---------------------------------------------------------------- ingestion

def _read_rows(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise DataError(f"{path}: empty file")
    rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return reader.fieldnames, rows


def _parse_int(value, what, row_no):
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise DataError(f"row {row_no}: {what} {value!r} is not a number") from None
    if not f.is_integer():
        raise DataError(f"row {row_no}: {what} {value!r} is not an integer")
    return int(f)


def load_responses(path, format: str = "tidy", name: str | None = None) -> Dataset:
    """Read a CSV of per-response (``tidy``) or per-stimulus (``counts``) data.

    ``tidy`` needs columns ``stimulus_id,score``; ``counts`` needs
    ``stimulus_id,n1,...,n5``. Row numbers in error messages count the header
    as row 1.
    """
    fieldnames, rows = _read_rows(path)
    fields = [f.strip() for f in fieldnames]
    tallies: OrderedDict[str, np.ndarray] = OrderedDict()
    if format == "tidy":
        missing = {"stimulus_id", "score"} - set(fields)
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        for i, row in enumerate(rows, start=2):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            sid = (row["stimulus_id"] or "").strip()
            if not sid:
                raise DataError(f"row {i}: empty stimulus_id")
            score = _parse_int(row["score"], "score", i)
            if not 1 <= score <= 5:
                raise DataError(f"row {i}: score {score} outside 1..5")
            tallies.setdefault(sid, np.zeros(5, dtype=np.int64))[score - 1] += 1
    elif format == "counts":
        cols = ["n1", "n2", "n3", "n4", "n5"]
        missing = {"stimulus_id", *cols} - set(fields)
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        for i, row in enumerate(rows, start=2):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            sid = (row["stimulus_id"] or "").strip()
            if not sid:
                raise DataError(f"row {i}: empty stimulus_id")
            if sid in tallies:
                raise DataError(f"row {i}: duplicate stimulus_id {sid!r}")
            counts = np.array([_parse_int(row[c], c, i) for c in cols], dtype=np.int64)
            if np.any(counts < 0):
                raise DataError(f"row {i}: negative count")
            if counts.sum() < 1:
                raise DataError(f"row {i}: stimulus {sid!r} has no responses")
            tallies[sid] = counts
    else:
        raise DataError(f"unknown format {format!r}; expected 'tidy' or 'counts'")
    return Dataset(list(tallies.items()), name=name or Path(path).stem, source_format=format)


def write_counts(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stimulus_id", "n1", "n2", "n3", "n4", "n5"])
        for sid, c in dataset:
            w.writerow([sid, *(int(x) for x in c)])


# ---------------------------------------------------------- serialisation

def format_float(x) -> str:
    """12 significant digits; ``inf``/``-inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{FLOAT_DIGITS}g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isfinite(x):
            return float(format_float(x))
        return format_float(x)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def _as_row(obj) -> dict:
    if isinstance(obj, dict):
        return obj
    if hasattr(obj, "as_row"):
        return obj.as_row()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def render_results(results, format: str = "csv", config: dict | None = None, kind: str = "results") -> str:
    """Serialise a list of result records (dicts or objects with ``as_row``).

    CSV output starts with a ``# schema_version=N`` comment line followed by the
    header. JSON output is one object with ``schema_version``, ``kind``,
    ``config`` and ``results``.
    """
    rows = [_as_row(r) for r in results]
    if format == "csv":
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        if rows:
            header = list(rows[0].keys())
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(r[k]) for k in header])
        return buf.getvalue()
    if format == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "config": _json_value(config or {}),
            "results": [{k: _json_value(v) for k, v in r.items()} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown output format {format!r}")


def write_results(results, path, format: str = "csv", config: dict | None = None, kind: str = "results") -> None:
    text = render_results(results, format=format, config=config, kind=kind)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_results_csv(path) -> list[dict]:
    """Read a CSV written by :func:`write_results`; values stay strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
