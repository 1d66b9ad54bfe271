"""Result files and the per-run manifest.

Tables go to CSV (or JSON records), dense matrices to a CSV grid with a
JSON sidecar header, free-form summaries to JSON. Floats are written with
``repr`` so identical runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence, Union

import numpy as np

from . import __version__

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]
MANIFEST_NAME = "manifest.json"


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no NaN/inf
        return value if math.isfinite(value) else repr(value)
    return value


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    @classmethod
    def from_records(cls, name: str, columns: Sequence[str], records: Iterable[dict[str, Any]]) -> Table:
        return cls(name, list(columns), [[r[c] for c in columns] for r in records])

    def write(self, directory: Path, fmt: OutputFormat) -> list[Path]:
        if fmt == "json":
            path = directory / f"{self.name}.json"
            records = [dict(zip(self.columns, row)) for row in self.rows]
            _write_json(path, records)
            return [path]
        path = directory / f"{self.name}.csv"
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_cell(v) for v in row])
        return [path]


@dataclass
class Matrix:
    """Dense grid; ``row_axis``/``col_axis`` are (label, tick values)."""

    name: str
    values: np.ndarray
    row_axis: tuple[str, list[Any]]
    col_axis: tuple[str, list[Any]]
    header: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape != (len(self.row_axis[1]), len(self.col_axis[1])):
            raise ValueError(f"matrix {self.name} shape {self.values.shape} does not match its axes")

    def sidecar(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "shape": list(self.values.shape),
            "rows": {"label": self.row_axis[0], "values": self.row_axis[1]},
            "cols": {"label": self.col_axis[0], "values": self.col_axis[1]},
            **self.header,
        }

    def write(self, directory: Path, fmt: OutputFormat) -> list[Path]:
        if fmt == "json":
            path = directory / f"{self.name}.json"
            _write_json(path, {**self.sidecar(), "values": self.values})
            return [path]
        grid = directory / f"{self.name}.csv"
        with open(grid, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            for row in self.values:
                writer.writerow([_cell(v) for v in row])
        header = directory / f"{self.name}.json"
        _write_json(header, self.sidecar())
        return [grid, header]


@dataclass
class Document:
    name: str
    payload: dict[str, Any]

    def write(self, directory: Path, fmt: OutputFormat) -> list[Path]:
        path = directory / f"{self.name}.json"
        _write_json(path, self.payload)
        return [path]


ResultItem = Union[Table, Matrix, Document]


def _write_json(path: Path, payload: Any) -> None:
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")


def write_results(items: Sequence[ResultItem], directory: str | Path, fmt: OutputFormat = "csv") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for item in items:
        paths = item.write(directory, fmt)
        clash = [p for p in paths if p in written]
        if clash:
            raise ValueError(f"result file written twice: {clash[0].name}")
        written.extend(paths)
    logger.info("Wrote %d result files to %s", len(written), directory)
    return written


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class ResultManifest:
    config_hash: str
    kind: str
    seed: int
    checksums: dict[str, str]
    duration_s: float
    version: str = __version__

    @classmethod
    def build(cls, config_hash: str, kind: str, seed: int, files: Sequence[Path], duration_s: float) -> ResultManifest:
        return cls(
            config_hash=config_hash,
            kind=kind,
            seed=seed,
            checksums={p.name: file_checksum(p) for p in sorted(files)},
            duration_s=duration_s,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "kind": self.kind,
            "seed": self.seed,
            "tool_version": self.version,
            "duration_s": round(self.duration_s, 3),
            "files": self.checksums,
        }

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        _write_json(path, self.to_dict())
        return path

    @classmethod
    def read(cls, directory: str | Path) -> ResultManifest:
        with open(Path(directory) / MANIFEST_NAME) as f:
            data = json.load(f)
        return cls(
            config_hash=data["config_hash"],
            kind=data["kind"],
            seed=data["seed"],
            checksums=data["files"],
            duration_s=data["duration_s"],
            version=data["tool_version"],
        )
