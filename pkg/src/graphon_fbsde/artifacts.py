"""Schema-tagged CSV reading and run manifests with content hashes."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError

SCHEMA_PREFIX = "# schema: "


@dataclass
class Table:
    schema: str
    columns: tuple
    rows: list  # list of tuples of raw strings

    def __len__(self):
        return len(self.rows)

    def column(self, name, numeric=True):
        """Column as an array; empty cells become NaN when ``numeric``."""
        j = self.columns.index(name)
        values = [r[j] for r in self.rows]
        if not numeric:
            return values
        return np.array([float(v) if v != "" else np.nan for v in values], dtype=np.float64)


def read_csv(path, schema=None, numeric_columns=()):
    """Parse a CSV written by this package.

    Checks the schema comment, the column count of every row and that
    ``numeric_columns`` hold numbers (or blanks); errors name the line.
    """
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvParseError("file is empty (missing schema line)", path, 1)
    if not lines[0].startswith(SCHEMA_PREFIX):
        raise CsvParseError("first line must be a schema comment", path, 1)
    found = lines[0][len(SCHEMA_PREFIX):].strip()
    if schema is not None and found != schema:
        raise CsvParseError(f"schema {found!r} does not match expected {schema!r}", path, 1)
    if len(lines) < 2:
        raise CsvParseError("missing header row", path, 2)
    reader = csv.reader(lines[1:])
    columns = tuple(next(reader))
    idx = [columns.index(c) for c in numeric_columns if c in columns]
    missing = [c for c in numeric_columns if c not in columns]
    if missing:
        raise CsvParseError(f"missing columns {missing}", path, 2)
    rows = []
    for k, row in enumerate(reader):
        line = k + 3
        if len(row) != len(columns):
            raise CsvParseError(f"expected {len(columns)} fields, got {len(row)}", path, line)
        for j in idx:
            if row[j] != "":
                try:
                    float(row[j])
                except ValueError:
                    raise CsvParseError(f"column {columns[j]!r}: not a number: {row[j]!r}",
                                        path, line) from None
        rows.append(tuple(row))
    return Table(found, columns, rows)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ManifestEntry:
    path: str
    sha256: str
    bytes: int
    deterministic: bool = True


def file_entry(root, relpath, deterministic=True):
    full = os.path.join(root, relpath)
    return ManifestEntry(relpath, sha256_file(full), os.path.getsize(full), deterministic)


@dataclass
class RunManifest:
    """Config snapshot, version, timestamps and the inventory of emitted files."""

    config: dict
    version: str
    mode: str
    started: str
    finished: str
    runtime_s: float
    files: list
    summary: dict

    def to_dict(self):
        return {
            "artifact": "graphon_fbsde", "version": self.version, "mode": self.mode,
            "started": self.started, "finished": self.finished, "runtime_s": self.runtime_s,
            "config": self.config, "summary": self.summary,
            "files": [e.__dict__ for e in self.files],
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def data_hashes(self):
        """``{path: sha256}`` for files whose content is seed-determined."""
        return {e.path: e.sha256 for e in self.files if e.deterministic}


def load_manifest(path):
    with open(path) as fh:
        d = json.load(fh)
    files = [ManifestEntry(**e) for e in d["files"]]
    return RunManifest(d["config"], d["version"], d["mode"], d["started"], d["finished"],
                       d["runtime_s"], files, d.get("summary", {}))
