"""Read-only access to a koprop run directory.

A run directory is identified by its ``manifest.json`` (the aggregate of the
resolved-config JSON each command writes).  Every artifact referenced by the
manifest is parsed against its declared CSV schema; mismatches raise
:class:`SchemaError` naming the offending file.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class RunDirectoryError(Exception):
    """The directory is not a readable, complete run directory."""


class SchemaError(RunDirectoryError):
    """A referenced file exists but does not match its declared schema."""

    def __init__(self, path, problem):
        super().__init__(f"{path}: {problem}")
        self.path = Path(path)
        self.problem = problem


def _read_csv(path: Path, expected_header: list[str]) -> np.ndarray:
    if not path.exists():
        raise SchemaError(path, "referenced by the manifest but missing")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, "empty file") from None
        if header != expected_header:
            raise SchemaError(
                path, f"header {header!r} does not match expected {expected_header!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected_header):
                raise SchemaError(path, f"line {lineno}: wrong column count")
            try:
                rows.append([float(v) for v in row[: len(expected_header)]])
            except ValueError:
                # trailing string columns (e.g. the eigenvalue source tag)
                try:
                    rows.append([float(v) for v in row[:-1]])
                except ValueError as exc:
                    raise SchemaError(path, f"line {lineno}: non-numeric value") from exc
    if not rows:
        raise SchemaError(path, "no data rows")
    return np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class PdfGrid:
    axes: tuple
    values: np.ndarray
    meta: dict


@dataclass(frozen=True)
class RunDirectory:
    """A validated handle on a run directory; never mutates its contents."""

    path: Path
    manifest: dict

    @classmethod
    def discover(cls, path) -> "RunDirectory":
        path = Path(path)
        manifest_path = path / "manifest.json"
        if not manifest_path.exists():
            raise RunDirectoryError(
                f"{path} is not a run directory (no manifest.json); run a "
                "koprop command into it first"
            )
        try:
            manifest = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise RunDirectoryError(f"cannot parse {manifest_path}: {exc}") from exc
        if not isinstance(manifest, dict) or not manifest:
            raise RunDirectoryError(f"{manifest_path} holds no command records")
        return cls(path=path, manifest=manifest)

    def has(self, command: str) -> bool:
        return command in self.manifest

    def _artifacts(self, command: str) -> dict:
        return self.manifest[command]["artifacts"]

    # -- dataset accessors -------------------------------------------------

    def eigenvalues(self):
        """List of (source, complex spectrum) pairs from the eigen command."""
        out = []
        for name in self._artifacts("eigen")["eigenvalues"]:
            path = self.path / name
            data = _read_csv(path, ["re", "im", "source"])
            with path.open(newline="") as fh:
                reader = csv.reader(fh)
                next(reader)
                source = next(reader)[2]
            out.append((source, data[:, 0] + 1j * data[:, 1]))
        return out

    def state_error(self):
        name = self._artifacts("propagate-state")["state_error"]
        data = _read_csv(self.path / name, ["t", "err_galerkin", "err_edmd"])
        return data[:, 0], data[:, 1], data[:, 2]

    def _pdf_grid(self, name: str) -> PdfGrid:
        path = self.path / name
        meta_path = path.with_suffix(".meta.json")
        if not meta_path.exists():
            raise SchemaError(meta_path, "sidecar missing")
        meta = json.loads(meta_path.read_text())
        axes = tuple(np.asarray(a, dtype=float) for a in meta["axes"])
        header = [f"x{j+1}" for j in range(len(axes))] + ["density"]
        data = _read_csv(path, header)
        shape = tuple(a.size for a in axes)
        if data.shape[0] != int(np.prod(shape)):
            raise SchemaError(path, "row count does not match the sidecar axes")
        return PdfGrid(axes=axes, values=data[:, -1].reshape(shape), meta=meta)

    def pdf_pair(self):
        """The KO and MC grids from propagate-pdf, in that order."""
        entries = {e["role"]: e["file"] for e in self._artifacts("propagate-pdf")["pdf_grids"]}
        return self._pdf_grid(entries["ko"]), self._pdf_grid(entries["mc"])

    def mc_samples(self) -> np.ndarray:
        name = self._artifacts("propagate-pdf")["mc_samples"]
        return _read_csv(self.path / name, ["x1", "x2"])

    def recursive_legs(self):
        """Per-boundary grids from the recursive command, time-ordered."""
        legs = sorted(self._artifacts("recursive")["pdf_legs"], key=lambda e: e["leg"])
        return [(float(e["t"]), self._pdf_grid(e["file"])) for e in legs]
