"""Reading and writing curves, configurations and spectra.

Curve files are comma-separated text::

    #meta: {"config": {...}, "lineshape": {...}, ...}
    epsilon,R,p_1,p_2
    -10.0,1.0023,0.0012,0.0004
    ...

Floats are written with ``repr`` so a write/read cycle is exact; singular
points are written as empty fields and read back as NaN.  Configuration
files are JSON; spectrum files are ``epsilon,value[,sigma]`` with a
required header and ``#`` comments.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import Fano3Error, IoFailure, MalformedFile
from .fit import Spectrum
from .lineshape import LineShapeParams, SpectralCurve
from .model import ModelConfig, validate_config

META_PREFIX = "#meta:"


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _num(field: str, path, line: int) -> float:
    field = field.strip()
    if field == "":
        return math.nan
    try:
        return float(field)
    except ValueError:
        raise MalformedFile(f"{path}:{line}: not a number: {field!r}") from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from None


def _write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from None


def write_curve(curve: SpectralCurve, path) -> None:
    levels = sorted(curve.prob_densities or {})
    header = ["epsilon", "R"] + [f"p_{n}" for n in levels]
    lines = [META_PREFIX + " " + json.dumps(curve.meta, sort_keys=True), ",".join(header)]
    cols = [curve.grid, curve.r_values] + [curve.prob_densities[n] for n in levels]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def read_curve(path) -> SpectralCurve:
    meta: dict[str, Any] = {}
    header = None
    rows = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(META_PREFIX):
            try:
                meta.update(json.loads(line[len(META_PREFIX):]))
            except json.JSONDecodeError as exc:
                raise MalformedFile(f"{path}:{lineno}: bad metadata record: {exc.msg}") from None
            continue
        if line.startswith("#"):
            continue
        fields = line.split(",")
        if header is None:
            header = [f.strip() for f in fields]
            if header[:2] != ["epsilon", "R"] or not all(h.startswith("p_") for h in header[2:]):
                raise MalformedFile(f"{path}:{lineno}: header must be epsilon,R[,p_<level>...]")
            continue
        if len(fields) != len(header):
            raise MalformedFile(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        rows.append([_num(f, path, lineno) for f in fields])
    if header is None:
        raise MalformedFile(f"{path}: missing header")
    if not rows:
        raise MalformedFile(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    grid = data[:, 0]
    if np.any(np.isnan(grid)):
        raise MalformedFile(f"{path}: empty energy field")
    if np.any(np.diff(grid) <= 0.0):
        raise MalformedFile(f"{path}: energy grid is not strictly increasing")
    probs = None
    if len(header) > 2:
        try:
            probs = {int(h[2:]): data[:, i] for i, h in enumerate(header) if i >= 2}
        except ValueError:
            raise MalformedFile(f"{path}: bad probability column name") from None
    try:
        return SpectralCurve(grid, data[:, 1], probs, meta)
    except Fano3Error as exc:
        raise MalformedFile(f"{path}: {exc}") from None


def config_record(config: ModelConfig, params: LineShapeParams | None = None, **extra) -> dict[str, Any]:
    record = config.to_dict()
    if params is not None:
        record["lineshape"] = params.to_dict()
    record.update(extra)
    return record


def write_config(path, config: ModelConfig, params: LineShapeParams | None = None, **extra) -> None:
    _write_text(path, json.dumps(config_record(config, params, **extra), indent=2) + "\n")


def parse_config(record: Mapping[str, Any]) -> tuple[ModelConfig, LineShapeParams | None]:
    config = validate_config(record)
    params = None
    if record.get("lineshape") is not None:
        block = record["lineshape"]
        if not isinstance(block, Mapping):
            raise MalformedFile("'lineshape' must be a mapping")
        params = LineShapeParams.from_raw(block, config)
    return config, params


def load_json(path) -> Any:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}:{exc.lineno}: {exc.msg}") from None


def read_config(path) -> tuple[ModelConfig, LineShapeParams | None]:
    """Configuration and (if present) line-shape parameters from a JSON file."""
    record = load_json(path)
    if not isinstance(record, Mapping):
        raise MalformedFile(f"{path}: top level must be an object")
    return parse_config(record)


def read_spectrum(path) -> Spectrum:
    header = None
    rows = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            if fields not in (["epsilon", "value"], ["epsilon", "value", "sigma"]):
                raise MalformedFile(f"{path}:{lineno}: header must be epsilon,value[,sigma]")
            header = fields
            continue
        if len(fields) != len(header):
            raise MalformedFile(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        values = [_num(f, path, lineno) for f in fields]
        if any(math.isnan(v) for v in values):
            raise MalformedFile(f"{path}:{lineno}: empty field")
        rows.append(values)
    if header is None:
        raise MalformedFile(f"{path}: missing header")
    if not rows:
        raise MalformedFile(f"{path}: no data rows")
    data = np.array(rows)
    sigma = data[:, 2] if data.shape[1] == 3 else None
    try:
        return Spectrum(data[:, 0], data[:, 1], sigma, {"source": str(path)})
    except Fano3Error as exc:
        raise MalformedFile(f"{path}: {exc}") from None


def write_spectrum(spectrum: Spectrum, path) -> None:
    cols = [spectrum.energies, spectrum.values]
    header = "epsilon,value"
    if spectrum.sigma is not None:
        cols.append(spectrum.sigma)
        header += ",sigma"
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in zip(*cols)]
    _write_text(path, "\n".join(lines) + "\n")
