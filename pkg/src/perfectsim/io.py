"""CSV readers/writers and the flat key=value run configuration.

Numbers are written with ``repr`` precision so that a rerun with the same
seed reproduces files byte for byte.
"""
from __future__ import annotations

import configparser
import csv
import os
from pathlib import Path

import numpy as np

from .spatial import UNIT_SQUARE, SpatialPattern

__all__ = [
    "InputError",
    "fmt",
    "read_pattern",
    "write_pattern",
    "read_signal",
    "write_signal",
    "write_columns",
    "write_summary",
    "write_envelope",
    "read_config",
    "write_config_echo",
    "parse_window",
    "ensure_dir",
]

_SECTION = "run"


class InputError(ValueError):
    """Unreadable or malformed user input."""


def fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _rows(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]


def _floats(rows, path):
    try:
        return np.array([[float(c) for c in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_pattern(path, window=UNIT_SQUARE):
    """Point pattern from a CSV with header ``x,y``."""
    rows = _rows(path)
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if header[:2] != ["x", "y"]:
        raise InputError(f"{path}: expected header 'x,y', got {','.join(rows[0])}")
    body = rows[1:]
    if any(len(r) < 2 for r in body):
        raise InputError(f"{path}: every row needs two coordinates")
    pts = _floats([r[:2] for r in body], path).reshape(-1, 2)
    try:
        return SpatialPattern(pts, window)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_columns(path, header, columns):
    columns = [np.asarray(c).ravel() for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_pattern(path, pattern):
    pts = pattern.points if isinstance(pattern, SpatialPattern) else np.asarray(pattern).reshape(-1, 2)
    write_columns(path, ["x", "y"], [pts[:, 0], pts[:, 1]])


def read_signal(path):
    """Single-column CSV; a non-numeric first line is taken as a header."""
    rows = _rows(path)
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no values")
    if any(len(r) != 1 for r in rows):
        raise InputError(f"{path}: expected a single column")
    return _floats(rows, path).ravel()


def write_signal(path, values, name="value"):
    write_columns(path, [name], [values])


def write_summary(path, fn):
    write_columns(path, ["r", "value"], [fn.r, fn.values])


def write_envelope(path, env):
    write_columns(path, ["r", "min", "mean", "max"], [env.r, env.lo, env.mean, env.hi])


def read_config(path):
    """Flat ``key = value`` file (``#`` comments) as a dict of strings."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such config file: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + path.read_text())
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    return dict(parser[_SECTION])


def write_config_echo(path, values):
    """Sorted key = value dump of every effective setting."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, (float, np.floating)):
            v = fmt(v)
        elif isinstance(v, (list, tuple, np.ndarray)):
            v = " ".join(fmt(x) if isinstance(x, (int, float, np.number)) else str(x) for x in v)
        lines.append(f"{key} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_window(text):
    try:
        w = tuple(float(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise InputError(f"bad window {text!r}") from None
    if len(w) != 4:
        raise InputError(f"window needs four numbers x0 y0 x1 y1, got {text!r}")
    return w


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
