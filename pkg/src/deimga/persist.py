"""Directory layouts for libraries and validation sets.

A library directory holds ``regimes.txt`` (one regime id per line, library
order) and, per regime, ``<id>.modes.txt`` and ``<id>.sv.txt`` matrix files.
A state directory holds ``regimes.txt`` and one ``<id>.txt`` matrix per
regime whose columns are states.
"""

from pathlib import Path

import numpy as np

from .errors import ValidationError
from .library import RegimeLibrary
from .matrix_io import read_matrix, write_matrix
from .pod import PODBasis


def _write_ids(d, ids):
    (d / "regimes.txt").write_text("".join(f"{r}\n" for r in ids))


def _read_ids(d):
    path = Path(d) / "regimes.txt"
    if not path.exists():
        raise ValidationError(f"{d}: missing regimes.txt")
    ids = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not ids or len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: regime ids must be non-empty and distinct")
    return ids


def write_library(directory, lib):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write_ids(d, lib.regime_ids)
    for r in lib.regime_ids:
        b = lib.sublibraries[r]
        write_matrix(d / f"{r}.modes.txt", b.modes)
        write_matrix(d / f"{r}.sv.txt", np.asarray(b.singular_values, dtype=float))


def read_library(directory):
    d = Path(directory)
    subs = {}
    ids = _read_ids(d)
    for r in ids:
        modes = read_matrix(d / f"{r}.modes.txt")
        sv = read_matrix(d / f"{r}.sv.txt", field="real")[:, 0]
        subs[r] = PODBasis(modes, sv)
    return RegimeLibrary(subs, tuple(ids))


def write_states(directory, states):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write_ids(d, list(states))
    for r, X in states.items():
        write_matrix(d / f"{r}.txt", X)


def read_states(directory):
    d = Path(directory)
    return {r: read_matrix(d / f"{r}.txt") for r in _read_ids(d)}
