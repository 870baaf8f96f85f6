"""Parsing and emission of model documents.

A model document is a JSON object in one of two forms.

Finite walk (sites are labeled 1..n in the file, 0..n-1 in the API):

    {
      "n_sites": 2,
      "internal_dim": 1,
      "blocks": {
        "1->1": [[[0.7071067811865476, 0.0]]],
        "1->2": [[[0.7071067811865476, 0.0]]],
        ...
      }
    }

Integer-lattice walk (sites keep their signed labels):

    {
      "internal_dim": 2,
      "walk": {
        "kind": "nearest_neighbor",
        "window": [-10, 10],
        "boundary": "absorbing",
        "left":  [[[re, im], ...], ...],
        "right": [[[re, im], ...], ...],
        "left_3": ...,   "right_-2": ...   (optional per-site overrides)
      }
    }

Complex entries are always [re, im] pairs.  Unknown fields are rejected
with a location-carrying `ParseError`.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import OQWalkError, ParseError
from .qtm import QTM, validate_qtm
from .trajectory import LatticeWindow

__all__ = [
    "parse_model",
    "parse_model_dict",
    "dump_model",
    "parse_matrix",
    "matrix_to_json",
    "parse_density_source",
]

_BLOCK_KEY = re.compile(r"^(-?\d+)->(-?\d+)$")
_OVERRIDE_KEY = re.compile(r"^(left|right)_(-?\d+)$")


def parse_matrix(obj, location: str) -> np.ndarray:
    """Parse a matrix of [re, im] pairs."""
    if not isinstance(obj, list) or not obj:
        raise ParseError(location, "expected a non-empty list of rows")
    rows = []
    for r, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != len(obj):
            raise ParseError(f"{location}[{r}]", "matrix must be square")
        entries = []
        for c, entry in enumerate(row):
            if (
                not isinstance(entry, list)
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
            ):
                raise ParseError(f"{location}[{r}][{c}]", "expected an [re, im] pair")
            entries.append(complex(entry[0], entry[1]))
        rows.append(entries)
    return np.array(rows, dtype=complex)


def matrix_to_json(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def _require_keys(doc: dict, allowed: set[str], required: set[str], location: str):
    for key in doc:
        if key not in allowed:
            raise ParseError(f"{location}.{key}", "unknown field")
    for key in required:
        if key not in doc:
            raise ParseError(location, f"missing required field {key!r}")


def _parse_walk(doc: dict, internal_dim: int, location: str) -> LatticeWindow:
    keys = set(doc)
    overrides_keys = {k for k in keys if _OVERRIDE_KEY.match(k)}
    _require_keys(
        {k: v for k, v in doc.items() if k not in overrides_keys},
        {"kind", "window", "left", "right", "boundary"},
        {"kind", "window", "left", "right"},
        location,
    )
    if doc["kind"] != "nearest_neighbor":
        raise ParseError(f"{location}.kind", f"unknown walk kind {doc['kind']!r}")
    window = doc["window"]
    if (
        not isinstance(window, list)
        or len(window) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in window)
    ):
        raise ParseError(f"{location}.window", "expected [lo, hi] integers")
    boundary = doc.get("boundary", "absorbing")
    if boundary not in ("absorbing", "hard_error"):
        raise ParseError(f"{location}.boundary", f"unknown boundary {boundary!r}")
    left = parse_matrix(doc["left"], f"{location}.left")
    right = parse_matrix(doc["right"], f"{location}.right")
    if left.shape != (internal_dim, internal_dim):
        raise ParseError(f"{location}.left", f"expected a {internal_dim}x{internal_dim} matrix")
    if right.shape != (internal_dim, internal_dim):
        raise ParseError(f"{location}.right", f"expected a {internal_dim}x{internal_dim} matrix")
    overrides: dict[int, list] = {}
    for key in sorted(overrides_keys):
        side, site = _OVERRIDE_KEY.match(key).groups()
        site = int(site)
        mat = parse_matrix(doc[key], f"{location}.{key}")
        pair = overrides.setdefault(site, [None, None])
        pair[0 if side == "left" else 1] = mat
    try:
        return LatticeWindow.nearest_neighbor(
            left,
            right,
            window[0],
            window[1],
            boundary=boundary,
            overrides={s: tuple(p) for s, p in overrides.items()},
        )
    except OQWalkError:
        raise


def parse_model_dict(doc, location: str = "model") -> QTM | LatticeWindow:
    if not isinstance(doc, dict):
        raise ParseError(location, "model document must be a JSON object")
    if "walk" in doc:
        _require_keys(doc, {"internal_dim", "walk"}, {"internal_dim", "walk"}, location)
        k = doc["internal_dim"]
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ParseError(f"{location}.internal_dim", "expected a positive integer")
        return _parse_walk(doc["walk"], k, f"{location}.walk")
    _require_keys(
        doc,
        {"n_sites", "internal_dim", "blocks"},
        {"n_sites", "internal_dim", "blocks"},
        location,
    )
    n, k = doc["n_sites"], doc["internal_dim"]
    for name, v in (("n_sites", n), ("internal_dim", k)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ParseError(f"{location}.{name}", "expected a positive integer")
    if not isinstance(doc["blocks"], dict):
        raise ParseError(f"{location}.blocks", "expected an object of 'i->j' keys")
    blocks = {}
    for key, mat in doc["blocks"].items():
        m = _BLOCK_KEY.match(key)
        if not m:
            raise ParseError(f"{location}.blocks[{key!r}]", "keys must look like 'i->j'")
        src, dst = int(m.group(1)), int(m.group(2))
        if not (1 <= src <= n and 1 <= dst <= n):
            raise ParseError(
                f"{location}.blocks[{key!r}]", f"site labels must lie in 1..{n}"
            )
        blocks[(src - 1, dst - 1)] = parse_matrix(
            mat, f"{location}.blocks[{key!r}]"
        )
    return validate_qtm(n, k, blocks)


def parse_model(path: str | Path) -> QTM | LatticeWindow:
    """Load and validate a model document from ``path``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(path), f"cannot read file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from exc
    return parse_model_dict(doc, location=str(path))


def dump_model(walk: QTM | LatticeWindow) -> dict:
    """Serialize a validated model back to its document form."""
    if isinstance(walk, QTM):
        return {
            "n_sites": walk.n_sites,
            "internal_dim": walk.internal_dim,
            "blocks": {
                f"{src + 1}->{dst + 1}": matrix_to_json(blk)
                for (src, dst), blk in sorted(walk.blocks.items())
            },
        }
    if isinstance(walk, LatticeWindow):
        interior = list(range(walk.lo + 1, walk.hi))
        for (src, dst) in walk.blocks:
            if src in (walk.lo, walk.hi):
                continue  # injected absorbing self-loops
            if abs(dst - src) != 1 or (src, src - 1) not in walk.blocks or (src, src + 1) not in walk.blocks:
                raise ParseError(
                    "model", "only nearest-neighbor windows serialize to documents"
                )
        base_left = walk.blocks[(interior[0], interior[0] - 1)]
        base_right = walk.blocks[(interior[0], interior[0] + 1)]
        doc = {
            "kind": "nearest_neighbor",
            "window": [walk.lo, walk.hi],
            "boundary": walk.boundary,
            "left": matrix_to_json(base_left),
            "right": matrix_to_json(base_right),
        }
        for s in interior[1:]:
            l_s = walk.blocks[(s, s - 1)]
            r_s = walk.blocks[(s, s + 1)]
            if not np.array_equal(l_s, base_left):
                doc[f"left_{s}"] = matrix_to_json(l_s)
            if not np.array_equal(r_s, base_right):
                doc[f"right_{s}"] = matrix_to_json(r_s)
        return {"internal_dim": walk.internal_dim, "walk": doc}
    raise ParseError("model", f"cannot serialize a {type(walk).__name__}")


def parse_density_source(text: str, dim: int) -> np.ndarray:
    """Parse a density from inline JSON or from a file path.

    ``text`` is treated as a path when a file of that name exists,
    otherwise as a JSON literal.  The matrix uses the same [re, im]
    encoding as model documents.
    """
    path = Path(text)
    if path.exists():
        raw = path.read_text()
        location = str(path)
    else:
        raw = text
        location = "density"
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(location, f"not valid JSON: {exc.msg}") from exc
    mat = parse_matrix(doc, location)
    if mat.shape != (dim, dim):
        raise ParseError(location, f"expected a {dim}x{dim} matrix")
    return mat
