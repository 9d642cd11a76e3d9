"""JSON input schemas and diff-stable report rendering.

Inputs:

* space     ``{"atoms": [str], "masses": [number|"p/q"], "normalize": bool}``
* density   ``{"space": path-or-inline, "values": [number]}``
* partition ``{"space": path-or-inline, "blocks": [[atom_id, ...], ...]}``
* sequence  ``{"space": ..., "preperiod": [partition], "period": [partition]}``
  where each partition is a partition object or a bare list of blocks
* walk      ``{"k": 2, "mu": "uniform"|{letter: prob}, "L": 6, "K": 4,
  "seed": 12345, "samples": 1000000}``

Floats in reports are written with 17 significant digits, so identical
inputs give byte-identical output.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .boundary import WalkConfig
from .kudo import PartitionSequence
from .measure_core import Density, FiniteSpace, make_density, make_space
from .partitions import Partition, from_blocks


class InputError(ValueError):
    """Malformed input; ``path`` locates the offending JSON node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _load(obj, path: str, base: Path | None):
    if isinstance(obj, (str, Path)):
        p = Path(obj)
        if base is not None and not p.is_absolute():
            p = base / p
        try:
            text = p.read_text()
        except OSError as exc:
            raise InputError(path, f"cannot read {p}: {exc.strerror}") from None
        try:
            return json.loads(text), p.parent
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}({p})", f"invalid JSON: {exc}") from None
    return obj, base


def _require(obj, key: str, path: str):
    if not isinstance(obj, dict):
        raise InputError(path, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise InputError(path, f"missing key {key!r}")
    return obj[key]


def _wrap(path: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except InputError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(path, f"{type(exc).__name__}: {exc}") from None


def load_space(obj, path: str = "$", base: Path | None = None) -> FiniteSpace:
    obj, base = _load(obj, path, base)
    atoms = _require(obj, "atoms", path)
    masses = _require(obj, "masses", path)
    if not isinstance(atoms, list) or not isinstance(masses, list):
        raise InputError(path, "atoms and masses must be lists")
    return _wrap(path, make_space, [str(a) for a in atoms], masses,
                 normalize=bool(obj.get("normalize", False)))


def load_density(obj, path: str = "$", base: Path | None = None,
                 space: FiniteSpace | None = None) -> Density:
    obj, base = _load(obj, path, base)
    if space is None:
        space = load_space(_require(obj, "space", path), f"{path}.space", base)
    values = _require(obj, "values", path)
    return _wrap(f"{path}.values", make_density, space, values)


def load_function(obj, path: str = "$", base: Path | None = None,
                  space: FiniteSpace | None = None) -> np.ndarray:
    """Values of an arbitrary (signed) function; same schema as a density."""
    obj, base = _load(obj, path, base)
    if space is None:
        space = load_space(_require(obj, "space", path), f"{path}.space", base)
    values = _require(obj, "values", path)
    if not isinstance(values, list) or len(values) != space.size:
        raise InputError(f"{path}.values", f"expected {space.size} numbers")
    return _wrap(f"{path}.values", np.array, [float(v) for v in values])


def load_partition(obj, path: str = "$", base: Path | None = None,
                   space: FiniteSpace | None = None) -> Partition:
    obj, base = _load(obj, path, base)
    if isinstance(obj, list):
        blocks = obj
    else:
        blocks = _require(obj, "blocks", path)
        if space is None:
            space = load_space(_require(obj, "space", path), f"{path}.space", base)
    if space is None:
        raise InputError(path, "a bare block list needs an enclosing space")
    blocks = [[str(a) if not isinstance(a, int) else a for a in b] for b in blocks]
    return _wrap(f"{path}.blocks", from_blocks, space, blocks)


def load_sequence(obj, path: str = "$", base: Path | None = None) -> PartitionSequence:
    obj, base = _load(obj, path, base)
    space = load_space(_require(obj, "space", path), f"{path}.space", base)
    pre = obj.get("preperiod", [])
    per = _require(obj, "period", path)
    parts_pre = [load_partition(p, f"{path}.preperiod[{i}]", base, space) for i, p in enumerate(pre)]
    parts_per = [load_partition(p, f"{path}.period[{i}]", base, space) for i, p in enumerate(per)]
    return _wrap(path, PartitionSequence, space, parts_pre, parts_per)


def load_walk(obj, path: str = "$", base: Path | None = None, **overrides) -> WalkConfig:
    obj, base = _load(obj, path, base)
    if not isinstance(obj, dict):
        raise InputError(path, "walk config must be an object")
    known = {"k", "mu", "L", "K", "seed", "samples", "max_depth", "burn_in",
             "stable_steps", "streams", "threads"}
    unknown = set(obj) - known
    if unknown:
        raise InputError(path, f"unknown keys {sorted(unknown)}")
    kw = dict(obj)
    if kw.get("mu") == "uniform":
        kw["mu"] = None
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return _wrap(path, WalkConfig, **kw)


def space_to_json(space: FiniteSpace) -> dict:
    return {"atoms": list(space.atom_ids), "masses": space.masses.tolist(), "normalize": False}


def partition_to_json(P: Partition) -> list:
    return P.block_ids()


# --------------------------------------------------------------------------
# rendering


def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == 0:
        return "0.0"
    out = format(x, ".17g")
    # keep floats recognizable as floats after a JSON round trip
    return out if any(c in out for c in ".en") else out + ".0"


def _plain(obj: Any) -> Any:
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float rendered at 17 significant digits."""
    obj = _plain(obj)

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(x, (int, float, bool, str)) or x is None for x in o):
                return "[" + ", ".join(enc(x, level + 1) for x in o) + "]"
            return "[\n" + ",\n".join(pad + enc(x, level + 1) for x in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    """Flatten nested reports into ``(dotted.key, scalar)`` rows for CSV."""
    obj = _plain(obj)
    rows = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            rows.extend(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            rows.extend(flatten(v, f"{prefix}[{i}]"))
    else:
        rows.append((prefix, obj))
    return rows


def to_csv(obj: Any) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, val in flatten(obj):
        if isinstance(val, float):
            val = fmt_float(val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        elif val is None:
            val = ""
        w.writerow([key, val])
    return buf.getvalue()


def render(obj: Any, fmt: str = "json") -> str:
    if fmt == "json":
        return dumps(obj)
    if fmt == "csv":
        return to_csv(obj)
    raise ValueError(f"unknown format {fmt!r}")
