"""JSON / CSV encoding of tables, GW data and result matrices.

Complex numbers are ``[re, im]`` pairs; plain real numbers are accepted on
input.  Schema violations raise :class:`SchemaError` naming the field path,
e.g. ``classes[1].invariants[0][2]``.
"""

from __future__ import annotations

import csv
import io as _io
import json
from typing import Any, Mapping

import numpy as np

from .algebra import GwClass, GwData, ProductTable


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _complex(x: Any, path: str) -> complex:
    if isinstance(x, bool):
        raise SchemaError(path, "expected a number or [re, im] pair, got a boolean")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise SchemaError(path, f"expected a number or [re, im] pair, got {json.dumps(x)[:40]}")


def _array(x: Any, shape: tuple[int, ...], path: str) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)

    def fill(node, idx, p):
        depth = len(idx)
        if depth == len(shape):
            out[idx] = _complex(node, p)
            return
        if not isinstance(node, list) or len(node) != shape[depth]:
            got = f"length {len(node)}" if isinstance(node, list) else type(node).__name__
            raise SchemaError(p, f"expected a list of length {shape[depth]}, got {got}")
        for i, child in enumerate(node):
            fill(child, idx + (i,), f"{p}[{i}]")

    fill(x, (), path)
    return out


def _field(obj: Any, key: str, path: str) -> Any:
    if not isinstance(obj, Mapping):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _posint(x: Any, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise SchemaError(path, f"expected a positive integer, got {json.dumps(x)}")
    return x


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def parse_table(obj: Any, path: str = "") -> ProductTable:
    n = _posint(_field(obj, "dim", path), _join(path, "dim"))
    gamma = _array(_field(obj, "gamma", path), (n, n, n), _join(path, "gamma"))
    pairing = _array(_field(obj, "pairing", path), (n, n), _join(path, "pairing"))
    try:
        return ProductTable(gamma, pairing)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def parse_gw(obj: Any, path: str = "") -> GwData:
    n = _posint(_field(obj, "dim", path), _join(path, "dim"))
    p = _posint(_field(obj, "h2_rank", path), _join(path, "h2_rank"))
    cup = parse_table(_field(obj, "cup", path), _join(path, "cup"))
    if cup.dim != n:
        raise SchemaError(_join(path, "cup.dim"), f"cup has dim {cup.dim}, expected {n}")
    raw = _field(obj, "classes", path)
    if not isinstance(raw, list):
        raise SchemaError(_join(path, "classes"), "expected a list")
    classes = []
    for i, c in enumerate(raw):
        cp = f"{_join(path, 'classes')}[{i}]"
        ex = _field(c, "exponents", cp)
        if not isinstance(ex, list) or len(ex) != p:
            raise SchemaError(f"{cp}.exponents", f"expected a list of {p} positive integers")
        exps = tuple(_posint(a, f"{cp}.exponents[{k}]") for k, a in enumerate(ex))
        inv = _array(_field(c, "invariants", cp), (n, n, n), f"{cp}.invariants")
        classes.append(GwClass(exps, inv))
    try:
        return GwData(cup, p, tuple(classes))
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def parse_input(obj: Any) -> ProductTable | GwData:
    """GwData when the object has a ``cup`` field, otherwise a bare ProductTable."""
    if isinstance(obj, Mapping) and "cup" in obj:
        return parse_gw(obj)
    return parse_table(obj)


def load(path: str) -> ProductTable | GwData:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from exc
    return parse_input(obj)


def encode(x: Any) -> Any:
    """Nested lists with [re, im] leaves for arrays and complex scalars."""
    if isinstance(x, np.ndarray):
        return [encode(v) for v in x] if x.ndim else encode(x.item())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [encode(v) for v in x]
    if isinstance(x, Mapping):
        return {k: encode(v) for k, v in x.items()}
    return x


def table_to_json(table: ProductTable) -> dict:
    return {"dim": table.dim, "gamma": encode(table.gamma), "pairing": encode(table.pairing)}


def gw_to_json(data: GwData) -> dict:
    return {
        "dim": data.dim,
        "h2_rank": data.h2_rank,
        "cup": table_to_json(data.cup),
        "classes": [{"exponents": list(c.exponents), "invariants": encode(c.invariants)} for c in data.classes],
    }


def matrices_to_csv(matrices: Mapping[str, np.ndarray]) -> str:
    """One row per entry: name, row, col (1-based), re, im."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "row", "col", "re", "im"])
    for name, M in matrices.items():
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        for (i, j), v in np.ndenumerate(M):
            w.writerow([name, i + 1, j + 1, repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
