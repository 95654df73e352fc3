"""JSON output formatting and the document codec for systems, elements and maps.

Floats are written with 17 significant digits and complex numbers as
[re, im] pairs, so write -> read -> write reproduces the same bytes.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from enum import Enum
from typing import Any

import numpy as np

from opsystk import FORMAT_VERSION
from opsystk.atlas.canonical import canonical, canonical_map
from opsystk.errors import InputError
from opsystk.systems.dualize import dual_system
from opsystk.systems.matricial import NumericalRangeQuery, omax_system, omin_system
from opsystk.systems.opsys import (
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    make_concrete,
)
from opsystk.systems.quotient import Subspace, coproduct, quotient_system
from opsystk.systems.tensor import DEFAULT_HIER_LEVEL, tensor_max, tensor_min

# -----------------------------------------------------------------------------
# Writer
# -----------------------------------------------------------------------------


def _float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def dumps(value: Any, pretty: bool = False, _level: int = 0) -> str:
    """Serialize JSON-ready data deterministically."""
    pad = "  " * (_level + 1) if pretty else ""
    end = "\n" + "  " * _level if pretty else ""
    sep = ",\n" if pretty else ","
    colon = ": " if pretty else ":"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}{colon}{dumps(v, pretty, _level + 1)}" for k, v in value.items()]
        return "{" + ("\n" if pretty else "") + sep.join(items) + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            joiner = ", " if pretty else ","
            return "[" + joiner.join(dumps(v) for v in value) + "]"
        items = [f"{pad}{dumps(v, pretty, _level + 1)}" for v in value]
        return "[" + ("\n" if pretty else "") + sep.join(items) + end + "]"
    raise TypeError(f"not JSON-ready: {type(value).__name__}")


def _pairs(a: np.ndarray) -> Any:
    a = np.asarray(a)
    if a.ndim == 0:
        z = complex(a)
        return [float(z.real), float(z.imag)]
    return [_pairs(x) for x in a]


def to_jsonable(obj: Any) -> Any:
    """Convert results and certificates to JSON-ready data; systems are referenced by name."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return _pairs(obj)
        return obj.astype(float).tolist()
    if isinstance(obj, OperatorSystem):
        return obj.name
    if isinstance(obj, LevelElement):
        return {"system": obj.system.name, "level": obj.level, "coeffs": _pairs(obj.coeffs)}
    if isinstance(obj, LinearMapSpec):
        return {"name": obj.name, "source": obj.source.name, "target": obj.target.name, "images": _pairs(obj.images)}
    if isinstance(obj, ConeVerdict):
        return {"answer": obj.answer.value, "tol": obj.tol, "certificate": to_jsonable(obj.certificate)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    return repr(obj)


def format_json(
    data: Any,
    meta: dict[str, Any] | None = None,
    pretty: bool | None = None,
) -> str:
    """
    Format a result as JSON.

    Args:
        data: The result (a verdict, a report or plain data)
        meta: Optional metadata to include
        pretty: Force pretty printing (None = auto-detect based on tty)
    """
    if pretty is None:
        pretty = sys.stdout.isatty()
    output: dict[str, Any] = {"format_version": FORMAT_VERSION, "result": to_jsonable(data)}
    if meta:
        output["meta"] = to_jsonable(meta)
    return dumps(output, pretty)


def format_error_json(error: dict[str, Any], pretty: bool | None = None) -> str:
    """Format an error as JSON."""
    if pretty is None:
        pretty = sys.stdout.isatty()
    return dumps(error, pretty)


# -----------------------------------------------------------------------------
# Reader
# -----------------------------------------------------------------------------


def loads(text: str, source: str = "<input>") -> Any:
    """Parse JSON, reporting the line and column of malformed input."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(
            f"{source}: malformed JSON: {e.msg}",
            suggestion=f"Check line {e.lineno}, column {e.colno}",
            line=e.lineno,
            column=e.colno,
        ) from e


def _complex_array(data: Any, what: str) -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"{what}: expected numbers or [re, im] pairs") from e
    if a.ndim == 0 or a.shape[-1] != 2:
        raise InputError(f"{what}: expected [re, im] pairs, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _require(doc: dict[str, Any], key: str, what: str) -> Any:
    if not isinstance(doc, dict) or key not in doc:
        raise InputError(f"{what}: missing field '{key}'")
    return doc[key]


# -----------------------------------------------------------------------------
# Systems
# -----------------------------------------------------------------------------


def system_to_doc(system: OperatorSystem, top: bool = True) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if top:
        doc["format_version"] = FORMAT_VERSION
        doc["type"] = "system"
    doc["name"] = system.name
    doc["kind"] = system.kind.value
    kind = system.kind
    if kind is SystemKind.CONCRETE:
        doc["ambient_dim"] = system.ambient_dim
        doc["basis"] = _pairs(system.basis)
        doc["state"] = _pairs(system.state)
    elif kind is SystemKind.DUAL:
        doc["parent"] = system_to_doc(system.parent(), top=False)
    elif kind is SystemKind.QUOTIENT:
        doc["parent"] = system_to_doc(system.parent(), top=False)
        doc["kernel"] = _pairs(system.params["kernel"].generators)
    elif kind is SystemKind.COPRODUCT:
        doc["summands"] = [system_to_doc(s, top=False) for s in system.params["summands"]]
    elif kind in (SystemKind.TENSOR_MIN, SystemKind.TENSOR_MAX):
        doc["factors"] = [system_to_doc(s, top=False) for s in system.parents]
        doc["hier_level"] = system.params["hier_level"]
        doc["seed"] = system.params["seed"]
        if system.params.get("force_hierarchy"):
            doc["force_hierarchy"] = True
    else:
        doc["parent"] = system_to_doc(system.parent(), top=False)
        doc["k"] = system.params["k"]
    return doc


def system_from_doc(doc: Any) -> OperatorSystem:
    if isinstance(doc, dict) and "canonical" in doc:
        return canonical(str(doc["canonical"]))
    kind_name = _require(doc, "kind", "system")
    try:
        kind = SystemKind(kind_name)
    except ValueError as e:
        raise InputError(f"unknown system kind '{kind_name}'") from e
    name = doc.get("name")
    if kind is SystemKind.CONCRETE:
        d = int(_require(doc, "ambient_dim", "concrete system"))
        basis = _complex_array(_require(doc, "basis", "concrete system"), "basis")
        state = doc.get("state", doc.get("faithful_state"))
        return make_concrete(
            name or "S", d, list(basis), state=None if state is None else _complex_array(state, "state")
        )
    if kind is SystemKind.DUAL:
        return dual_system(system_from_doc(_require(doc, "parent", "dual system")), name=name)
    if kind is SystemKind.QUOTIENT:
        parent = system_from_doc(_require(doc, "parent", "quotient"))
        kernel = _complex_array(_require(doc, "kernel", "quotient"), "kernel")
        return quotient_system(parent, Subspace(parent, kernel), name=name)
    if kind is SystemKind.COPRODUCT:
        s, t = (system_from_doc(x) for x in _require(doc, "summands", "coproduct"))
        return coproduct(s, t, name=name)
    if kind in (SystemKind.TENSOR_MIN, SystemKind.TENSOR_MAX):
        s, t = (system_from_doc(x) for x in _require(doc, "factors", "tensor product"))
        level = int(doc.get("hier_level", DEFAULT_HIER_LEVEL))
        seed = int(doc.get("seed", 0))
        if kind is SystemKind.TENSOR_MIN:
            return tensor_min(s, t, name=name, hier_level=level, seed=seed)
        return tensor_max(s, t, name=name, hier_level=level, seed=seed, force_hierarchy=bool(doc.get("force_hierarchy")))
    parent = system_from_doc(_require(doc, "parent", kind.value))
    k = int(_require(doc, "k", kind.value))
    return (omin_system if kind is SystemKind.OMIN_K else omax_system)(parent, k, name=name)


# -----------------------------------------------------------------------------
# Elements, maps and numerical-range queries
# -----------------------------------------------------------------------------


def element_to_doc(u: LevelElement) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "type": "element",
        "system": u.system.name,
        "level": u.level,
        "coeffs": _pairs(u.coeffs),
    }


def element_from_doc(doc: Any, system: OperatorSystem) -> LevelElement:
    """Coefficients (n x n x dim pairs) or a realized block matrix under "realized" or "matrix"."""
    for key in ("realized", "matrix"):
        if isinstance(doc, dict) and key in doc:
            return LevelElement.from_realized(system, _complex_array(doc[key], "element matrix"))
    coeffs = _complex_array(_require(doc, "coeffs", "element"), "element coefficients")
    if coeffs.ndim == 1:
        coeffs = coeffs.reshape(1, 1, -1)
    return LevelElement(system, coeffs)


def map_to_doc(phi: LinearMapSpec) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "type": "map",
        "name": phi.name,
        "source": system_to_doc(phi.source, top=False),
        "target": system_to_doc(phi.target, top=False),
        "images": _pairs(phi.images),
    }


def map_from_doc(doc: Any) -> LinearMapSpec:
    if isinstance(doc, dict) and "canonical" in doc:
        return canonical_map(str(doc["canonical"]))
    source = system_from_doc(_require(doc, "source", "map"))
    target = system_from_doc(_require(doc, "target", "map"))
    images = _complex_array(_require(doc, "images", "map"), "map images")
    return LinearMapSpec(source, target, images, name=doc.get("name", "phi"))


def query_from_doc(doc: Any, system: OperatorSystem) -> NumericalRangeQuery:
    x = _complex_array(_require(doc, "x", "numerical-range query"), "x")
    target = _complex_array(_require(doc, "target", "numerical-range query"), "target")
    return NumericalRangeQuery(system, x, target)


def read_matrix(doc: Any, key: str, what: str) -> np.ndarray:
    return _complex_array(_require(doc, key, what), f"{what} '{key}'")


def subspace_from_doc(doc: Any, parent: OperatorSystem) -> Subspace:
    """{"generators": [coefficient vector, ...]} (or a bare list) over the parent's basis."""
    gens = doc if isinstance(doc, list) else _require(doc, "generators", "subspace")
    return Subspace(parent, _complex_array(gens, "subspace generators"))
