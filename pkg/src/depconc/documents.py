"""JSON model and function documents."""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .errors import DepconcError
from .model import CoordinateSpace, JointLaw, ProductModel, as_table

VERSION = "1"
BUILTINS = ("hamming_weight", "coordinate_mean", "indicator")


class DocumentError(DepconcError):
    """A document failed to parse; ``field`` names the offending location."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{exc.msg} (column {exc.colno})", line=exc.lineno) from exc


def _need(obj: dict, key: str, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise DocumentError("missing required key", f"{path}.{key}" if path else key)
    return obj[key]


def _numbers(value, path: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError("expected numbers", path) from exc
    if arr.ndim != ndim:
        raise DocumentError(f"expected a {ndim}-dimensional array", path)
    if not np.all(np.isfinite(arr)):
        raise DocumentError("numbers must be finite", path)
    return arr


def _coordinate(doc, k: int) -> CoordinateSpace:
    path = f"coordinates[{k}]"
    size = _need(doc, "size", path)
    if not isinstance(size, int) or size < 1:
        raise DocumentError("size must be a positive integer", f"{path}.size")
    metric = doc.get("metric", {"type": "trivial", "alpha": 1.0})
    mtype = _need(metric, "type", f"{path}.metric")
    labels = doc.get("labels")
    try:
        if mtype == "trivial":
            alpha = float(metric.get("alpha", 1.0))
            return CoordinateSpace.trivial(size, alpha, labels)
        if mtype == "explicit":
            mat = _numbers(_need(metric, "matrix", f"{path}.metric"), f"{path}.metric.matrix", 2)
            return CoordinateSpace(size, mat, labels)
    except DocumentError:
        raise
    except DepconcError as exc:
        raise DocumentError(str(exc), f"{path}.metric") from exc
    raise DocumentError(f"unknown metric type {mtype!r}", f"{path}.metric.type")


def _law(doc) -> JointLaw:
    ltype = _need(doc, "type", "law")
    try:
        if ltype == "explicit":
            return JointLaw.explicit(_numbers(_need(doc, "pmf", "law"), "law.pmf", 1))
        if ltype == "markov":
            init = _numbers(_need(doc, "initial", "law"), "law.initial", 1)
            kernels = [_numbers(k, f"law.kernels[{i}]", 2) for i, k in enumerate(_need(doc, "kernels", "law"))]
            return JointLaw.markov(init, kernels)
        if ltype == "gibbs_chain":
            pots = [_numbers(p, f"law.potentials[{i}]", 2) for i, p in enumerate(_need(doc, "potentials", "law"))]
            return JointLaw.gibbs_chain(pots)
        if ltype == "product":
            margs = [_numbers(m, f"law.marginals[{i}]", 1) for i, m in enumerate(_need(doc, "marginals", "law"))]
            return JointLaw.product(margs)
    except DocumentError:
        raise
    except DepconcError as exc:
        # law validators prefix messages with the sub-field name
        msg = str(exc)
        sub = msg.split(":", 1)[0] if ":" in msg else ""
        raise DocumentError(msg, f"law.{sub}" if sub else "law") from exc
    raise DocumentError(f"unknown law type {ltype!r}", "law.type")


def model_from_dict(doc: dict) -> ProductModel:
    if not isinstance(doc, dict):
        raise DocumentError("model document must be a JSON object")
    version = str(doc.get("version", VERSION))
    if version != VERSION:
        raise DocumentError(f"unsupported version {version!r}", "version")
    coords = _need(doc, "coordinates", "")
    if not isinstance(coords, list) or not coords:
        raise DocumentError("expected a non-empty list", "coordinates")
    coordinates = tuple(_coordinate(c, k) for k, c in enumerate(coords))
    law = _law(_need(doc, "law", ""))
    try:
        model = ProductModel(coordinates, law)
        model.pmf  # materialize now so size errors surface as parse errors
    except DepconcError as exc:
        raise DocumentError(str(exc), "law") from exc
    return model


def load_model(path) -> ProductModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(_load_json(fh.read()))


def _num(x) -> float:
    return float(f"{float(x):.17g}")


def _nested(arr) -> list:
    return np.vectorize(_num, otypes=[float])(np.asarray(arr, dtype=float)).tolist()


def model_to_dict(model: ProductModel) -> dict:
    coords = []
    for c in model.coordinates:
        entry: dict[str, Any] = {"size": c.size}
        if c.alpha is not None and c.size > 1:
            entry["metric"] = {"type": "trivial", "alpha": _num(c.alpha)}
        elif c.size == 1:
            entry["metric"] = {"type": "trivial", "alpha": 1.0}
        else:
            entry["metric"] = {"type": "explicit", "matrix": _nested(c.metric)}
        if c.labels is not None:
            entry["labels"] = list(c.labels)
        coords.append(entry)
    law = model.law
    if law.kind == "explicit":
        ldoc = {"type": "explicit", "pmf": _nested(law.pmf)}
    elif law.kind == "markov":
        ldoc = {"type": "markov", "initial": _nested(law.initial), "kernels": [_nested(k) for k in law.kernels]}
    elif law.kind == "gibbs_chain":
        ldoc = {"type": "gibbs_chain", "potentials": [_nested(p) for p in law.potentials]}
    else:
        ldoc = {"type": "product", "marginals": [_nested(m) for m in law.marginals]}
    return {"version": VERSION, "coordinates": coords, "law": ldoc}


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def function_from_dict(doc: dict, model: ProductModel) -> np.ndarray:
    ftype = _need(doc, "type", "")
    if ftype == "table":
        values = _numbers(_need(doc, "values", ""), "values", 1)
        try:
            return as_table(values, model)
        except DepconcError as exc:
            raise DocumentError(str(exc), "values") from exc
    if ftype != "builtin":
        raise DocumentError(f"unknown function type {ftype!r}", "type")
    name = _need(doc, "name", "")
    params = doc.get("params") or {}
    states = model.states()
    if name == "hamming_weight":
        ref = np.asarray(params.get("reference", [0] * model.n))
        if ref.shape != (model.n,):
            raise DocumentError("reference must have one entry per coordinate", "params.reference")
        return (states != ref[None, :]).sum(axis=1).astype(float)
    if name == "coordinate_mean":
        return states.mean(axis=1).astype(float)
    if name == "indicator":
        if "states" in params:
            hits = {tuple(int(v) for v in s) for s in params["states"]}
            return np.array([1.0 if tuple(s) in hits else 0.0 for s in states])
        coord = params.get("coordinate")
        value = params.get("value")
        if coord is None or value is None:
            raise DocumentError("indicator needs 'states' or 'coordinate' and 'value'", "params")
        if not 0 <= int(coord) < model.n:
            raise DocumentError("coordinate out of range", "params.coordinate")
        return (states[:, int(coord)] == int(value)).astype(float)
    raise DocumentError(f"unknown builtin {name!r}; expected one of {BUILTINS}", "name")


def load_function(path, model: ProductModel) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        doc = _load_json(fh.read())
    if not isinstance(doc, dict):
        raise DocumentError("function document must be a JSON object")
    return function_from_dict(doc, model)
