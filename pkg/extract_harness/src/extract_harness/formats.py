"""Writers and validators for the analyzer's trace and feature file formats.

The harness talks to the analysis package only through these files, so the
format knowledge is reimplemented here from its published contract: UTF-8
JSON, fixed key order, no insignificant whitespace, floats as shortest
round-trip decimals, answer ids dense per question, gold null when never
sampled.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

FORMAT_VERSION = 1


def _canon(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError("non-finite float in output")
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(
            f"{json.dumps(str(k), ensure_ascii=False)}:{_canon(v)}"
            for k, v in value.items()) + "}"
    raise TypeError(f"cannot serialize {type(value)!r}")


def write_trace_file(path: str | Path, n_max: int, sampling_config: dict,
                     records: Sequence[dict]) -> None:
    """records: {question_id, gold, draws, answer_labels} per question."""
    traces = []
    for rec in records:
        obj = {
            "question_id": rec["question_id"],
            "gold": rec["gold"],
            "draws": list(rec["draws"]),
        }
        if rec.get("answer_labels"):
            obj["answer_labels"] = {str(k): v for k, v
                                    in sorted(rec["answer_labels"].items())}
        traces.append(obj)
    payload = {
        "format_version": FORMAT_VERSION,
        "n_max": n_max,
        "sampling_config": sampling_config,
        "traces": traces,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canon(payload) + "\n", encoding="utf-8")


def write_feature_file(path: str | Path, layers: int, dim: int,
                       records: Sequence[dict]) -> None:
    """records: {question_id, vectors, label?} per question."""
    features = []
    for rec in records:
        obj = {
            "question_id": rec["question_id"],
            "vectors": [[float(v) for v in layer] for layer in rec["vectors"]],
        }
        if rec.get("label") is not None:
            obj["label"] = float(rec["label"])
        features.append(obj)
    payload = {
        "format_version": FORMAT_VERSION,
        "layers": layers,
        "dim": dim,
        "features": features,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canon(payload) + "\n", encoding="utf-8")


def _load_json(path: str | Path, errors: list[str]) -> dict | None:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        errors.append(f"{path}: file not found")
        return None
    except json.JSONDecodeError as exc:
        errors.append(f"{path}: invalid JSON ({exc})")
        return None
    if not isinstance(obj, dict):
        errors.append(f"{path}: top level must be an object")
        return None
    return obj


def validate_trace_file(path: str | Path) -> list[str]:
    """All format violations found, empty when the file is valid."""
    errors: list[str] = []
    obj = _load_json(path, errors)
    if obj is None:
        return errors
    if obj.get("format_version") != FORMAT_VERSION:
        errors.append(f"format_version must be {FORMAT_VERSION}")
    n_max = obj.get("n_max")
    if not isinstance(n_max, int) or n_max < 1:
        errors.append("n_max must be a positive integer")
        return errors
    cfg = obj.get("sampling_config")
    if not isinstance(cfg, dict):
        errors.append("missing sampling_config object")
    traces = obj.get("traces")
    if not isinstance(traces, list):
        errors.append("traces must be a list")
        return errors
    seen = set()
    for i, trace in enumerate(traces):
        where = f"traces[{i}]"
        if not isinstance(trace, dict):
            errors.append(f"{where}: must be an object")
            continue
        qid = trace.get("question_id")
        if not isinstance(qid, str) or not qid:
            errors.append(f"{where}: missing question_id")
            continue
        if qid in seen:
            errors.append(f"{where}: duplicate question_id {qid!r}")
        seen.add(qid)
        draws = trace.get("draws")
        if not (isinstance(draws, list)
                and all(isinstance(d, int) for d in draws)):
            errors.append(f"trace {qid!r}: draws must be integers")
            continue
        if len(draws) != n_max:
            errors.append(f"trace {qid!r}: {len(draws)} draws, header n_max "
                          f"{n_max}")
            continue
        m = max(draws) + 1 if draws else 0
        if set(draws) != set(range(m)):
            errors.append(f"trace {qid!r}: answer ids not dense")
        gold = trace.get("gold", "missing")
        if gold == "missing" or not (gold is None or isinstance(gold, int)):
            errors.append(f"trace {qid!r}: gold must be an integer or null")
        elif gold is not None and not 0 <= gold < m:
            errors.append(f"trace {qid!r}: gold {gold} outside [0, {m})")
    return errors


def validate_feature_file(path: str | Path) -> list[str]:
    errors: list[str] = []
    obj = _load_json(path, errors)
    if obj is None:
        return errors
    if obj.get("format_version") != FORMAT_VERSION:
        errors.append(f"format_version must be {FORMAT_VERSION}")
    layers, dim = obj.get("layers"), obj.get("dim")
    if not isinstance(layers, int) or layers < 1:
        errors.append("layers must be a positive integer")
        return errors
    if not isinstance(dim, int) or dim < 1:
        errors.append("dim must be a positive integer")
        return errors
    records = obj.get("features")
    if not isinstance(records, list):
        errors.append("features must be a list")
        return errors
    for i, rec in enumerate(records):
        where = f"features[{i}]"
        if not isinstance(rec, dict):
            errors.append(f"{where}: must be an object")
            continue
        qid = rec.get("question_id")
        if not isinstance(qid, str) or not qid:
            errors.append(f"{where}: missing question_id")
            continue
        vectors = rec.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != layers:
            errors.append(f"features {qid!r}: expected {layers} layer vectors")
            continue
        for layer in vectors:
            if not isinstance(layer, list) or len(layer) != dim:
                errors.append(f"features {qid!r}: layer vector dim != {dim}")
                break
        label = rec.get("label")
        if label is not None and not (isinstance(label, (int, float))
                                      and 0.0 <= label <= 1.0):
            errors.append(f"features {qid!r}: label outside [0, 1]")
    return errors
