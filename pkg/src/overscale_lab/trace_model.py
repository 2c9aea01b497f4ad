"""Canonical data model for answer traces, feature sets, and their file formats.

Answers are opaque dense integer ids; canonicalization of answer strings is a
producer concern.  A gold answer that was never sampled is represented as
``gold=None`` so downstream scoring can treat the question as unanswerable
without sentinel arithmetic.  Files are UTF-8 JSON written in one canonical
form (fixed key order, no insignificant whitespace, shortest round-trip float
text) so that equal datasets always serialize to identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

FORMAT_VERSION = 1


class SchemaError(ValueError):
    """Raised when a trace or feature file violates the format contract."""


@dataclass(frozen=True)
class SamplingConfig:
    """Decode-time sampling metadata carried alongside a dataset."""

    top_k: int = 20
    top_p: float = 0.95
    temperature: float = 0.6
    model_name: str = "unknown"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise SchemaError(f"top_k must be positive, got {self.top_k}")
        if not 0.0 < self.top_p <= 1.0:
            raise SchemaError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.temperature <= 0.0:
            raise SchemaError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class QuestionTrace:
    """One question's recorded draws plus its gold answer id (None if never drawn).

    ``draws`` holds dense answer ids: the distinct values are exactly
    0..m-1 where m is the number of distinct canonical answers observed.
    """

    question_id: str
    gold: int | None
    draws: tuple[int, ...]
    confidences: tuple[float, ...] | None = None
    difficulty: float | None = None
    answer_labels: Mapping[int, str] | None = None

    def __post_init__(self) -> None:
        if len(self.draws) < 1:
            raise SchemaError(f"trace {self.question_id!r}: draws must be non-empty")
        object.__setattr__(self, "draws", tuple(int(d) for d in self.draws))
        m = self.num_answers
        observed = set(self.draws)
        if observed != set(range(m)):
            raise SchemaError(
                f"trace {self.question_id!r}: answer ids must be dense in [0, {m}), "
                f"got {sorted(observed)}"
            )
        if self.gold is not None and not 0 <= self.gold < m:
            raise SchemaError(
                f"trace {self.question_id!r}: gold id {self.gold} outside observed "
                f"vocabulary [0, {m})"
            )
        if self.confidences is not None:
            object.__setattr__(
                self, "confidences", tuple(float(c) for c in self.confidences)
            )
            if len(self.confidences) != len(self.draws):
                raise SchemaError(
                    f"trace {self.question_id!r}: {len(self.confidences)} confidences "
                    f"for {len(self.draws)} draws"
                )
            if any(not 0.0 <= c <= 1.0 for c in self.confidences):
                raise SchemaError(
                    f"trace {self.question_id!r}: confidences must lie in [0, 1]"
                )
        if self.answer_labels is not None:
            labels = {int(k): str(v) for k, v in self.answer_labels.items()}
            if any(not 0 <= k < m for k in labels):
                raise SchemaError(
                    f"trace {self.question_id!r}: answer_labels key outside [0, {m})"
                )
            object.__setattr__(self, "answer_labels", labels)

    @property
    def n_max(self) -> int:
        return len(self.draws)

    @property
    def num_answers(self) -> int:
        return max(self.draws) + 1


@dataclass(frozen=True)
class TraceDataset:
    """A set of traces sharing one reference-pool size ``n_max``."""

    traces: tuple[QuestionTrace, ...]
    sampling_config: SamplingConfig = field(default_factory=SamplingConfig)
    n_max: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "traces", tuple(self.traces))
        if self.n_max < 1:
            raise SchemaError(f"n_max must be >= 1, got {self.n_max}")
        seen: set[str] = set()
        for trace in self.traces:
            if trace.n_max != self.n_max:
                raise SchemaError(
                    f"trace {trace.question_id!r}: has {trace.n_max} draws but "
                    f"dataset n_max is {self.n_max}"
                )
            if trace.question_id in seen:
                raise SchemaError(f"duplicate question_id {trace.question_id!r}")
            seen.add(trace.question_id)

    def __len__(self) -> int:
        return len(self.traces)


@dataclass(frozen=True)
class LayerFeatureSet:
    """Per-layer feature vectors for one question, with an optional label."""

    question_id: str
    layer_vectors: tuple[tuple[float, ...], ...]
    label: float | None = None

    def __post_init__(self) -> None:
        vectors = tuple(tuple(float(v) for v in layer) for layer in self.layer_vectors)
        object.__setattr__(self, "layer_vectors", vectors)
        if len(vectors) < 1:
            raise SchemaError(f"features {self.question_id!r}: need at least 1 layer")
        dim = len(vectors[0])
        if any(len(layer) != dim for layer in vectors):
            raise SchemaError(
                f"features {self.question_id!r}: layer vectors differ in dimension"
            )
        if self.label is not None and not 0.0 <= self.label <= 1.0:
            raise SchemaError(
                f"features {self.question_id!r}: label {self.label} outside [0, 1]"
            )

    @property
    def num_layers(self) -> int:
        return len(self.layer_vectors)

    @property
    def dim(self) -> int:
        return len(self.layer_vectors[0])


def answer_counts(trace: QuestionTrace) -> list[int]:
    """Count vector c with c[j] = number of draws equal to j; sums to n_max."""
    counts = [0] * trace.num_answers
    for d in trace.draws:
        counts[d] += 1
    return counts


# --- canonical JSON -------------------------------------------------------

def _canon_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise SchemaError("non-finite float cannot be serialized")
    return repr(float(x))


def _canon_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "item") and type(value).__module__ == "numpy":
        value = value.item()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _canon_float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon_value(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}:{_canon_value(v)}"
                 for k, v in value.items())
        return "{" + ",".join(items) + "}"
    raise TypeError(f"cannot canonically serialize {type(value)!r}")


def canonical_json(obj) -> str:
    """Serialize with insertion key order, compact separators, repr() floats."""
    return _canon_value(obj)


def _sampling_config_obj(cfg: SamplingConfig) -> dict:
    return {
        "top_k": cfg.top_k,
        "top_p": float(cfg.top_p),
        "temperature": float(cfg.temperature),
        "model_name": cfg.model_name,
        "seed": cfg.seed,
    }


def _trace_obj(trace: QuestionTrace) -> dict:
    obj: dict = {
        "question_id": trace.question_id,
        "gold": trace.gold,
        "draws": list(trace.draws),
    }
    if trace.confidences is not None:
        obj["confidences"] = [float(c) for c in trace.confidences]
    if trace.difficulty is not None:
        obj["difficulty"] = float(trace.difficulty)
    if trace.answer_labels is not None:
        obj["answer_labels"] = {str(k): trace.answer_labels[k]
                                for k in sorted(trace.answer_labels)}
    return obj


def dataset_to_json(dataset: TraceDataset) -> str:
    obj = {
        "format_version": FORMAT_VERSION,
        "n_max": dataset.n_max,
        "sampling_config": _sampling_config_obj(dataset.sampling_config),
        "traces": [_trace_obj(t) for t in dataset.traces],
    }
    return canonical_json(obj)


def save_traces(dataset: TraceDataset, path: str | Path) -> None:
    """Write a dataset in canonical form; the output re-loads equal to input."""
    Path(path).write_text(dataset_to_json(dataset) + "\n", encoding="utf-8")


def _require(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise SchemaError(f"{where}: {message}")


def _parse_trace(obj, index: int, n_max: int) -> QuestionTrace:
    where = f"traces[{index}]"
    _require(isinstance(obj, dict), where, "trace record must be an object")
    qid = obj.get("question_id")
    _require(isinstance(qid, str) and qid != "", where, "missing question_id")
    where = f"trace {qid!r}"
    unknown = set(obj) - {"question_id", "gold", "draws", "confidences",
                          "difficulty", "answer_labels"}
    _require(not unknown, where, f"unknown fields {sorted(unknown)}")
    def is_int(value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool)

    gold = obj.get("gold", "missing")
    _require(gold is None or is_int(gold), where,
             "field 'gold' must be an integer or null")
    draws = obj.get("draws")
    _require(isinstance(draws, list) and all(is_int(d) for d in draws),
             where, "field 'draws' must be a list of integers")
    _require(len(draws) == n_max, where,
             f"has {len(draws)} draws but header says n_max={n_max}")
    confidences = obj.get("confidences")
    if confidences is not None:
        _require(isinstance(confidences, list)
                 and all(isinstance(c, (int, float)) for c in confidences),
                 where, "field 'confidences' must be a list of numbers")
    difficulty = obj.get("difficulty")
    if difficulty is not None:
        _require(isinstance(difficulty, (int, float)), where,
                 "field 'difficulty' must be a number")
        difficulty = float(difficulty)
    labels = obj.get("answer_labels")
    if labels is not None:
        _require(isinstance(labels, dict), where,
                 "field 'answer_labels' must be an object")
        try:
            labels = {int(k): str(v) for k, v in labels.items()}
        except ValueError:
            raise SchemaError(f"{where}: answer_labels keys must be integer strings")
    try:
        return QuestionTrace(
            question_id=qid,
            gold=gold,
            draws=tuple(draws),
            confidences=tuple(confidences) if confidences is not None else None,
            difficulty=difficulty,
            answer_labels=labels,
        )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def load_traces(path: str | Path) -> TraceDataset:
    """Load and validate a trace file; malformed input is rejected, not repaired."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    _require(isinstance(obj, dict), str(path), "top level must be an object")
    _require(obj.get("format_version") == FORMAT_VERSION, str(path),
             f"unsupported format_version {obj.get('format_version')!r}")
    n_max = obj.get("n_max")
    _require(isinstance(n_max, int) and n_max >= 1, str(path),
             "n_max must be a positive integer")
    cfg_obj = obj.get("sampling_config")
    _require(isinstance(cfg_obj, dict), str(path), "missing sampling_config")
    try:
        cfg = SamplingConfig(
            top_k=cfg_obj["top_k"],
            top_p=cfg_obj["top_p"],
            temperature=cfg_obj["temperature"],
            model_name=cfg_obj["model_name"],
            seed=cfg_obj["seed"],
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: sampling_config missing field {exc}") from exc
    traces_obj = obj.get("traces")
    _require(isinstance(traces_obj, list), str(path), "traces must be a list")
    traces = tuple(_parse_trace(t, i, n_max) for i, t in enumerate(traces_obj))
    return TraceDataset(traces=traces, sampling_config=cfg, n_max=n_max)


# --- feature files --------------------------------------------------------

def features_to_json(features: Sequence[LayerFeatureSet]) -> str:
    if not features:
        raise SchemaError("feature file needs at least one record")
    layers = features[0].num_layers
    dim = features[0].dim
    records = []
    for f in features:
        if f.num_layers != layers or f.dim != dim:
            raise SchemaError(
                f"features {f.question_id!r}: shape ({f.num_layers}, {f.dim}) "
                f"differs from header ({layers}, {dim})"
            )
        rec: dict = {
            "question_id": f.question_id,
            "vectors": [[float(v) for v in layer] for layer in f.layer_vectors],
        }
        if f.label is not None:
            rec["label"] = float(f.label)
        records.append(rec)
    obj = {
        "format_version": FORMAT_VERSION,
        "layers": layers,
        "dim": dim,
        "features": records,
    }
    return canonical_json(obj)


def save_features(features: Sequence[LayerFeatureSet], path: str | Path) -> None:
    Path(path).write_text(features_to_json(features) + "\n", encoding="utf-8")


def load_features(path: str | Path) -> list[LayerFeatureSet]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    _require(isinstance(obj, dict), str(path), "top level must be an object")
    _require(obj.get("format_version") == FORMAT_VERSION, str(path),
             f"unsupported format_version {obj.get('format_version')!r}")
    layers, dim = obj.get("layers"), obj.get("dim")
    _require(isinstance(layers, int) and layers >= 1, str(path),
             "layers must be a positive integer")
    _require(isinstance(dim, int) and dim >= 1, str(path),
             "dim must be a positive integer")
    records = obj.get("features")
    _require(isinstance(records, list), str(path), "features must be a list")
    out: list[LayerFeatureSet] = []
    for i, rec in enumerate(records):
        where = f"features[{i}]"
        _require(isinstance(rec, dict), where, "record must be an object")
        qid = rec.get("question_id")
        _require(isinstance(qid, str) and qid != "", where, "missing question_id")
        vectors = rec.get("vectors")
        _require(isinstance(vectors, list) and len(vectors) == layers,
                 f"features {qid!r}", f"expected {layers} layer vectors")
        for layer in vectors:
            _require(isinstance(layer, list) and len(layer) == dim,
                     f"features {qid!r}", f"layer vectors must have dim {dim}")
        label = rec.get("label")
        if label is not None:
            _require(isinstance(label, (int, float)), f"features {qid!r}",
                     "label must be a number")
            label = float(label)
        out.append(LayerFeatureSet(
            question_id=qid,
            layer_vectors=tuple(tuple(float(v) for v in layer) for layer in vectors),
            label=label,
        ))
    return out
