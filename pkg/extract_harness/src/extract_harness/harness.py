"""Extraction jobs: sample answers, record hidden states, write analyzer files.

The analyzer package is consumed strictly through its external interfaces:
the published file formats and the `overscale-lab` CLI (used to compute the
normalized optimal-budget labels from the freshly written traces).
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .backend import GenerationFailure, TransformersBackend
from .canonicalize import UNPARSEABLE, canonicalize_answer, extract_answer
from .formats import (validate_feature_file, validate_trace_file,
                      write_feature_file, write_trace_file)

MAX_GENERATION_RETRIES = 2


@dataclass
class ExtractionJob:
    model: str
    questions_path: str
    n_max: int
    out_traces: str
    out_features: str
    answer_rule: str = "boxed"
    top_k: int = 20
    top_p: float = 0.95
    temperature: float = 0.6
    seed: int = 0
    max_new_tokens: int = 32
    label_with_primary: bool = True

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


@dataclass
class ExtractReport:
    questions: int
    paths: int
    unparseable_paths: int
    labeled: bool
    trace_path: str
    feature_path: str


@dataclass
class SelfCheckReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def read_questions(path: str | Path) -> list[dict]:
    """JSON Lines with question_id, prompt, gold."""
    questions = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8")
                                  .splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        for key in ("question_id", "prompt", "gold"):
            if key not in obj:
                raise ValueError(f"{path}:{lineno}: missing field {key!r}")
        if obj["question_id"] in seen:
            raise ValueError(f"{path}:{lineno}: duplicate question_id")
        seen.add(obj["question_id"])
        questions.append(obj)
    if not questions:
        raise ValueError(f"{path}: no questions found")
    return questions


def _sample_with_retries(backend, prompt, n, job, seed):
    for attempt in range(MAX_GENERATION_RETRIES + 1):
        try:
            return backend.sample_paths(prompt, n, job.top_k, job.top_p,
                                        job.temperature, seed + attempt * 7919)
        except GenerationFailure:
            if attempt == MAX_GENERATION_RETRIES:
                return [""] * n
    raise AssertionError("unreachable")


def _primary_cli() -> list[str]:
    exe = shutil.which("overscale-lab")
    if exe:
        return [exe]
    return [sys.executable, "-m", "overscale_lab.cli"]


def _labels_from_primary(trace_path: str, n_max: int) -> dict[str, float]:
    """Ask the analyzer for per-question optimal budgets; exact oracle first."""
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "analysis"
        base = _primary_cli() + ["analyze", "--traces", trace_path,
                                 "--out", str(out)]
        proc = subprocess.run(base + ["--exact"], capture_output=True, text=True)
        if proc.returncode != 0:
            proc = subprocess.run(base, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(
                f"primary analyze failed (exit {proc.returncode}): {proc.stderr}"
            )
        report = json.loads((Path(tmp) / "analysis.json").read_text())
    return {q["question_id"]: q["n_star"] / n_max for q in report["questions"]}


def extract(job: ExtractionJob,
            backend: TransformersBackend | None = None) -> ExtractReport:
    """Run the job; aborts if the written files fail the self-check."""
    questions = read_questions(job.questions_path)
    if backend is None:
        backend = TransformersBackend(job.model, job.max_new_tokens)
    trace_records = []
    feature_records = []
    prompts_meta = []
    unparseable = 0
    for index, question in enumerate(questions):
        prompt = question["prompt"]
        vectors = backend.hidden_states(prompt)
        paths = _sample_with_retries(backend, prompt, job.n_max, job,
                                     job.seed + 100_003 * index)
        canon = [canonicalize_answer(extract_answer(p, job.answer_rule),
                                     job.answer_rule)
                 for p in paths]
        unparseable += sum(1 for c in canon if c == UNPARSEABLE)
        gold_canon = canonicalize_answer(str(question["gold"]), job.answer_rule)
        if gold_canon == UNPARSEABLE:
            raise ValueError(
                f"question {question['question_id']!r}: gold answer "
                f"canonicalizes to the reserved unparseable token"
            )
        dense: dict[str, int] = {}
        draws = []
        for answer in canon:
            dense.setdefault(answer, len(dense))
            draws.append(dense[answer])
        trace_records.append({
            "question_id": question["question_id"],
            "gold": dense.get(gold_canon),
            "draws": draws,
            "answer_labels": {v: k for k, v in dense.items()},
        })
        feature_records.append({
            "question_id": question["question_id"],
            "vectors": [[float(v) for v in layer] for layer in vectors],
            "label": None,
        })
        prompts_meta.append({
            "question_id": question["question_id"],
            "templated_prompt": prompt,
            "gold_canonical": gold_canon,
        })
    sampling_config = {
        "top_k": job.top_k,
        "top_p": float(job.top_p),
        "temperature": float(job.temperature),
        "model_name": job.model,
        "seed": job.seed,
    }
    write_trace_file(job.out_traces, job.n_max, sampling_config, trace_records)

    labeled = False
    if job.label_with_primary:
        labels = _labels_from_primary(job.out_traces, job.n_max)
        for rec in feature_records:
            rec["label"] = labels[rec["question_id"]]
        labeled = True
    write_feature_file(job.out_features, backend.num_layers,
                       backend.hidden_dim, feature_records)

    import torch
    meta = {
        "model": job.model,
        "answer_rule": job.answer_rule,
        "sampling_config": sampling_config,
        "max_new_tokens": job.max_new_tokens,
        "prompts": prompts_meta,
        "determinism_note": ("sampling seeded per question; reproducible up "
                             "to the inference backend's documented "
                             "nondeterminism"),
        "torch_version": torch.__version__,
    }
    Path(str(job.out_traces) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    check = selfcheck(job.out_traces, job.out_features)
    if not check.ok:
        raise RuntimeError("self-check failed: " + "; ".join(check.errors))
    return ExtractReport(
        questions=len(questions),
        paths=len(questions) * job.n_max,
        unparseable_paths=unparseable,
        labeled=labeled,
        trace_path=str(job.out_traces),
        feature_path=str(job.out_features),
    )


def selfcheck(trace_path: str | Path,
              feature_path: str | Path) -> SelfCheckReport:
    """Re-validate both files and cross-check their question alignment."""
    errors = validate_trace_file(trace_path)
    errors += validate_feature_file(feature_path)
    if not errors:
        traces = json.loads(Path(trace_path).read_text(encoding="utf-8"))
        features = json.loads(Path(feature_path).read_text(encoding="utf-8"))
        trace_ids = [t["question_id"] for t in traces["traces"]]
        feature_ids = [f["question_id"] for f in features["features"]]
        missing = [q for q in trace_ids if q not in set(feature_ids)]
        extra = [q for q in feature_ids if q not in set(trace_ids)]
        for qid in missing:
            errors.append(f"question {qid!r} has a trace but no features")
        for qid in extra:
            errors.append(f"question {qid!r} has features but no trace")
    return SelfCheckReport(errors=errors)
