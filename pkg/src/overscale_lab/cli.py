"""Command-line entry points.

Every command resolves its configuration from defaults, then an optional JSON
config file, then flags (flags win), and embeds the resolved configuration in
its outputs.  Outputs are canonical JSON / CSV with no timestamps, so a rerun
with the same configuration is byte-identical.  Exit codes: 0 success, 2
input-schema failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .categorical_sim import SynthSpec, synth_dataset
from .estimator import (TrainConfig, load_bundle, pipeline_estimate, save_bundle,
                        train_bundle)
from .overscale_metrics import (DEFAULT_EPS_ACC, overscaling_index,
                                sample_optimal_n, theorem1_check, type_gain_table)
from .policies import (cost_report, outcomes_to_csv, run_ac, run_dsc, run_esc,
                       run_oracle, run_std_pt, run_t2)
from .taxonomy import (MonotonicityParams, partition, partition_report_csv,
                       partition_report_json)
from .trace_model import (SchemaError, canonical_json, load_features, load_traces,
                          save_traces)
from .vote_curve import (SubsampleParams, TieRule, curves_to_csv, dataset_curves)

POLICY_NAMES = ("std-pt", "oracle", "ac", "esc", "dsc", "t2")


def _tie_rule(name: str) -> TieRule:
    return TieRule.FRACTIONAL if name == "fractional" else TieRule.FIRST_SEEN


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            file_values = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{config_path}: invalid JSON: {exc}") from exc
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise SchemaError(
                f"{config_path}: unknown config keys {sorted(unknown)}"
            )
        resolved.update(file_values)
    for key in defaults:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def _subsample_params(cfg: dict) -> SubsampleParams:
    return SubsampleParams(tau=cfg["tau"], seed=cfg["seed"],
                           tie_rule=_tie_rule(cfg["tie-rule"]))


def _mono_params(cfg: dict) -> MonotonicityParams:
    return MonotonicityParams(step=cfg.get("step"), threshold=cfg["threshold"])


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_curves(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {
        "traces": None, "out": None, "tau": 100_000, "seed": 0,
        "tie-rule": "fractional", "exact": False,
    })
    if not cfg["traces"] or not cfg["out"]:
        raise SchemaError("curves requires --traces and --out")
    dataset = load_traces(cfg["traces"])
    curves = dataset_curves(dataset, _subsample_params(cfg), exact=cfg["exact"])
    out = Path(cfg["out"])
    _write(Path(str(out) + ".csv"), curves_to_csv(dataset, curves))
    payload = {
        "config": cfg,
        "n_max": dataset.n_max,
        "method": "EXACT" if cfg["exact"] else "SUBSAMPLE",
        "curves": [
            {"question_id": t.question_id, "values": list(c.values)}
            for t, c in zip(dataset.traces, curves)
        ],
    }
    _write(Path(str(out) + ".json"), canonical_json(payload) + "\n")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {
        "traces": None, "out": None, "tau": 100_000, "seed": 0,
        "tie-rule": "fractional", "exact": False,
        "step": None, "threshold": 0.80, "eps-acc": DEFAULT_EPS_ACC,
    })
    if not cfg["traces"] or not cfg["out"]:
        raise SchemaError("analyze requires --traces and --out")
    dataset = load_traces(cfg["traces"])
    curves = dataset_curves(dataset, _subsample_params(cfg), exact=cfg["exact"])
    mono = _mono_params(cfg)
    eps = cfg["eps-acc"]
    part = partition(curves, mono)
    report = overscaling_index(curves, eps, mono, part)
    theorem = theorem1_check(curves, eps, mono, part)
    table = type_gain_table(curves, eps, mono, part)
    qids = [t.question_id for t in dataset.traces]
    questions = [
        {
            "question_id": qid,
            "n_star": sample_optimal_n(c, eps).n_star,
            "max_acc": sample_optimal_n(c, eps).max_acc,
            "type": part.types[i].value,
        }
        for i, (qid, c) in enumerate(zip(qids, curves))
    ]
    payload = {
        "config": cfg,
        "n_max": dataset.n_max,
        "questions": questions,
        "partition": json.loads(partition_report_json(part, qids)),
        "overscaling": {
            "n_star_dataset": report.n_star_dataset,
            "n_system": report.n_system,
            "index": report.index,
            "per_type_n_star": list(report.per_type_n_star),
            "proportions": list(report.proportions),
        },
        "theorem1": {
            "kappa": theorem.inputs.kappa,
            "delta": (None if theorem.inputs.delta == float("inf")
                      else theorem.inputs.delta),
            "p4": theorem.inputs.p4,
            "n_star_d4": theorem.inputs.n_star_d4,
            "n4_budget": theorem.n4_budget,
            "phi": theorem.phi,
            "m_d": theorem.m_d,
            "holds": theorem.holds,
            "assumptions_met": theorem.assumptions_met,
            "assumption_flags": theorem.assumption_flags,
        },
        "table2": table,
        "figure2": {
            "index": report.index,
            "n_star_dataset": report.n_star_dataset,
            "n_system": report.n_system,
        },
    }
    out = Path(cfg["out"])
    _write(Path(str(out) + ".json"), canonical_json(payload) + "\n")
    _write(Path(str(out) + ".taxonomy.csv"), partition_report_csv(part, qids))
    lines = ["type,n_star,gain_1_to_n4star,gain_n4star_to_nmax"]
    for row in table:
        cells = [str(row["type"])]
        for key in ("n_star", "gain_1_to_n4star", "gain_n4star_to_nmax"):
            cells.append("" if row[key] is None else repr(row[key]))
        lines.append(",".join(cells))
    _write(Path(str(out) + ".table2.csv"), "\n".join(lines) + "\n")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {"spec": None, "out": None, "seed": 0})
    if not cfg["spec"] or not cfg["out"]:
        raise SchemaError("synth requires --spec and --out")
    try:
        raw = json.loads(Path(cfg["spec"]).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{cfg['spec']}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "counts" not in raw:
        raise SchemaError(f"{cfg['spec']}: spec must be an object with 'counts'")
    try:
        counts = {int(k): int(v) for k, v in raw["counts"].items()}
        spec = SynthSpec(
            counts=counts,
            n_max=int(raw.get("n_max", 128)),
            seed=int(cfg["seed"]),
            margin_range_t3=tuple(raw.get("margin_range_t3", (-0.30, -0.15))),
            margin_range_t4=tuple(raw.get("margin_range_t4", (0.15, 0.30))),
            gap_range_t5=tuple(raw.get("gap_range_t5", (0.0, 0.02))),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{cfg['spec']}: {exc}") from exc
    result = synth_dataset(spec)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_traces(result.dataset, out)
    sidecar = {qid: result.intended[qid] for qid in sorted(result.intended)}
    _write(Path(str(out) + ".types.json"), canonical_json(sidecar) + "\n")
    return 0


def cmd_policies(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {
        "traces": None, "out": None, "policy": None, "n": None,
        "window": 5, "max-budget": 40, "k-consecutive": 32,
        "conf-threshold": 0.95, "tau": 100_000, "seed": 0,
        "tie-rule": "first-seen", "exact": False, "eps-acc": DEFAULT_EPS_ACC,
        "bundle": None, "features": None,
    })
    if not cfg["traces"] or not cfg["out"]:
        raise SchemaError("policies requires --traces and --out")
    policies = cfg["policy"] or list(POLICY_NAMES)
    if isinstance(policies, str):
        policies = [policies]
    unknown = set(policies) - set(POLICY_NAMES)
    if unknown:
        raise SchemaError(f"unknown policies {sorted(unknown)}")
    dataset = load_traces(cfg["traces"])
    tie = _tie_rule(cfg["tie-rule"])
    eps = cfg["eps-acc"]
    # curves always use fractional credit; replay uses the requested tie rule
    curve_params = SubsampleParams(tau=cfg["tau"], seed=cfg["seed"],
                                   tie_rule=TieRule.FRACTIONAL)
    curves = dataset_curves(dataset, curve_params, exact=cfg["exact"])
    n_d = cfg["n"] if cfg["n"] is not None else overscaling_index(
        curves, eps).n_system
    if not 1 <= n_d <= dataset.n_max:
        raise SchemaError(f"budget {n_d} outside [1, {dataset.n_max}]")
    baseline = run_std_pt(dataset, n_d, tie)
    cap = min(cfg["max-budget"], dataset.n_max)
    runs = {}
    for name in policies:
        if name == "std-pt":
            runs[name] = baseline
        elif name == "oracle":
            runs[name] = run_oracle(dataset, curves, eps, tie)
        elif name == "ac":
            runs[name] = run_ac(dataset, cap, cfg["conf-threshold"], tie)
        elif name == "esc":
            runs[name] = run_esc(dataset, cfg["window"], cap, tie)
        elif name == "dsc":
            runs[name] = run_dsc(dataset, cfg["window"], cfg["k-consecutive"],
                                 cap, tie)
        else:
            if not cfg["bundle"] or not cfg["features"]:
                raise SchemaError("policy t2 requires --bundle and --features")
            bundle = load_bundle(cfg["bundle"])
            features = load_features(cfg["features"])
            by_qid = {f.question_id: f for f in features}
            missing = [t.question_id for t in dataset.traces
                       if t.question_id not in by_qid]
            if missing:
                raise SchemaError(f"features missing for questions {missing[:5]}")
            ordered = [by_qid[t.question_id] for t in dataset.traces]
            budgets = pipeline_estimate(ordered, bundle, dataset.n_max)
            runs[name] = run_t2(dataset, budgets, tie)
    out = Path(cfg["out"])
    summary = {"config": cfg, "n_d": n_d, "policies": {}}
    for name in policies:
        rep = cost_report(runs[name], baseline)
        _write(Path(f"{out}.{name}.csv"), outcomes_to_csv(runs[name]))
        summary["policies"][name] = {
            "c_mem": rep.c_mem_proxy,
            "c_time": rep.c_time_proxy,
            "accuracy": rep.accuracy,
            "mean_samples": rep.mean_samples,
            "mean_rounds": rep.mean_rounds,
        }
    _write(Path(f"{out}.summary.json"), canonical_json(summary) + "\n")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {
        "features": None, "out": None, "val-features": None,
        "val-fraction": 0.2, "seed": 0, "batch-size": 128, "epochs": 300,
        "learning-rate": 1e-3, "weight-decay": 1e-4, "hidden-ratio": 0.125,
    })
    if not cfg["features"] or not cfg["out"]:
        raise SchemaError("train requires --features and --out")
    features = load_features(cfg["features"])
    if cfg["val-features"]:
        train_set = features
        val_set = load_features(cfg["val-features"])
    else:
        frac = float(cfg["val-fraction"])
        if not 0.0 < frac < 1.0:
            raise SchemaError("val-fraction must be in (0, 1)")
        rng = np.random.Generator(np.random.Philox(key=cfg["seed"]))
        order = rng.permutation(len(features))
        n_val = max(1, int(frac * len(features)))
        val_idx = set(int(i) for i in order[:n_val])
        train_set = [f for i, f in enumerate(features) if i not in val_idx]
        val_set = [f for i, f in enumerate(features) if i in val_idx]
        if not train_set:
            raise SchemaError("validation split consumed all records")
    tc = TrainConfig(batch_size=cfg["batch-size"], epochs=cfg["epochs"],
                     learning_rate=cfg["learning-rate"],
                     weight_decay=cfg["weight-decay"], seed=cfg["seed"],
                     hidden_ratio=cfg["hidden-ratio"])
    bundle, stats = train_bundle(train_set, val_set, tc)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out)
    side = {
        "config": cfg,
        "sigma_hat_sq": stats["sigma_hat_sq"],
        "val_mae": stats["val_mae"],
        "final_train_loss": [losses[-1] for losses in stats["epoch_losses"]],
    }
    _write(Path(str(out) + ".stats.json"), canonical_json(side) + "\n")
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, {
        "features": None, "bundle": None, "out": None, "n-max": 128,
    })
    if not cfg["features"] or not cfg["bundle"] or not cfg["out"]:
        raise SchemaError("estimate requires --features, --bundle and --out")
    features = load_features(cfg["features"])
    bundle = load_bundle(cfg["bundle"])
    budgets = pipeline_estimate(features, bundle, cfg["n-max"])
    payload = {
        "config": cfg,
        "n_max": cfg["n-max"],
        "budgets": [
            {"question_id": f.question_id, "n": b}
            for f, b in zip(features, budgets)
        ],
    }
    out = Path(cfg["out"])
    _write(out, canonical_json(payload) + "\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overscale-lab",
        description="Budget-accuracy analysis for parallel-thinking inference",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, flags):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override it")
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        p.set_defaults(fn=fn)

    common_curves = {
        "--traces": {}, "--out": {},
        "--tau": {"type": int}, "--seed": {"type": int},
        "--tie-rule": {"choices": ["fractional", "first-seen"]},
        "--exact": {"action": "store_const", "const": True, "default": None},
    }
    add("curves", cmd_curves, common_curves)
    add("analyze", cmd_analyze, {
        **common_curves,
        "--step": {"type": int},
        "--threshold": {"type": float},
        "--eps-acc": {"type": float},
    })
    add("synth", cmd_synth, {
        "--spec": {}, "--out": {}, "--seed": {"type": int},
    })
    add("policies", cmd_policies, {
        **common_curves,
        "--policy": {"action": "append", "choices": list(POLICY_NAMES)},
        "--n": {"type": int},
        "--window": {"type": int},
        "--max-budget": {"type": int},
        "--k-consecutive": {"type": int},
        "--conf-threshold": {"type": float},
        "--eps-acc": {"type": float},
        "--bundle": {}, "--features": {},
    })
    add("train", cmd_train, {
        "--features": {}, "--out": {}, "--val-features": {},
        "--val-fraction": {"type": float}, "--seed": {"type": int},
        "--batch-size": {"type": int}, "--epochs": {"type": int},
        "--learning-rate": {"type": float}, "--weight-decay": {"type": float},
        "--hidden-ratio": {"type": float},
    })
    add("estimate", cmd_estimate, {
        "--features": {}, "--bundle": {}, "--out": {},
        "--n-max": {"type": int},
    })
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        sys.stderr.write(canonical_json(
            {"error": "schema", "message": str(exc)}) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(canonical_json(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
