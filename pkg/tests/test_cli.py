from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

SPEC = {"counts": {"1": 2, "3": 3, "4": 3}, "n_max": 16}


def run_cli(args, cwd, env_extra=None):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run(
        [sys.executable, "-m", "overscale_lab.cli", *args],
        cwd=cwd, env=env, capture_output=True, text=True,
    )


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps(SPEC))
    proc = run_cli(["synth", "--spec", "spec.json", "--out", "traces.json",
                    "--seed", "5"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    return tmp_path


def test_synth_writes_traces_and_sidecar(workdir):
    traces = json.loads((workdir / "traces.json").read_text())
    assert traces["n_max"] == 16 and len(traces["traces"]) == 8
    sidecar = json.loads((workdir / "traces.json.types.json").read_text())
    assert sorted(sidecar.values()) == [1, 1, 3, 3, 3, 4, 4, 4]


def test_curves_outputs_and_determinism(workdir):
    args = ["curves", "--traces", "traces.json", "--out", "curves",
            "--tau", "500", "--seed", "3"]
    assert run_cli(args, workdir).returncode == 0
    first_csv = (workdir / "curves.csv").read_bytes()
    first_json = (workdir / "curves.json").read_bytes()
    assert run_cli(args, workdir, {"OVERSCALE_LAB_THREADS": "3"}).returncode == 0
    assert (workdir / "curves.csv").read_bytes() == first_csv
    assert (workdir / "curves.json").read_bytes() == first_json
    rows = first_csv.decode().strip().split("\n")
    assert rows[0] == "question_id,N,accuracy"
    assert len(rows) == 1 + 8 * 16


def test_curves_exact_flag_sets_method(workdir):
    args = ["curves", "--traces", "traces.json", "--out", "exact", "--exact"]
    assert run_cli(args, workdir).returncode == 0
    payload = json.loads((workdir / "exact.json").read_text())
    assert payload["config"]["exact"] is True
    assert payload["method"] == "EXACT"


def test_analyze_matches_independent_index_recomputation(workdir):
    # recompute the overscaling index from the curves CSV with plain csv code
    import csv

    assert run_cli(["curves", "--traces", "traces.json", "--out", "xcurves",
                    "--exact"], workdir).returncode == 0
    assert run_cli(["analyze", "--traces", "traces.json", "--out", "xrep",
                    "--exact"], workdir).returncode == 0
    by_q = {}
    with open(workdir / "xcurves.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            by_q.setdefault(row["question_id"], []).append(
                (int(row["N"]), float(row["accuracy"])))
    eps = 1e-9
    optima = []
    for rows in by_q.values():
        rows.sort()
        best = max(acc for _, acc in rows)
        optima.append(next(n for n, acc in rows if acc >= best - eps))
    n_values = sorted({n for rows in by_q.values() for n, _ in rows})
    means = [sum(dict(rows)[n] for rows in by_q.values()) / len(by_q)
             for n in n_values]
    best_mean = max(means)
    n_system = next(n for n, mean in zip(n_values, means)
                    if mean >= best_mean - eps)
    index = (sum(optima) / len(optima)) / n_system
    report = json.loads((workdir / "xrep.json").read_text())
    assert report["overscaling"]["index"] == pytest.approx(index, abs=1e-12)


def test_analyze_report(workdir):
    args = ["analyze", "--traces", "traces.json", "--out", "analysis",
            "--exact"]
    assert run_cli(args, workdir).returncode == 0
    report = json.loads((workdir / "analysis.json").read_text())
    assert abs(sum(report["partition"]["p"]) - 1.0) < 1e-12
    assert report["overscaling"]["index"] == pytest.approx(
        report["overscaling"]["n_star_dataset"] / report["overscaling"]["n_system"])
    assert report["theorem1"]["holds"] in (True, False)
    assert len(report["questions"]) == 8
    taxonomy = (workdir / "analysis.taxonomy.csv").read_text().strip().split("\n")
    assert len(taxonomy) == 9
    assert (workdir / "analysis.table2.csv").exists()


def test_policies_summary(workdir):
    args = ["policies", "--traces", "traces.json", "--out", "pol", "--exact",
            "--policy", "std-pt", "--policy", "oracle", "--policy", "esc",
            "--window", "4", "--max-budget", "16"]
    assert run_cli(args, workdir).returncode == 0
    summary = json.loads((workdir / "pol.summary.json").read_text())
    assert set(summary["policies"]) == {"std-pt", "oracle", "esc"}
    std = summary["policies"]["std-pt"]
    assert std["c_mem"] == 1.0 and std["c_time"] == 1.0
    assert (workdir / "pol.oracle.csv").exists()


def test_train_estimate_t2_round_trip(workdir, tmp_path):
    # feature file: labels planted on layer 0, second layer is noise
    import numpy as np

    from overscale_lab.trace_model import LayerFeatureSet, save_features

    traces = json.loads((workdir / "traces.json").read_text())
    qids = [t["question_id"] for t in traces["traces"]]
    rng = np.random.Generator(np.random.Philox(key=1))
    feats = []
    for i, qid in enumerate(qids * 8):
        label = float(np.clip(rng.uniform(), 1 / 16, 1.0))
        good = tuple(float(v) for v in
                     np.concatenate([[label * 4 - 2], rng.normal(size=3) * 0.1]))
        noisy = tuple(float(v) for v in rng.normal(size=4))
        feats.append(LayerFeatureSet(question_id=f"r{i}-{qid}",
                                     layer_vectors=(good, noisy), label=label))
    save_features(feats, workdir / "features.json")
    args = ["train", "--features", "features.json", "--out", "bundle.json",
            "--epochs", "30", "--seed", "2", "--hidden-ratio", "1.0",
            "--batch-size", "16"]
    assert run_cli(args, workdir).returncode == 0
    first = (workdir / "bundle.json").read_bytes()
    assert run_cli(args, workdir).returncode == 0
    assert (workdir / "bundle.json").read_bytes() == first
    stats = json.loads((workdir / "bundle.json.stats.json").read_text())
    assert len(stats["sigma_hat_sq"]) == 2

    # per-question estimates for the traces themselves
    renamed = [LayerFeatureSet(question_id=qid, layer_vectors=f.layer_vectors,
                               label=f.label)
               for qid, f in zip(qids, feats[: len(qids)])]
    save_features(renamed, workdir / "qfeatures.json")
    args = ["estimate", "--features", "qfeatures.json", "--bundle",
            "bundle.json", "--out", "budgets.json", "--n-max", "16"]
    assert run_cli(args, workdir).returncode == 0
    budgets = json.loads((workdir / "budgets.json").read_text())
    assert len(budgets["budgets"]) == len(qids)
    assert all(1 <= b["n"] <= 16 for b in budgets["budgets"])

    args = ["policies", "--traces", "traces.json", "--out", "t2run",
            "--policy", "t2", "--bundle", "bundle.json",
            "--features", "qfeatures.json", "--exact"]
    proc = run_cli(args, workdir)
    assert proc.returncode == 0, proc.stderr
    summary = json.loads((workdir / "t2run.summary.json").read_text())
    assert "t2" in summary["policies"]


def test_schema_error_exit_code_two(workdir):
    (workdir / "broken.json").write_text('{"format_version": 1, "n_max": 2}')
    proc = run_cli(["curves", "--traces", "broken.json", "--out", "x"], workdir)
    assert proc.returncode == 2
    err = json.loads(proc.stderr)
    assert err["error"] == "schema"


def test_missing_file_exit_code_one(workdir):
    proc = run_cli(["curves", "--traces", "nope.json", "--out", "x"], workdir)
    assert proc.returncode == 1
    err = json.loads(proc.stderr)
    assert "nope.json" in err["message"]


def test_config_file_and_flag_precedence(workdir):
    (workdir / "cfg.json").write_text(json.dumps({"tau": 300, "seed": 9}))
    args = ["curves", "--traces", "traces.json", "--out", "viacfg",
            "--config", "cfg.json", "--seed", "11"]
    assert run_cli(args, workdir).returncode == 0
    payload = json.loads((workdir / "viacfg.json").read_text())
    assert payload["config"]["tau"] == 300      # from file
    assert payload["config"]["seed"] == 11      # flag wins


def test_unknown_config_key_rejected(workdir):
    (workdir / "cfg.json").write_text(json.dumps({"bogus": 1}))
    proc = run_cli(["curves", "--traces", "traces.json", "--out", "x",
                    "--config", "cfg.json"], workdir)
    assert proc.returncode == 2
