import json

import pytest

from graphtax.cli import main
from graphtax.data.tu import load_dir
from graphtax.profiler import make_profile, write_profiles_csv

FAST = ["--epochs", "4", "--patience", "2", "--folds", "3", "--hidden-dim", "8"]


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "fo"
    assert main(["gen", "--kind", "feature-only", "--n-graphs", "30", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_gen_and_perturb(tmp_path, dataset_dir):
    out = tmp_path / "frag"
    assert main(["perturb", "--in", str(dataset_dir), "--kind", "fragmented", "--k", "1", "--out", str(out)]) == 0
    assert all(g.num_edges == 0 for g in load_dir(out).graphs)
    assert main(["perturb", "--in", str(dataset_dir), "--kind", "fragmented", "--out", str(out)]) == 1
    sbm = tmp_path / "sbm"
    assert main(["gen", "--kind", "sbm-cluster", "--n-graphs", "3", "--q", "0.1", "--out", str(sbm)]) == 0
    assert len(load_dir(sbm)) == 3


def test_run_prints_eval_result(capsys, dataset_dir):
    capsys.readouterr()
    code = main(["run", "--dataset", str(dataset_dir), "--model", "gcn", "--perturbation", "no-edges", *FAST])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["perturbation"] == "no-edges" and len(doc["scores"]) == 3
    assert {"mean", "std", "epochs", "seeds", "mode"} <= set(doc)


def test_taxonomy_command(tmp_path):
    profiles = [make_profile(n, "gcn", {"identity": (0.8, 0.0), "no-edges": (0.8 * r, 0.0),
                                          "no-node-features": (0.8 * (1.2 - r), 0.0)})
                for n, r in [("a", 0.5), ("b", 0.55), ("c", 1.0), ("d", 0.95), ("e", 0.2)]]
    write_profiles_csv(profiles, tmp_path / "p.csv")
    out = tmp_path / "tax"
    assert main(["taxonomy", "--profiles", str(tmp_path / "p.csv"), "--clusters", "4", "--out", str(out)]) == 0
    assert (out / "taxonomy.json").exists() and (out / "heatmap.svg").exists()
    assert json.loads((out / "taxonomy.json").read_text())["n_clusters"] == 4


def test_profile_and_all(tmp_path, dataset_dir, monkeypatch):
    csv_path = tmp_path / "p.csv"
    code = main(["profile", "--dataset", str(dataset_dir), "--suite", "identity,no-edges", *FAST,
                 "--out", str(csv_path)])
    assert code == 0 and len(csv_path.read_text().splitlines()) == 3

    cfg = {
        "datasets": [{"generator": "feature-only", "n_graphs": 40, "seed": 1},
                     {"generator": "structure-only", "n_graphs": 40, "seed": 2}],
        "models": [{"kind": "gcn", "hidden_dim": 8}],
        "suite": ["identity", "no-edges", "no-node-features"],
        "train": {"epochs": 10, "patience": 5, "folds": 3},
        "output": "out",
        "n_clusters": 2,
    }
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    monkeypatch.setenv("GRAPHTAX_WORKERS", "1")
    assert main(["all", "--config", str(tmp_path / "run.json")]) == 0
    first = (tmp_path / "out" / "profiles.csv").read_bytes()
    tax = (tmp_path / "out" / "gcn" / "taxonomy.json").read_bytes()
    assert (tmp_path / "out" / "runs.jsonl").exists()
    assert main(["all", "--config", str(tmp_path / "run.json")]) == 0
    assert (tmp_path / "out" / "profiles.csv").read_bytes() == first
    assert (tmp_path / "out" / "gcn" / "taxonomy.json").read_bytes() == tax
    assert main(["all", "--config", str(tmp_path / "run.json"), "--seed", "5", "--out", str(tmp_path / "o5")]) == 0
    assert (tmp_path / "o5" / "profiles.csv").read_bytes() != first


def test_exit_codes(capsys, tmp_path):
    assert main(["run", "--dataset", str(tmp_path), "--bogus"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1
    assert main(["run", "--dataset", str(tmp_path / "missing")]) == 1
    assert main(["taxonomy", "--profiles", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 1
    assert main(["--help"]) == 0


def test_runtime_failure_exit_code(tmp_path, dataset_dir, monkeypatch):
    from graphtax import harness
    from graphtax.errors import NumericError

    def explode(job):
        raise NumericError("loss became nan")

    monkeypatch.setattr(harness, "train_job", explode)
    assert main(["run", "--dataset", str(dataset_dir), *FAST]) == 2
