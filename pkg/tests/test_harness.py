import csv
import json
import math

import numpy as np
import pytest

import smoothpa.harness as harness
from smoothpa.cli import main as cli_main
from smoothpa.errors import ConfigError
from smoothpa.harness import derive_seed, fit_scaling, parse_config, run


def base_config(**overrides):
    cfg = {
        "universe": 8,
        "family": {"kind": "threshold_grid", "size": 8},
        "adversary": {"context": "subset_uniform", "rule": "static", "label": "greedy"},
        "learner": {"uniform": {}},
        "T": 16,
        "sigma": 0.5,
        "repetitions": 1,
        "base_seed": 1234,
    }
    cfg.update(overrides)
    return cfg


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_derive_seed_stable_and_spread():
    key = {"learner": {"uniform": {}}, "T": 16, "sigma": 0.5}
    a = derive_seed(7, key, 0)
    assert a == derive_seed(7, key, 0)
    assert a != derive_seed(7, key, 1)
    assert a != derive_seed(8, key, 0)
    assert 0 <= a < 2 ** 63


def test_parse_config_field_paths():
    with pytest.raises(ConfigError, match="universe"):
        parse_config({"family": {}})
    with pytest.raises(ConfigError, match="sigma"):
        parse_config(base_config(sigma=1.5))
    with pytest.raises(ConfigError, match="repetitions"):
        parse_config(base_config(repetitions=0))
    with pytest.raises(ConfigError, match="T"):
        parse_config(base_config(T=0))
    with pytest.raises(ConfigError, match="learner"):
        parse_config(base_config(learner="uniform"))


def test_run_uniform_vs_greedy_regret_is_t_ln2(tmp_path):
    summary = run(base_config(), output_dir=tmp_path)
    cell = summary.cells[0]
    # greedy ties to y=0 against q=1/2, so the comparator fits labels exactly
    assert cell["mean_final_regret"] == pytest.approx(16 * math.log(2), abs=1e-9)
    rows = read_rows(tmp_path / "records_cell000.csv")
    assert len(rows) == 16
    assert float(rows[-1]["cum_comparator_loss"]) == 0.0
    # cumulative columns are prefix sums of the per-round column
    acc = 0.0
    for row in rows:
        acc += float(row["learner_loss"])
        assert float(row["cum_learner_loss"]) == pytest.approx(acc, abs=1e-9)
        assert float(row["cum_regret"]) == pytest.approx(
            acc - float(row["cum_comparator_loss"]), abs=1e-9)


def test_run_byte_identical_for_same_config(tmp_path):
    cfg = base_config(
        learner=None,
        sweep={"learner": [{"vc_mixture": {}}, {"ftpl": {"n": 6, "alpha": 0.05}}],
               "T": [12, 24], "sigma": [0.25]},
        adversary={"context": "subset_uniform", "rule": "adaptive", "label": "greedy"},
        repetitions=2,
    )
    cfg.pop("learner")
    cfg.pop("T")
    cfg.pop("sigma")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(cfg, output_dir=out1)
    run(cfg, output_dir=out2)
    names = sorted(p.name for p in out1.iterdir())
    assert names == sorted(p.name for p in out2.iterdir())
    assert any(n.startswith("records_cell") for n in names)
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_cell_count_is_axis_product(tmp_path):
    cfg = base_config(sweep={"T": [8, 16, 32], "sigma": [0.5, 1.0]})
    summary = run(cfg, output_dir=tmp_path)
    assert len(summary.cells) == 6
    assert len(list(tmp_path.glob("records_cell*.csv"))) == 6


def test_run_respects_thread_env(tmp_path, monkeypatch):
    cfg = base_config(sweep={"T": [8, 16]}, repetitions=2)
    seq = run(cfg, output_dir=tmp_path / "seq")
    monkeypatch.setenv("SMOOTHPA_THREADS", "4")
    par = run(cfg, output_dir=tmp_path / "par")
    assert seq.to_json() == par.to_json()
    for name in ("records_cell000.csv", "records_cell001.csv"):
        assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()
    monkeypatch.setenv("SMOOTHPA_THREADS", "zebra")
    with pytest.raises(ConfigError, match="SMOOTHPA_THREADS"):
        run(cfg, output_dir=tmp_path / "bad")


class ExplodingLearner:
    name = "exploding"

    def __init__(self, fail_at):
        self.fail_at = fail_at
        self.seen = 0

    def reset(self, universe, rng):
        pass

    def predict(self, x):
        if self.seen >= self.fail_at:
            raise RuntimeError("boom")
        return 0.5

    def update(self, x, y):
        self.seen += 1


def test_interrupted_run_leaves_parseable_partial_csv(tmp_path, monkeypatch):
    calls = {"n": 0}

    def factory(spec, family, universe, t, sigma):
        calls["n"] += 1
        # last trajectory of the second cell dies mid-game
        return ExplodingLearner(fail_at=7 if calls["n"] == 4 else 10 ** 9)

    monkeypatch.setattr(harness, "learner_from_spec", factory)
    cfg = base_config(T=10, repetitions=2, sweep={"sigma": [0.5, 1.0]})
    with pytest.raises(RuntimeError, match="boom"):
        run(cfg, output_dir=tmp_path)
    rows = read_rows(tmp_path / "records_cell000.csv")
    assert len(rows) == 20  # first cell completed both repetitions
    partial = read_rows(tmp_path / "records_cell001.csv")
    assert len(partial) == 10  # only the surviving repetition of the failed cell
    assert all(len(r) == 7 and r["learner_loss"] for r in partial)


def synthetic_summary(values_by_t, sigma=0.1, reps=3, jitter=0.0, seed=0):
    rng = np.random.default_rng(seed)
    cells = []
    for i, (t, v) in enumerate(values_by_t.items()):
        vals = [v + jitter * rng.standard_normal() for _ in range(reps)]
        cells.append({"cell": i, "learner": {"synthetic": {}}, "T": t, "sigma": sigma,
                      "final_regrets": vals,
                      "mean_final_regret": float(np.mean(vals)),
                      "stddev_final_regret": float(np.std(vals))})
    return {"cells": cells}


def test_fit_scaling_recovers_ln_t_slope():
    ts = [2 ** e for e in range(4, 11)]
    summary = synthetic_summary({t: 7.0 * math.log(t) for t in ts})
    fits = fit_scaling(summary)
    g = fits["groups"][0]
    assert g["lnT_slope"] == pytest.approx(7.0, abs=0.01)
    assert g["lnT_intercept"] == pytest.approx(0.0, abs=0.05)


def test_fit_scaling_recovers_power_law():
    ts = [2 ** e for e in range(4, 11)]
    summary = synthetic_summary({t: t ** 0.8 for t in ts})
    fits = fit_scaling(summary)
    g = fits["groups"][0]
    assert g["loglog_slope"] == pytest.approx(0.8, abs=0.01)
    lo, hi = g["loglog_ci"]
    assert lo <= 0.8 <= hi or abs(lo - 0.8) < 0.01


def test_fit_scaling_needs_four_points():
    summary = synthetic_summary({8: 1.0, 16: 2.0, 32: 3.0})
    with pytest.raises(ConfigError, match="4 sweep points"):
        fit_scaling(summary)


# ---------------------------------------------------------------- CLI

def test_cli_run_and_fit(tmp_path, capsys):
    cfg_path = tmp_path / "exp.json"
    cfg = base_config(sweep={"T": [8, 16, 32, 64]}, repetitions=2)
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(cfg_path), "--output-dir", str(out)]) == 0
    assert (out / "summary.json").exists()
    capsys.readouterr()

    assert cli_main(["fit", "--summary", str(out / "summary.json")]) == 0
    fits = json.loads(capsys.readouterr().out)
    assert fits["fits"]["groups"][0]["lnT_slope"] >= 0.0


def test_cli_chi2_report(capsys):
    assert cli_main(["chi2", "--sigma", "0.5", "--n", "4", "--universe", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)["chi2"]
    assert rep["closed"] <= rep["bound"] + 1e-12
    assert rep["brute"] == pytest.approx(rep["closed"], abs=1e-6 + rep["discarded"])


def test_cli_cover_and_nml(tmp_path, capsys):
    fam_path = tmp_path / "family.json"
    fam_path.write_text(json.dumps({"kind": "threshold_grid", "size": 100}))
    assert cli_main(["cover", "--family", str(fam_path), "--eps", "0.1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["size"] <= 11

    cls_path = tmp_path / "class.json"
    cls_path.write_text(json.dumps({
        "family": {"kind": "threshold_grid", "size": 4},
        "hypotheses": [[3, 0.0, 0.0], [3, 1.0, 1.0]],
    }))
    ctx_path = tmp_path / "contexts.json"
    ctx_path.write_text(json.dumps([0, 1]))
    assert cli_main(["nml", "--class", str(cls_path), "--contexts", str(ctx_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["nml"] == pytest.approx(math.log(2.0), abs=1e-12)


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert cli_main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(base_config(sigma=2.0)))
    assert cli_main(["run", "--config", str(bad)]) == 2
    capsys.readouterr()


def test_cli_numerical_assertion_exit_code(tmp_path, capsys):
    cfg = base_config()
    cfg["adversary"] = {"context": "subset_uniform", "rule": "static",
                        "set": [0], "label": "greedy"}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(path), "--output-dir", str(out)]) == 3
    capsys.readouterr()
