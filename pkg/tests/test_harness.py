import csv
import json

import numpy as np
import pytest

from mtlsense import harness, metrics
from mtlsense.cli import main
from mtlsense.harness import ExperimentConfig, TABLE3_GRID, build_architecture
from mtlsense.optimizer import TrainConfig


def tiny_cfg(tmp_path, **kw):
    base = dict(m=100, train=TrainConfig(epochs=1), out=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


def test_architecture_a50_parameter_count():
    spec = build_architecture("a50")
    from mtlsense.network import build
    assert spec.n_params() == sum(p.size for p in build(spec, 0).values())
    assert spec.n_params() == 16 * 50 + 50 + 2 * (50 * 50 + 50) + (50 * 2 + 2) == 6052
    assert len(spec.branches) == 1 and spec.alphas == (1.0,)


@pytest.mark.parametrize("sel,width", [("a10", 10), ("a30", 30), ("A80", 80)])
def test_architecture_a_widths(sel, width):
    assert build_architecture(sel).trunk == (width,) * 3


def test_architecture_b_and_c():
    b = build_architecture("b")
    assert len(b.branches) == 2
    assert {br.name: br.loss_weight for br in b.branches} == {"joint": 0.3, "o2": 5.0}
    c = build_architecture("c")
    assert len(c.branches) == 3 and c.alphas == (0.3, 5.0, 1.0)
    assert c.trunk == (50, 50, 50)
    assert all(br.hidden == (5, 5) for br in c.branches if br.name != "joint")
    assert build_architecture("c", (0.3, 5, 25)).alphas == (0.3, 5.0, 25.0)


def test_architecture_from_spec_file(tmp_path):
    path = tmp_path / "net.json"
    path.write_text(json.dumps(build_architecture("b").to_dict()))
    assert build_architecture(f"spec:{path}") == build_architecture("b")


def test_unknown_selector():
    with pytest.raises(ValueError):
        build_architecture("d")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.txt"
    path.write_text("# experiment\nm = 123\nseeds = 4,5\nepochs = 7\nalphas = 0.3,5,5\n"
                    "networks = a30,c\nf_ref = 0.8\nnoise_sigma = 0.001\n")
    cfg = harness.load_config(path)
    assert cfg.m == 123 and cfg.seeds == (4, 5) and cfg.train.epochs == 7
    assert cfg.alphas == (0.3, 5.0, 5.0) and cfg.networks == ("a30", "c")
    assert cfg.physics.f_ref == 0.8 and cfg.noise_sigma == 0.001
    resolved = tmp_path / "resolved.txt"
    resolved.write_text(cfg.to_keyvalue())
    again = harness.load_config(resolved)
    assert again.physics == cfg.physics and again.m == cfg.m and again.train.epochs == 7
    with pytest.raises(KeyError):
        cfg.updated({"nonsense": 1})


def test_presets():
    desk = ExperimentConfig.desk()
    assert (desk.m, desk.train.epochs) == (5000, 1500)
    paper = ExperimentConfig()
    assert (paper.m, paper.train.epochs, paper.train_fraction) == (25000, 4000, 0.8)


def test_smoke_run_and_consistency(tmp_path):
    cfg = tiny_cfg(tmp_path, networks=("a10", "c"), seeds=(0,))
    results, failures = harness.run_experiment(cfg)
    assert not failures and len(results) == 2
    out = tmp_path / "out"
    for label in ("a10", "c"):
        run = out / label / "seed_0"
        for name in ("predictions_train.csv", "predictions_dev.csv", "trace.csv", "checkpoint.json",
                     "dev/report.json", "dev/bins_o2.csv", "dev/bins_t.csv", "dev/kde_o2.csv",
                     "dev/kde_t.csv", "train/report.json"):
            assert (run / name).exists(), name
        doc = json.loads((run / "dev" / "report.json").read_text())
        assert doc["n"] == 20
        assert doc["mae_o2_pct_air"] == pytest.approx(metrics.mean_absolute_error(doc["ae_o2_pct_air"]), rel=1e-12)
        assert doc["mae_t_c"] == pytest.approx(metrics.mean_absolute_error(doc["ae_t_c"]), rel=1e-12)
        rebuilt = harness.report_from_predictions(run / "predictions_dev.csv")
        assert rebuilt.mae_o2 == pytest.approx(doc["mae_o2_pct_air"], rel=1e-12)
    rows = list(csv.DictReader(open(out / "compare.csv")))
    assert [r["network"] for r in rows] == ["a10", "c"]
    assert (out / "config.txt").exists()
    assert "a10" in harness.format_table(results)


def test_networks_share_dataset(tmp_path):
    cfg = tiny_cfg(tmp_path, networks=("a10", "b"), seeds=(3,))
    harness.run_experiment(cfg)
    a = harness.read_predictions(tmp_path / "out" / "a10" / "seed_3" / "predictions_dev.csv")
    b = harness.read_predictions(tmp_path / "out" / "b" / "seed_3" / "predictions_dev.csv")
    np.testing.assert_array_equal(a[:, :2], b[:, :2])


def test_runs_are_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        cfg = tiny_cfg(tmp_path, networks=("c",), seeds=(1,), out=str(tmp_path / f"run{i}"),
                       train=TrainConfig(epochs=3))
        harness.run_experiment(cfg)
        outs.append(tmp_path / f"run{i}" / "c" / "seed_1")
    for name in ("predictions_dev.csv", "predictions_train.csv", "dev/report.json", "trace.csv",
                 "checkpoint.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_sweep_single_row(tmp_path):
    cfg = tiny_cfg(tmp_path, seeds=(0,))
    table, results, failures = harness.weight_sweep(cfg, [(0.3, 5, 5)])
    assert len(table) == 1 and not failures
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "alpha1,alpha2,alpha3,mae_o2,mae_t"
    assert len(lines) == 2
    assert results[0].spec.alphas == (0.3, 5.0, 5.0)
    assert (tmp_path / "out" / "sweep_report.txt").exists()


def test_default_sweep_grid_has_six_rows():
    assert len(TABLE3_GRID) == 6
    assert TABLE3_GRID[0] == (0.3, 5.0, 5.0)


def test_sweep_rejects_two_branch_network(tmp_path):
    with pytest.raises(ValueError):
        harness.weight_sweep(tiny_cfg(tmp_path), selector="b")


def test_divergence_keeps_partial_results(tmp_path, monkeypatch):
    from mtlsense import optimizer
    real_train = optimizer.train

    def flaky(spec, params, *args, **kwargs):
        if len(spec.branches) == 3:
            raise optimizer.TrainingDiverged("non-finite loss at epoch 1")
        return real_train(spec, params, *args, **kwargs)

    monkeypatch.setattr(optimizer, "train", flaky)
    results, failures = harness.run_experiment(tiny_cfg(tmp_path, networks=("a10", "c")))
    assert [r.network for r in results] == ["a10"]
    assert failures and failures[0][0] == "c"
    assert "epoch 1" in (tmp_path / "out" / "failures.txt").read_text()


def test_cli_generate_train_report(tmp_path, capsys):
    out = tmp_path / "gen"
    assert main(["generate", "--m", "20", "--seed", "2", "--out", str(out)]) == 0
    data = (out / "dataset_seed_2.csv").read_text().splitlines()
    assert len(data) == 21 and data[0].startswith("r1,r2")
    assert (out / "physics.txt").exists()

    run = tmp_path / "train"
    assert main(["train", "--network", "a10", "--m", "50", "--epochs", "2", "--seed", "1",
                 "--out", str(run)]) == 0
    preds = run / "a10" / "seed_1" / "predictions_dev.csv"
    assert preds.exists()
    assert main(["report", str(preds), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.json").exists()
    assert "MAE_O2" in capsys.readouterr().out


def test_cli_compare_and_sweep(tmp_path, capsys):
    assert main(["compare", "--networks", "a10,b", "--m", "50", "--epochs", "1", "--seeds", "0,1",
                 "--out", str(tmp_path / "cmp")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "cmp" / "compare.csv")))
    assert len(rows) == 4
    assert main(["sweep", "--alphas", "0.3,5,5", "--alphas", "0.3,1,5", "--m", "50", "--epochs", "1",
                 "--out", str(tmp_path / "sw")]) == 0
    assert len((tmp_path / "sw" / "sweep.csv").read_text().splitlines()) == 3


def test_cli_config_and_alphas(tmp_path):
    cfgfile = tmp_path / "c.txt"
    cfgfile.write_text(f"m = 40\nepochs = 1\nout = {tmp_path / 'o'}\n")
    assert main(["train", "--config", str(cfgfile), "--network", "c", "--alphas", "0.3,5,15"]) == 0
    spec = json.loads((tmp_path / "o" / "c" / "seed_0" / "network.json").read_text())
    assert [b["loss_weight"] for b in spec["branches"]] == [0.3, 5.0, 15.0]


def test_cli_svg(tmp_path):
    pytest.importorskip("matplotlib")
    assert main(["train", "--network", "a10", "--m", "60", "--epochs", "1", "--svg",
                 "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "a10" / "seed_0" / "dev" / "box_o2.svg").exists()


def test_cli_rejects_unknown_network(tmp_path):
    with pytest.raises(ValueError):
        main(["train", "--network", "zz", "--m", "20", "--epochs", "1", "--out", str(tmp_path)])
