import csv

import numpy as np
import pytest

from advreg import cli, gantrain
from advreg.cli import build_parser, main, read_manifest, read_metrics
from advreg.nets import load_checkpoint

TINY = [
    "model=model1", "n=200", "batch_size=20", "total_updates=40", "eval_every=10", "checkpoint_every=10",
    "n_eval=300", "g_widths=8,4", "d_widths=8", "conditions=0.2,0.8", "seed=1",
]


@pytest.fixture
def root(tmp_path, monkeypatch):
    runs = tmp_path / "runs"
    monkeypatch.setenv(cli.RUNS_ENV, str(runs))
    return runs


@pytest.fixture
def trained(root):
    assert main(["train", "--run-id", "base", *TINY]) == 0
    return root / "base"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParsing:
    def test_unknown_key(self, root):
        assert main(["train", "colour=blue"]) == 1

    def test_bad_value(self, root):
        assert main(["train", "batch_size=lots"]) == 1

    def test_invalid_combination(self, root):
        assert main(["train", "n=100", "batch_size=500"]) == 1

    def test_missing_command(self):
        assert main([]) == 1

    def test_missing_config_file(self, root, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope")]) == 1

    def test_later_value_wins(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# base\nmodel=model2\nseed=4\n")
        values = cli.load_config(cfg, ["seed=5"])
        assert values == {"model": "model2", "seed": "5"}

    def test_aliases(self):
        assert cli.parse_pairs(["n=50", "lambda=0.5"]) == {"n_data": "50", "lambda_gp": "0.5"}

    def test_ensemble_defaults(self):
        args = build_parser().parse_args(["ensemble", "r"])
        assert (args.first, args.last, args.step, args.n_per) == (310_000, 510_000, 10_000, 5000)

    def test_rsgan_defaults_recorded(self):
        cfg = cli.make_config(cli.parse_pairs(["gan=rsgan"]))
        assert cfg.d_steps == 1 and cfg.batch_size == 500


class TestGenData:
    def test_writes_dataset_and_manifest(self, root):
        assert main(["gen-data", "model=model3", "n=50", "seed=2"]) == 0
        run = root / "data-model3-n50-s2"
        assert len(rows(run / "dataset.csv")) == 51
        m = read_manifest(run)
        assert (m["command"], m["model"], m["n_data"], m["seed"]) == ("gen-data", "model3", "50", "2")

    def test_collision_suffix(self, root):
        for _ in range(3):
            assert main(["gen-data", "n=5"]) == 0
        names = sorted(p.name for p in root.iterdir())
        assert names == ["data-model1-n5-s0", "data-model1-n5-s0-1", "data-model1-n5-s0-2"]

    @pytest.mark.parametrize("arg", ["n=0", "model=model9", "batch_size=3"])
    def test_rejects(self, root, arg):
        assert main(["gen-data", arg]) == 1


class TestTrain:
    def test_layout(self, trained):
        assert {p.name for p in trained.iterdir()} >= {"manifest", "dataset.csv", "checkpoints", "metrics.csv",
                                                       "timing"}
        assert sorted(p.name for p in (trained / "checkpoints").iterdir()) == [
            f"G_{u:08d}.ckpt" for u in (10, 20, 30, 40)
        ]
        m = read_manifest(trained)
        assert m["status"] == "completed" and m["command"] == "train"
        assert m["config_digest"] == cli.manifest_config(trained).digest()
        records = read_metrics(trained / "metrics.csv")
        assert len(records) == 8 and {r.condition for r in records} == {0.2, 0.8}

    def test_deviations_and_alias_recorded(self, root):
        assert main(["train", "--run-id", "gp", *TINY, "gan=wgan_gp", "lambda=0.5"]) == 0
        m = read_manifest(root / "gp")
        assert m["lambda_gp"] == "0.5"
        assert "lambda_gp" in m["deviations"].split(",")

    def test_rerun_from_manifest_is_identical(self, trained, root):
        assert main(["train", "--config", str(trained / "manifest"), "--run-id", "again"]) == 0
        again = root / "again"
        assert (again / "metrics.csv").read_text().replace("again", "base") == (trained / "metrics.csv").read_text()
        assert (again / "dataset.csv").read_bytes() == (trained / "dataset.csv").read_bytes()
        a = load_checkpoint(trained / "checkpoints" / "G_00000040.ckpt").network
        b = load_checkpoint(again / "checkpoints" / "G_00000040.ckpt").network
        for k in a.params:
            assert a.params[k].tobytes() == b.params[k].tobytes()

    def test_existing_dataset(self, root):
        assert main(["gen-data", "--run-id", "d", "n=200", "seed=1"]) == 0
        assert main(["train", "--run-id", "t", "--dataset", str(root / "d" / "dataset.csv"), *TINY]) == 0
        assert (root / "t" / "dataset.csv").read_bytes() == (root / "d" / "dataset.csv").read_bytes()

    def test_dataset_size_mismatch(self, root):
        assert main(["gen-data", "--run-id", "d", "n=100"]) == 0
        assert main(["train", "--dataset", str(root / "d" / "dataset.csv"), *TINY]) == 1

    def test_diverged_exit_code(self, root, monkeypatch):
        monkeypatch.setattr(gantrain._Trainer, "g_step", lambda self: float("inf"))
        assert main(["train", "--run-id", "bad", *TINY]) == 3
        m = read_manifest(root / "bad")
        assert m["status"] == "diverged" and "update:1" in m["failed"]


class TestSweep:
    def test_children_and_comparison(self, root):
        assert main(["sweep", "--axis", "noise_dim", "--values", "1,3", "--run-id", "sw", *TINY]) == 0
        assert (root / "sw-noise_dim-1" / "metrics.csv").is_file()
        assert (root / "sw-noise_dim-3" / "metrics.csv").is_file()
        table = rows(root / "sw" / "comparison.csv")
        assert table[0][:5] == ["sweep_id", "axis", "value", "seed", "status"]
        assert {r[2] for r in table[1:]} == {"1", "3"}
        seeds = {r[3] for r in table[1:]}
        assert len(seeds) == 2  # each child gets its own derived seed
        m = read_manifest(root / "sw")
        assert m["children"] == "sw-noise_dim-1,sw-noise_dim-3" and "failed" not in m

    def test_failed_child_does_not_stop_sweep(self, root, monkeypatch):
        real = cli.train

        def fragile(cfg, *a, **kw):
            if cfg.noise_dim == 2:
                raise RuntimeError("worker crashed")
            return real(cfg, *a, **kw)

        monkeypatch.setattr(cli, "train", fragile)
        assert main(["sweep", "--axis", "noise_dim", "--values", "1,2,3", "--run-id", "sw", *TINY]) == 0
        table = rows(root / "sw" / "comparison.csv")
        status = {r[2]: r[4] for r in table[1:]}
        assert status == {"1": "completed", "2": "failed", "3": "completed"}
        assert "worker crashed" in read_manifest(root / "sw")["failed"]

    def test_bad_value_rejected_up_front(self, root):
        assert main(["sweep", "--axis", "batch_size", "--values", "20,5000", *TINY]) == 1

    def test_bad_axis(self, root):
        assert main(["sweep", "--axis", "lr", "--values", "1", *TINY]) == 1


class TestEnsemble:
    def test_pooled_and_single(self, trained):
        assert main(["ensemble", "base", "--first", "10", "--last", "40", "--step", "10", "--n-per", "100"]) == 0
        table = rows(trained / "ensemble-10-40-10.csv")
        assert len(table) == 1 + 2 * 2
        pooled = [r for r in table[1:] if r[1] == "pooled"]
        single = [r for r in table[1:] if r[1] == "single"]
        assert all(r[5] == "4" and r[7] == "400" for r in pooled)
        assert all(r[5] == "1" and r[7] == "400" for r in single)

    def test_condition_subset(self, trained):
        assert main(["ensemble", str(trained), "--first", "20", "--last", "40", "--step", "20",
                     "--condition", "0.5", "--n-per", "50"]) == 0
        table = rows(trained / "ensemble-20-40-20.csv")
        assert {r[6] for r in table[1:]} == {"0.5"}

    def test_missing_checkpoint(self, trained):
        assert main(["ensemble", "base", "--first", "10", "--last", "50", "--step", "10"]) == 2

    def test_single_checkpoint_rejected(self, trained):
        assert main(["ensemble", "base", "--first", "10", "--last", "10", "--step", "10"]) == 2

    def test_unknown_run(self, root):
        assert main(["ensemble", "nothing"]) == 1


class TestReport:
    def test_outputs_and_determinism(self, trained):
        assert main(["report", "base"]) == 0
        reports = trained / "reports"
        names = sorted(p.name for p in reports.iterdir())
        assert "blocks.csv" in names and "moments.svg" in names
        assert {"distance_0.2.svg", "distance_0.8.svg", "density_0.2.svg", "density_0.8.svg"} <= set(names)
        first = {p.name: p.read_bytes() for p in reports.iterdir()}
        assert main(["report", "base"]) == 0
        assert {p.name: p.read_bytes() for p in reports.iterdir()} == first

    def test_blocks_table(self, trained):
        assert main(["report", "base"]) == 0
        table = rows(trained / "reports" / "blocks.csv")
        assert tuple(table[0]) == cli.BLOCK_HEADER
        # 4 records per condition form one partial block for each distance
        assert len(table) == 1 + 2 * 4
        assert all(r[10] == "1" and r[4] == "4" for r in table[1:])
        js = [float(r[5]) for r in table[1:] if r[2] == "js"]
        records = read_metrics(trained / "metrics.csv")
        expected = [np.mean([r.js for r in records if r.condition == c]) for c in (0.2, 0.8)]
        np.testing.assert_allclose(js, expected, rtol=1e-15)

    def test_sweep_report(self, root):
        assert main(["sweep", "--axis", "gan", "--values", "sgan,rsgan", "--run-id", "sw", *TINY]) == 0
        assert main(["report", "sw"]) == 0
        assert (root / "sw" / "reports" / "final_blocks.csv").is_file()
        assert (root / "sw" / "reports" / "final_js.svg").is_file()
