import csv
import json
import math

import pytest

from fedforest.cli import main, parse_epsilon_grid
from fedforest.config import ExperimentConfig, SyntheticSpec, save_config
from fedforest.protocol import run_experiment
from fedforest.reports import ExperimentResult, emit_reports, epsilon_label
from fedforest.tree import TreeParams

FEATURES = ["x0", "x1", "x2"]


@pytest.fixture(scope="module")
def tiny_results():
    cfg = ExperimentConfig(
        general_seed=3,
        num_clients=4,
        num_rounds=2,
        repeats=2,
        epsilons=(None, 1.0),
        synthetic=SyntheticSpec(n_rows=240, n_features=3),
        tree=TreeParams(max_depth=3),
    )
    results = []
    for eps in cfg.epsilons:
        for repeat in range(cfg.repeats):
            results.append(ExperimentResult(eps, repeat, run_experiment(cfg, eps, repeat)))
    return cfg, results


def read_rows(path):
    with path.open(newline="") as handle:
        return list(csv.reader(handle))


class TestEpsilonLabel:
    def test_labels(self):
        assert epsilon_label(None) == "none"
        assert epsilon_label(0.01) == "0.01"
        assert epsilon_label(1.0) == "1"
        assert epsilon_label(10.0) == "10"


class TestEmitReports:
    def test_rounds_csv_shape(self, tiny_results, tmp_path):
        cfg, results = tiny_results
        emit_reports(results, tmp_path, FEATURES)
        rows = read_rows(tmp_path / "rounds.csv")
        assert rows[0] == [
            "epsilon", "repeat", "round", "global_mse", "global_pearson",
            "accepted_trees", "epsilon_spent_total",
        ]
        assert len(rows) - 1 == len(results) * cfg.num_rounds
        assert rows[1][:3] == ["none", "0", "1"]

    def test_rounds_csv_values_match_reports(self, tiny_results, tmp_path):
        _, results = tiny_results
        emit_reports(results, tmp_path, FEATURES)
        rows = read_rows(tmp_path / "rounds.csv")[1:]
        flat = [(res, rep) for res in results for rep in res.reports]
        assert len(rows) == len(flat)
        for row, (res, report) in zip(rows, flat):
            assert row[0] == epsilon_label(res.epsilon)
            assert int(row[1]) == res.repeat
            assert int(row[2]) == report.round_num
            if report.global_mse_test is None:
                assert row[3] == "nan"
            else:
                assert float(row[3]) == pytest.approx(report.global_mse_test, rel=1e-14)
            assert int(row[5]) == len(report.accepted)

    def test_mdi_csv_shape(self, tiny_results, tmp_path):
        _, results = tiny_results
        emit_reports(results, tmp_path, FEATURES)
        rows = read_rows(tmp_path / "mdi.csv")
        assert rows[0] == ["epsilon", "repeat", "feature_name", "mdi"]
        assert len(rows) - 1 == len(results) * len(FEATURES)
        for start in range(1, len(rows), len(FEATURES)):
            block = rows[start:start + len(FEATURES)]
            assert [r[2] for r in block] == FEATURES
            total = sum(float(r[3]) for r in block)
            assert total == pytest.approx(1.0, abs=1e-9) or total == 0.0

    def test_summary_recomputes_from_rounds(self, tiny_results, tmp_path):
        _, results = tiny_results
        emit_reports(results, tmp_path, FEATURES)
        summary = json.loads((tmp_path / "summary.json").read_text())
        rows = read_rows(tmp_path / "rounds.csv")[1:]
        assert set(summary["epsilons"]) == {"none", "1"}
        for label, entry in summary["epsilons"].items():
            assert entry["repeats"] == 2
            for round_entry in entry["rounds"]:
                sample = [
                    float(r[3]) for r in rows
                    if r[0] == label and int(r[2]) == round_entry["round"] and r[3] != "nan"
                ]
                if not sample:
                    assert round_entry["mse_mean"] is None
                    continue
                mean = sum(sample) / len(sample)
                var = sum((v - mean) ** 2 for v in sample) / len(sample)
                assert round_entry["mse_mean"] == pytest.approx(mean, rel=1e-12)
                assert round_entry["mse_std"] == pytest.approx(math.sqrt(var), rel=1e-12)

    def test_per_run_report_files(self, tiny_results, tmp_path):
        _, results = tiny_results
        emit_reports(results, tmp_path, FEATURES)
        for res in results:
            doc = json.loads(
                (tmp_path / f"eps_{epsilon_label(res.epsilon)}"
                 / f"rep_{res.repeat:02d}" / "report.json").read_text()
            )
            assert doc["epsilon"] == res.epsilon
            assert len(doc["rounds"]) == len(res.reports)
            assert doc["rounds"][0]["round"] == 1

    def test_byte_identical_across_emits(self, tiny_results, tmp_path):
        _, results = tiny_results
        emit_reports(results, tmp_path / "a", FEATURES)
        emit_reports(results, tmp_path / "b", FEATURES)
        for name in ("rounds.csv", "mdi.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestParseEpsilonGrid:
    def test_mixed_grid(self):
        assert parse_epsilon_grid("none,0.01,0.1,1,10") == (None, 0.01, 0.1, 1.0, 10.0)

    def test_whitespace_tolerated(self):
        assert parse_epsilon_grid(" none , 1 ") == (None, 1.0)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_epsilon_grid("none,fast")
        with pytest.raises(ValueError):
            parse_epsilon_grid("")


class TestCli:
    def write_config(self, tmp_path, **overrides):
        base = dict(
            general_seed=3,
            num_clients=4,
            num_rounds=2,
            repeats=1,
            epsilons=(None,),
            synthetic=SyntheticSpec(n_rows=240, n_features=3),
            tree=TreeParams(max_depth=3),
        )
        base.update(overrides)
        path = tmp_path / "exp.toml"
        save_config(ExperimentConfig(**base), path)
        return path

    def test_run_writes_outputs(self, tmp_path, capsys):
        config = self.write_config(tmp_path)
        out = tmp_path / "reports"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        for name in ("rounds.csv", "mdi.csv", "summary.json"):
            assert (out / name).exists()
        assert "final_mse=" in capsys.readouterr().out

    def test_grid_times_repeats_run_directories(self, tmp_path):
        config = self.write_config(tmp_path, epsilons=(None, 1.0), repeats=2)
        out = tmp_path / "reports"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        run_files = sorted(out.glob("eps_*/rep_*/report.json"))
        assert len(run_files) == 4
        assert len(read_rows(out / "rounds.csv")) - 1 == 4 * 2

    def test_epsilon_override(self, tmp_path):
        config = self.write_config(tmp_path, epsilons=(None, 0.1, 1.0))
        out = tmp_path / "reports"
        assert main(["run", "--config", str(config), "--out", str(out),
                     "--epsilon", "none"]) == 0
        assert len(read_rows(out / "rounds.csv")) - 1 == 2

    def test_seed_override_changes_results(self, tmp_path):
        config = self.write_config(tmp_path)
        main(["run", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "99"])
        main(["run", "--config", str(config), "--out", str(tmp_path / "c")])
        a = (tmp_path / "a" / "rounds.csv").read_bytes()
        assert a != (tmp_path / "b" / "rounds.csv").read_bytes()
        assert a == (tmp_path / "c" / "rounds.csv").read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "exp.toml"
        path.write_text("num_clients = 0\n")
        assert main(["run", "--config", str(path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_config_exits_nonzero(self, tmp_path):
        code = main(["run", "--config", str(tmp_path / "absent.toml"),
                     "--out", str(tmp_path / "r")])
        assert code in (1, 2)
