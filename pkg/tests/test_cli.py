import csv
import io
import json

import pytest

from qreuse.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main, parse_args, parse_grid
from qreuse.dataset import Mode
from qreuse.report import SWEEP_COLUMNS


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestParsing:
    def test_grid_range(self):
        g = parse_grid("0.1:0.9:0.1")
        assert len(g) == 9 and g[0] == 0.1 and g[-1] == 0.9

    def test_grid_list(self):
        assert parse_grid("0.2,0.5,0.7") == [0.2, 0.5, 0.7]

    @pytest.mark.parametrize("text", ["0.5,0.2", "0:1.5:0.5", "a,b", "0:1:0", ""])
    def test_grid_rejects(self, text):
        import argparse
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(text)

    def test_out_of_range_reliability(self, capsys):
        assert main(["run", "--reliability", "1.5"]) == EXIT_USAGE
        assert "--reliability" in capsys.readouterr().err

    def test_verify_defaults(self):
        spec = parse_args(["verify-bounds"])
        assert (spec.trials, spec.points, spec.seed) == (10_000, 100, 0)

    def test_command_defaults(self):
        run = parse_args(["run", "--reliability", "0.5"])
        sweep = parse_args(["sweep", "--reliability-grid", "0.5"])
        assert (run.trials, run.engine) == (1000, "statevector")
        assert (sweep.trials, sweep.engine) == (100_000, "markov")
        assert run.mode is Mode.REDUCED and run.xi0s == [0.5]

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_plot_needs_output(self):
        assert main(["sweep", "--reliability-grid", "0.5", "--plot"]) == EXIT_USAGE

    def test_xi0_and_dataset_exclusive(self, tmp_path):
        assert main(["run", "--reliability", "0.5", "--xi0", "0.3",
                     "--dataset", str(tmp_path / "d.csv")]) == EXIT_USAGE

    def test_bad_seed(self):
        assert main(["run", "--reliability", "0.5", "--seed", "-3"]) == EXIT_USAGE


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("# settings\ntrials = 77\nseed=5\nreliability = 0.4\n")
        spec = parse_args(["run", "--config", str(cfg), "--seed", "9"])
        assert (spec.trials, spec.seed, spec.reliabilities) == (77, 9, [0.4])

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("colour = blue\n")
        assert main(["run", "--reliability", "0.5", "--config", str(cfg)]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["run", "--reliability", "0.5", "--config", str(tmp_path / "nope")]) == EXIT_USAGE


class TestExecution:
    def test_sweep_csv_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["sweep", "--reliability-grid", "0.2:0.8:0.3", "--xi0", "0.3,0.7",
                "--trials", "20000", "--seed", "13"]
        assert main(args + ["--output", str(a)]) == EXIT_OK
        assert main(args + ["--output", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        got = rows(a.read_text())
        assert len(got) == 6
        assert list(got[0]) == list(SWEEP_COLUMNS)

    def test_sweep_row_statistics(self, capsys):
        assert main(["sweep", "--reliability-grid", "0.5", "--trials", "100000", "--seed", "3"]) == EXIT_OK
        (row,) = rows(capsys.readouterr().out)
        assert float(row["analytic_R"]) == 0.5
        assert abs(float(row["emp_R"]) - 0.5) <= 4 * float(row["se_R"])
        assert float(row["qram_queries_per_success"]) == 1.0

    def test_run_json(self, capsys):
        assert main(["run", "--reliability", "0.7", "--xi0", "0.4", "--trials", "200",
                     "--format", "json"]) == EXIT_OK
        (obj,) = json.loads(capsys.readouterr().out)
        assert obj["L"] == 0.7 and obj["xi0"] == 0.4 and obj["trials"] == 200

    def test_json_null_for_undefined(self, capsys):
        assert main(["run", "--reliability", "0.5", "--trials", "1", "--format", "json"]) == EXIT_OK
        (obj,) = json.loads(capsys.readouterr().out)
        assert obj["se_P0"] is None

    def test_plot(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--reliability-grid", "0.3,0.6", "--trials", "5000",
                     "--output", str(out), "--plot"]) == EXIT_OK
        svg = (tmp_path / "sweep.svg").read_text()
        assert svg.startswith("<svg") and svg.count("<circle") == 3

    def test_dataset_file_full_mode(self, tmp_path, capsys):
        path = tmp_path / "ds.csv"
        path.write_text("index,label,weight\n0,0,0.1\n1,1,0.2\n2,0,0.3\n3,1,0.4\n")
        assert main(["run", "--reliability", "0.6", "--dataset", str(path), "--mode", "full",
                     "--trials", "300"]) == EXIT_OK
        (row,) = rows(capsys.readouterr().out)
        assert float(row["xi0"]) == pytest.approx(0.4)

    def test_missing_dataset_is_io_error(self, tmp_path):
        assert main(["run", "--reliability", "0.5", "--dataset", str(tmp_path / "none.csv")]) == EXIT_IO

    def test_unwritable_output(self, tmp_path):
        target = tmp_path / "no" / "such" / "dir" / "out.csv"
        assert main(["run", "--reliability", "0.5", "--trials", "10", "--output", str(target)]) == EXIT_IO
        assert not target.exists()

    def test_verify_bounds(self, capsys):
        assert main(["verify-bounds", "--trials", "300", "--points", "4", "--seed", "2"]) == EXIT_OK
        (row,) = rows(capsys.readouterr().out)
        assert row["violations"] == "0" and row["evaluations"] == "1200"
