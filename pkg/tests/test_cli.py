"""
Command-line interface and report rendering.

Exit code contract: 0 on success, 1 when a requested check fails, 2 on
usage errors. The report path renders matplotlib figures to files next
to a delimited summary.
"""
import csv
import json
from pathlib import Path

import pytest

from schurtomo.cli import main
from schurtomo.report import load_results, render_report
from schurtomo.stream import distribution_csv


def run_jsonl(tmp_path, trials=30):
    out = tmp_path / "results.jsonl"
    code = main(["run", "--d", "2", "--r", "1", "--n", "4", "--eta", "0.5",
                 "--set-size", "64", "--trials", str(trials), "--seed", "5",
                 "--out", str(out)])
    assert code == 0
    return out


class TestExitCodes:
    """0 success, 1 failed check, 2 usage error."""

    def test_verify_suite_passes(self, capsys):
        assert main(["verify", "partitions"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "all checks passed" in out

    def test_povm_check_pass_and_fail(self, tmp_path, capsys):
        set_path = tmp_path / "set.uset"
        assert main(["povm-build", "--d", "2", "--set-size", "300",
                     "--seed", "0", "--out", str(set_path)]) == 0
        assert main(["povm-check", "--set-file", str(set_path), "--n", "2",
                     "--r", "1", "--eta", "0.5"]) == 0
        assert "overall: pass" in capsys.readouterr().out
        # A tiny set cannot be eta-good at tight eta for four copies.
        tiny_path = tmp_path / "tiny.uset"
        assert main(["povm-build", "--d", "2", "--set-size", "8",
                     "--seed", "3", "--out", str(tiny_path)]) == 0
        assert main(["povm-check", "--set-file", str(tiny_path), "--n", "4",
                     "--r", "2", "--eta", "0.1"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_missing_set_file_is_usage_error(self, capsys):
        assert main(["povm-check", "--n", "2"]) == 2
        assert capsys.readouterr().err

    def test_unreadable_set_file_is_usage_error(self, tmp_path):
        absent = tmp_path / "absent.uset"
        assert main(["povm-check", "--set-file", str(absent), "--n", "2"]) == 2

    def test_bad_flag_value_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--d", "two"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_config_value_is_usage_error(self, capsys):
        assert main(["run", "--eta", "1.5", "--trials", "1"]) == 2
        assert "eta" in capsys.readouterr().err


class TestRunCommand:
    """End-to-end run subcommand."""

    def test_writes_results_and_manifest(self, tmp_path, capsys):
        out = run_jsonl(tmp_path, trials=10)
        assert out.exists()
        assert Path(str(out) + ".manifest").exists()
        assert "wrote" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        assert len(lines) == 11
        assert "summary" in json.loads(lines[-1])

    def test_config_file_with_cli_override(self, tmp_path):
        config = tmp_path / "config.tsv"
        config.write_text("d=2\nr=1\nn=3\neta=0.5\nset_size=32\ntrials=4\n"
                          "master_seed=7\n")
        out = tmp_path / "from_file.jsonl"
        assert main(["run", "--config", str(config), "--trials", "6",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 7  # override wins: 6 trials plus summary

    def test_dist_command_matches_library(self, tmp_path):
        out = tmp_path / "dist.csv"
        assert main(["dist", "--d", "2", "--r", "2", "--n", "4",
                     "--seed", "3", "--out", str(out)]) == 0
        from schurtomo.harness import ExperimentConfig, experiment_inputs
        from schurtomo.stream import label_distribution
        rho, _, _, _ = experiment_inputs(
            ExperimentConfig(d=2, r=2, n=4, master_seed=3, mode="dist"))
        assert out.read_text() == distribution_csv(label_distribution(rho, 4))


class TestReport:
    """Figure and summary rendering from JSONL results."""

    def test_render_writes_all_outputs(self, tmp_path):
        jsonl = run_jsonl(tmp_path)
        out_dir = tmp_path / "report"
        written = render_report(jsonl, out_dir)
        names = {p.name for p in written}
        assert names == {"accuracy_hist.png", "pac_curve.png", "labels.png",
                         "registers.png", "summary.csv"}
        for p in written:
            assert p.exists()
            assert p.stat().st_size > 0

    def test_summary_csv_parses(self, tmp_path):
        jsonl = run_jsonl(tmp_path)
        render_report(jsonl, tmp_path / "report")
        with open(tmp_path / "report" / "summary.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["statistic", "value"]
        stats = {row[0]: row[1] for row in rows[1:]}
        assert float(stats["trials"]) == 30
        assert 0.0 <= float(stats["fail_rate"]) <= 1.0

    def test_load_results_split(self, tmp_path):
        jsonl = run_jsonl(tmp_path, trials=12)
        trials, summary = load_results(jsonl)
        assert len(trials) == 12
        assert summary is not None
        assert summary["trials"] == 12

    def test_report_cli(self, tmp_path, capsys):
        jsonl = run_jsonl(tmp_path, trials=8)
        out_dir = tmp_path / "cli_report"
        capsys.readouterr()  # drain the run command's output
        assert main(["report", str(jsonl), "--out", str(out_dir)]) == 0
        assert (out_dir / "summary.csv").exists()
        assert capsys.readouterr().out.count("wrote") == 5

    def test_report_missing_file_is_usage_error(self, tmp_path):
        assert main(["report", str(tmp_path / "nope.jsonl")]) == 2
