"""
onbuy Command-Line Tests
========================

Tests for the ``onbuy`` subcommands, their outputs and exit codes.
"""

import json

import pandas as pd
import pytest

from onbuy.cli import build_parser, main, parse_params
from onbuy.harness import CSV_COLUMNS
from onbuy.stream import InvalidArgumentError


class TestParams:
    """Test suite for strategy parameter parsing."""

    def test_key_values(self):
        """Test value typing of key=value flags."""
        params = parse_params(["k=3", "alpha=0.5", "name=x", "flag=true", "p=none"])
        assert params == {"k": 3, "alpha": 0.5, "name": "x", "flag": True, "p": None}

    def test_file_then_flags(self, tmp_path):
        """Test that flags override the JSON file."""
        path = tmp_path / "params.json"
        path.write_text(json.dumps({"alpha": 0.6, "beta": 4.0}))
        params = parse_params(["alpha=0.7"], str(path))
        assert params == {"alpha": 0.7, "beta": 4.0}

    def test_malformed(self, tmp_path):
        """Test rejected inputs."""
        with pytest.raises(InvalidArgumentError, match="key=value"):
            parse_params(["alpha"])
        path = tmp_path / "params.json"
        path.write_text("[1, 2]")
        with pytest.raises(InvalidArgumentError, match="flat JSON object"):
            parse_params([], str(path))


class TestThresholds:
    """Test suite for the thresholds subcommand."""

    def test_stdout(self, capsys):
        """Test the k,N,rho table on stdout."""
        assert main(["thresholds", "--k", "2", "--N", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "k,N,rho"
        assert lines[1:3] == ["1,1,0.5", "1,2,0.375"]
        assert "2,2,1" in lines

    def test_file(self, tmp_path):
        """Test writing the table to a file."""
        out = tmp_path / "rho.csv"
        assert main(["thresholds", "--k", "3", "--N", "50", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["k", "N", "rho"]
        assert len(frame) == 50 + 49 + 48

    def test_density(self, capsys):
        """Test that the density factor scales the table."""
        assert main(["thresholds", "--k", "1", "--N", "1", "--density", "3"]) == 0
        assert capsys.readouterr().out.strip().splitlines()[1] == "1,1,0.75"

    def test_k_above_n(self, capsys):
        """Test that k > N is a usage error."""
        assert main(["thresholds", "--k", "3", "--N", "2"]) == 2
        assert "k <= N" in capsys.readouterr().err


class TestConstants:
    """Test suite for the constants subcommand."""

    def test_json(self, capsys):
        """Test the constants document."""
        assert main(["constants", "--k-max", "3", "--r-max", "5"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["c_k"]["1"] == 2.0
        assert data["c_k"]["3"] == pytest.approx(9.6231159, abs=1e-6)
        assert data["clique_exponents"]["4"] == pytest.approx(2.0 / 9.0)
        assert sorted(data["d_k"]) == ["1", "2", "3"]


class TestSimulate:
    """Test suite for the simulate subcommand."""

    def test_outputs(self, tmp_path):
        """Test the summary CSV, the derived report path and per-trial rows."""
        out = tmp_path / "sim.csv"
        per_trial = tmp_path / "trials.csv"
        code = main(
            [
                "simulate",
                "--structure",
                "k-purchase",
                "--n",
                "20",
                "40",
                "--trials",
                "5",
                "--param",
                "k=2",
                "--threads",
                "1",
                "--out",
                str(out),
                "--trials-out",
                str(per_trial),
            ]
        )
        assert code == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == CSV_COLUMNS
        assert frame["n"].tolist() == [20, 40]
        assert (frame["success_rate"] == 1.0).all()

        report = json.loads(out.with_suffix(".json").read_text())
        assert len(report["results"]) == 2
        entry = report["results"][0]
        assert entry["config"]["params"] == {"k": 2}
        assert entry["summary"]["valid_rate"] == 1.0
        assert {b["kind"] for b in entry["bounds"]} == {"lower", "upper"}

        trials = pd.read_csv(per_trial)
        assert len(trials) == 10
        assert trials["valid"].all()

    def test_stdout(self, capsys):
        """Test the summary CSV on stdout."""
        code = main(
            [
                "simulate",
                "--structure",
                "hamilton",
                "--n",
                "12",
                "--order",
                "aom:identity",
                "--trials",
                "2",
                "--threads",
                "1",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("hamilton,12,aom:identity,2,")

    def test_rom_only_structure(self, capsys):
        """Test that a random-order strategy refuses other adversaries."""
        code = main(
            ["simulate", "--structure", "path", "--n", "20", "--order", "aom:identity"]
        )
        assert code == 2
        assert "rom or pom only" in capsys.readouterr().err

    def test_unknown_structure(self):
        """Test that argparse rejects unregistered structures."""
        assert main(["simulate", "--structure", "forest", "--n", "10"]) == 2

    def test_bad_param(self, capsys):
        """Test that strategy parameter errors are usage errors."""
        code = main(
            [
                "simulate",
                "--structure",
                "spanning-tree",
                "--n",
                "20",
                "--trials",
                "1",
                "--param",
                "alpha=2",
            ]
        )
        assert code == 2
        assert "alpha" in capsys.readouterr().err


class TestReport:
    """Test suite for the report subcommand."""

    def test_merge(self, tmp_path):
        """Test merging simulate outputs into one report."""
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        for path, n in ((first, "16"), (second, "24")):
            assert (
                main(
                    [
                        "simulate",
                        "--structure",
                        "pm",
                        "--n",
                        n,
                        "--trials",
                        "2",
                        "--threads",
                        "1",
                        "--out",
                        str(path),
                    ]
                )
                == 0
            )
        out = tmp_path / "report.json"
        assert main(["report", "--in", str(first), str(second), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        (group,) = report["groups"]
        assert group["structure"] == "pm"
        assert [row["n"] for row in group["rows"]] == [16, 24]

    def test_not_a_summary(self, tmp_path, capsys):
        """Test that foreign CSVs are rejected."""
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        assert main(["report", "--in", str(path)]) == 2
        assert "not a simulate CSV" in capsys.readouterr().err


class TestLowerBound:
    """Test suite for the lowerbound subcommand."""

    def test_small_horizon(self):
        """Test that n < 10 is a usage error."""
        assert main(["lowerbound", "--n", "5"]) == 2

    @pytest.mark.slow
    def test_program(self, capsys):
        """Test the average-two document."""
        assert main(["lowerbound", "--n", "100", "--sequences"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["n"] == 100
        assert data["objective"] >= 2.499
        assert data["residual"] <= 1e-9
        assert len(data["q"]) == 101
        assert len(data["a"]) == 100


class TestSelftest:
    """Test suite for the selftest subcommand."""

    def test_injected_fault(self, capsys):
        """Test that a corrupted table fails the monotonicity check."""
        assert main(["selftest", "--inject-fault"]) == 1
        out = capsys.readouterr().out
        assert "FAIL rho monotonicity" in out
        assert "PASS rho diagonal" in out

    @pytest.mark.slow
    def test_clean_run(self, capsys):
        """Test that the full suite passes."""
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.strip().splitlines()[-1].endswith("checks passed")


class TestParser:
    """Test suite for the top-level parser."""

    def test_version(self, capsys):
        """Test that --version exits cleanly."""
        assert main(["--version"]) == 0
        assert capsys.readouterr().out.startswith("onbuy ")

    def test_subcommand_required(self):
        """Test that a subcommand is required."""
        assert main([]) == 2

    def test_fault_flag_hidden(self, capsys):
        """Test that the fault injection flag stays out of the help."""
        assert "selftest" in build_parser().format_help()
        assert main(["selftest", "--help"]) == 0
        assert "--inject-fault" not in capsys.readouterr().out


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
