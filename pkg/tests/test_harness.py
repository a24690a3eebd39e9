"""
onbuy Harness Tests
===================

Tests for trial configuration, parallel trial collection, aggregation,
CSV output, theoretical bounds and exponent fits.
"""

import math

import numpy as np
import pandas as pd
import pytest

from onbuy.harness import (
    CSV_COLUMNS,
    BoundRecord,
    TrialConfig,
    TrialResult,
    build_report,
    collect_trials,
    exponent_fit,
    run_trial,
    run_trials,
    summarize,
    summary_frame,
    theory_bounds,
    trials_frame,
    write_csv,
)
from onbuy.purchase_core import compute_rho
from onbuy.stream import InvalidArgumentError
from onbuy.strategies import STRUCTURES


def result(trial, cost, fallback=False):
    """Hand-made trial result."""
    return TrialResult(
        trial=trial,
        cost=cost,
        success=True,
        valid=True,
        fallback=fallback,
        inspections=10,
        purchases=2,
    )


class TestTrialConfig:
    """Test suite for experiment configuration."""

    def test_order_parsed(self):
        """Test that string orders are parsed."""
        config = TrialConfig("hamilton", 20, "aom:identity", trials=3)
        assert config.order.variant == "aom"
        assert config.describe()["order"] == "aom:identity"

    def test_describe_sorts_params(self):
        """Test that descriptions are stable."""
        config = TrialConfig("clique", 40, params={"r": 4}, trials=1, seed=5)
        assert config.describe() == {
            "structure": "clique",
            "n": 40,
            "order": "rom",
            "trials": 1,
            "seed": 5,
            "params": {"r": 4},
        }

    @pytest.mark.parametrize(
        ("kwargs", "message"),
        [
            ({"trials": 0}, "trials must be"),
            ({"n": 0}, "n must be"),
            ({"seed": -3}, "seed"),
            ({"order": "aom:vertex-sweep"}, "rom or pom only"),
            ({"structure": "forest"}, "Unknown structure"),
        ],
    )
    def test_rejected(self, kwargs, message):
        """Test configuration checks."""
        args = {"structure": "path", "n": 30, **kwargs}
        with pytest.raises(InvalidArgumentError, match=message):
            TrialConfig(**args)


class TestTrials:
    """Test suite for running and collecting trials."""

    def test_run_trial(self):
        """Test one k-purchase trial."""
        config = TrialConfig("k-purchase", 30, trials=1, params={"k": 2})
        trial = run_trial(config, 0)
        assert trial.success
        assert trial.valid
        assert trial.purchases == 2
        assert not trial.fallback

    def test_trial_order(self):
        """Test that results come back sorted by trial index."""
        config = TrialConfig("k-purchase", 30, trials=6, params={"k": 2}, threads=1)
        results = collect_trials(config)
        assert [r.trial for r in results] == list(range(6))

    def test_threads_do_not_change_results(self):
        """Test that the worker count does not change the aggregate."""
        kwargs = {"structure": "k-purchase", "n": 40, "trials": 8, "params": {"k": 3}}
        serial = run_trials(TrialConfig(**kwargs, threads=1))
        parallel = run_trials(TrialConfig(**kwargs, threads=2))
        assert serial.mean == parallel.mean
        assert serial.stderr == parallel.stderr

    def test_seeds_change_results(self):
        """Test that different seeds give different trials."""
        first = run_trial(TrialConfig("k-purchase", 30, params={"k": 1}), 0)
        second = run_trial(TrialConfig("k-purchase", 30, params={"k": 1}, seed=1), 0)
        assert first.cost != second.cost

    def test_invalid_params_propagate(self):
        """Test that bad strategy parameters surface as argument errors."""
        config = TrialConfig("k-purchase", 10, trials=2, params={"k": 20}, threads=1)
        with pytest.raises(InvalidArgumentError, match="k must lie"):
            collect_trials(config)

    @pytest.mark.slow
    def test_k_purchase_mean(self):
        """Test the simulated mean against the exact optimum."""
        config = TrialConfig("k-purchase", 40, trials=400, params={"k": 2}, seed=3)
        summary = run_trials(config)
        exact = compute_rho(2, 40).value(2, 40)
        assert abs(summary.mean - exact) < 4 * summary.stderr + 1e-3


class TestSummarize:
    """Test suite for aggregation."""

    @pytest.fixture
    def config(self):
        """Configuration the hand-made results belong to."""
        return TrialConfig("k-purchase", 10, trials=4, params={"k": 1})

    def test_statistics(self, config):
        """Test mean, standard error, median and rates."""
        results = [result(3, 0.4, True), result(0, 0.1), result(2, 0.3), result(1, 0.2)]
        summary = summarize(config, results)
        assert summary.trials == 4
        assert summary.mean == pytest.approx(0.25)
        sd = np.std([0.1, 0.2, 0.3, 0.4], ddof=1)
        assert summary.stderr == pytest.approx(sd / 2.0)
        assert summary.ci95 == pytest.approx(
            (0.25 - 1.96 * sd / 2.0, 0.25 + 1.96 * sd / 2.0)
        )
        assert summary.median == pytest.approx(0.25)
        assert summary.success_rate == 1.0
        assert summary.fallback_rate == 0.25
        assert summary.fallback_mean_cost == pytest.approx(0.4)
        assert summary.mean_inspections == 10.0

    def test_single_trial(self, config):
        """Test that one trial has no standard error."""
        summary = summarize(config, [result(0, 0.5)])
        assert summary.stderr is None
        assert summary.ci95 is None
        assert summary.fallback_mean_cost is None
        assert summary.to_dict()["ci95"] is None

    def test_summary_csv(self, config, tmp_path):
        """Test the summary columns and the empty stderr cell."""
        summary = summarize(config, [result(0, 0.5)])
        path = tmp_path / "out" / "summary.csv"
        write_csv(summary_frame([summary]), path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "k-purchase,10,rom,1,0.5,,0.5,1,0"

    def test_full_precision(self, config, tmp_path):
        """Test that means are written with 17 significant digits."""
        summary = summarize(config, [result(0, 1.0 / 3.0), result(1, 1.0 / 3.0)])
        path = tmp_path / "summary.csv"
        write_csv(summary_frame([summary]), path)
        frame = pd.read_csv(path)
        assert frame["mean"].iloc[0] == 1.0 / 3.0

    def test_trials_frame(self):
        """Test that extras are spread into columns."""
        row = result(0, 0.5)
        row.extras = {"giant": 40.0}
        frame = trials_frame([row])
        assert frame["extra_giant"].tolist() == [40.0]
        assert "extras" not in frame.columns


class TestBounds:
    """Test suite for theoretical bound records."""

    @pytest.mark.parametrize("structure", sorted(STRUCTURES))
    def test_every_structure_has_bounds(self, structure):
        """Test that every structure reports finite, well-formed bounds."""
        bounds = theory_bounds(structure, 200)
        assert bounds
        for bound in bounds:
            assert bound.kind in ("lower", "upper", "asymptotic")
            assert math.isfinite(bound.value)
            assert bound.source

    def test_k_purchase_bounds(self):
        """Test that the exact optimum sits below c_k/N."""
        lower, upper = theory_bounds("k-purchase", 100, {"k": 2})
        assert lower.value == pytest.approx(compute_rho(2, 100).value(2, 100))
        assert upper.value == pytest.approx((3.0 + math.sqrt(5.0)) / 100)
        assert lower.value < upper.value

    def test_spanning_tree_bounds(self):
        """Test the spanning-tree constants."""
        values = {b.name: b.value for b in theory_bounds("spanning-tree", 1000)}
        assert values["zeta(3)"] == pytest.approx(1.2020569, abs=1e-7)
        assert values["2 zeta(3)"] == pytest.approx(2.4041138, abs=1e-7)
        assert values["two-step strategy (0.69, 3.5)"] < 2.31

    def test_bound_record_checks(self):
        """Test that records need a known kind and a finite value."""
        with pytest.raises(InvalidArgumentError, match="Unknown bound kind"):
            BoundRecord("x", 1.0, "middle", "nowhere")
        with pytest.raises(InvalidArgumentError, match="not finite"):
            BoundRecord("x", math.inf, "upper", "nowhere")


class TestExponentFit:
    """Test suite for log-log slope fits."""

    def test_power_law(self):
        """Test recovery of an exact exponent."""
        points = [(n, 3.0 * n ** (-2.0 / 3.0)) for n in (100, 1000, 10000, 100000)]
        fit = exponent_fit(points)
        assert fit.slope == pytest.approx(-2.0 / 3.0)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.stderr == pytest.approx(0.0, abs=1e-9)
        assert fit.points == 4

    def test_constant(self):
        """Test that constant means have slope zero."""
        fit = exponent_fit([(10, 2.0), (100, 2.0), (1000, 2.0)])
        assert fit.slope == 0.0

    def test_needs_three_points(self):
        """Test the point count check."""
        with pytest.raises(InvalidArgumentError, match="at least 3"):
            exponent_fit([(10, 1.0), (100, 0.5)])

    def test_needs_positive_values(self):
        """Test the positivity check."""
        with pytest.raises(InvalidArgumentError, match="positive"):
            exponent_fit([(10, 1.0), (100, 0.0), (1000, 0.5)])


class TestReport:
    """Test suite for report assembly."""

    def test_groups_and_fit(self):
        """Test grouping by structure and order with a slope fit."""
        frame = pd.DataFrame(
            {
                "structure": ["path"] * 3 + ["hamilton"],
                "n": [100, 1000, 10000, 50],
                "order": ["rom"] * 3 + ["aom:identity"],
                "trials": [10] * 4,
                "mean": [n ** (-2.0 / 3.0) for n in (100, 1000, 10000)] + [3.0],
                "stderr": [0.01] * 4,
                "median": [0.1] * 4,
                "success_rate": [1.0] * 4,
                "fallback_rate": [0.0] * 4,
            }
        )
        report = build_report(frame)
        groups = {(g["structure"], g["order"]): g for g in report["groups"]}
        assert set(groups) == {("path", "rom"), ("hamilton", "aom:identity")}
        path = groups[("path", "rom")]
        assert [row["n"] for row in path["rows"]] == [100, 1000, 10000]
        assert path["exponent_fit"]["slope"] == pytest.approx(-2.0 / 3.0)
        assert "exponent_fit" not in groups[("hamilton", "aom:identity")]
        assert groups[("hamilton", "aom:identity")]["rows"][0]["bounds"]


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
