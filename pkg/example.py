"""
onbuy Usage Examples
====================

This file demonstrates various ways to use onbuy for online purchasing
experiments on random graphs.
Run different examples by uncommenting the desired section.
"""

import os
import tempfile

from onbuy import (
    STRUCTURES,
    OrderModel,
    RngHandle,
    TrialConfig,
    compute_ck,
    compute_rho,
    evaluate_buytree_cost,
    exponent_fit,
    open_session,
    run_structure,
    run_trials,
    setup_logger,
    theory_bounds,
)
from onbuy.harness import summary_frame, write_csv


def example_1_thresholds() -> None:
    """Exact thresholds of the k-purchase rule"""
    print("=" * 60)
    print("EXAMPLE 1: k-purchase thresholds")
    print("=" * 60)

    table = compute_rho(3, 100)
    print(f"- rho(1,1) = {table.value(1, 1):.6f}")
    print(f"- rho(2,100) = {table.value(2, 100):.6f}")
    print(f"- 100 * rho(1,100) = {100 * table.value(1, 100):.6f}")

    # Accept the j-th remaining purchase among m items when cost <= threshold
    print(f"- Threshold for j=1, m=50: {table.threshold(1, 50):.6f}")

    ck = compute_ck(4)
    for k in range(1, 5):
        print(f"- c_{k} = {ck.c_k(k):.6f}")


def example_2_single_run() -> None:
    """One spanning-tree purchase under the random order"""
    print("=" * 60)
    print("EXAMPLE 2: Single strategy run")
    print("=" * 60)

    n = 500
    session = open_session("spanning-tree", n, OrderModel("rom"), RngHandle(7))
    outcome = run_structure("spanning-tree", n, session)

    print(f"- Edges bought: {len(outcome.purchased)}")
    print(f"- Total cost: {outcome.total_cost:.4f}")
    print(f"- Fallback used: {outcome.fallback_used}")
    print(f"- Analytic limit: {evaluate_buytree_cost(0.69, 3.5):.4f}")


def example_3_monte_carlo() -> None:
    """Monte Carlo trials with a summary CSV and a slope fit"""
    print("=" * 60)
    print("EXAMPLE 3: Monte Carlo harness")
    print("=" * 60)

    summaries = []
    for n in (100, 200, 400):
        config = TrialConfig("path", n, trials=50, seed=1)
        summaries.append(run_trials(config))

    fit = exponent_fit([(s.n, s.mean) for s in summaries])
    print(f"- Mean cost by n: {[round(s.mean, 4) for s in summaries]}")
    print(f"- Fitted exponent: {fit.slope:.3f} +/- {fit.stderr:.3f}")
    for bound in theory_bounds("path", 400):
        print(f"- {bound.kind} bound {bound.name}: {bound.value:.4f}")

    out_path = os.path.join(tempfile.mkdtemp(), "path.csv")
    write_csv(summary_frame(summaries), out_path)
    print(f"- Summary written to {out_path}")


def example_4_adversarial_order() -> None:
    """Hamilton cycle purchase when an adversary orders the edges"""
    print("=" * 60)
    print("EXAMPLE 4: Adversarial order with logging")
    print("=" * 60)

    # Enable detailed logging
    setup_logger(level="INFO")

    config = TrialConfig("hamilton", 60, order="aom:identity", trials=10)
    summary = run_trials(config)
    print(f"- n * mean cost: {60 * summary.mean:.3f}")
    print(f"- Success rate: {summary.success_rate:.2f}")


if __name__ == "__main__":
    print("onbuy Examples")
    print(f"Registered structures: {', '.join(sorted(STRUCTURES))}")
    print("Choose an example to run:")
    print("1. k-purchase thresholds")
    print("2. Single strategy run")
    print("3. Monte Carlo harness")
    print("4. Adversarial order with logging")

    # Uncomment the example you want to run:
    example_1_thresholds()
    # example_2_single_run()
    # example_3_monte_carlo()
    # example_4_adversarial_order()

    print("\nTo run tests: python -m pytest tests/ -v")
    print("All examples completed!")
