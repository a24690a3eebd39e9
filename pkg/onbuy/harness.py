"""
Monte Carlo experiment runner.

Trials are independent: trial t of a configuration runs on
``RngHandle(seed, t)``, so results do not depend on how trials are spread
over workers. Aggregation always walks the trials in index order.
"""

from dataclasses import asdict, dataclass, field
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from scipy import special, stats

from .purchase_core import clique_exponents, compute_ck, compute_rho
from .stream import InvalidArgumentError, OrderModel, RngHandle
from .strategies.registry import (
    check_order,
    get_structure,
    open_session,
    run_structure,
    validate_outcome,
)
from .strategies.tree import evaluate_buytree_cost
from .strategies.triangle import wedge_plan
from .utils import resolve_threads

logger = logging.getLogger("onbuy.Harness")

CSV_COLUMNS = [
    "structure",
    "n",
    "order",
    "trials",
    "mean",
    "stderr",
    "median",
    "success_rate",
    "fallback_rate",
]
FLOAT_FORMAT = "%.17g"
Z95 = 1.96


@dataclass
class TrialConfig:
    """
    One experiment: a structure, a size, an order model and a trial count.

    Parameters:
        structure (str): Registered structure name (see ``STRUCTURES``)
        n (int): Vertex count, or item count N for ``k-purchase``
        order (Union[str, OrderModel]): ``rom``, ``pom`` or ``aom:<adversary>``
        trials (int): Number of trials (>= 1)
        seed (int): Base seed; trial t uses ``RngHandle(seed, t)``
        params (Dict[str, Any]): Strategy parameter overrides
        threads (Optional[int]): Worker cap; None reads ``ONBUY_THREADS``

    Raises:
        InvalidArgumentError: On a bad trial count, seed or structure/order pair
    """

    structure: str
    n: int
    order: Union[str, OrderModel] = "rom"
    trials: int = 100
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)
    threads: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.order, str):
            self.order = OrderModel.parse(self.order)
        if int(self.trials) < 1:
            logger.error(f"trials must be >= 1, got {self.trials}")
            raise InvalidArgumentError(f"trials must be >= 1, got {self.trials}")
        if int(self.n) < 1:
            logger.error(f"n must be >= 1, got {self.n}")
            raise InvalidArgumentError(f"n must be >= 1, got {self.n}")
        self.trials = int(self.trials)
        self.n = int(self.n)
        RngHandle(self.seed)
        check_order(self.structure, self.order)

    def describe(self) -> Dict[str, Any]:
        return {
            "structure": self.structure,
            "n": self.n,
            "order": str(self.order),
            "trials": self.trials,
            "seed": int(self.seed),
            "params": dict(sorted(self.params.items())),
        }


@dataclass
class TrialResult:
    trial: int
    cost: float
    success: bool
    valid: bool
    fallback: bool
    inspections: int
    purchases: int
    extras: Dict[str, float] = field(default_factory=dict)


@dataclass
class StatsSummary:
    """
    Aggregate of one configuration. ``stderr`` and ``ci95`` are None for a
    single trial; ``fallback_mean_cost`` is None when no trial fell back.
    """

    structure: str
    n: int
    order: str
    trials: int
    mean: float
    stderr: Optional[float]
    ci95: Optional[Tuple[float, float]]
    median: float
    success_rate: float
    fallback_rate: float
    valid_rate: float
    mean_inspections: float
    fallback_mean_cost: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["ci95"] = list(self.ci95) if self.ci95 is not None else None
        return data


@dataclass(frozen=True)
class BoundRecord:
    """A theoretical value to compare a measured mean against."""

    name: str
    value: float
    kind: str  # "lower", "upper" or "asymptotic"
    source: str

    def __post_init__(self):
        if self.kind not in ("lower", "upper", "asymptotic"):
            raise InvalidArgumentError(f"Unknown bound kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise InvalidArgumentError(f"Bound {self.name} is not finite")


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float
    points: int


def run_trial(config: TrialConfig, trial: int) -> TrialResult:
    """Run trial ``trial`` of ``config`` on its own random streams."""
    rng = RngHandle(int(config.seed), int(trial))
    session = open_session(config.structure, config.n, config.order, rng)
    outcome = run_structure(config.structure, config.n, session, config.params)
    valid = bool(outcome.success) and validate_outcome(
        config.structure, config.n, outcome, config.params
    )
    if outcome.success and not valid:
        logger.error(f"Trial {trial}: {config.structure} outcome failed validation")
    return TrialResult(
        trial=int(trial),
        cost=float(outcome.total_cost),
        success=bool(outcome.success),
        valid=valid,
        fallback=bool(outcome.fallback_used),
        inspections=int(outcome.inspections),
        purchases=len(outcome.purchased),
        extras={k: float(v) for k, v in outcome.extras.items()},
    )


def _guarded_trial(config: TrialConfig, trial: int) -> TrialResult:
    try:
        return run_trial(config, trial)
    except InvalidArgumentError:
        raise
    except Exception as e:
        logger.error(f"Trial {trial} of {config.structure} failed: {str(e)}")
        raise RuntimeError(
            f"Trial {trial} ({config.structure}, n={config.n}, {config.order}): {str(e)}"
        ) from e


def collect_trials(config: TrialConfig) -> List[TrialResult]:
    """Run every trial of ``config``; results come back in trial order."""
    n_jobs = resolve_threads(config.threads)
    logger.info(
        f"Running {config.trials} trials of {config.structure} "
        f"(n={config.n}, order={config.order}, seed={config.seed})"
    )
    if n_jobs == 1 or config.trials == 1:
        results = [_guarded_trial(config, t) for t in range(config.trials)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_guarded_trial)(config, t) for t in range(config.trials)
        )
    return sorted(results, key=lambda r: r.trial)


def summarize(config: TrialConfig, results: Sequence[TrialResult]) -> StatsSummary:
    """Aggregate trial results in trial-index order."""
    ordered = sorted(results, key=lambda r: r.trial)
    costs = np.array([r.cost for r in ordered])
    count = costs.size
    mean = math.fsum(costs) / count
    stderr = None
    ci95 = None
    if count > 1:
        var = math.fsum((costs - mean) ** 2) / (count - 1)
        stderr = math.sqrt(var / count)
        ci95 = (mean - Z95 * stderr, mean + Z95 * stderr)
    fallback = np.array([r.fallback for r in ordered])
    fallback_mean = (
        math.fsum(costs[fallback]) / int(fallback.sum()) if fallback.any() else None
    )
    summary = StatsSummary(
        structure=config.structure,
        n=config.n,
        order=str(config.order),
        trials=count,
        mean=mean,
        stderr=stderr,
        ci95=ci95,
        median=float(np.median(costs)),
        success_rate=float(np.mean([r.success for r in ordered])),
        fallback_rate=float(fallback.mean()),
        valid_rate=float(np.mean([r.valid for r in ordered])),
        mean_inspections=math.fsum(r.inspections for r in ordered) / count,
        fallback_mean_cost=fallback_mean,
    )
    logger.info(
        f"{config.structure} n={config.n} {config.order}: mean={mean:.6g}"
        + (f" +/- {stderr:.3g}" if stderr is not None else "")
        + f", fallback rate {summary.fallback_rate:.3f}"
    )
    return summary


def run_trials(config: TrialConfig) -> StatsSummary:
    """Run ``config`` and aggregate; a pure function of the configuration."""
    return summarize(config, collect_trials(config))


def trials_frame(results: Iterable[TrialResult]) -> pd.DataFrame:
    """Per-trial outcomes, one row per trial, extras spread into columns."""
    rows = []
    for r in results:
        row = {k: v for k, v in asdict(r).items() if k != "extras"}
        row.update({f"extra_{k}": v for k, v in sorted(r.extras.items())})
        rows.append(row)
    return pd.DataFrame(rows)


def summary_frame(summaries: Iterable[StatsSummary]) -> pd.DataFrame:
    rows = [{col: getattr(s, col) for col in CSV_COLUMNS} for s in summaries]
    return pd.DataFrame(rows, columns=CSV_COLUMNS).astype({"stderr": float})


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    """CSV with 17 significant digits; missing values are left empty."""
    path = Path(path)
    if str(path.parent) not in ("", "."):
        path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
    logger.info(f"Wrote {len(frame)} rows to {path}")


def theory_bounds(
    structure: str, n: int, params: Optional[Dict[str, Any]] = None
) -> List[BoundRecord]:
    """
    Theoretical values for ``structure`` at size n.

    Size-dependent shapes (e.g. ``n^(-2/3)``) carry no constant and are
    reported as "asymptotic"; constants are lower or upper bounds on the
    limit of the purchase price.

    Raises:
        InvalidArgumentError: If the structure is unknown
    """
    get_structure(structure)
    params = params or {}
    ck = compute_ck(3)
    zeta3 = float(special.zeta(3.0))

    if structure == "k-purchase":
        k = int(params.get("k", 1))
        c = compute_ck(k).c_k(k)
        return [
            BoundRecord(
                "optimal threshold rule",
                compute_rho(k, n).value(k, n),
                "lower",
                "exact optimum of the k-purchase dynamic program",
            ),
            BoundRecord(f"c_{k}/N", c / n, "upper", "k-purchase optimum is at most c_k/N"),
        ]
    if structure == "path":
        return [
            BoundRecord(
                "n^(-2/3)",
                n ** (-2.0 / 3.0),
                "asymptotic",
                "POM and ROM prices of a path are n^(-2/3 +/- o(1))",
            ),
            BoundRecord(
                "n^(-1/2)", n**-0.5, "asymptotic", "AOM price of a path is Omega(n^(-1/2))"
            ),
        ]
    if structure == "paths-len2":
        ell = params.get("ell")
        if ell is None:
            ell = max(1, min(n // 10, int(round(n ** (4.0 / 7.0)))))
        return [
            BoundRecord(
                f"6(ell/n)^(4/3), ell={int(ell)}",
                6.0 * (int(ell) / n) ** (4.0 / 3.0),
                "upper",
                "red and blue phases buy ell wedges at this cost",
            ),
        ]
    if structure == "triangle":
        ell, _ = wedge_plan(n)
        return [
            BoundRecord(
                "10/n^(4/7)",
                10.0 * n ** (-4.0 / 7.0),
                "upper",
                "triangle strategy cost in the random order model",
            ),
            BoundRecord(
                "6(ell/n)^(4/3) + 6/ell",
                6.0 * (ell / n) ** (4.0 / 3.0) + 6.0 / ell,
                "asymptotic",
                "wedge cost plus closing cost at the planned ell",
            ),
            BoundRecord(
                "n^(-1/2)", n**-0.5, "asymptotic", "AOM price of a triangle is Omega(n^(-1/2))"
            ),
        ]
    if structure == "clique":
        r = int(params.get("r", 4))
        d = clique_exponents(max(r, 3))[r]
        return [
            BoundRecord(
                f"n^(-d_{r})",
                n ** (-d),
                "asymptotic",
                f"ROM price of K_{r} is O(n^(-d_{r} + o(1))) with d_{r} = {d:.6g}",
            ),
        ]
    if structure == "spanning-tree":
        return [
            BoundRecord(
                "zeta(3)",
                zeta3,
                "lower",
                "limit of the minimum spanning tree length with full information",
            ),
            BoundRecord("1.38", 1.38, "lower", "POM price of a spanning tree"),
            BoundRecord("2 zeta(3)", 2.0 * zeta3, "upper", "ROM price of a spanning tree"),
            BoundRecord(
                "two-step strategy (0.69, 3.5)",
                evaluate_buytree_cost(0.69, 3.5),
                "upper",
                "analytic limit cost of the two-step strategy",
            ),
            BoundRecord(
                "average-two-purchase n*phi_n",
                2.73747,
                "lower",
                "optimum of the average-two-purchase relaxation; half of it bounds "
                "the tree price",
            ),
        ]
    if structure == "arborescence":
        return [
            BoundRecord(
                "2", 2.0, "asymptotic", "POM and ROM prices of an arborescence tend to 2"
            ),
        ]
    if structure in ("bipartite-pm", "pm"):
        graph = "K_n,n" if structure == "bipartite-pm" else "K_n"
        return [
            BoundRecord("2", 2.0, "lower", f"POM price of a perfect matching of {graph}"),
            BoundRecord(
                "4 c_3",
                4.0 * ck.c_k(3),
                "upper",
                f"AOM price of a perfect matching of {graph}",
            ),
        ]
    if structure == "hamilton":
        return [
            BoundRecord("c_2", ck.c_k(2), "lower", "POM price of a Hamilton cycle"),
            BoundRecord(
                "200", 200.0, "upper", "AOM price of a Hamilton cycle via a 10-out graph"
            ),
        ]
    # hamilton-directed
    return [
        BoundRecord("4", 4.0, "lower", "w.h.p. POM cost of a directed Hamilton cycle"),
        BoundRecord(
            "4 c_2",
            4.0 * ck.c_k(2),
            "upper",
            "w.h.p. AOM cost of a directed Hamilton cycle via a 2-in 2-out digraph",
        ),
    ]


def exponent_fit(points: Iterable[Tuple[float, float]]) -> ExponentFit:
    """
    Least-squares slope of log(mean) against log(n).

    Raises:
        InvalidArgumentError: With fewer than 3 points or a non-positive value
    """
    data = np.array(list(points), dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        logger.error("Exponent fit needs at least 3 (n, mean) points")
        raise InvalidArgumentError("exponent_fit needs at least 3 points")
    if np.any(data <= 0):
        logger.error(f"Exponent fit needs positive values, got {data.tolist()}")
        raise InvalidArgumentError("exponent_fit needs positive n and means")
    x, y = np.log(data[:, 0]), np.log(data[:, 1])
    if np.ptp(y) == 0.0:
        return ExponentFit(slope=0.0, stderr=0.0, intercept=float(y[0]), points=x.size)
    fit = stats.linregress(x, y)
    return ExponentFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        points=int(x.size),
    )


def build_report(
    summaries: pd.DataFrame, params: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Attach bounds (and, given three or more sizes, an exponent fit) to
    simulate summaries, grouped by structure and order.
    """
    report: Dict[str, Any] = {"groups": []}
    for (structure, order), group in summaries.groupby(["structure", "order"], sort=True):
        group = group.sort_values("n")
        entry: Dict[str, Any] = {
            "structure": structure,
            "order": order,
            "rows": [
                {
                    "n": int(row.n),
                    "trials": int(row.trials),
                    "mean": float(row.mean),
                    "bounds": [
                        asdict(b) for b in theory_bounds(structure, int(row.n), params)
                    ],
                }
                for row in group.itertuples(index=False)
            ],
        }
        if group["n"].nunique() >= 3 and bool((group["mean"] > 0).all()):
            entry["exponent_fit"] = asdict(exponent_fit(zip(group["n"], group["mean"])))
        report["groups"].append(entry)
    logger.info(f"Report covers {len(report['groups'])} structure/order groups")
    return report
