"""
k-purchase optimal stopping: threshold tables, constants and executors.

``rho[k][m]`` is the optimal expected cost of buying k of m items whose
costs are revealed one at a time. With j purchases still needed and m items
left (the current one included) the optimal rule accepts iff
``cost < rho[j][m-1] - rho[j-1][m-1]`` and accepts unconditionally once
``m == j``.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from .stream import (
    InspectionSession,
    InvalidArgumentError,
    PurchaserOrderSession,
)

logger = logging.getLogger("onbuy.PurchaseCore")

ATOL = 1e-12


@dataclass
class StrategyOutcome:
    """
    Result of one purchasing run.

    ``purchased`` lists (item, cost) in purchase order; ``structure`` holds
    the edges of the delivered structure when it is a strict subset of the
    purchases (e.g. the tour inside a k-out graph).
    """

    purchased: List[Tuple[int, float]] = field(default_factory=list)
    total_cost: float = 0.0
    success: bool = False
    fallback_used: bool = False
    inspections: int = 0
    structure: List[Tuple[int, int]] = field(default_factory=list)
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def items(self) -> List[int]:
        return [item for item, _ in self.purchased]


class RhoTable:
    """
    Threshold table ``rho[k][m]`` for 0 <= k <= k_max, k <= m <= n_max.

    Entries with m < k are NaN. ``density`` is 1 for uniform costs and D for
    the latent law with survival ``(1-x)^(1/D)``.

    Example Usage:
        table = compute_rho(3, 100)
        table.value(1, 2)          # 0.375
        table.threshold(1, 10)     # accept the 1st of 10 remaining below this
    """

    def __init__(self, rho: np.ndarray, density: float = 1.0):
        self.rho = rho
        self.k_max = rho.shape[0] - 1
        self.n_max = rho.shape[1] - 1
        self.density = float(density)

    def value(self, k: int, m: int) -> float:
        if not (0 <= k <= self.k_max and k <= m <= self.n_max):
            raise InvalidArgumentError(f"rho[{k}][{m}] outside table")
        return float(self.rho[k, m])

    def threshold(self, j: int, m: int) -> float:
        """Acceptance threshold with j still needed and m remaining (inf = forced)."""
        return float(self.thresholds(np.array([j]), np.array([m]))[0])

    def thresholds(self, j, m) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        j, m = np.broadcast_arrays(j, m)
        out = np.full(j.shape, np.inf)
        live = (m > j) & (j > 0)
        if np.any(m[live] - 1 > self.n_max) or np.any(j > self.k_max):
            raise InvalidArgumentError("Threshold request exceeds table bounds")
        jl, ml = j[live], m[live] - 1
        out[live] = self.rho[jl, ml] - self.rho[jl - 1, ml]
        out[j <= 0] = -np.inf
        return out

    def to_frame(self) -> pd.DataFrame:
        k_idx, m_idx = np.nonzero(~np.isnan(self.rho[1:]))
        k_idx = k_idx + 1
        order = np.lexsort((m_idx, k_idx))
        return pd.DataFrame(
            {
                "k": k_idx[order],
                "N": m_idx[order],
                "rho": self.rho[k_idx[order], m_idx[order]],
            }
        )

    def to_csv(self, path_or_buf=None) -> Optional[str]:
        """Write ``k,N,rho`` rows with 17 significant digits."""
        return self.to_frame().to_csv(path_or_buf, index=False, float_format="%.17g")


def _uniform_step(prev: np.ndarray, m: int) -> np.ndarray:
    col = np.full_like(prev, np.nan)
    col[0] = 0.0
    top = min(m - 1, prev.size - 1)
    if top >= 1:
        delta = prev[1 : top + 1] - prev[:top]
        col[1 : top + 1] = prev[1 : top + 1] - 0.5 * delta * delta
    if m < prev.size:
        col[m] = 0.5 * m
    return col


def _density_step(prev: np.ndarray, m: int, density: float) -> np.ndarray:
    a = 1.0 / density
    col = np.full_like(prev, np.nan)
    col[0] = 0.0
    top = min(m - 1, prev.size - 1)
    if top >= 1:
        delta = np.clip(prev[1 : top + 1] - prev[:top], 0.0, 1.0)
        gain = (1.0 - np.power(1.0 - delta, 1.0 + a)) / (1.0 + a)
        col[1 : top + 1] = prev[:top] + gain
    if m < prev.size:
        col[m] = m * density / (density + 1.0)
    return col


def rho_columns(
    k_max: int, n_max: int, density: float = 1.0
) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Yield ``(m, column)`` for m = 0..n_max with O(k_max) rolling memory.

    ``column[k]`` is ``rho[k][m]`` (NaN when k > m).
    """
    col = np.full(k_max + 1, np.nan)
    col[0] = 0.0
    yield 0, col.copy()
    for m in range(1, n_max + 1):
        if density == 1.0:
            col = _uniform_step(col, m)
        else:
            col = _density_step(col, m, density)
        yield m, col


def _validate_table_args(k_max: int, n_max: int) -> None:
    if k_max < 1 or n_max < 1:
        logger.error(f"Table needs k_max, N_max >= 1, got {k_max}, {n_max}")
        raise InvalidArgumentError("k_max and N_max must be >= 1")
    if k_max > n_max:
        logger.error(f"k_max={k_max} exceeds N_max={n_max}")
        raise InvalidArgumentError(f"k_max ({k_max}) must not exceed N_max ({n_max})")


def compute_rho(k_max: int, n_max: int) -> RhoTable:
    """Exact k-purchase table for uniform [0, 1] costs."""
    _validate_table_args(k_max, n_max)
    rho = np.full((k_max + 1, n_max + 1), np.nan)
    for m, col in rho_columns(k_max, n_max):
        rho[:, m] = col
    logger.debug(f"Computed rho table k_max={k_max}, N_max={n_max}")
    return RhoTable(rho)


def compute_rho_density(k_max: int, n_max: int, density: float) -> RhoTable:
    """
    Exact k-purchase table for latent costs with survival ``(1-x)^(1/density)``.

    Density near zero is 1/density times the uniform one, so
    ``N * rho[k][N] -> density * c_k``. density = 1 reproduces ``compute_rho``.
    """
    if not density > 0:
        logger.error(f"Density factor must be positive, got {density}")
        raise InvalidArgumentError(f"density must be > 0, got {density}")
    _validate_table_args(k_max, n_max)
    rho = np.full((k_max + 1, n_max + 1), np.nan)
    for m, col in rho_columns(k_max, n_max, float(density)):
        rho[:, m] = col
    return RhoTable(rho, density=density)


def rho_invariants(
    k_max: int, n_max: int, table: Optional[RhoTable] = None
) -> Dict[str, bool]:
    """
    Check the table invariants column by column.

    Uses rolling memory unless a materialized ``table`` is given (the
    self-test injects corrupted tables this way).
    """
    checks = {
        "diagonal": True,
        "monotonicity": True,
        "k-ordering": True,
        "one-purchase-bound": True,
    }
    prev = None
    columns = (
        ((m, table.rho[:, m]) for m in range(table.n_max + 1))
        if table is not None
        else rho_columns(k_max, n_max)
    )
    for m, col in columns:
        if m >= 1:
            top = min(m, col.size - 1)
            if m < col.size and abs(col[m] - 0.5 * m) > ATOL * max(1.0, m):
                checks["diagonal"] = False
            if np.any(col[1 : top + 1] < col[:top] - ATOL):
                checks["k-ordering"] = False
            if col[1] > 2.0 / (m + 1) + ATOL:
                checks["one-purchase-bound"] = False
            if prev is not None:
                shared = min(m - 1, col.size - 1)
                if np.any(col[1 : shared + 1] > prev[1 : shared + 1] + ATOL):
                    checks["monotonicity"] = False
        prev = col
    return checks


@dataclass(frozen=True)
class CkSequence:
    """Constants ``c_k`` (``c_1 = 2``) and ``d_k = sqrt(1 + 2 c_k)``."""

    c: np.ndarray
    d: np.ndarray

    @property
    def k_max(self) -> int:
        return int(self.c.size)

    def c_k(self, k: int) -> float:
        return float(self.c[k - 1])

    def d_k(self, k: int) -> float:
        return float(self.d[k - 1])


def compute_ck(k_max: int) -> CkSequence:
    """``c_1 = 2``, ``c_k = c_{k-1} + 1 + sqrt(1 + 2 c_{k-1})``."""
    if k_max < 1:
        raise InvalidArgumentError(f"k_max must be >= 1, got {k_max}")
    c = np.empty(k_max)
    c[0] = 2.0
    for k in range(1, k_max):
        c[k] = c[k - 1] + 1.0 + math.sqrt(1.0 + 2.0 * c[k - 1])
    return CkSequence(c=c, d=np.sqrt(1.0 + 2.0 * c))


def clique_exponents(r_max: int) -> Dict[int, float]:
    """Exponents ``d_r`` with ``d_3 = 4/7`` and ``d_{r+1} = d_r / (d_r + 2)``."""
    if r_max < 3:
        raise InvalidArgumentError(f"r_max must be >= 3, got {r_max}")
    d = {3: 4.0 / 7.0}
    for r in range(3, r_max):
        d[r + 1] = d[r] / (d[r] + 2.0)
    return d


def _needed_table(table: Optional[RhoTable], k: int, n: int) -> RhoTable:
    if table is None:
        return compute_rho(k, max(k, n - 1, 1))
    if table.k_max < k or table.n_max < n - 1:
        raise InvalidArgumentError(
            f"Table (k_max={table.k_max}, N_max={table.n_max}) does not cover "
            f"k={k}, N={n}"
        )
    return table


def run_k_purchase(
    session: InspectionSession,
    k: int,
    rho_table: Optional[RhoTable] = None,
    block_size: int = 4096,
) -> StrategyOutcome:
    """
    Run the optimal threshold rule for buying k items on a session.

    Args:
        session: Any inspection session; POM sessions without a plan inspect
            in id order
        k: Number of items to buy (1 <= k <= N)
        rho_table: Table covering (k, N-1); computed when omitted
        block_size: Items served per block

    Returns:
        StrategyOutcome with exactly k purchases

    Raises:
        InvalidArgumentError: If k is outside [1, N]
        RuntimeError: If the session runs dry before k purchases
    """
    n = session.universe.size
    if not 1 <= k <= n:
        logger.error(f"k={k} outside [1, {n}]")
        raise InvalidArgumentError(f"k must lie in [1, {n}], got {k}")
    table = _needed_table(rho_table, k, n)
    if isinstance(session, PurchaserOrderSession) and not session.has_plan:
        session.plan(np.arange(n))

    outcome = StrategyOutcome()
    need = k
    while need > 0:
        ids, costs, positions = session.next_block(block_size)
        if ids.size == 0:
            logger.error(f"Session exhausted with {need} purchases outstanding")
            raise RuntimeError("Session exhausted before k purchases")
        accepted = np.zeros(ids.size, dtype=bool)
        start = 0
        while need > 0 and start < ids.size:
            remaining = n - positions[start:] + 1
            thr = table.thresholds(need, remaining)
            hits = np.flatnonzero(costs[start:] < thr)
            if hits.size == 0:
                break
            j = start + int(hits[0])
            accepted[j] = True
            outcome.purchased.append((int(ids[j]), float(costs[j])))
            outcome.inspections = int(positions[j])
            need -= 1
            start = j + 1
        session.record(ids, accepted)
    session.stop()
    outcome.total_cost = math.fsum(cost for _, cost in outcome.purchased)
    outcome.success = len(outcome.purchased) == k
    return outcome


def run_k_purchase_batch(
    k: int,
    n: int,
    trials: int,
    rng: np.random.Generator,
    rho_table: Optional[RhoTable] = None,
) -> np.ndarray:
    """
    Total costs of ``trials`` independent k-purchase runs on n uniform items.

    Exact in law: for each still-needed count the stopping index is drawn by
    inverting the survival of the threshold hazards, and the accepted cost is
    uniform below the threshold that fired.
    """
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must lie in [1, {n}], got {k}")
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    table = _needed_table(rho_table, k, n)
    remaining = n - np.arange(n)  # m at index i
    start = np.zeros(trials, dtype=np.int64)
    total = np.zeros(trials)
    for need in range(k, 0, -1):
        thr = table.thresholds(need, remaining)
        hard = thr >= 1.0
        log_surv = np.where(hard, 0.0, np.log1p(-np.minimum(thr, 1.0 - 1e-300)))
        # drop[i] = -sum_{i' < i} log(1 - thr_i')
        drop = np.concatenate(([0.0], -np.cumsum(log_surv)))
        next_hard = np.full(n + 1, n, dtype=np.int64)
        marks = np.where(hard, np.arange(n), n)
        next_hard[:n] = np.minimum.accumulate(marks[::-1])[::-1]
        budget = drop[start] - np.log(rng.random(trials))
        stop = np.searchsorted(drop, budget, side="left") - 1
        stop = np.maximum(stop, start)
        stop = np.minimum(stop, next_hard[start])
        cap = np.minimum(thr[stop], 1.0)
        total += rng.random(trials) * cap
        start = stop + 1
    return total


@dataclass
class Avg2Program:
    """
    Optimum of the average-two-purchase relaxation on horizon n.

    ``q[k]`` is the probability that no item was bought in the first k steps,
    ``a[k-1]`` the expected number of later purchases given the first one
    happens at step k, ``objective`` the optimal value scaled by n.
    """

    n: int
    q: np.ndarray
    a: np.ndarray
    objective: float
    raw_objective: float
    residual: float
    converged: bool
    iterations: int
    theta: np.ndarray


def _avg2_parts(z: np.ndarray, n: int):
    w = np.exp(z - z.max())
    delta = w / w.sum()
    tail = np.cumsum(delta[::-1])[::-1]  # q_{k-1}
    tail = np.maximum(tail, 1e-300)
    span = n - np.arange(1, n + 1)
    s = float(delta @ span)
    return delta, tail, span, s


def _avg2_objective(z: np.ndarray, n: int) -> Tuple[float, np.ndarray]:
    delta, tail, span, s = _avg2_parts(z, n)
    ratio = delta / tail
    value = 0.5 * float(delta @ ratio) + 0.5 / s
    grad_delta = ratio - np.cumsum(0.5 * ratio * ratio) - span / (2.0 * s * s)
    grad_z = delta * (grad_delta - float(grad_delta @ delta))
    # scale by n keeps the optimizer in O(1) units
    return n * value, n * grad_z


def optimize_avg2(n: int, iterations: int = 2000, tolerance: float = 1e-10) -> Avg2Program:
    """
    Minimize the average-two-purchase objective over survival sequences.

    The decrements ``q_{k-1} - q_k`` are a softmax of free logits, which
    keeps q monotone with ``q_0 = 1`` and ``q_n = 0``. For fixed q the best
    ``a_k`` is ``(n-k) / sum_j (q_{j-1} - q_j)(n-j)``.

    Args:
        n: Horizon (n >= 10)
        iterations: L-BFGS iteration cap
        tolerance: Gradient and objective tolerance

    Returns:
        Avg2Program; ``converged`` is False when the cap was hit first
    """
    if n < 10:
        logger.error(f"Average-two program needs n >= 10, got {n}")
        raise InvalidArgumentError(f"n must be >= 10, got {n}")

    # start from the optimal single-purchase policy
    one = compute_rho(1, n)
    thr = one.thresholds(1, n - np.arange(n))
    thr = np.minimum(thr, 1.0)
    survive = np.concatenate(([1.0], np.cumprod(1.0 - thr)[:-1]))
    z0 = np.log(np.maximum(survive * thr, 1e-300))

    logger.info(f"Optimizing average-two program for n={n}")
    result = optimize.minimize(
        _avg2_objective,
        z0,
        args=(n,),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": iterations, "ftol": tolerance, "gtol": tolerance},
    )
    delta, tail, span, s = _avg2_parts(result.x, n)
    q = np.concatenate((tail, [0.0]))
    q[0] = 1.0
    a = span / s
    residual = abs(float(delta @ a) - 1.0)
    raw = 0.5 * float(delta @ (delta / tail)) + 0.5 / s
    converged = bool(result.success)
    if not converged:
        logger.warning(f"Average-two optimizer stopped early: {result.message}")
    logger.info(f"Average-two objective n*phi={n * raw:.6f} (residual {residual:.2e})")
    return Avg2Program(
        n=n,
        q=q,
        a=a,
        objective=n * raw,
        raw_objective=raw,
        residual=residual,
        converged=converged,
        iterations=int(result.nit),
        theta=delta / tail,
    )


__all__ = [
    "Avg2Program",
    "CkSequence",
    "RhoTable",
    "StrategyOutcome",
    "clique_exponents",
    "compute_ck",
    "compute_rho",
    "compute_rho_density",
    "optimize_avg2",
    "rho_columns",
    "rho_invariants",
    "run_k_purchase",
    "run_k_purchase_batch",
]
