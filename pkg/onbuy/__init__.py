from .graph_kernel import (
    DisjointSet,
    PurchasedGraph,
    decompose_functional,
    find_hamilton_cycle,
    max_bipartite_matching,
    validate,
)
from .harness import (
    BoundRecord,
    StatsSummary,
    TrialConfig,
    exponent_fit,
    run_trials,
    theory_bounds,
)
from .purchase_core import (
    RhoTable,
    StrategyOutcome,
    compute_ck,
    compute_rho,
    compute_rho_density,
    optimize_avg2,
    run_k_purchase,
)
from .stream import (
    InvalidArgumentError,
    OrderModel,
    ProtocolViolationError,
    RngHandle,
    aom_session,
    decompose_min_of_m,
    make_universe,
    pom_session,
    rom_session,
)
from .strategies import STRUCTURES, evaluate_buytree_cost, open_session, run_structure
from .utils import setup_logger

__version__ = "0.1.0"

# Setup default logger when onbuy is imported
_default_logger = setup_logger()

__all__ = [
    "STRUCTURES",
    "BoundRecord",
    "DisjointSet",
    "InvalidArgumentError",
    "OrderModel",
    "ProtocolViolationError",
    "PurchasedGraph",
    "RhoTable",
    "RngHandle",
    "StatsSummary",
    "StrategyOutcome",
    "TrialConfig",
    "aom_session",
    "compute_ck",
    "compute_rho",
    "compute_rho_density",
    "decompose_functional",
    "decompose_min_of_m",
    "evaluate_buytree_cost",
    "exponent_fit",
    "find_hamilton_cycle",
    "make_universe",
    "max_bipartite_matching",
    "open_session",
    "optimize_avg2",
    "pom_session",
    "rom_session",
    "run_k_purchase",
    "run_structure",
    "setup_logger",
    "theory_bounds",
    "validate",
]
