"""Joint allocation of transmission power, bandwidth, CPU frequency, and
video-frame resolution for federated-learning clients on an FDMA uplink."""

from .bcd import (
    BcdParams,
    BcdResult,
    RoundRecord,
    bcd_solve,
    bcd_solve_fixed_deadline,
    default_init,
    relaxed_objective,
    trace_to_csv,
)
from .benchmarks import benchmark_minpixel, benchmark_randpixel, comm_only, comp_only
from .compute_alloc import (
    ComputeSolution,
    DualSolution,
    dual_objective,
    linearize_accuracy,
    recover_primal,
    refit_frequencies,
    solve_compute,
    solve_dual,
    solve_dual_boxed,
    solve_fixed_deadline,
)
from .errors import (
    AllocationInfeasible,
    BracketError,
    BudgetInfeasible,
    ComputationInfeasible,
    ConfigError,
    DeadlineInfeasible,
    FedAllocError,
    FloorInfeasible,
    InfeasibleError,
    LineSearchStalled,
    SolverError,
    TransmissionInfeasible,
)
from .gridsearch import oracle_grid_search
from .link_alloc import (
    InnerSolution,
    LinkState,
    init_multipliers,
    inner_objective,
    kkt_residuals,
    phi_vector,
    rate_floor,
    solve_inner,
    solve_link,
)
from .model import (
    Allocation,
    CostBreakdown,
    DeviceProfile,
    SystemConfig,
    Weights,
    accuracy,
    data_rate,
    evaluate,
    feasibility_violations,
    normalize_weights,
    rate_core,
    rate_hessian,
)
from .numerics import BisectionSpec, bisect_root, illinois_root, lambert_w0
from .sweeps import SweepSpec, aggregate, run_sweep, write_csv
from .topology import (
    ScenarioSpec,
    dbm_to_watts,
    demanding_floor_instance,
    gen_topology,
    system_config,
    watts_to_dbm,
)

__version__ = "0.1.0"
