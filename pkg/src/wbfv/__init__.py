"""Well-balanced finite-volume schemes for one-dimensional balance laws.

The package solves U_t + f(U)_x = S(U) H_x with first, second and third
order finite-volume schemes whose reconstruction can be made well
balanced: each cell solves a local control problem for the stationary
solution sharing its average, and the scheme subtracts that stationary
trace from flux and source so discrete equilibria are preserved to
solver tolerance.  Five model systems, a time integrator, and a
benchmark layer with ready-made scenarios and convergence tables are
included; the ``wbfv`` console script drives the benchmark layer.
"""

from .bench import (
    SCENARIOS,
    ErrorReport,
    GaussianBump,
    Scenario,
    ScenarioRun,
    convergence_table,
    get_scenario,
    initial_averages,
    l1_error,
    perturbed_ic,
    quadrature_averages,
    reference_solution,
    restrict_averages,
    run_scenario,
    scheme_from_name,
    stationary_ic,
    sw_implicit_ic,
)
from .core import (
    BoundarySpec,
    CellQuadratureLayout,
    Grid,
    QuadratureRule,
    Scheme,
    SimulationConfig,
    apply_overrides,
    build_layout,
    dirichlet_components,
    dirichlet_state,
    free_bc,
    read_config_file,
)
from .equilibrium import (
    CellEquilibria,
    EquilibriumSolution,
    FailureReason,
    NoEquilibrium,
    functional_Fh,
    jacobian_DFh,
    newton_solve,
    solve_cells,
    sw_scalar_newton,
)
from .integrate import march_states, quad_average, reverse_march
from .models import (
    ALL_MODEL_FACTORIES,
    BalanceLawModel,
    burgers1_model,
    burgers2_model,
    coupled_burgers_model,
    euler_gravity_model,
    shallow_water_model,
)
from .reconstruct import (
    MeshReconstruction,
    WBReconstruction,
    operator_for_order,
    standard_reconstruct,
    wb_reconstruct,
    wb_reconstruct_batch,
)
from .solver import (
    RunResult,
    rusanov_flux,
    run,
    semidiscrete_rhs,
    write_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # grids and configuration
    "Grid",
    "QuadratureRule",
    "CellQuadratureLayout",
    "build_layout",
    "Scheme",
    "BoundarySpec",
    "free_bc",
    "dirichlet_state",
    "dirichlet_components",
    "SimulationConfig",
    "read_config_file",
    "apply_overrides",
    # models
    "BalanceLawModel",
    "burgers1_model",
    "burgers2_model",
    "coupled_burgers_model",
    "shallow_water_model",
    "euler_gravity_model",
    "ALL_MODEL_FACTORIES",
    # stationary marches and cell equilibria
    "march_states",
    "reverse_march",
    "quad_average",
    "EquilibriumSolution",
    "NoEquilibrium",
    "CellEquilibria",
    "FailureReason",
    "solve_cells",
    "newton_solve",
    "sw_scalar_newton",
    "functional_Fh",
    "jacobian_DFh",
    # reconstruction
    "operator_for_order",
    "standard_reconstruct",
    "wb_reconstruct",
    "wb_reconstruct_batch",
    "WBReconstruction",
    "MeshReconstruction",
    # solver
    "rusanov_flux",
    "semidiscrete_rhs",
    "run",
    "RunResult",
    "write_snapshot",
    # benchmark layer
    "SCENARIOS",
    "Scenario",
    "ScenarioRun",
    "GaussianBump",
    "ErrorReport",
    "get_scenario",
    "scheme_from_name",
    "stationary_ic",
    "perturbed_ic",
    "sw_implicit_ic",
    "quadrature_averages",
    "initial_averages",
    "reference_solution",
    "restrict_averages",
    "l1_error",
    "run_scenario",
    "convergence_table",
]
