"""blockmads: surrogate-assisted, block-parallel mesh-adaptive direct search
for constrained blackbox optimization, plus a benchmark harness."""

from .core import (Cache, Evaluation, EvalTag, ProblemSpec, VIRTUAL_WORST,
                   aggregate_violation, precedes, precedes_eq, set_distance)
from .engine import (EngineConfig, Incumbents, MadsEngine, ScaledProblem,
                     evaluate_block, update_incumbents)
from .inner import SearchConfig, solve_surrogate
from .lowess import (Kernel, LowessModel, aoecv, fit, kernel_eval, local_scale)
from .mesh import MeshState, initial_mesh, pad_poll, poll_directions, project_to_mesh, update_mesh
from .metrics import distribution_summary, performance_profile, speedup_efficiency
from .problems import CATALOG, ProblemCatalogEntry, eval_tcsd, eval_vessel, eval_welded, get_problem, lhs_sample
from .search import SurrogateSearch
from .selection import (SelectionContext, SelectionState, SurrogateCacheView,
                        cycle_select, select_method1, select_method2, select_method3,
                        select_method4, select_method5, select_method6)
from .solvers import RunRecord, SolverConfig, run_solver, starting_points

__version__ = "0.1.0"
