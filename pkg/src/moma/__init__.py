"""Multi-objective memetic optimization over binary shapes.

NSGA-II global search hybridized with a weighted-sum steepest-descent local
step whose weights adapt to the current front, plus the fixed-weight sweep
and plain NSGA-II baselines, quality indicators and test problems.
"""

from .engine import (RunConfig, RunResult, run, run_batch, run_moma_aw, run_nsga2,
                     run_soga_fw)
from .errors import (ConfigurationError, ContractError, EmptyShapeError, GeometryError,
                     MomaError)
from .genome import Genome, RadiusTracker, build_distance_matrix, circumscribing_radius
from .localsearch import (CompositeObjective, EpsSchedule, InverseState, LocalSearchBudget,
                          composite_value, local_descent, taper_schedule)
from .metrics import (FrontArchive, generational_distance, hypervolume, nondominated_filter,
                      utopian_nadir)
from .moea import crowding_distance, dominates, environmental_selection, fast_nondominated_sort
from .problems import make_instance
from .weights import (WeightSet, aperture_angle, assign_weights_to_solutions, simplex_lattice,
                      update_weights)

__all__ = [
    "RunConfig", "RunResult", "run", "run_batch", "run_moma_aw", "run_nsga2", "run_soga_fw",
    "ConfigurationError", "ContractError", "EmptyShapeError", "GeometryError", "MomaError",
    "Genome", "RadiusTracker", "build_distance_matrix", "circumscribing_radius",
    "CompositeObjective", "EpsSchedule", "InverseState", "LocalSearchBudget", "composite_value",
    "local_descent", "taper_schedule", "FrontArchive", "generational_distance", "hypervolume",
    "nondominated_filter", "utopian_nadir", "crowding_distance", "dominates",
    "environmental_selection", "fast_nondominated_sort", "make_instance", "WeightSet",
    "aperture_angle", "assign_weights_to_solutions", "simplex_lattice", "update_weights",
]
