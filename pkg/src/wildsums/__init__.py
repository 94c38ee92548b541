"""Solvers and simulators for finite-state m-ary interacting particle systems.

Three independent routes to the law of one component at time t:

  * :func:`wild_sum` and friends: the explicit tree-indexed series,
  * :func:`ode_solve`: direct fixed-step integration of the evolution equation,
  * :func:`simulate`: exact event-driven simulation of N interacting agents.

Agreement between the three is the package's own correctness argument; the
``validate`` CLI command and the acceptance test suite run the comparison.
"""
from .errors import FormatError, PreconditionError, ResourceCapError, WildsumsError
from .models import (
    DGP_LABELS,
    DGPModel,
    PercolationModel,
    build_dgp,
    build_percolation,
)
from .modelio import ModelSpec, dumps_model, load_model, loads_model, save_model
from .ode import Generator, ode_solve, residual
from .purebirth import (
    BirthLaw,
    branching_law_finite,
    branching_law_ode,
    branching_pmf,
    branching_pmf_vector,
    finite_population_rate,
    geometric_envelope,
    redundancy_bound,
    suggest_cutoff,
)
from .series import (
    SeriesParams,
    SeriesResult,
    branching_weight,
    branching_weights,
    decorated_tree_law,
    tree_averages,
    tree_law,
    unary_count_weight,
    uniform_placement_series,
    wild_sum,
    wild_sum_unary,
    wild_sum_unary_pair,
)
from .simulator import (
    Event,
    EventLog,
    HistoryGraph,
    Population,
    ShapeLaw,
    empirical_law,
    replicate_runs,
    simulate,
    tagged_history,
    tree_shape_law,
)
from .statespace import (
    MAryKernel,
    Measure,
    PROB_TOL,
    StateSpace,
    UnaryKernel,
    apply_unary,
    check_symmetry,
    marginal_interact,
)
from .trees import (
    Arrangement,
    DecoratedTree,
    OrderedTree,
    count_arrangements,
    count_trees,
    enumerate_arrangements,
    enumerate_trees,
    shape_from_text,
    shape_text,
)

__version__ = "0.1.0"

__all__ = [
    "Arrangement",
    "BirthLaw",
    "DGPModel",
    "DGP_LABELS",
    "DecoratedTree",
    "Event",
    "EventLog",
    "FormatError",
    "Generator",
    "HistoryGraph",
    "MAryKernel",
    "Measure",
    "ModelSpec",
    "OrderedTree",
    "PROB_TOL",
    "PercolationModel",
    "Population",
    "PreconditionError",
    "ResourceCapError",
    "SeriesParams",
    "SeriesResult",
    "ShapeLaw",
    "StateSpace",
    "UnaryKernel",
    "WildsumsError",
    "apply_unary",
    "branching_law_finite",
    "branching_law_ode",
    "branching_pmf",
    "branching_pmf_vector",
    "branching_weight",
    "branching_weights",
    "build_dgp",
    "build_percolation",
    "check_symmetry",
    "count_arrangements",
    "count_trees",
    "decorated_tree_law",
    "dumps_model",
    "empirical_law",
    "enumerate_arrangements",
    "enumerate_trees",
    "finite_population_rate",
    "geometric_envelope",
    "load_model",
    "loads_model",
    "marginal_interact",
    "ode_solve",
    "redundancy_bound",
    "replicate_runs",
    "residual",
    "save_model",
    "shape_from_text",
    "shape_text",
    "simulate",
    "suggest_cutoff",
    "tagged_history",
    "tree_averages",
    "tree_law",
    "tree_shape_law",
    "unary_count_weight",
    "uniform_placement_series",
    "wild_sum",
    "wild_sum_unary",
    "wild_sum_unary_pair",
]
