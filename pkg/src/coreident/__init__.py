"""Identification of games with multiple equilibria through cores of Choquet capacities.

A parameter value is in the identified set when the observed outcome
distribution is dominated, subset by subset, by the model likelihood. The
package offers exhaustive, submodular-minimization, max-flow and
interval-class tests for pure-strategy models, and a capacity route and a
convex-feasibility route for 2x2 games with mixed strategies.
"""

from __future__ import annotations

from .builtin import builtin_game, custom_game, family_bargaining, jovanovic, load_game, oligopoly_2type
from .coredet import (
    IntervalClass,
    OutcomeOrdering,
    check_cd_criterion,
    check_monotonicity,
    core_contains_cd,
    interval_class,
    reduce_isolated,
    search_ordering,
    singleton_class,
)
from .flow import SelectionMechanism, build_network, feasible, max_flow, selection_from_flow
from .games import GameSpec, combos_analytic, combos_monte_carlo, mixed_correspondence, mixed_nash_2x2, pure_nash
from .identify import (
    GridSpec,
    IdentifyRecord,
    IncompatibleMethod,
    InputError,
    check,
    compare_singleton,
    core_vertices,
    identify,
    make_context,
    montecarlo_scatter,
)
from .latent import LatentDistribution, Marginal
from .mixed import (
    ConvexFeasibilityProblem,
    MixedCapacitySpec,
    MonteCarloIntegration,
    SolverConfig,
    membership_convex,
    membership_submodular_mixed,
    mixed_capacity,
    regular_core_check,
    support_functional,
)
from .outcomes import (
    Capacity,
    EquilibriumCombos,
    OutcomeSpace,
    ProbabilityVector,
    capacity_from_combos,
    check_capacity,
    choquet_integral,
    core_contains_bruteforce,
)
from .submodular import SubmodularObjective, core_membership_submodular, min_submodular

__all__ = [
    "Capacity",
    "ConvexFeasibilityProblem",
    "EquilibriumCombos",
    "GameSpec",
    "GridSpec",
    "IdentifyRecord",
    "IncompatibleMethod",
    "InputError",
    "IntervalClass",
    "LatentDistribution",
    "Marginal",
    "MixedCapacitySpec",
    "MonteCarloIntegration",
    "OutcomeOrdering",
    "OutcomeSpace",
    "ProbabilityVector",
    "SelectionMechanism",
    "SolverConfig",
    "SubmodularObjective",
    "build_network",
    "builtin_game",
    "capacity_from_combos",
    "check",
    "check_capacity",
    "check_cd_criterion",
    "check_monotonicity",
    "choquet_integral",
    "combos_analytic",
    "combos_monte_carlo",
    "compare_singleton",
    "core_contains_bruteforce",
    "core_contains_cd",
    "core_membership_submodular",
    "core_vertices",
    "custom_game",
    "family_bargaining",
    "feasible",
    "identify",
    "interval_class",
    "jovanovic",
    "load_game",
    "make_context",
    "max_flow",
    "membership_convex",
    "membership_submodular_mixed",
    "min_submodular",
    "mixed_capacity",
    "mixed_correspondence",
    "mixed_nash_2x2",
    "montecarlo_scatter",
    "oligopoly_2type",
    "pure_nash",
    "reduce_isolated",
    "regular_core_check",
    "search_ordering",
    "selection_from_flow",
    "singleton_class",
    "support_functional",
]
