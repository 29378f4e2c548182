"""Nash equilibria of inclusive-fitness resource-allocation games in families."""

from .best_response import BestResponseResult, adjusted_marginal, spend_at_multiplier, water_fill
from .equilibrium import (
    EquilibriumReport,
    KktCertificate,
    SolveOptions,
    check_support_inclusions,
    classify,
    kkt_verify,
    solve_nash,
)
from .family_model import (
    AllocationProfile,
    FamilyGame,
    FitnessFunction,
    FitnessKind,
    fitness_marginal,
    incoming_investment,
    inclusive_fitness,
    marginal_inverse,
    validate_game,
    validate_profile,
)
from .oracle import GridSpec, grid_best_response, grid_nash_check, random_instance
from .pedigree import Pedigree, pedigree_to_relatedness

__version__ = "0.1.0"
