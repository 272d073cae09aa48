"""Certified global minimization of convex black-box functions on integer lattices."""
from .errors import SucilError
from .geometry import (ConeComplex, PoisedSet, Secant, check_poised, cone_membership,
                       facet_halfspaces, fit_secant, locate_in_union)
from .problems import PROBLEM_NAMES, CountingOracle, ProblemSpec, evaluate, get_problem
from .solver import Certificate, VariantConfig, brute_force_oracle, solve
from .underestimator import Domain, EtaTable, init_table, update_eta

__all__ = [
    "SucilError", "ConeComplex", "PoisedSet", "Secant", "check_poised", "cone_membership",
    "facet_halfspaces", "fit_secant", "locate_in_union", "PROBLEM_NAMES", "CountingOracle",
    "ProblemSpec", "evaluate", "get_problem", "Certificate", "VariantConfig",
    "brute_force_oracle", "solve", "Domain", "EtaTable", "init_table", "update_eta",
]

__version__ = "0.1.0"
