"""Strategy synthesis for bounded-horizon hyper temporal logic objectives
on discrete transition systems."""

from .dts import Dts, GridMap, GridOptions, Strategy, augment, correspond, from_grid, path_of
from .formula import Formula, desugar, format_formula, parse, validate
from .horizon import NEG_INF, horizon, horizons
from .objectives import ObjectiveSpec, build_problem, catalog, instantiate
from .semantics import check_witness, evaluate
from .solver import (Outcome, Problem, SolveOptions, sat_solve,
                     solve_cegis, solve_enumeration, synthesize)

__version__ = "0.1.0"

__all__ = [
    "Dts", "GridMap", "GridOptions", "Strategy", "augment", "correspond",
    "from_grid", "path_of", "Formula", "desugar", "format_formula", "parse",
    "validate", "NEG_INF", "horizon", "horizons", "ObjectiveSpec",
    "build_problem", "catalog", "instantiate", "check_witness", "evaluate",
    "Outcome", "Problem", "SolveOptions", "sat_solve", "solve_cegis",
    "solve_enumeration", "synthesize",
]
