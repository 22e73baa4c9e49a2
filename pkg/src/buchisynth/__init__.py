"""Controller synthesis for Büchi objectives by interval branch-and-bound."""

__version__ = "0.1.0"

from .automaton import DBA, Automaton, parse_dba, parse_nba, preprocess, transition_matrix, trim_nba
from .controller import Controller, check_buchi, load, save, simulate, step
from .dynamics import make_dynamics, register_dynamics
from .intervals import BoxSet, IntervalBox, bisect, erode
from .oracle import FiniteTS, abstract_and_solve, finite_buchi, parse_ts
from .system import SystemSpec, reach_overapprox, sample_controls
from .synthesis import audit, synthesize

__all__ = [
    "Automaton", "DBA", "parse_dba", "parse_nba", "preprocess", "transition_matrix", "trim_nba",
    "Controller", "check_buchi", "load", "save", "simulate", "step",
    "make_dynamics", "register_dynamics",
    "BoxSet", "IntervalBox", "bisect", "erode",
    "FiniteTS", "abstract_and_solve", "finite_buchi", "parse_ts",
    "SystemSpec", "reach_overapprox", "sample_controls",
    "audit", "synthesize",
]
