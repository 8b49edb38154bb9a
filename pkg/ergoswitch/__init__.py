# logging
import logging

# classes
from ergoswitch.discretization import Grid, ValueField, build_grid
from ergoswitch.dual_game import IntensityPolicy, McConfig, McEstimate
from ergoswitch.elliptic import EllipticSolve, solve_elliptic
from ergoswitch.ergodic import ErgodicEstimate, extract_ergodic
from ergoswitch.model import SwitchingModel, ValidationReport, preset
from ergoswitch.parabolic import ParabolicRun, solve_parabolic


logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "Grid",
    "ValueField",
    "build_grid",
    "IntensityPolicy",
    "McConfig",
    "McEstimate",
    "EllipticSolve",
    "solve_elliptic",
    "ErgodicEstimate",
    "extract_ergodic",
    "SwitchingModel",
    "ValidationReport",
    "preset",
    "ParabolicRun",
    "solve_parabolic",
]
