"""Solver-free consensus ADMM for linearized optimal power flow on unbalanced distribution feeders."""
from importlib.resources import files

from .admm import SolverConfig, kkt_check, solve
from .decomposition import decompose
from .feeder import load_feeder, parse_feeder
from .lp import assemble_lp

__all__ = ["SolverConfig", "assemble_lp", "decompose", "fixture_path", "kkt_check", "load_feeder",
           "parse_feeder", "solve"]


def fixture_path(name: str = "four_bus"):
    """Path of a bundled feeder file."""
    return files(__package__) / "data" / f"{name}.feeder"
