"""Simultaneous configuration formation and information collection for modular robots."""

from .acting import BlockedArrival, SimWorld, check_no_hole, run_acting
from .allocation import Assignment, Bid, allocate_auction, allocate_sa, compute_bids
from .configuration import TargetConfig, acting_order, betweenness, generate_random, validate
from .gp import GpHyperparams, GpState, cell_entropy, fit_hyperparameters, kernel
from .grid import Cell, GridMap, Pose, generate_field, manhattan_distance, neighbors4
from .planner import PathPlan, entropic_potential, eps_search, potential, shortest_path

__version__ = "0.1.0"
