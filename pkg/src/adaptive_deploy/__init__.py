"""Event-driven multi-robot deployment: stochastic-gradient coverage control,
utilization-constrained partitioning with power cells, FloodMin winner
election and an adaptive dynamic traveling repairman policy."""
from .consensus import CommGraph, floodmin, winner
from .coverage import (CoverageState, HeteroState, StepsizeSchedule, adaptive_update, deterministic_gradient,
                       hetero_update, objective_estimate, run_tracking)
from .dtrp import DtrpConfig, run_dtrp, run_light_traffic, tsp_tour
from .events import MarkovTarget, PoissonStream, ServiceLaw, SpatialDistribution, TypedEventLaw, substream
from .geometry import CostSpec, GeneralizedDiagram, Workspace, project, saturate
from .partition import PartitionState, dual_value, deterministic_supergradient, partition_update, run_partition
from .simcore import RunTrace, ValidationError, run, trailing_window_stats

__version__ = "0.1.0"
