"""Decentralized Meta Frank-Wolfe for online constrained optimization."""

from .constraints import Box, L1Ball, L2Ball, Simplex, make_constraint
from .engine import Schedule, run_round, run_round_exact, run_round_stochastic
from .estimator import CentralizedMetaFrankWolfe, DecentralizedMetaFrankWolfe
from .exceptions import ConfigError, ConstructionError, DMFWError, InvariantViolation, NumericError
from .losses import (AveragedStream, QuadraticStream, ReplicatedStream, SinQuadraticStream,
                     SmoothL1RegressionStream, make_stream)
from .metrics import MetricsSeries, approximation_ratio, fw_gap, rate_fit
from .oracles import FTPLOracle, OGDOracle, average_regret
from .topology import (GossipMatrix, Topology, build_gossip_matrix, build_topology,
                       second_eigenvalue_magnitude)

__version__ = "0.1.0"
