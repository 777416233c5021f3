from .experiment import (
    METRICS,
    CellResult,
    ExperimentConfig,
    ExperimentReport,
    Improvement,
    MetricName,
    SolverComparison,
    SolverComparisonRow,
    TrialRow,
)
from .metrics import MatchedPair, MatchReport, MetricPair, PeakList
from .room import AirSet, Geometry, ObservationSet, Point, RoomConfig
from .signals import NoiseSpec, SourceSignal
from .solver import (
    EpsilonSelection,
    Il1cInit,
    QpOutcome,
    SlackVariables,
    SolverConfig,
    SolverId,
    SolverResult,
)
from .strategy import CandidateNorm, Pairing, StrategyConfig
