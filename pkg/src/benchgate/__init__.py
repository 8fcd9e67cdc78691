"""Continuous-benchmarking analysis: optimize microbenchmark suites against an
application call graph and detect performance changes across commits."""

from .callgraph import CallGraph, GraphOverlap, load_callgraph, overlap, union_coverage
from .detection import (Detection, DetectorConfig, analyze_series, detect_jumps, detect_trends,
                        dynamic_threshold)
from .measurements import (AppRequestSeries, CommitSeries, MeasurementSet, flatten,
                           ingest_measurements, load_manifest, trim_duet_series)
from .optimizer import OptimizedSuite, OptimizerConfig, optimize, practical_relevance, reference_impact
from .scheduler import make_duet_plan, make_rmit_plan
from .simulator import InjectedChange, NoiseModel, evaluate_detector, generate_history
from .stats import (BootstrapConfig, ChangeReport, aa_instability, bootstrap_ci, classify_intensity,
                    median_change)

__version__ = "0.1.0"

__all__ = [
    "AppRequestSeries", "BootstrapConfig", "CallGraph", "ChangeReport", "CommitSeries", "Detection",
    "DetectorConfig", "GraphOverlap", "InjectedChange", "MeasurementSet", "NoiseModel", "OptimizedSuite",
    "OptimizerConfig", "aa_instability", "analyze_series", "bootstrap_ci", "classify_intensity",
    "detect_jumps", "detect_trends", "dynamic_threshold", "evaluate_detector", "flatten",
    "generate_history", "ingest_measurements", "load_callgraph", "load_manifest", "make_duet_plan",
    "make_rmit_plan", "median_change", "optimize", "overlap", "practical_relevance", "reference_impact",
    "trim_duet_series", "union_coverage",
]
