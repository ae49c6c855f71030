from .obfuscation import (
    CONCAVE_ADD,
    CONVEX_REMOVE,
    OptimizationResult,
    OptimizerParams,
    RewardTrace,
    TraceRow,
    add_rects,
    load_trace,
    make_rng,
    mask_to_boundary,
    optimize_obfuscation,
    remove_rects,
    save_snapshots,
    save_trace,
)

__all__ = [
    "CONCAVE_ADD",
    "CONVEX_REMOVE",
    "OptimizationResult",
    "OptimizerParams",
    "RewardTrace",
    "TraceRow",
    "add_rects",
    "load_trace",
    "make_rng",
    "mask_to_boundary",
    "optimize_obfuscation",
    "remove_rects",
    "save_snapshots",
    "save_trace",
]
