from .boundary import (
    Boundary,
    PolyBoundary,
    RectBoundary,
    check_containment,
    extension_point,
    load_boundaries,
    naive_boundaries,
    save_boundaries,
)
from .transform import (
    Extension,
    ShmConfig,
    ShmResult,
    added_path_length,
    apply_shm,
    overhead_report,
)

__all__ = [
    "Boundary",
    "Extension",
    "PolyBoundary",
    "RectBoundary",
    "ShmConfig",
    "ShmResult",
    "added_path_length",
    "apply_shm",
    "check_containment",
    "extension_point",
    "load_boundaries",
    "naive_boundaries",
    "overhead_report",
    "save_boundaries",
]
