"""rvhier: intraday realized-variance decompositions, hierarchical HAR
forecasting, forecast reconciliation, and evaluation tools."""

from .errors import ConfigError, DataError, NumericalError, RVHierError
from .hierarchy import (
    CATALOG,
    HierarchyStructure,
    NodeSeriesSet,
    assemble_node_series,
    build_hierarchy,
    coherence_residual,
    is_coherent,
)
from .measures import (
    DEFAULT_ALPHAS,
    DEFAULT_GRID_SIZE,
    DEFAULT_SEGMENT_LENGTH,
    DailyMeasures,
    DecompositionSpec,
    combined_components,
    decompose_day,
    log_returns,
    partial_variances,
    quantile_thresholds,
    realized_variance,
    semivariances,
    sign_temporal_components,
    temporal_components,
    threshold_components,
)
from .panels import IntradayPanel, panel_components, read_panel, read_price_file, write_panel
from .robust import (
    bipower_variation,
    estimate_periodicity,
    pv_star_components,
    pv_star_thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "ConfigError",
    "DEFAULT_ALPHAS",
    "DEFAULT_GRID_SIZE",
    "DEFAULT_SEGMENT_LENGTH",
    "DailyMeasures",
    "DataError",
    "DecompositionSpec",
    "HierarchyStructure",
    "IntradayPanel",
    "NodeSeriesSet",
    "NumericalError",
    "RVHierError",
    "assemble_node_series",
    "bipower_variation",
    "build_hierarchy",
    "coherence_residual",
    "combined_components",
    "decompose_day",
    "estimate_periodicity",
    "is_coherent",
    "log_returns",
    "panel_components",
    "partial_variances",
    "pv_star_components",
    "pv_star_thresholds",
    "quantile_thresholds",
    "read_panel",
    "read_price_file",
    "realized_variance",
    "semivariances",
    "sign_temporal_components",
    "temporal_components",
    "threshold_components",
    "write_panel",
]
