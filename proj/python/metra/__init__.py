from ._core import (
    BoundaryLayerMetric,
    ConfigError,
    ConstantMetric,
    DiscreteMetricField,
    DistortionKind,
    Mesh,
    MetraError,
    MetricField,
    ParseError,
    __version__,
    approximation_error,
    interpolation_error,
    measures,
    metric_exp,
    metric_log,
    optimize,
    pointwise_distortion,
    quality,
    run_cli,
    structured_mesh,
)

__all__ = [
    "BoundaryLayerMetric",
    "ConfigError",
    "ConstantMetric",
    "DiscreteMetricField",
    "DistortionKind",
    "Mesh",
    "MetraError",
    "MetricField",
    "ParseError",
    "__version__",
    "approximation_error",
    "interpolation_error",
    "measures",
    "metric_exp",
    "metric_log",
    "optimize",
    "pointwise_distortion",
    "quality",
    "run_cli",
    "structured_mesh",
]
