"""Embedded-manifold primitives: projections, retractions, transport."""

from .descriptors import (
    CHART_ADDITIVE,
    EUCLIDEAN_EMBEDDED_KINDS,
    EXPONENTIAL,
    METRIC_PROJECTION,
    STEREOGRAPHIC,
    ManifoldDescriptor,
    ManifoldKind,
    MetricFamily,
    Point,
    RetractionScheme,
    RetractionVariant,
    TangentVector,
    circle,
    fisher_half_plane,
    hyperboloid,
    product_sphere_euclid,
    sphere,
    stiefel,
)
from .kinds import implementation_for
from .ops import (
    ambient_extend,
    as_point,
    as_tangent,
    covariant_derivative,
    distance,
    exp_map,
    geodesic_rk4,
    inner,
    metric_project,
    norm,
    parallel_transport,
    random_point,
    random_tangent,
    retract,
    riemannian_gradient,
    riemannian_gradient_from_euclidean,
    tangent_project,
    transport_rk4,
    zero_tangent,
)

__all__ = [
    "CHART_ADDITIVE",
    "EUCLIDEAN_EMBEDDED_KINDS",
    "EXPONENTIAL",
    "METRIC_PROJECTION",
    "STEREOGRAPHIC",
    "ManifoldDescriptor",
    "ManifoldKind",
    "MetricFamily",
    "Point",
    "RetractionScheme",
    "RetractionVariant",
    "TangentVector",
    "ambient_extend",
    "as_point",
    "as_tangent",
    "circle",
    "covariant_derivative",
    "distance",
    "exp_map",
    "fisher_half_plane",
    "geodesic_rk4",
    "hyperboloid",
    "implementation_for",
    "inner",
    "metric_project",
    "norm",
    "parallel_transport",
    "product_sphere_euclid",
    "random_point",
    "random_tangent",
    "retract",
    "riemannian_gradient",
    "riemannian_gradient_from_euclidean",
    "sphere",
    "stiefel",
    "tangent_project",
    "transport_rk4",
    "zero_tangent",
]
