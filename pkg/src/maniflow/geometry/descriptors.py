"""Manifold descriptors and the point/tangent value types.

All supported search spaces are described by a :class:`ManifoldDescriptor`
holding a kind tag plus integer parameters.  Points and tangent vectors are
immutable wrappers around flat ambient (or chart) coordinate arrays; their
constructors enforce the on-manifold and tangency residuals so that every
downstream operation can assume valid inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError

ON_MANIFOLD_TOL = 1e-10
TANGENCY_TOL = 1e-10


class ManifoldKind(enum.Enum):
    CIRCLE = "circle"
    SPHERE = "sphere"
    STIEFEL = "stiefel"
    PRODUCT_SPHERE_EUCLID = "product_sphere_euclid"
    HYPERBOLOID = "hyperboloid"
    FISHER_HALF_PLANE = "fisher_half_plane"


class MetricFamily(enum.Enum):
    INDUCED_EUCLIDEAN = "induced_euclidean"
    MINKOWSKI = "minkowski"
    FISHER_CHART = "fisher_chart"


_METRIC_OF_KIND = {
    ManifoldKind.CIRCLE: MetricFamily.INDUCED_EUCLIDEAN,
    ManifoldKind.SPHERE: MetricFamily.INDUCED_EUCLIDEAN,
    ManifoldKind.STIEFEL: MetricFamily.INDUCED_EUCLIDEAN,
    ManifoldKind.PRODUCT_SPHERE_EUCLID: MetricFamily.INDUCED_EUCLIDEAN,
    ManifoldKind.HYPERBOLOID: MetricFamily.MINKOWSKI,
    ManifoldKind.FISHER_HALF_PLANE: MetricFamily.FISHER_CHART,
}

#: Kinds embedded in Euclidean space with the induced metric.  These get the
#: full toolkit (metric projection tube, ambient extension, second-order
#: projection retraction); hyperboloid and the Fisher chart are served by
#: closed-form / chart geometry only.
EUCLIDEAN_EMBEDDED_KINDS = frozenset(
    {
        ManifoldKind.CIRCLE,
        ManifoldKind.SPHERE,
        ManifoldKind.STIEFEL,
        ManifoldKind.PRODUCT_SPHERE_EUCLID,
    }
)


def _ambient_dim(kind: ManifoldKind, params: tuple[int, ...]) -> int:
    if kind is ManifoldKind.CIRCLE:
        return 2
    if kind is ManifoldKind.SPHERE:
        (d,) = params
        return d + 1
    if kind is ManifoldKind.STIEFEL:
        n, r = params
        return n * r
    if kind is ManifoldKind.PRODUCT_SPHERE_EUCLID:
        # d1 unit spheres S^{d0-1} plus the Euclidean block R^{d1+d1+1}.
        d0, d1 = params
        return d0 * d1 + 2 * d1 + 1
    if kind is ManifoldKind.HYPERBOLOID:
        (d,) = params
        return d + 1
    if kind is ManifoldKind.FISHER_HALF_PLANE:
        return 2
    raise InvalidArgumentError(f"unknown manifold kind {kind!r}")


_PARAM_COUNT = {
    ManifoldKind.CIRCLE: 0,
    ManifoldKind.SPHERE: 1,
    ManifoldKind.STIEFEL: 2,
    ManifoldKind.PRODUCT_SPHERE_EUCLID: 2,
    ManifoldKind.HYPERBOLOID: 1,
    ManifoldKind.FISHER_HALF_PLANE: 0,
}


@dataclass(frozen=True)
class ManifoldDescriptor:
    """Which manifold, with dimensions; selects every geometry formula."""

    kind: ManifoldKind
    params: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(int(p) for p in self.params))
        if len(self.params) != _PARAM_COUNT[self.kind]:
            raise InvalidArgumentError(
                f"{self.kind.value} expects {_PARAM_COUNT[self.kind]} params, "
                f"got {self.params}"
            )
        if any(p <= 0 for p in self.params):
            raise InvalidArgumentError("manifold parameters must be positive")
        if self.kind is ManifoldKind.STIEFEL:
            n, r = self.params
            if r > n:
                raise InvalidArgumentError(f"Stiefel needs r <= n, got ({n},{r})")
        if self.kind is ManifoldKind.PRODUCT_SPHERE_EUCLID and self.params[0] < 2:
            raise InvalidArgumentError("product sphere factors need d0 >= 2")

    @property
    def ambient_dim(self) -> int:
        return _ambient_dim(self.kind, self.params)

    @property
    def metric_family(self) -> MetricFamily:
        return _METRIC_OF_KIND[self.kind]

    def to_json_obj(self) -> dict:
        return {"kind": self.kind.value, "params": list(self.params)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ManifoldDescriptor":
        try:
            kind = ManifoldKind(obj["kind"])
        except (KeyError, ValueError) as exc:
            raise InvalidArgumentError(f"bad manifold descriptor {obj!r}") from exc
        return cls(kind, tuple(obj.get("params", ())))


def circle() -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.CIRCLE)


def sphere(d: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.SPHERE, (d,))


def stiefel(n: int, r: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.STIEFEL, (n, r))


def product_sphere_euclid(d0: int, d1: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.PRODUCT_SPHERE_EUCLID, (d0, d1))


def hyperboloid(d: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.HYPERBOLOID, (d,))


def fisher_half_plane() -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.FISHER_HALF_PLANE)


def _as_coords(manifold: ManifoldDescriptor, coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=float).reshape(-1)
    if arr.shape[0] != manifold.ambient_dim:
        raise InvalidArgumentError(
            f"expected {manifold.ambient_dim} coordinates for "
            f"{manifold.kind.value}, got {arr.shape[0]}"
        )
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Point:
    """A point on the manifold in ambient (chart, for Fisher) coordinates."""

    manifold: ManifoldDescriptor
    coords: np.ndarray = field(repr=True)

    def __post_init__(self):
        arr = _as_coords(self.manifold, self.coords)
        object.__setattr__(self, "coords", arr)
        res = self.residual()
        if res > ON_MANIFOLD_TOL:
            raise InvalidArgumentError(
                f"coordinates are off the manifold (residual {res:.3e})"
            )

    def residual(self) -> float:
        """On-manifold defect; see the per-kind implementations."""
        from .kinds import implementation_for

        return implementation_for(self.manifold).point_residual(self.coords)

    def matrix(self) -> np.ndarray:
        """Stiefel coordinates reshaped to (n, r)."""
        if self.manifold.kind is not ManifoldKind.STIEFEL:
            raise InvalidArgumentError("matrix() is a Stiefel accessor")
        n, r = self.manifold.params
        return self.coords.reshape(n, r)


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector carried together with its base point."""

    base: Point
    coords: np.ndarray

    def __post_init__(self):
        arr = _as_coords(self.base.manifold, self.coords)
        object.__setattr__(self, "coords", arr)
        from .kinds import implementation_for

        impl = implementation_for(self.base.manifold)
        res = impl.tangency_residual(self.base.coords, arr)
        if res > TANGENCY_TOL:
            raise InvalidArgumentError(
                f"coordinates are not tangent at the base point (residual {res:.3e})"
            )

    @property
    def manifold(self) -> ManifoldDescriptor:
        return self.base.manifold

    def matrix(self) -> np.ndarray:
        if self.manifold.kind is not ManifoldKind.STIEFEL:
            raise InvalidArgumentError("matrix() is a Stiefel accessor")
        n, r = self.manifold.params
        return self.coords.reshape(n, r)


class RetractionVariant(enum.Enum):
    EXPONENTIAL = "exponential"
    METRIC_PROJECTION = "metric_projection"
    STEREOGRAPHIC = "stereographic"
    # Plain chart addition; the cheap first-order map used on the Fisher
    # half-plane (and the first-order exemplar in the retraction-order suite).
    CHART_ADDITIVE = "chart_additive"


@dataclass(frozen=True)
class RetractionScheme:
    """Retraction selector.

    Stereographic is admitted only on circle/sphere, where the curve is
    traced from the antipode of the base point; chart-additive only on the
    Fisher half-plane.
    """

    variant: RetractionVariant = RetractionVariant.EXPONENTIAL

    def admissible_for(self, manifold: ManifoldDescriptor) -> bool:
        kind = manifold.kind
        if self.variant is RetractionVariant.STEREOGRAPHIC:
            return kind in (ManifoldKind.CIRCLE, ManifoldKind.SPHERE)
        if self.variant is RetractionVariant.CHART_ADDITIVE:
            return kind is ManifoldKind.FISHER_HALF_PLANE
        if self.variant is RetractionVariant.METRIC_PROJECTION:
            return kind in EUCLIDEAN_EMBEDDED_KINDS or kind is ManifoldKind.HYPERBOLOID
        return True


EXPONENTIAL = RetractionScheme(RetractionVariant.EXPONENTIAL)
METRIC_PROJECTION = RetractionScheme(RetractionVariant.METRIC_PROJECTION)
STEREOGRAPHIC = RetractionScheme(RetractionVariant.STEREOGRAPHIC)
CHART_ADDITIVE = RetractionScheme(RetractionVariant.CHART_ADDITIVE)
