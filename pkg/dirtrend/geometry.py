"""
Coordinate machinery for directions in R^3.

Polar coordinates (theta, phi) use theta as colatitude in [0, pi] and phi as
longitude in [0, 2*pi). Cartesian coordinates are unit vectors (x1, x2, x3).
"""

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .errors import DegenerateRowError, DomainError

TWO_PI = 2.0 * math.pi
ROW_EPSILON = 1e-10
UNIT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SphericalPoint:
    """Direction in polar coordinates (radians)."""
    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise DomainError(f"colatitude {self.theta!r} outside [0, pi]")
        if not (0.0 <= self.phi < TWO_PI):
            raise DomainError(f"longitude {self.phi!r} outside [0, 2*pi)")


@dataclass(frozen=True)
class LambertPoint:
    """Projected point in the disk of radius sqrt(2)."""
    u: float
    v: float
    north: bool

    @property
    def hemisphere(self) -> str:
        return 'north' if self.north else 'south'


def atan2_branch(v: float, u: float) -> float:
    """
    Four-quadrant arctangent with range (-pi, pi].

    Evaluated case by case rather than through math.atan2 so the branch for
    u < 0, v = -0.0 lands on +pi.
    """
    if u > 0:
        return math.atan(v / u)
    if u < 0:
        if v >= 0:
            return math.atan(v / u) + math.pi
        return math.atan(v / u) - math.pi
    if v > 0:
        return math.pi / 2
    if v < 0:
        return -math.pi / 2
    raise DomainError("atan2 is undefined at the origin (u, v) = (0, 0)")


def wrap_longitude(phi):
    """Reduce longitudes into [0, 2*pi); scalars in, float out."""
    wrapped = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    # np.mod can round a tiny negative up to exactly 2*pi
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def polar_to_cartesian(point: SphericalPoint) -> np.ndarray:
    """Unit vector with the given polar coordinates."""
    sin_theta = math.sin(point.theta)
    return np.array([
        sin_theta * math.cos(point.phi),
        sin_theta * math.sin(point.phi),
        math.cos(point.theta),
    ])


def cartesian_to_polar(x: Iterable[float]) -> SphericalPoint:
    """
    Polar coordinates of a (nearly) unit vector.

    The vector is renormalized first. At the poles, where x1 = x2 = 0, the
    longitude is set to 0.

    Args:
        x: Three Cartesian components

    Returns:
        SphericalPoint with theta in [0, pi], phi in [0, 2*pi)
    """
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0 or not math.isfinite(norm):
        raise DomainError(f"cannot convert vector with norm {norm} to a direction")
    x1, x2, x3 = (float(c) for c in x / norm)

    theta = math.acos(min(1.0, max(-1.0, x3)))
    if x1 == 0.0 and x2 == 0.0:
        return SphericalPoint(theta, 0.0)

    angle = atan2_branch(x2, x1)
    phi = angle if angle >= 0 else angle + TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return SphericalPoint(theta, phi)


def lambert_project(point: SphericalPoint) -> LambertPoint:
    """
    Lambert azimuthal equal-area projection of the hemisphere containing point.

    Northern points (theta <= pi/2) are projected about the north pole,
    southern points about the south pole; both fill the disk of radius sqrt(2).
    """
    north = point.theta <= math.pi / 2
    if north:
        rho = 2.0 * math.sin(point.theta / 2.0)
    else:
        rho = 2.0 * math.sin((math.pi - point.theta) / 2.0)
    return LambertPoint(rho * math.cos(point.phi), rho * math.sin(point.phi), north)


def normalize_rows(B: np.ndarray, epsilon: float = ROW_EPSILON) -> np.ndarray:
    """
    Rescale every row of B to unit length.

    Raises:
        DegenerateRowError: first row whose norm is below epsilon
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DomainError(f"expected a matrix, got shape {B.shape}")
    norms = np.sqrt(np.sum(B * B, axis=1))
    bad = np.flatnonzero(~(norms >= epsilon))
    if bad.size:
        row = int(bad[0])
        raise DegenerateRowError(row, float(norms[row]), epsilon)
    return B / norms[:, None]


def directions_from_polar(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Stack polar angle arrays into a p x 3 matrix of unit rows."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    sin_theta = np.sin(theta)
    return np.column_stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), np.cos(theta)])


def polar_from_directions(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise cartesian_to_polar; returns (theta, phi) arrays."""
    points = [cartesian_to_polar(row) for row in np.asarray(X, dtype=float)]
    theta = np.array([pt.theta for pt in points])
    phi = np.array([pt.phi for pt in points])
    return theta, phi


def latlon_to_polar(lat_deg, lon_deg) -> Tuple[np.ndarray, np.ndarray]:
    """Latitude/longitude in degrees to (theta, phi) arrays in radians."""
    lat = np.atleast_1d(np.asarray(lat_deg, dtype=float))
    bad = np.flatnonzero((lat < -90.0) | (lat > 90.0))
    if bad.size:
        raise DomainError(f"latitude {float(lat[bad[0]])!r} outside [-90, 90]")
    theta = np.clip(np.radians(90.0 - lat), 0.0, math.pi)
    phi = np.atleast_1d(wrap_longitude(np.radians(np.atleast_1d(lon_deg))))
    return theta, phi


def polar_to_latlon(theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """Polar coordinates to (latitude, longitude) arrays in degrees."""
    return 90.0 - np.degrees(np.asarray(theta, dtype=float)), np.degrees(np.asarray(phi, dtype=float))
