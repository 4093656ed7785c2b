"""Network geometry: 3D positions, distances, and line-of-sight angles.

Elevation is measured from the horizontal plane toward the line of sight
(positive above the horizon), so a hovering relay looking straight down at a
ground node sees elevation -pi/2. Azimuth is the usual atan2(dy, dx) in the
ground plane. All distances are in meters and enter path loss without
carrier-wavelength normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateGeometryError(ValueError):
    """Two entities coincide, so no direction between them is defined."""


@dataclass(frozen=True)
class Position3D:
    """A point in meters. The ground plane is z = 0 and nothing flies below it."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"z must be >= 0, got {self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


def distance_3d(a: Position3D, b: Position3D) -> float:
    """Euclidean distance in meters between two positions."""
    return math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))


def angles_between(a: Position3D, b: Position3D) -> tuple[float, float]:
    """(elevation, azimuth) in radians of the line of sight from ``a`` to ``b``."""
    dx, dy, dz = b.x - a.x, b.y - a.y, b.z - a.z
    horizontal = math.hypot(dx, dy)
    if horizontal == 0.0 and dz == 0.0:
        raise DegenerateGeometryError("degenerate geometry: coincident points")
    return math.atan2(dz, horizontal), math.atan2(dy, dx)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform rectangular array: n_x by n_y elements, spacing in wavelengths."""

    n_x: int
    n_y: int
    spacing_d: float = 0.5

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("array dimensions must be >= 1")
        if self.spacing_d <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y


@dataclass(frozen=True)
class AngleSupport:
    """Angular window: mean elevation/azimuth plus symmetric spreads, radians."""

    mean_elevation: float
    mean_azimuth: float
    spread_elevation: float
    spread_azimuth: float

    def __post_init__(self):
        if self.spread_elevation < 0 or self.spread_azimuth < 0:
            raise ValueError("angle spreads must be >= 0")

    @property
    def center_cosines(self) -> tuple[float, float]:
        """Direction cosines (sin(el)cos(az), sin(el)sin(az)) of the window center."""
        s = math.sin(self.mean_elevation)
        return (s * math.cos(self.mean_azimuth), s * math.sin(self.mean_azimuth))


def los_window(a: Position3D, b: Position3D, half_el: float, half_az: float) -> AngleSupport:
    """Angular window centered on the line of sight from ``a`` toward ``b``."""
    el, az = angles_between(a, b)
    return AngleSupport(el, az, half_el, half_az)


@dataclass
class NetworkLayout:
    """Positions of the BS, every UAV relay, and every ground user.

    Users must split evenly across UAVs (the clustering stage enforces equal
    group sizes), and every UAV's ground-plane coordinates must stay inside the
    rectangular deployment bounds.
    """

    bs: Position3D
    uavs: list[Position3D]
    users: list[Position3D]
    bounds_min: tuple[float, float]
    bounds_max: tuple[float, float]

    def __post_init__(self):
        if len(self.uavs) < 1 or len(self.users) < 1:
            raise ValueError("need at least one UAV and one user")
        if len(self.users) % len(self.uavs) != 0:
            raise ValueError(
                f"{len(self.users)} users cannot split evenly over {len(self.uavs)} UAVs"
            )
        eps = 1e-9
        for i, u in enumerate(self.uavs):
            if not (
                self.bounds_min[0] - eps <= u.x <= self.bounds_max[0] + eps
                and self.bounds_min[1] - eps <= u.y <= self.bounds_max[1] + eps
            ):
                raise ValueError(f"UAV {i} at ({u.x}, {u.y}) outside deployment bounds")

    @property
    def m_uavs(self) -> int:
        return len(self.uavs)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def group_size(self) -> int:
        return len(self.users) // len(self.uavs)

    def users_xy(self) -> np.ndarray:
        return np.array([[u.x, u.y] for u in self.users], dtype=float)

    def uavs_xy(self) -> np.ndarray:
        return np.array([[u.x, u.y] for u in self.uavs], dtype=float)

    def with_uav_xy(self, xy) -> "NetworkLayout":
        """New layout with UAV ground coordinates replaced, heights kept."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(xy) != len(self.uavs):
            raise ValueError("coordinate count does not match UAV count")
        uavs = [
            Position3D(float(p[0]), float(p[1]), u.z) for p, u in zip(xy, self.uavs)
        ]
        return NetworkLayout(self.bs, uavs, self.users, self.bounds_min, self.bounds_max)
