"""Exact 2-D rectangle geometry in the pad-pair frame.

The pad pair of a two-terminal chip component defines the local frame:
the midpoint of the two pad centers is the origin, the long component
axis is x.  Rectangles (pads, paste footprints, the component body) live
in this frame in millimetres; pose offsets are micrometres and degrees,
counterclockwise positive, wrapped to (-180, 180].

Overlap areas are computed exactly by clipping one convex quadrilateral
against the other (Sutherland-Hodgman), never by an axis-aligned
approximation, so rotated footprints are handled correctly and results
are deterministic.  All functions are pure and safe to call from any
number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Rect2D",
    "PadPair",
    "Pose",
    "wrap_angle",
    "convex_overlap_area",
    "contact_area",
    "noncontact_area",
    "effective_volume",
    "relative_pose",
]

# Pad centers may be off the origin by at most this much (mm).
_CENTER_TOL = 1e-9


def wrap_angle(deg: float) -> float:
    """Wrap an angle in degrees to the interval (-180, 180]."""
    w = math.fmod(deg + 180.0, 360.0)
    if w <= 0.0:
        w += 360.0
    return w - 180.0


@dataclass(frozen=True)
class Rect2D:
    """Rectangle with center, side lengths (mm) and CCW rotation (deg)."""

    center_x: float
    center_y: float
    length: float  # extent along the rectangle's own x axis
    width: float   # extent along the rectangle's own y axis
    rotation: float = 0.0  # about the center, CCW

    def __post_init__(self):
        if not (self.length > 0.0 and self.width > 0.0):
            raise ValueError(
                f"rectangle sides must be positive, got {self.length} x {self.width}"
            )
        if not (-180.0 < self.rotation <= 180.0):
            raise ValueError(f"rotation {self.rotation} outside (-180, 180]")

    @property
    def area(self) -> float:
        return self.length * self.width

    def corners(self) -> list[tuple[float, float]]:
        """The four corner coordinates in counterclockwise order."""
        c = math.cos(math.radians(self.rotation))
        s = math.sin(math.radians(self.rotation))
        hx = 0.5 * self.length
        hy = 0.5 * self.width
        return [
            (self.center_x + dx * c - dy * s, self.center_y + dx * s + dy * c)
            for dx, dy in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy))
        ]

    def translated(self, dx: float, dy: float) -> "Rect2D":
        """The same rectangle moved by (dx, dy) mm."""
        return Rect2D(self.center_x + dx, self.center_y + dy,
                      self.length, self.width, self.rotation)


@dataclass(frozen=True)
class Pose:
    """Planar offset: dx, dy in micrometres, dtheta in degrees CCW."""

    dx: float
    dy: float
    dtheta: float

    def __post_init__(self):
        if not (-180.0 < self.dtheta <= 180.0):
            raise ValueError(f"dtheta {self.dtheta} outside (-180, 180]")


@dataclass(frozen=True)
class PadPair:
    """The two axis-aligned pads of a chip component.

    Their center midpoint is the reference point and must sit at the
    local origin; the pads must not overlap.
    """

    pad1: Rect2D
    pad2: Rect2D

    def __post_init__(self):
        if self.pad1.rotation != 0.0 or self.pad2.rotation != 0.0:
            raise ValueError("pads must be axis aligned (rotation 0)")
        mx = 0.5 * (self.pad1.center_x + self.pad2.center_x)
        my = 0.5 * (self.pad1.center_y + self.pad2.center_y)
        if abs(mx) > _CENTER_TOL or abs(my) > _CENTER_TOL:
            raise ValueError(
                f"pad pair must be centered on the reference point, midpoint ({mx}, {my})"
            )
        # Axis-aligned disjointness check: open interiors must not intersect.
        gap_x = abs(self.pad1.center_x - self.pad2.center_x) - 0.5 * (
            self.pad1.length + self.pad2.length
        )
        gap_y = abs(self.pad1.center_y - self.pad2.center_y) - 0.5 * (
            self.pad1.width + self.pad2.width
        )
        if gap_x < -_CENTER_TOL and gap_y < -_CENTER_TOL:
            raise ValueError("pads overlap")

    @property
    def pitch(self) -> float:
        """Center-to-center distance of the two pads (mm)."""
        return math.hypot(
            self.pad2.center_x - self.pad1.center_x,
            self.pad2.center_y - self.pad1.center_y,
        )


def _clip_by_convex(subject: list[tuple[float, float]],
                    clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Clip a polygon against a convex CCW polygon (Sutherland-Hodgman)."""
    output = subject
    m = len(clip)
    for i in range(m):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % m]
        ex, ey = bx - ax, by - ay
        points = output
        output = []
        px, py = points[-1]
        p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
        for qx, qy in points:
            q_in = ex * (qy - ay) - ey * (qx - ax) >= 0.0
            if q_in != p_in:
                # Segment p-q crosses the edge line; append the crossing.
                dx, dy = qx - px, qy - py
                denom = ex * dy - ey * dx
                t = (ex * (ay - py) - ey * (ax - px)) / denom
                output.append((px + t * dx, py + t * dy))
            if q_in:
                output.append((qx, qy))
            px, py, p_in = qx, qy, q_in
    return output


def _polygon_area(poly: list[tuple[float, float]]) -> float:
    acc = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * abs(acc)


def convex_overlap_area(a: Rect2D, b: Rect2D) -> float:
    """Intersection area of two (possibly rotated) rectangles in mm^2."""
    poly = _clip_by_convex(a.corners(), b.corners())
    if len(poly) < 3:
        return 0.0
    return _polygon_area(poly)


def contact_area(paste_footprint: Rect2D, target: Rect2D) -> float:
    """Area of the paste footprint covered by the target rectangle (mm^2)."""
    return convex_overlap_area(paste_footprint, target)


def noncontact_area(paste_footprint: Rect2D, target: Rect2D) -> float:
    """Area of the paste footprint hanging off the target rectangle (mm^2)."""
    return max(0.0, paste_footprint.area - contact_area(paste_footprint, target))


def effective_volume(volume: float, paste_footprint: Rect2D, target: Rect2D) -> float:
    """Paste volume attributed to the contacted fraction of the footprint.

    Assumes a uniform deposit height, so volume scales with the covered
    area fraction.
    """
    if not volume > 0.0:
        raise ValueError(f"volume must be positive, got {volume}")
    return volume * contact_area(paste_footprint, target) / paste_footprint.area


def relative_pose(subject: Pose, reference: Pose) -> Pose:
    """Pose of `subject` expressed relative to `reference`."""
    return Pose(
        subject.dx - reference.dx,
        subject.dy - reference.dy,
        wrap_angle(subject.dtheta - reference.dtheta),
    )
