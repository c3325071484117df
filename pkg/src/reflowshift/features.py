"""Assembly records and the canonical 48-factor feature schema.

One record is one component placement event: the component, its pad
pair, the two inspected paste deposits, the placement measurement and
(after reflow) the measured shift targets.  ``extract_features`` turns a
record into the fixed, ordered 48-entry vector grouped into seven
categories:

    component geometry (4)  - body length/width, size code, type code
    pad geometry (4)        - pad length/width, pitch, single-pad area
    paste inspection (12)   - volume/area/height x avg/diff/div, paste offset x/y/rot
    placement inspection (4)- placement offset x/y/rot, placement pressure
    paste-pad relative (9)  - contact/non-contact/effective-volume x avg/diff/div
    placement-paste relative (9) - offset x/y/rot vs mean paste pose,
                              paste-component contact area and effective
                              volume x avg/diff/div
    placement-pad relative (6)   - offset x/y/rot vs the pad-pair frame,
                              per-end body overhang area x avg/diff/div

Aggregation direction is fixed: diff = pad1 - pad2, div = pad1 / pad2.
Paste and placement offsets are reported relative to the reference point
(the pad-center midpoint).  Paste footprints are reconstructed from the
inspected area as a rectangle with its pad's aspect ratio, centered at
the pad center plus the printed offset; the inspection machine reports
only scalars, so the footprint shape is a documented modeling choice.

Units: areas mm^2, volumes mm^3, lengths mm, linear offsets um, angles
degrees, pressure in machine units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisorTooSmall, InvalidRecord
from .geometry import (
    PadPair,
    Pose,
    Rect2D,
    contact_area,
    effective_volume,
    noncontact_area,
    relative_pose,
    wrap_angle,
)

SCHEMA_VERSION = "1"

RESISTOR = -1
CAPACITOR = 1

# size class -> (body length mm, body width mm)
SIZE_CLASSES = {"1005": (1.0, 0.5), "0603": (0.6, 0.3), "0402": (0.4, 0.2)}
# ordinal coding, smallest body first
SIZE_CODES = {"0402": 0, "0603": 1, "1005": 2}

_DIV_FLOOR = 1e-9

UM_PER_MM = 1000.0


@dataclass(frozen=True)
class ComponentSpec:
    """A passive chip component: resistor/capacitor in one of three sizes."""

    type_code: int  # -1 resistor, +1 capacitor
    size_class: str  # "1005" | "0603" | "0402"
    length: float  # mm, along x
    width: float   # mm, along y

    def __post_init__(self):
        if self.type_code not in (RESISTOR, CAPACITOR):
            raise ValueError(f"type_code must be -1 or +1, got {self.type_code}")
        expected = SIZE_CLASSES.get(self.size_class)
        if expected is None or expected != (self.length, self.width):
            raise ValueError(
                f"unknown component geometry {self.size_class}/{self.length}x{self.width}"
            )

    @classmethod
    def from_label(cls, label: str) -> "ComponentSpec":
        """Build from a label like 'R0603' or 'C1005'."""
        kind, size = label[0].upper(), label[1:]
        if kind not in ("R", "C") or size not in SIZE_CLASSES:
            raise ValueError(f"unknown component label {label!r}")
        length, width = SIZE_CLASSES[size]
        return cls(RESISTOR if kind == "R" else CAPACITOR, size, length, width)

    @property
    def label(self) -> str:
        return ("R" if self.type_code == RESISTOR else "C") + self.size_class


@dataclass(frozen=True)
class PasteDeposit:
    """One inspected solder paste deposit on one pad."""

    volume: float  # mm^3
    area: float    # mm^2
    height: float  # mm
    offset: Pose   # printed offset relative to its own pad center (um, um, deg)

    def __post_init__(self):
        if not (self.volume > 0.0 and self.area > 0.0 and self.height > 0.0):
            raise ValueError("paste volume, area and height must be positive")


@dataclass(frozen=True)
class PlacementMeasure:
    """Pre-reflow optical placement measurement."""

    offset: Pose     # relative to the reference point
    pressure: float  # machine units

    def __post_init__(self):
        if not self.pressure > 0.0:
            raise ValueError("placement pressure must be positive")


@dataclass(frozen=True)
class TargetTriple:
    """Component shift: post-reflow pose minus pre-reflow pose."""

    shift_x: float    # um
    shift_y: float    # um
    shift_rot: float  # deg

    def __post_init__(self):
        if not (-180.0 < self.shift_rot <= 180.0):
            raise ValueError(f"shift_rot {self.shift_rot} outside (-180, 180]")


@dataclass(frozen=True)
class AssemblyRecord:
    """Everything measured for one placement event, plus identifiers."""

    component: ComponentSpec
    pads: PadPair
    paste1: PasteDeposit
    paste2: PasteDeposit
    placement: PlacementMeasure
    targets: TargetTriple | None = None
    board_id: int = 0
    combination_id: int = 0
    replicate_id: int = 0


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    category: str
    unit: str
    definition: str


def _agg_specs(stem: str, category: str, unit: str, what: str) -> list[FeatureSpec]:
    return [
        FeatureSpec(f"{stem}_avg", category, unit, f"mean of {what} over pad 1 and pad 2"),
        FeatureSpec(f"{stem}_diff", category, unit, f"{what}: pad 1 minus pad 2"),
        FeatureSpec(f"{stem}_div", category, "ratio", f"{what}: pad 1 divided by pad 2"),
    ]


def _build_schema() -> tuple[FeatureSpec, ...]:
    s: list[FeatureSpec] = []
    cg = "component_geometry"
    s += [
        FeatureSpec("comp_length", cg, "mm", "component body length along x"),
        FeatureSpec("comp_width", cg, "mm", "component body width along y"),
        FeatureSpec("comp_size_code", cg, "code", "size class ordinal: 0402=0, 0603=1, 1005=2"),
        FeatureSpec("comp_type_code", cg, "code", "-1 resistor, +1 capacitor"),
    ]
    pg = "pad_geometry"
    s += [
        FeatureSpec("pad_length", pg, "mm", "pad extent along x"),
        FeatureSpec("pad_width", pg, "mm", "pad extent along y"),
        FeatureSpec("pad_pitch", pg, "mm", "center-to-center distance of the two pads"),
        FeatureSpec("pad_area", pg, "mm^2", "area of a single pad"),
    ]
    pi = "paste_inspection"
    s += _agg_specs("paste_volume", pi, "mm^3", "inspected paste volume")
    s += _agg_specs("paste_area", pi, "mm^2", "inspected paste area")
    s += _agg_specs("paste_height", pi, "mm", "inspected paste height")
    s += [
        FeatureSpec("paste_offset_x", pi, "um", "mean paste x offset from the reference point"),
        FeatureSpec("paste_offset_y", pi, "um", "mean paste y offset from the reference point"),
        FeatureSpec("paste_offset_rot", pi, "deg", "mean paste rotation"),
    ]
    pl = "placement_inspection"
    s += [
        FeatureSpec("place_offset_x", pl, "um", "placement x offset from the reference point"),
        FeatureSpec("place_offset_y", pl, "um", "placement y offset from the reference point"),
        FeatureSpec("place_offset_rot", pl, "deg", "placement rotation"),
        FeatureSpec("place_pressure", pl, "machine units", "placement pressure"),
    ]
    ppr = "paste_pad_relative"
    s += _agg_specs("pp_contact_area", ppr, "mm^2", "paste-on-pad contact area")
    s += _agg_specs("pp_noncontact_area", ppr, "mm^2", "paste area off its pad")
    s += _agg_specs("pp_effective_volume", ppr, "mm^3", "paste volume over the pad contact")
    plp = "placement_paste_relative"
    s += [
        FeatureSpec("plp_rel_x", plp, "um", "placement x offset minus mean paste x offset"),
        FeatureSpec("plp_rel_y", plp, "um", "placement y offset minus mean paste y offset"),
        FeatureSpec("plp_rel_rot", plp, "deg", "placement rotation minus mean paste rotation"),
    ]
    s += _agg_specs("pc_contact_area", plp, "mm^2", "paste contact area with the component body")
    s += _agg_specs("pc_effective_volume", plp, "mm^3", "paste volume over the component contact")
    plpd = "placement_pad_relative"
    s += [
        FeatureSpec("plpad_rel_x", plpd, "um", "placement x offset in the pad-pair frame"),
        FeatureSpec("plpad_rel_y", plpd, "um", "placement y offset in the pad-pair frame"),
        FeatureSpec("plpad_rel_rot", plpd, "deg", "placement rotation in the pad-pair frame"),
    ]
    s += _agg_specs("overhang_area", plpd, "mm^2",
                    "per-end component body area outside both pads")
    return tuple(s)


_SCHEMA = _build_schema()
FEATURE_NAMES = tuple(spec.name for spec in _SCHEMA)
FEATURE_COUNT = len(_SCHEMA)
CATEGORIES = tuple(dict.fromkeys(spec.category for spec in _SCHEMA))

assert FEATURE_COUNT == 48


def feature_schema() -> tuple[FeatureSpec, ...]:
    """The canonical ordered feature schema (name, category, unit, definition)."""
    return _SCHEMA


@dataclass(eq=False)
class FeatureVector:
    """One record's features in schema order."""

    values: np.ndarray
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (FEATURE_COUNT,):
            raise ValueError(f"expected {FEATURE_COUNT} features, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite entries")

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(FEATURE_NAMES, self.values)}


def aggregate(v1: float, v2: float) -> tuple[float, float, float]:
    """(average, pad1 - pad2, pad1 / pad2) of a per-pad quantity."""
    if abs(v2) < _DIV_FLOOR:
        raise DivisorTooSmall(f"pad-2 value {v2} too small for a ratio")
    return (0.5 * (v1 + v2), v1 - v2, v1 / v2)


def paste_footprint(deposit: PasteDeposit, pad: Rect2D) -> Rect2D:
    """Reconstruct the deposit outline from its inspected area.

    Rectangle with the pad's aspect ratio scaled to the inspected area,
    centered at the pad center plus the printed offset, rotated by the
    printed rotation.
    """
    aspect = pad.length / pad.width
    w = math.sqrt(deposit.area / aspect)
    return Rect2D(
        pad.center_x + deposit.offset.dx / UM_PER_MM,
        pad.center_y + deposit.offset.dy / UM_PER_MM,
        aspect * w,
        w,
        deposit.offset.dtheta,
    )


def component_footprint(record: AssemblyRecord) -> Rect2D:
    """Component body rectangle posed at the measured placement offset."""
    p = record.placement.offset
    return Rect2D(
        p.dx / UM_PER_MM,
        p.dy / UM_PER_MM,
        record.component.length,
        record.component.width,
        p.dtheta,
    )


def component_halves(record: AssemblyRecord) -> tuple[Rect2D, Rect2D]:
    """The component body split crosswise into its two termination ends.

    Each half is paired with the pad it points toward (end 1 with pad 1),
    judged by the direction of the half's center from the body center.
    """
    body = component_footprint(record)
    t = math.radians(body.rotation)
    c, s = math.cos(t), math.sin(t)
    q = 0.25 * body.length
    halves = []
    for sign in (-1.0, 1.0):
        halves.append(Rect2D(
            body.center_x + sign * q * c,
            body.center_y + sign * q * s,
            0.5 * body.length,
            body.width,
            body.rotation,
        ))
    # Align each half with its pad by direction from the body center.
    pads = (record.pads.pad1, record.pads.pad2)
    d0 = ((halves[0].center_x - body.center_x) * (pads[0].center_x - body.center_x)
          + (halves[0].center_y - body.center_y) * (pads[0].center_y - body.center_y))
    if d0 >= 0.0:
        return halves[0], halves[1]
    return halves[1], halves[0]


def mean_paste_pose(record: AssemblyRecord) -> Pose:
    """Mean deposit pose relative to the reference point.

    Each deposit's position is its pad center plus its printed offset;
    the pad centers are symmetric about the reference point.
    """
    p1, p2 = record.paste1.offset, record.paste2.offset
    x1 = p1.dx + record.pads.pad1.center_x * UM_PER_MM
    x2 = p2.dx + record.pads.pad2.center_x * UM_PER_MM
    y1 = p1.dy + record.pads.pad1.center_y * UM_PER_MM
    y2 = p2.dy + record.pads.pad2.center_y * UM_PER_MM
    return Pose(0.5 * (x1 + x2), 0.5 * (y1 + y2), wrap_angle(0.5 * (p1.dtheta + p2.dtheta)))


def _area_features(pads: tuple[Rect2D, Rect2D],
                   footprints: tuple[Rect2D, Rect2D],
                   volumes: tuple[float, float],
                   body: Rect2D,
                   halves: tuple[Rect2D, Rect2D]) -> list[float]:
    """The area-derived relative features, in schema block order.

    Depends only on relative geometry: translating every rectangle by
    the same offset leaves the result unchanged.
    """
    contact = [contact_area(fp, pad) for fp, pad in zip(footprints, pads)]
    noncontact = [noncontact_area(fp, pad) for fp, pad in zip(footprints, pads)]
    effvol = [effective_volume(v, fp, pad)
              for v, fp, pad in zip(volumes, footprints, pads)]
    pc_contact = [contact_area(fp, body) for fp in footprints]
    pc_effvol = [effective_volume(v, fp, body) for v, fp in zip(volumes, footprints)]
    overhang = [
        half.area - contact_area(half, pads[0]) - contact_area(half, pads[1])
        for half in halves
    ]
    out: list[float] = []
    for pair in (contact, noncontact, effvol):
        out += aggregate(pair[0], pair[1])
    for pair in (pc_contact, pc_effvol):
        out += aggregate(pair[0], pair[1])
    out += aggregate(overhang[0], overhang[1])
    return out


def extract_features(record: AssemblyRecord) -> FeatureVector:
    """Compute the 48-entry feature vector for one record.

    Deterministic; raises InvalidRecord when a ratio denominator is
    degenerate (the record should then be treated as unusable).
    """
    comp, pads = record.component, record.pads
    try:
        fp1 = paste_footprint(record.paste1, pads.pad1)
        fp2 = paste_footprint(record.paste2, pads.pad2)
        body = component_footprint(record)
        halves = component_halves(record)
        paste_pose = mean_paste_pose(record)
        place = record.placement.offset

        vals: list[float] = [
            comp.length, comp.width,
            float(SIZE_CODES[comp.size_class]), float(comp.type_code),
            pads.pad1.length, pads.pad1.width, pads.pitch, pads.pad1.area,
        ]
        vals += aggregate(record.paste1.volume, record.paste2.volume)
        vals += aggregate(record.paste1.area, record.paste2.area)
        vals += aggregate(record.paste1.height, record.paste2.height)
        vals += [paste_pose.dx, paste_pose.dy, paste_pose.dtheta]
        vals += [place.dx, place.dy, place.dtheta, record.placement.pressure]

        area_block = _area_features(
            (pads.pad1, pads.pad2), (fp1, fp2),
            (record.paste1.volume, record.paste2.volume), body, halves,
        )
        vals += area_block[:9]  # paste-pad relative

        rel_paste = relative_pose(place, paste_pose)
        vals += [rel_paste.dx, rel_paste.dy, rel_paste.dtheta]
        vals += area_block[9:15]  # paste-component contact and effective volume

        rel_pad = relative_pose(place, Pose(0.0, 0.0, 0.0))
        vals += [rel_pad.dx, rel_pad.dy, rel_pad.dtheta]
        vals += area_block[15:]  # per-end overhang
    except DivisorTooSmall as exc:
        raise InvalidRecord(
            f"record (board {record.board_id}, combination {record.combination_id}, "
            f"replicate {record.replicate_id}) has a degenerate pad ratio: {exc}"
        ) from exc
    return FeatureVector(np.array(vals, dtype=np.float64))
