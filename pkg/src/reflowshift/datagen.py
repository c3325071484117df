"""Synthetic assembly-data generator with a toy self-alignment ground truth.

The design: 33 distinct combinations of nine process factors (paste
volume level and pad asymmetry, printed offset x/y/rotation, placement
pressure, placement offset x/y/rotation), each placed for all six
component types with a configurable number of replications, plus
per-record measurement noise.  Factor levels cycle through a three-level
orthogonal array (27 runs from the GF(3) construction) extended by six
documented corner runs.

The shift ground truth is deliberately NOT a physical model.  It encodes
three known qualitative relations so learners can be validated against a
recoverable structure: rotation shift reverses the placement rotation;
x shift follows the placement x offset plus a paste-volume-asymmetry
term; y shift follows the placement y offset plus a term driven by how
much paste sits off-pad, signed by the printed y offset.  All
coefficients and noise scales live in the config.

Pad and stencil geometry are invented constants scaled to the component:
pad length 0.5 x body length, pad width 1.1 x body width, pad pitch
0.9 x body length, and the paste aperture prints 6% oversize in each
linear dimension so some paste always overhangs its pad (keeping the
non-contact ratios away from zero denominators).

Every record draws from its own seed-derived stream, so generation is
deterministic, order-independent and embarrassingly parallel; the
canonical record order is (combination, component type, replicate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .features import (
    FEATURE_NAMES,
    AssemblyRecord,
    ComponentSpec,
    PasteDeposit,
    PlacementMeasure,
    TargetTriple,
    extract_features,
    mean_paste_pose,
    paste_footprint,
)
from .geometry import PadPair, Pose, Rect2D, noncontact_area, wrap_angle
from .preprocess import Dataset

PAD_LENGTH_RATIO = 0.5
PAD_WIDTH_RATIO = 1.1
PAD_PITCH_RATIO = 0.9
PASTE_OVERPRINT = 1.06  # linear aperture scale vs pad
PASTE_HEIGHT_MM = 0.12

COMPONENT_TYPES = ("R1005", "C1005", "R0603", "C0603", "R0402", "C0402")

# Three-level factor settings, one tuple (low, nominal, high) per factor.
# Printed-offset levels stay small relative to placement offsets so the
# placement-minus-paste relative features remain informative stand-ins
# for the placement offsets rather than confounded ones.
FACTOR_LEVELS = {
    "volume_level": (0.85, 1.0, 1.15),
    "volume_asymmetry": (-0.12, 0.0, 0.12),
    "paste_dx": (-10.0, 0.0, 10.0),     # um
    "paste_dy": (-8.0, 0.0, 8.0),       # um
    "paste_rot": (-1.0, 0.0, 1.0),      # deg
    "pressure": (1.0, 2.0, 3.0),        # machine units
    "place_dx": (-40.0, 0.0, 40.0),     # um
    "place_dy": (-35.0, 0.0, 35.0),     # um
    "place_rot": (-4.0, 0.0, 4.0),      # deg
}
_FACTOR_ORDER = tuple(FACTOR_LEVELS)


@dataclass(frozen=True)
class DesignPoint:
    combination_id: int
    volume_level: float
    volume_asymmetry: float
    paste_dx: float
    paste_dy: float
    paste_rot: float
    pressure: float
    place_dx: float
    place_dy: float
    place_rot: float


@dataclass
class ShiftCoefficients:
    """Toy ground-truth model (qualitative relations, not physics)."""

    kappa_x: float = 0.9              # fraction of placement x offset reversed
    kappa_y: float = 0.9
    kappa_rot: float = 0.9
    volume_ratio_um: float = 30.0     # um shift per unit (vol diff / vol avg)
    noncontact_um_per_mm2: float = 60.0
    noise_x_um: float = 5.0
    noise_y_um: float = 6.0
    noise_rot_deg: float = 0.5


@dataclass
class GenConfig:
    seed: int = 0
    replications: int = 20
    missing_rate: float = 0.005
    limit: int | None = None          # optional seeded down-sample
    shift: ShiftCoefficients = field(default_factory=ShiftCoefficients)
    volume_noise_frac: float = 0.03
    area_noise_frac: float = 0.02
    height_noise_frac: float = 0.02
    pressure_noise_frac: float = 0.02
    paste_offset_noise_um: float = 3.0
    paste_rot_noise_deg: float = 0.12
    place_offset_noise_um: float = 8.0
    place_rot_noise_deg: float = 0.4

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not (0.0 <= self.missing_rate <= 0.1):
            raise ValueError("missing_rate must be in [0, 0.1]")
        for name in ("volume_noise_frac", "area_noise_frac", "height_noise_frac",
                     "pressure_noise_frac", "paste_offset_noise_um",
                     "paste_rot_noise_deg", "place_offset_noise_um",
                     "place_rot_noise_deg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def design_points() -> list[DesignPoint]:
    """The 33 factor combinations: a 27-run orthogonal array plus 6 corners."""
    rows: list[tuple[int, ...]] = []
    for a in range(3):
        for b in range(3):
            for c in range(3):
                rows.append((
                    a, b, c,
                    (a + b) % 3, (a + 2 * b) % 3,
                    (a + c) % 3, (a + 2 * c) % 3,
                    (b + c) % 3, (b + 2 * c) % 3,
                ))
    nominal = (1,) * 9
    corners = [nominal]
    for factor, level in (("place_dx", 2), ("place_dx", 0), ("place_dy", 2),
                          ("place_rot", 2), ("volume_level", 2)):
        run = list(nominal)
        run[_FACTOR_ORDER.index(factor)] = level
        corners.append(tuple(run))
    rows.extend(corners)
    assert len(rows) == 33 and len(set(rows)) == 33

    points = []
    for cid, levels in enumerate(rows, start=1):
        values = {
            name: FACTOR_LEVELS[name][lvl]
            for name, lvl in zip(_FACTOR_ORDER, levels)
        }
        points.append(DesignPoint(combination_id=cid, **values))
    return points


def _pad_pair(comp: ComponentSpec) -> PadPair:
    pad_len = PAD_LENGTH_RATIO * comp.length
    pad_wid = PAD_WIDTH_RATIO * comp.width
    half_pitch = 0.5 * PAD_PITCH_RATIO * comp.length
    return PadPair(
        Rect2D(-half_pitch, 0.0, pad_len, pad_wid),
        Rect2D(half_pitch, 0.0, pad_len, pad_wid),
    )


def _record_streams(seed: int, combination_id: int, type_index: int,
                    replicate: int) -> tuple[np.random.Generator, np.random.Generator]:
    meas = np.random.default_rng(
        np.random.SeedSequence((seed, combination_id, type_index, replicate, 0)))
    truth = np.random.default_rng(
        np.random.SeedSequence((seed, combination_id, type_index, replicate, 1)))
    return meas, truth


def _build_record(point: DesignPoint, type_index: int, replicate: int,
                  config: GenConfig, rng: np.random.Generator) -> AssemblyRecord:
    comp = ComponentSpec.from_label(COMPONENT_TYPES[type_index])
    pads = _pad_pair(comp)
    pad = pads.pad1
    area_nominal = (pad.length * PASTE_OVERPRINT) * (pad.width * PASTE_OVERPRINT)
    volume_nominal = area_nominal * PASTE_HEIGHT_MM

    deposits = []
    for side in (+1.0, -1.0):
        vol = (volume_nominal * point.volume_level
               * (1.0 + side * 0.5 * point.volume_asymmetry)
               * max(0.5, 1.0 + config.volume_noise_frac * rng.standard_normal()))
        area = area_nominal * max(0.5, 1.0 + config.area_noise_frac * rng.standard_normal())
        height = PASTE_HEIGHT_MM * max(0.5, 1.0 + config.height_noise_frac * rng.standard_normal())
        offset = Pose(
            point.paste_dx + config.paste_offset_noise_um * rng.standard_normal(),
            point.paste_dy + config.paste_offset_noise_um * rng.standard_normal(),
            wrap_angle(point.paste_rot + config.paste_rot_noise_deg * rng.standard_normal()),
        )
        deposits.append(PasteDeposit(vol, area, height, offset))

    placement = PlacementMeasure(
        offset=Pose(
            point.place_dx + config.place_offset_noise_um * rng.standard_normal(),
            point.place_dy + config.place_offset_noise_um * rng.standard_normal(),
            wrap_angle(point.place_rot + config.place_rot_noise_deg * rng.standard_normal()),
        ),
        pressure=point.pressure * max(0.5, 1.0 + config.pressure_noise_frac * rng.standard_normal()),
    )
    return AssemblyRecord(
        component=comp,
        pads=pads,
        paste1=deposits[0],
        paste2=deposits[1],
        placement=placement,
        targets=None,
        board_id=replicate,
        combination_id=point.combination_id,
        replicate_id=replicate,
    )


def design_grid(config: GenConfig) -> list[AssemblyRecord]:
    """All (combination x component type x replicate) records, measurement
    noise applied, targets not yet assigned."""
    records = []
    for point in design_points():
        for t_idx in range(len(COMPONENT_TYPES)):
            for rep in range(1, config.replications + 1):
                meas, _ = _record_streams(config.seed, point.combination_id, t_idx, rep)
                records.append(_build_record(point, t_idx, rep, config, meas))
    return records


def synth_truth(record: AssemblyRecord, config: GenConfig,
                rng: np.random.Generator) -> TargetTriple:
    """Toy ground-truth shift for one record (noise drawn from `rng`)."""
    co = config.shift
    place = record.placement.offset

    v1, v2 = record.paste1.volume, record.paste2.volume
    volume_ratio = (v1 - v2) / (0.5 * (v1 + v2))

    fp1 = paste_footprint(record.paste1, record.pads.pad1)
    fp2 = paste_footprint(record.paste2, record.pads.pad2)
    nc_avg = 0.5 * (noncontact_area(fp1, record.pads.pad1)
                    + noncontact_area(fp2, record.pads.pad2))
    paste_dy = mean_paste_pose(record).dy
    dy_sign = 0.0 if paste_dy == 0.0 else math.copysign(1.0, paste_dy)

    shift_x = (-co.kappa_x * place.dx
               + co.volume_ratio_um * volume_ratio
               + co.noise_x_um * rng.standard_normal())
    shift_y = (-co.kappa_y * place.dy
               + co.noncontact_um_per_mm2 * nc_avg * dy_sign
               + co.noise_y_um * rng.standard_normal())
    shift_rot = wrap_angle(-co.kappa_rot * place.dtheta
                           + co.noise_rot_deg * rng.standard_normal())
    return TargetTriple(shift_x, shift_y, shift_rot)


def inject_missing(records: list[AssemblyRecord], rate: float,
                   rng: np.random.Generator) -> list[AssemblyRecord]:
    """Blank the targets of ~rate of the records (components lost in reflow)."""
    if not (0.0 <= rate <= 0.1):
        raise ValueError("missing rate must be in [0, 0.1]")
    if rate == 0.0:
        return list(records)
    mask = rng.random(len(records)) < rate
    return [
        replace(rec, targets=None) if hit else rec
        for rec, hit in zip(records, mask)
    ]


def generate_records(config: GenConfig) -> list[AssemblyRecord]:
    """Full generation pipeline: grid, ground truth, missingness, limit."""
    records = []
    for point in design_points():
        for t_idx in range(len(COMPONENT_TYPES)):
            for rep in range(1, config.replications + 1):
                meas, truth = _record_streams(config.seed, point.combination_id, t_idx, rep)
                rec = _build_record(point, t_idx, rep, config, meas)
                rec = replace(rec, targets=synth_truth(rec, config, truth))
                records.append(rec)
    missing_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x6D15)))
    records = inject_missing(records, config.missing_rate, missing_rng)
    if config.limit is not None and config.limit < len(records):
        pick_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5A3B)))
        keep = np.sort(pick_rng.choice(len(records), size=config.limit, replace=False))
        records = [records[i] for i in keep]
    return records


def dataset_from_records(records: list[AssemblyRecord]) -> Dataset:
    """Featurize records into the row-aligned dataset (missing -> NaN)."""
    rows = []
    targets = np.full((len(records), 3), np.nan)
    meta = {
        "board_id": np.empty(len(records), dtype=int),
        "combination_id": np.empty(len(records), dtype=int),
        "replicate_id": np.empty(len(records), dtype=int),
        "component_type": np.empty(len(records), dtype=object),
        "size_class": np.empty(len(records), dtype=object),
    }
    for i, rec in enumerate(records):
        rows.append(extract_features(rec).values)
        if rec.targets is not None:
            targets[i] = (rec.targets.shift_x, rec.targets.shift_y, rec.targets.shift_rot)
        meta["board_id"][i] = rec.board_id
        meta["combination_id"][i] = rec.combination_id
        meta["replicate_id"][i] = rec.replicate_id
        meta["component_type"][i] = rec.component.label[0]
        meta["size_class"][i] = rec.component.size_class
    features = np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return Dataset(features, targets, list(FEATURE_NAMES), meta)
