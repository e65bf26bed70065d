"""Pose-centered, orientation-aligned local floorplan crops.

A crop samples the map around a pose with the camera's facing direction
mapped to the crop's "up" axis (row 0). Occupancy and texture are categorical,
so lookups are nearest-neighbor; samples outside the map take the pad value
(wall for occupancy, 0 for texture).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import OutOfBoundsError, ValidationError
from .floorplan import FloorPlan, Pose, write_pgm

OCCUPANCY_ONLY = "occupancy"
OCCUPANCY_TEXTURE = "occupancy+texture"

PAD_OCCUPANCY = 1  # outside the building behaves like wall
PAD_TEXTURE = 0


@dataclass(frozen=True)
class CropSpec:
    side_m: float = 5.0
    out_px: int | None = None  # default: side_m / map resolution, rounded
    channels: str = OCCUPANCY_TEXTURE

    def __post_init__(self):
        if not self.side_m > 0:
            raise ValidationError("side_m must be > 0")
        if self.out_px is not None and self.out_px < 2:
            raise ValidationError("out_px must be >= 2")
        if self.channels not in (OCCUPANCY_ONLY, OCCUPANCY_TEXTURE):
            raise ValidationError(f"unknown channel mode {self.channels!r}")

    def resolve_px(self, plan: FloorPlan) -> int:
        if self.out_px is not None:
            return self.out_px
        return max(2, int(round(self.side_m / plan.resolution)))


@dataclass(frozen=True)
class Crop:
    pixels: np.ndarray  # (out_px, out_px, channels) uint8
    meters_per_px: float
    source_pose: Pose

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8).copy()
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def out_px(self) -> int:
        return self.pixels.shape[0]

    @property
    def n_channels(self) -> int:
        return self.pixels.shape[2]

    def occupancy(self) -> np.ndarray:
        return self.pixels[:, :, 0]

    def texture(self) -> np.ndarray | None:
        if self.pixels.shape[2] < 2:
            return None
        return self.pixels[:, :, 1]


def extract_crop(plan: FloorPlan, pose: Pose, spec: CropSpec) -> Crop:
    """Nearest-neighbor crop centered on the pose, facing direction up.

    The crop window may overhang the map; overhanging samples are padded.
    Sample points are pixel centers; with an odd out_px and meters_per_px
    equal to the map resolution they land exactly on cell centers, which makes
    quarter-turn rotations of the pose exact quarter-turns of the raster.
    """
    if not plan.in_bounds(pose.x, pose.y):
        raise OutOfBoundsError(f"crop pose ({pose.x}, {pose.y}) outside map")
    px = spec.resolve_px(plan)
    mpp = spec.side_m / px
    c = (px - 1) / 2.0
    u = np.arange(px, dtype=float)  # columns, left to right
    v = np.arange(px, dtype=float)  # rows, top to bottom
    u_loc = (u[None, :] - c) * mpp  # right of facing
    v_loc = (c - v[:, None]) * mpp  # along facing
    cos_t = math.cos(pose.theta)
    sin_t = math.sin(pose.theta)
    # local up -> facing direction, local right -> 90 deg clockwise from it
    wx = pose.x + u_loc * sin_t + v_loc * cos_t
    wy = pose.y - u_loc * cos_t + v_loc * sin_t

    cols = np.floor((wx - plan.origin[0]) / plan.resolution).astype(np.int64)
    rows = np.floor((wy - plan.origin[1]) / plan.resolution).astype(np.int64)
    inside = (
        (cols >= 0)
        & (cols < plan.width_cells)
        & (rows >= 0)
        & (rows < plan.height_cells)
    )
    r = np.clip(rows, 0, plan.height_cells - 1)
    q = np.clip(cols, 0, plan.width_cells - 1)

    occ = np.where(inside, plan.occupancy[r, q].astype(np.uint8), PAD_OCCUPANCY)
    if spec.channels == OCCUPANCY_ONLY:
        pixels = occ[:, :, None]
    else:
        if plan.texture is not None:
            tex = np.where(inside, plan.texture[r, q], PAD_TEXTURE)
        else:
            tex = np.full(occ.shape, PAD_TEXTURE, dtype=np.uint8)
        pixels = np.stack([occ, tex.astype(np.uint8)], axis=2)
    return Crop(pixels=pixels, meters_per_px=mpp, source_pose=pose)


def export_crops(crops: list[Crop], out_dir: str, prefix: str = "crop") -> str:
    """Write one graymap per channel per crop plus an index JSON mapping crop
    files to their source poses. Returns the index path."""
    os.makedirs(out_dir, exist_ok=True)
    index = []
    for i, crop in enumerate(crops):
        entry = {
            "pose": {
                "x": crop.source_pose.x,
                "y": crop.source_pose.y,
                "theta": crop.source_pose.theta,
            },
            "meters_per_px": crop.meters_per_px,
            "channels": {},
        }
        names = ["occupancy", "texture"][: crop.n_channels]
        for ch, name in enumerate(names):
            fname = f"{prefix}_{i:05d}_{name}.pgm"
            values = crop.pixels[:, :, ch]
            if name == "occupancy":
                values = np.where(values > 0, 0, 255).astype(np.uint8)
            write_pgm(os.path.join(out_dir, fname), values)
            entry["channels"][name] = fname
        index.append(entry)
    index_path = os.path.join(out_dir, f"{prefix}_index.json")
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    return index_path
