"""Run configuration: one JSON document aggregating every knob, with strict
unknown-key rejection and documented defaults for anything omitted."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .contrastive import MiningSpec, PerturbSpec
from .crops import CropSpec
from .disambig import DisambigConfig
from .errors import ConfigurationError, RaylocError
from .raybins import BinSpec
from .synth import NoiseSpec, WorldSpec


def _section(doc: dict, name: str, allowed: set[str]) -> dict:
    sub = doc.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigurationError(f"config section {name!r} must be an object")
    unknown = set(sub) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown keys in config section {name!r}: {sorted(unknown)}"
        )
    return sub


@dataclass(frozen=True)
class RayParams:
    n_rays: int = 40
    fov_deg: float = 108.0
    max_range_m: float = 10.0

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)


@dataclass(frozen=True)
class GridParams:
    cell_stride_m: float | None = None  # None: map resolution rule
    n_orientations: int = 36


@dataclass(frozen=True)
class BenchParams:
    n_queries: int = 50
    n_worlds: int = 2
    n_anchors: int = 64
    query_seed: int = 1
    sigma_m: float = 0.5


@dataclass(frozen=True)
class EmbedderParams:
    dim: int = 64
    seed: int = 7


@dataclass(frozen=True)
class RunConfig:
    rays: RayParams
    bins: BinSpec
    grid: GridParams
    crop: CropSpec
    perturb: PerturbSpec
    mining: MiningSpec
    disambig: DisambigConfig
    world: WorldSpec
    noise: NoiseSpec
    embedder: EmbedderParams
    bench: BenchParams
    seed: int = 0

    def resolved(self) -> dict:
        """Fully resolved document for echoing into the run directory."""
        return {
            "rays": {
                "n_rays": self.rays.n_rays,
                "fov_deg": self.rays.fov_deg,
                "max_range_m": self.rays.max_range_m,
            },
            "bins": self.bins.to_dict(),
            "grid": {
                "cell_stride_m": self.grid.cell_stride_m,
                "n_orientations": self.grid.n_orientations,
            },
            "crop": {
                "side_m": self.crop.side_m,
                "out_px": self.crop.out_px,
                "channels": self.crop.channels,
            },
            "perturb": {"pos_b_m": self.perturb.pos_b, "ang_b_rad": self.perturb.ang_b},
            "mining": {
                "inner_neg_dist_m": list(self.mining.inner_neg_dist),
                "ori_neg_rotation_rad": self.mining.ori_neg_rotation,
                "n_inner": self.mining.n_inner,
                "n_cross": self.mining.n_cross,
                "n_ori": self.mining.n_ori,
                "seed": self.mining.seed,
            },
            "disambig": {
                "w": self.disambig.w,
                "softmax_temperature": self.disambig.softmax_temperature,
                "x": self.disambig.x,
            },
            "world": {
                "layout": self.world.layout,
                "extent_m": list(self.world.extent),
                "resolution_m": self.world.resolution,
                "texture_policy": self.world.texture_policy,
                "seed": self.world.seed,
            },
            "noise": {
                "depth_sigma_m": self.noise.depth_sigma,
                "dropout": self.noise.dropout,
            },
            "embedder": {"dim": self.embedder.dim, "seed": self.embedder.seed},
            "bench": {
                "n_queries": self.bench.n_queries,
                "n_worlds": self.bench.n_worlds,
                "n_anchors": self.bench.n_anchors,
                "query_seed": self.bench.query_seed,
                "sigma_m": self.bench.sigma_m,
            },
            "seed": self.seed,
        }


TOP_LEVEL_KEYS = {
    "rays",
    "bins",
    "grid",
    "crop",
    "perturb",
    "mining",
    "disambig",
    "world",
    "noise",
    "embedder",
    "bench",
    "seed",
}


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigurationError(f"unknown top-level config keys: {sorted(unknown)}")
    try:
        rays = _section(doc, "rays", {"n_rays", "fov_deg", "max_range_m"})
        bins = _section(doc, "bins", {"d_min_m", "d_max_m", "n_bins", "gamma"})
        grid = _section(doc, "grid", {"cell_stride_m", "n_orientations"})
        crop = _section(doc, "crop", {"side_m", "out_px", "channels"})
        perturb = _section(doc, "perturb", {"pos_b_m", "ang_b_rad"})
        mining = _section(
            doc,
            "mining",
            {"inner_neg_dist_m", "ori_neg_rotation_rad", "n_inner", "n_cross", "n_ori", "seed"},
        )
        disambig = _section(doc, "disambig", {"w", "softmax_temperature", "x"})
        world = _section(
            doc, "world", {"layout", "extent_m", "resolution_m", "texture_policy", "seed"}
        )
        noise = _section(doc, "noise", {"depth_sigma_m", "dropout"})
        embedder = _section(doc, "embedder", {"dim", "seed"})
        bench = _section(
            doc, "bench", {"n_queries", "n_worlds", "n_anchors", "query_seed", "sigma_m"}
        )
        return RunConfig(
            rays=RayParams(
                n_rays=int(rays.get("n_rays", 40)),
                fov_deg=float(rays.get("fov_deg", 108.0)),
                max_range_m=float(rays.get("max_range_m", 10.0)),
            ),
            bins=BinSpec.from_dict(bins),
            grid=GridParams(
                cell_stride_m=(
                    float(grid["cell_stride_m"])
                    if grid.get("cell_stride_m") is not None
                    else None
                ),
                n_orientations=int(grid.get("n_orientations", 36)),
            ),
            crop=CropSpec(
                side_m=float(crop.get("side_m", 5.0)),
                out_px=int(crop["out_px"]) if crop.get("out_px") is not None else None,
                channels=crop.get("channels", "occupancy+texture"),
            ),
            perturb=PerturbSpec(
                pos_b=float(perturb.get("pos_b_m", 0.5)),
                ang_b=float(perturb.get("ang_b_rad", 0.26)),
            ),
            mining=MiningSpec(
                inner_neg_dist=tuple(mining.get("inner_neg_dist_m", (1.5, 3.0))),
                ori_neg_rotation=float(mining.get("ori_neg_rotation_rad", math.pi)),
                n_inner=int(mining.get("n_inner", 1)),
                n_cross=int(mining.get("n_cross", 8)),
                n_ori=int(mining.get("n_ori", 1)),
                seed=int(mining.get("seed", 0)),
            ),
            disambig=DisambigConfig(
                w=float(disambig.get("w", 0.5)),
                softmax_temperature=float(disambig.get("softmax_temperature", 1.0)),
                x=int(disambig.get("x", 100)),
            ),
            world=WorldSpec(
                layout=world.get("layout", "twin-rooms"),
                extent=tuple(world.get("extent_m", (12.0, 6.0))),
                resolution=float(world.get("resolution_m", 0.1)),
                texture_policy=world.get("texture_policy", "distinct"),
                seed=int(world.get("seed", 0)),
            ),
            noise=NoiseSpec(
                depth_sigma=float(noise.get("depth_sigma_m", 0.0)),
                dropout=float(noise.get("dropout", 0.0)),
            ),
            embedder=EmbedderParams(
                dim=int(embedder.get("dim", 64)),
                seed=int(embedder.get("seed", 7)),
            ),
            bench=BenchParams(
                n_queries=int(bench.get("n_queries", 50)),
                n_worlds=int(bench.get("n_worlds", 2)),
                n_anchors=int(bench.get("n_anchors", 64)),
                query_seed=int(bench.get("query_seed", 1)),
                sigma_m=float(bench.get("sigma_m", 0.5)),
            ),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed config value: {exc}") from exc
    except RaylocError:
        raise


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def echo_config(config: RunConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved_config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.resolved(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
