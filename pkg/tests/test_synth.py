"""World generation, observation simulation, and the reference embedder."""

import math

import numpy as np
import pytest

from rayloc.crops import CropSpec, extract_crop
from rayloc.errors import ConfigurationError, ValidationError
from rayloc.floorplan import Pose, render_gt_rays
from rayloc.synth import (
    NoiseSpec,
    ObservationSignature,
    RandomProjectionEmbedder,
    WorldSpec,
    generate_world,
    relabel_texture,
    simulate_observation,
    valid_gt_poses,
)


class TestWorldSpec:
    def test_layout_validation(self):
        WorldSpec(layout="twin-rooms")
        WorldSpec(layout="corridor-of-3")
        WorldSpec(layout="random-partition")
        with pytest.raises(ValidationError):
            WorldSpec(layout="maze")
        with pytest.raises(ValidationError):
            WorldSpec(resolution=0.0)
        with pytest.raises(ValidationError):
            WorldSpec(texture_policy="striped")

    def test_extent_too_small(self):
        with pytest.raises(ConfigurationError):
            generate_world(WorldSpec(extent=(1.0, 1.0)))
        with pytest.raises(ConfigurationError):
            generate_world(WorldSpec(layout="corridor-of-9", extent=(3.0, 3.0)))
        with pytest.raises(ConfigurationError):
            generate_world(WorldSpec(layout="random-partition", extent=(1.0, 1.0)))


class TestGenerateWorld:
    def test_deterministic(self):
        a_plan, a_poses = generate_world(WorldSpec(seed=3))
        b_plan, b_poses = generate_world(WorldSpec(seed=3))
        assert np.array_equal(a_plan.occupancy, b_plan.occupancy)
        assert np.array_equal(a_plan.texture, b_plan.texture)
        assert a_poses == b_poses

    def test_seeds_differ(self):
        a, _ = generate_world(WorldSpec(seed=3))
        b, _ = generate_world(WorldSpec(seed=4))
        assert not np.array_equal(a.occupancy, b.occupancy)

    def test_twin_rooms_is_rotationally_symmetric(self):
        plan, _ = generate_world(WorldSpec(seed=0))
        occ = plan.occupancy
        assert np.array_equal(occ, occ[::-1, ::-1])

    def test_twin_rooms_textures_label_the_rooms(self):
        plan, _ = generate_world(WorldSpec(seed=0))
        ids = set(np.unique(plan.texture).tolist())
        assert ids == {0, 1, 2}
        # left half is never texture 2 and right half never texture 1
        half = plan.width_cells // 2
        assert 2 not in np.unique(plan.texture[:, : half - 5])
        assert 1 not in np.unique(plan.texture[:, half + 5 :])

    def test_twin_pose_fans_are_congruent(self):
        plan, poses = generate_world(WorldSpec(seed=0))
        for pose in poses[:: max(1, len(poses) // 10)]:
            twin = Pose(
                plan.width_m - pose.x, plan.height_m - pose.y, pose.theta + math.pi
            )
            a = render_gt_rays(plan, pose, n_rays=24)
            b = render_gt_rays(plan, twin, n_rays=24)
            assert np.max(np.abs(a.depths - b.depths)) < 1e-9

    def test_corridor_layout(self):
        plan, poses = generate_world(WorldSpec(layout="corridor-of-3", seed=1))
        # three rooms plus the corridor
        assert set(np.unique(plan.texture).tolist()) == {0, 1, 2, 3, 4}
        assert poses  # free textured space exists

    def test_corridor_of_one(self):
        plan, poses = generate_world(
            WorldSpec(layout="corridor-of-1", extent=(5.0, 5.0), seed=1)
        )
        assert poses

    def test_random_partition_has_multiple_rooms(self):
        plan, poses = generate_world(WorldSpec(layout="random-partition", seed=2))
        assert len(set(np.unique(plan.texture).tolist()) - {0}) >= 2
        assert poses

    def test_texture_policy_none(self):
        plan, poses = generate_world(WorldSpec(texture_policy="none", seed=0))
        assert plan.texture is None


class TestValidGtPoses:
    def test_poses_are_clear_and_textured(self):
        plan, poses = generate_world(WorldSpec(seed=0))
        assert poses
        for pose in poses[::7]:
            assert plan.is_free(pose.x, pose.y)
            r, c = plan.world_to_cell(pose.x, pose.y)
            assert plan.texture[r, c] > 0
            # clearance: no wall within 0.4 m in the four axis directions
            for bearing in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
                fan = render_gt_rays(
                    plan, Pose(pose.x, pose.y, bearing), n_rays=2, fov=1e-6
                )
                assert fan.depths.min() > 0.4

    def test_headings_on_orientation_centers(self):
        plan, poses = generate_world(WorldSpec(seed=0))
        step = 2 * math.pi / 36
        for pose in poses[::11]:
            k = pose.theta / step
            assert abs(k - round(k)) < 1e-9

    def test_deterministic(self):
        plan, _ = generate_world(WorldSpec(seed=0))
        assert valid_gt_poses(plan, seed=5) == valid_gt_poses(plan, seed=5)


class TestRelabelTexture:
    def test_offsets_nonzero_ids_only(self):
        plan, _ = generate_world(WorldSpec(seed=0))
        shifted = relabel_texture(plan, 10)
        assert set(np.unique(shifted.texture).tolist()) == {0, 11, 12}
        assert np.array_equal(shifted.occupancy, plan.occupancy)

    def test_validation(self):
        plan, _ = generate_world(WorldSpec(seed=0))
        with pytest.raises(ValidationError):
            relabel_texture(plan, -1)
        with pytest.raises(ValidationError):
            relabel_texture(plan, 300)
        untextured, _ = generate_world(WorldSpec(texture_policy="none", seed=0))
        with pytest.raises(ValidationError):
            relabel_texture(untextured, 1)


@pytest.fixture(scope="module")
def twin_world():
    return generate_world(WorldSpec(seed=0))


class TestSimulateObservation:
    @pytest.fixture()
    def world(self, twin_world):
        plan, poses = twin_world
        return plan, poses[len(poses) // 2]

    def test_noiseless_equals_rendered(self, world):
        plan, pose = world
        pred, signature = simulate_observation(plan, pose, n_rays=16)
        fan = render_gt_rays(plan, pose, n_rays=16)
        assert np.array_equal(pred, fan.depths)
        assert np.array_equal(signature.depths, fan.depths)

    def test_seeded_noise_is_reproducible(self, world):
        plan, pose = world
        noise = NoiseSpec(depth_sigma=0.2, dropout=0.1)
        a, _ = simulate_observation(plan, pose, noise=noise, seed=9)
        b, _ = simulate_observation(plan, pose, noise=noise, seed=9)
        c, _ = simulate_observation(plan, pose, noise=noise, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_full_dropout_clamps_everything(self, world):
        plan, pose = world
        pred, _ = simulate_observation(
            plan, pose, noise=NoiseSpec(dropout=1.0), max_range=7.0
        )
        assert np.all(pred == 7.0)

    def test_depths_clipped_to_range(self, world):
        plan, pose = world
        pred, _ = simulate_observation(
            plan, pose, noise=NoiseSpec(depth_sigma=50.0), seed=1
        )
        assert np.all((pred >= 0.0) & (pred <= 10.0))

    def test_signature_counts_room_textures(self, world):
        plan, pose = world
        _, signature = simulate_observation(plan, pose)
        counts = signature.texture_counts
        assert counts.sum() > 0
        room = plan.texture[plan.world_to_cell(pose.x, pose.y)]
        assert counts[room] > 0

    def test_noise_spec_validation(self):
        with pytest.raises(ValidationError):
            NoiseSpec(depth_sigma=-1.0)
        with pytest.raises(ValidationError):
            NoiseSpec(dropout=1.5)


class TestRandomProjectionEmbedder:
    @pytest.fixture()
    def world(self, twin_world):
        return twin_world

    def test_unit_norm_and_deterministic(self, world):
        plan, poses = world
        emb = RandomProjectionEmbedder(dim=32, seed=7)
        crop = extract_crop(plan, poses[0], CropSpec())
        a = emb.embed_crop(crop)
        b = RandomProjectionEmbedder(dim=32, seed=7).embed_crop(crop)
        assert np.linalg.norm(a) == pytest.approx(1.0)
        assert np.array_equal(a, b)

    def test_signature_crop_texture_agreement(self, world):
        # an observation embedding must be closer to the crop at its own pose
        # than to the crop at the congruent pose in the other room
        plan, poses = world
        emb = RandomProjectionEmbedder(dim=64, seed=7)
        hits = 0
        sample = poses[:: max(1, len(poses) // 20)]
        for pose in sample:
            _, signature = simulate_observation(plan, pose)
            q = emb.embed_signature(signature)
            twin = Pose(
                plan.width_m - pose.x, plan.height_m - pose.y, pose.theta + math.pi
            )
            own = emb.embed_crop(extract_crop(plan, pose, CropSpec()))
            other = emb.embed_crop(extract_crop(plan, twin, CropSpec()))
            if float(q @ own) > float(q @ other):
                hits += 1
        assert hits / len(sample) > 0.9

    def test_dispatch(self, world):
        plan, poses = world
        emb = RandomProjectionEmbedder(dim=16, seed=7)
        crop = extract_crop(plan, poses[0], CropSpec())
        _, signature = simulate_observation(plan, poses[0])
        assert np.array_equal(emb(crop), emb.embed_crop(crop))
        assert np.array_equal(emb(signature), emb.embed_signature(signature))
        with pytest.raises(ValidationError):
            emb("not embeddable")

    def test_dim_validation(self):
        with pytest.raises(ValidationError):
            RandomProjectionEmbedder(dim=1)
