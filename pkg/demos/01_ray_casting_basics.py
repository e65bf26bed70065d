"""Ray casting fundamentals.

Generates a small synthetic floorplan, casts a depth fan from a pose, and
prints an ASCII rendering of the map with the rays overlaid. Run with:

    python3 demos/01_ray_casting_basics.py
"""

import math

import numpy as np

from rayloc import Pose, WorldSpec, generate_world, render_gt_rays

plan, poses = generate_world(WorldSpec(layout="random-partition", extent=(8.0, 6.0), seed=3))
pose = poses[len(poses) // 2]

print(f"map: {plan.width_cells} x {plan.height_cells} cells at {plan.resolution} m/cell")
print(f"pose: x={pose.x:.2f} m, y={pose.y:.2f} m, heading={math.degrees(pose.theta):.0f} deg")

fan = render_gt_rays(plan, pose, n_rays=9, fov=math.radians(108.0))
print("\nper-ray depths (left to right across the field of view):")
for i, depth in enumerate(fan.depths):
    bar = "#" * int(depth * 4)
    print(f"  ray {i}: {depth:5.2f} m  {bar}")

# ASCII overlay: walls are '#', sampled ray points are '.', the pose is 'O'
canvas = np.where(plan.occupancy, "#", " ").astype(object)
bearings = pose.theta + math.radians(108.0) * (np.arange(9) / 8 - 0.5)
for bearing, depth in zip(bearings, fan.depths):
    for t in np.arange(0.05, depth, plan.resolution / 2):
        r, c = plan.world_to_cell(
            pose.x + math.cos(bearing) * t, pose.y + math.sin(bearing) * t
        )
        if 0 <= r < plan.height_cells and 0 <= c < plan.width_cells:
            if canvas[r, c] == " ":
                canvas[r, c] = "."
pr, pc = plan.world_to_cell(pose.x, pose.y)
canvas[pr, pc] = "O"

print("\nmap with the fan overlaid (rows are printed top row first):")
for row in canvas[::-1]:
    print("".join(row))
