"""Reference trajectory generators: triangle, square, pi glyph, spiral.

Every generator returns keypoints fitting a scale x scale bounding box with
the first keypoint at the requested origin, so a plant whose tracked point
starts at the origin begins on the trajectory.

Exact layouts (unit box, before scaling and shifting to the origin):

  triangle: (0,0) (1,0) (0.5,1) closed, 4 keypoints
  square:   (0,0) (1,0) (1,1) (0,1) closed, 5 keypoints
  pi:       top bar left to right, back to the left leg, down, up again,
            over to the right leg, down with a short outward tail; 8
            keypoints, consecutive ones always distinct
  spiral:   Archimedean r = (theta / theta_max) * 0.5 sampled at `count`
            keypoints over 1.5 turns, starting at the center
"""

from __future__ import annotations

import numpy as np

from .loop import ReferenceTrajectory

_TRIANGLE = [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.0, 0.0)]
_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]
_PI = [
    (0.0, 0.9),
    (1.0, 0.9),
    (0.3, 0.9),
    (0.3, 0.0),
    (0.3, 0.9),
    (0.7, 0.9),
    (0.7, 0.1),
    (0.8, 0.0),
]

SPIRAL_KEYPOINTS = 16
SPIRAL_TURNS = 1.5

TRAJECTORY_NAMES = ("triangle", "square", "pi", "spiral")


def _spiral_template(count: int) -> np.ndarray:
    theta_max = SPIRAL_TURNS * 2.0 * np.pi
    theta = np.linspace(0.0, theta_max, count)
    radius = 0.5 * theta / theta_max
    return np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)


def make_trajectory(name: str, scale: float = 16.0, origin=(0.0, 0.0, 0.0)) -> ReferenceTrajectory:
    """Build one of the named reference trajectories.

    scale is the bounding-box side in mm; the first keypoint sits at origin.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if name == "triangle":
        template = np.array(_TRIANGLE)
    elif name == "square":
        template = np.array(_SQUARE)
    elif name == "pi":
        template = np.array(_PI)
    elif name == "spiral":
        template = _spiral_template(SPIRAL_KEYPOINTS)
    else:
        known = ", ".join(TRAJECTORY_NAMES)
        raise ValueError(f"unknown trajectory {name!r} (known: {known})")
    planar = (template - template[0]) * scale
    keypoints = np.zeros((len(planar), 3))
    keypoints[:, :2] = planar
    keypoints += np.asarray(origin, dtype=float)
    return ReferenceTrajectory(keypoints=keypoints, name=name)
