"""Straight-line via-point muscle geometry.

Muscle length is the summed Euclidean distance between consecutive via
points placed by forward kinematics; the moment-arm matrix follows
analytically from the segment unit vectors and joint axes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .kinematics import LinkFrames, link_frames
from .model import JointVector, RobotModel, UnknownGroup

__all__ = [
    "via_point_positions",
    "muscle_lengths",
    "muscle_jacobian",
    "geometric_jmm_dataset",
    "save_dataset_csv",
    "load_dataset_csv",
]


def via_point_positions(model: RobotModel, frames: LinkFrames) -> np.ndarray:
    """World position of every via point of every muscle, stacked (K, 3)."""
    cache = model._cache
    idx = cache.via_link_idx
    return (
        np.einsum("kab,kb->ka", frames.rot[idx], cache.via_offsets) + frames.pos[idx]
    )


def muscle_lengths(
    model: RobotModel, q: JointVector, frames: LinkFrames | None = None
) -> np.ndarray:
    """Length of every muscle (meters), in model muscle order."""
    if frames is None:
        frames = link_frames(model, q)
    pts = via_point_positions(model, frames)
    cache = model._cache
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    # the diff between the last point of muscle m and the first of muscle m+1
    # is not a segment; drop it by summing per-muscle slices
    out = np.empty(len(model.muscles))
    for m, (first, count) in enumerate(
        zip(cache.muscle_first_point, cache.muscle_point_count)
    ):
        out[m] = seg[first : first + count - 1].sum()
    return out


def _point_jacobians(model: RobotModel, frames: LinkFrames) -> np.ndarray:
    """d(world via point)/d(joint angle) for all points, shape (K, J, 3)."""
    cache = model._cache
    pts = via_point_positions(model, frames)
    origins, axes = frames.joint_origins_axes()
    rel = pts[:, None, :] - origins[None, :, :]  # (K, J, 3)
    dp = np.cross(axes[None, :, :], rel)
    mask = cache.ancestry[cache.via_link_idx]  # (K, J)
    return dp * mask[:, :, None]


def muscle_jacobian(
    model: RobotModel,
    q: JointVector,
    group: str | None = None,
    frames: LinkFrames | None = None,
) -> np.ndarray:
    """Muscle Jacobian dl/dq (m/rad).

    With ``group`` given, rows are the group's muscles and columns the
    group's joints; otherwise all muscles over all joints.
    """
    if frames is None:
        frames = link_frames(model, q)
    cache = model._cache
    pts = via_point_positions(model, frames)
    dp = _point_jacobians(model, frames)

    J = np.zeros((len(model.muscles), len(model.joints)))
    for m, (first, count) in enumerate(
        zip(cache.muscle_first_point, cache.muscle_point_count)
    ):
        p = pts[first : first + count]
        d = dp[first : first + count]
        diff = np.diff(p, axis=0)
        norms = np.linalg.norm(diff, axis=1, keepdims=True)
        u = diff / norms  # (S, 3) unit segment vectors
        # dl_seg/dq = u . (dp_b - dp_a)
        J[m] = np.einsum("sa,sja->j", u, d[1:] - d[:-1])

    if group is None:
        return J
    g = model.group(group)
    rows = [model.muscle_index[m] for m in g.muscles]
    cols = [model.joint_index[j] for j in g.joints]
    return J[np.ix_(rows, cols)]


def geometric_jmm_dataset(
    model: RobotModel, group: str, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample the geometric model for mapping pre-training.

    Draws ``n`` configurations uniformly within the group's joint limits
    (other joints at zero), computes straight-line muscle lengths, and
    returns ``(lengths, tensions, q)`` arrays of shape (n, M), (n, M),
    (n, N).  Tensions are zero: the geometric model knows nothing about
    load-dependent stretch.
    """
    if n <= 0:
        raise ValueError("dataset size must be positive")
    g = model.group(group)
    rng = np.random.default_rng(seed)
    cols = np.array([model.joint_index[j] for j in g.joints])
    rows = [model.muscle_index[m] for m in g.muscles]
    lo = model.lower_limits[cols]
    hi = model.upper_limits[cols]
    q_samples = rng.uniform(lo, hi, size=(n, len(cols)))

    lengths = np.empty((n, len(rows)))
    base = model.zero_joints()
    for i in range(n):
        qv = base.values.copy()
        qv[cols] = q_samples[i]
        lengths[i] = muscle_lengths(model, JointVector(model.joint_names, qv))[rows]
    tensions = np.zeros_like(lengths)
    return lengths, tensions, q_samples


def save_dataset_csv(
    path: str | Path,
    lengths: np.ndarray,
    tensions: np.ndarray,
    q: np.ndarray,
) -> None:
    """Write a dataset as CSV: lengths/tensions in meters/newtons, q in degrees."""
    n_m = lengths.shape[1]
    n_j = q.shape[1]
    header = (
        [f"muscle_{i}" for i in range(n_m)]
        + [f"tension_{i}" for i in range(n_m)]
        + [f"joint_{i}" for i in range(n_j)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.hstack([lengths, tensions, np.degrees(q)]):
            writer.writerow([f"{v:.17g}" for v in row])


def load_dataset_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    n_m = sum(1 for h in header if h.startswith("muscle_"))
    n_j = sum(1 for h in header if h.startswith("joint_"))
    if data.size == 0:
        data = data.reshape(0, 2 * n_m + n_j)
    lengths = data[:, :n_m]
    tensions = data[:, n_m : 2 * n_m]
    q = np.radians(data[:, 2 * n_m : 2 * n_m + n_j])
    return lengths, tensions, q
