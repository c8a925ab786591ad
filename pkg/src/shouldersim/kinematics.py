"""Forward kinematics and geometric Jacobians over the link tree.

All poses are expressed in the trunk-root frame.  The workhorse is
:func:`link_frames`, one sweep over the tree producing every link's rotation
matrix and position; everything else gathers from that.
"""

from __future__ import annotations

import numpy as np

from .model import JointVector, RobotModel, UnknownJoint, UnknownLink
from .transforms import Pose, quat_from_matrix

__all__ = ["LinkFrames", "link_frames", "forward_kinematics", "hand_jacobian"]


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product without numpy.cross overhead."""
    out = np.empty_like(a)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


class LinkFrames:
    """World rotation/position of every link at one configuration."""

    __slots__ = ("rot", "pos", "_model", "_origins", "_axes")

    def __init__(self, model: RobotModel, rot: np.ndarray, pos: np.ndarray):
        self._model = model
        self.rot = rot
        self.pos = pos
        self._origins = None
        self._axes = None

    def pose(self, link_name: str) -> Pose:
        try:
            i = self._model.link_index[link_name]
        except KeyError:
            raise UnknownLink(link_name) from None
        return Pose(self.pos[i].copy(), quat_from_matrix(self.rot[i]))

    def joint_origins_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """World origin point and unit axis of every joint, (J,3) each."""
        if self._origins is None:
            model = self._model
            cache = model._cache
            child = cache.joint_child_link
            self._origins = self.pos[child]
            self._axes = np.einsum(
                "jab,jb->ja", self.rot[child], cache.joint_axis_local
            )
        return self._origins, self._axes


def _joint_rotations(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Batched Rodrigues rotations, one 3x3 per joint."""
    c = np.cos(angles)
    s = np.sin(angles)
    C = 1.0 - c
    x, y, z = axes[:, 0], axes[:, 1], axes[:, 2]
    R = np.empty((len(angles), 3, 3))
    R[:, 0, 0] = c + x * x * C
    R[:, 0, 1] = x * y * C - z * s
    R[:, 0, 2] = x * z * C + y * s
    R[:, 1, 0] = y * x * C + z * s
    R[:, 1, 1] = c + y * y * C
    R[:, 1, 2] = y * z * C - x * s
    R[:, 2, 0] = z * x * C - y * s
    R[:, 2, 1] = z * y * C + x * s
    R[:, 2, 2] = c + z * z * C
    return R


def link_frames(
    model: RobotModel, q: JointVector, links: np.ndarray | None = None
) -> LinkFrames:
    """Sweep the tree once and place every link in the root frame.

    ``links`` (topologically ordered, ancestors included) restricts the
    sweep; frames outside it are left unset.
    """
    cache = model._cache
    n = len(model.links)
    qv = q.values
    if q.names != model.joint_names:
        qv = np.array([q[name] for name in model.joint_names])

    local_rot = cache.link_local_rot.copy()
    jointed = cache.jointed_links
    local_rot[jointed] = local_rot[jointed] @ _joint_rotations(
        cache.joint_axis_local, qv
    )

    rot = np.empty((n, 3, 3))
    pos = np.empty((n, 3))
    parents = cache.link_parent
    local_pos = cache.link_local_pos
    for i in cache.topo_links if links is None else links:
        p = parents[i]
        if p < 0:
            rot[i] = local_rot[i]
            pos[i] = local_pos[i]
        else:
            rot[i] = rot[p] @ local_rot[i]
            pos[i] = pos[p] + rot[p] @ local_pos[i]
    return LinkFrames(model, rot, pos)


def forward_kinematics(model: RobotModel, q: JointVector, target_link: str) -> Pose:
    """Pose of ``target_link`` in the trunk-root frame."""
    if target_link not in model.link_index:
        raise UnknownLink(target_link)
    return link_frames(model, q).pose(target_link)


def hand_jacobian(
    model: RobotModel,
    q: JointVector,
    hand: str,
    active_joints: list[str] | tuple[str, ...],
    frames: LinkFrames | None = None,
) -> np.ndarray:
    """Spatial Jacobian (6 x N) of the hand frame w.r.t. ``active_joints``.

    Rows 0-2 are linear velocity (m/rad), rows 3-5 angular (rad/rad).  A
    joint that is not on the root->hand path contributes a zero column.
    """
    arm = model.arm(hand)
    if frames is None:
        frames = link_frames(model, q)
    hand_idx = model.link_index[arm.hand_link]
    hand_pos = frames.pos[hand_idx]
    ancestry = model._cache.ancestry[hand_idx]
    origins, axes = frames.joint_origins_axes()

    try:
        jidx = np.array([model.joint_index[name] for name in active_joints], dtype=int)
    except KeyError as exc:
        raise UnknownJoint(exc.args[0]) from None
    on_path = ancestry[jidx]
    ax = axes[jidx] * on_path[:, None]
    rel = hand_pos - origins[jidx]
    J = np.empty((6, len(jidx)))
    J[:3] = _cross_rows(ax, rel).T
    J[3:] = ax.T
    return J
