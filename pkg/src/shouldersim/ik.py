"""Arm inverse kinematics with a scapula-rhythm outer procedure.

The base solver is damped least squares on the 6-vector pose error with
adaptive damping, the scapula of the requested arm held fixed.  The rhythm
procedure runs that solver twice: after the first pass the scapula angles
are set to a fixed fraction of the paired shoulder angles, then the arm is
re-solved around the moved scapula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import _cross_rows, link_frames
from .model import JointVector, RobotModel
from .transforms import Pose, quat_from_matrix, quat_to_rotvec

__all__ = [
    "IkRequest",
    "IkResult",
    "RhythmParams",
    "RhythmIkResult",
    "NoConvergence",
    "ik_fixed_scapula",
    "scapulohumeral_ik",
    "rhythm_pairs",
]

DEFAULT_RHYTHM_RATIO = 1.0 / 2.7


class NoConvergence(RuntimeError):
    """Solver ran out of iterations; carries the final pose error."""

    def __init__(self, pos_error: float, rot_error: float, ik_pass: int | None = None):
        self.pos_error = pos_error
        self.rot_error = rot_error
        self.ik_pass = ik_pass
        where = f" (pass {ik_pass})" if ik_pass is not None else ""
        super().__init__(
            f"IK did not converge{where}: position error {pos_error * 1e3:.3f} mm, "
            f"rotation error {np.degrees(rot_error):.4f} deg"
        )


@dataclass
class IkRequest:
    target: Pose
    hand: str
    q_init: JointVector
    position_weight: float = 1.0
    orientation_weight: float = 0.3
    max_iters: int = 300
    tol_pos: float = 1e-3
    tol_rot: float = 1e-2

    def __post_init__(self):
        if self.tol_pos <= 0 or self.tol_rot <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class RhythmParams:
    """Scapula angle = ratio x paired shoulder angle, between IK passes."""

    ratio: float = DEFAULT_RHYTHM_RATIO

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError("rhythm ratio must be in [0, 1)")


@dataclass
class IkResult:
    q: JointVector
    iterations: int
    pos_error: float
    rot_error: float
    error_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return True  # non-converged solves raise instead


@dataclass
class RhythmIkResult:
    q: JointVector
    first_pass: IkResult
    second_pass: IkResult
    # scapula joint -> ratio * first-pass shoulder angle, before limit clamping
    scapula_prescale: dict[str, float] = field(default_factory=dict)
    scapula_clamped: dict[str, bool] = field(default_factory=dict)
    shoulder_first_pass: dict[str, float] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.first_pass.iterations + self.second_pass.iterations

    @property
    def pos_error(self) -> float:
        return self.second_pass.pos_error

    @property
    def rot_error(self) -> float:
        return self.second_pass.rot_error


def rhythm_pairs(model: RobotModel, hand: str) -> list[tuple[str, str]]:
    """(scapula joint, shoulder joint) pairs matched by axis suffix.

    Joint names end in an axis word (roll/pitch/yaw); a scapula DOF is
    rhythm-driven when a glenohumeral DOF shares its suffix.
    """
    arm = model.arm(hand)
    shoulder_by_suffix = {j.rsplit("_", 1)[-1]: j for j in arm.glenohumeral_joints}
    pairs = []
    for scap in arm.scapula_joints:
        suffix = scap.rsplit("_", 1)[-1]
        if suffix in shoulder_by_suffix:
            pairs.append((scap, shoulder_by_suffix[suffix]))
    return pairs


def _solve_arm(
    model: RobotModel, req: IkRequest, q_start: np.ndarray, idx: np.ndarray,
    lo: np.ndarray, hi: np.ndarray, hand_idx: int, ancestry: np.ndarray,
):
    """One damped-least-squares descent; returns (q, iters, pos, rot, trace)."""
    cache = model._cache
    child = cache.joint_child_link[idx]
    axis_local = cache.joint_axis_local[idx]
    on_path = ancestry[idx].astype(float)[:, None]
    chain = []  # root -> hand, the only frames the descent needs
    walk = hand_idx
    while walk >= 0:
        chain.append(walk)
        walk = cache.link_parent[walk]
    chain = np.array(chain[::-1], dtype=int)
    target_pos = req.target.position
    target_rot = req.target.rotation_matrix()
    w = np.concatenate(
        [np.full(3, req.position_weight), np.full(3, req.orientation_weight)]
    )
    eye = np.eye(len(idx))

    def evaluate(qv: np.ndarray):
        frames = link_frames(model, JointVector(model.joint_names, qv))
        pos = frames.pos[hand_idx]
        rel = target_rot @ frames.rot[hand_idx].T
        rot_vec = quat_to_rotvec(quat_from_matrix(rel))
        err = np.concatenate([target_pos - pos, rot_vec])
        return frames, err, float(np.linalg.norm(err[:3])), float(np.linalg.norm(err[3:]))

    q = q_start.copy()
    frames, err, pos_err, rot_err = evaluate(q)
    trace = [float(np.linalg.norm(w * err))]
    lam = 1e-3
    iterations = 0
    rejections = 0
    while iterations < req.max_iters:
        if pos_err <= req.tol_pos and rot_err <= req.tol_rot:
            break
        if rejections >= 25:
            break  # damping maxed out and no step helps; let a restart try
        iterations += 1
        axes = np.einsum("jab,jb->ja", frames.rot[child], axis_local) * on_path
        rel_p = frames.pos[hand_idx] - frames.pos[child]
        J = np.empty((6, len(idx)))
        J[:3] = _cross_rows(axes, rel_p).T
        J[3:] = axes.T
        Jw = J * w[:, None]
        ew = w * err
        g = Jw.T @ ew
        # freeze joints pinned at a limit whose step would push further out
        pinned = ((q[idx] <= lo) & (g < 0.0)) | ((q[idx] >= hi) & (g > 0.0))
        if pinned.any():
            Jw = Jw * (~pinned)[None, :]
            g = Jw.T @ ew
        step = np.linalg.solve(Jw.T @ Jw + lam * eye, g)
        q_new = q.copy()
        q_new[idx] = np.clip(q[idx] + step, lo, hi)
        frames_new, err_new, pe_new, re_new = evaluate(q_new)
        if np.linalg.norm(w * err_new) < trace[-1]:
            q, frames, err, pos_err, rot_err = q_new, frames_new, err_new, pe_new, re_new
            trace.append(float(np.linalg.norm(w * err)))
            lam = max(lam * 0.5, 1e-6)
            rejections = 0
        else:
            lam = min(lam * 4.0, 1e2)
            rejections += 1
    return q, iterations, pos_err, rot_err, trace


def ik_fixed_scapula(
    model: RobotModel, req: IkRequest, ik_pass: int | None = None
) -> IkResult:
    """Damped-least-squares IK over the glenohumeral, elbow and wrist joints.

    The scapula (and every joint outside the requested arm) keeps its
    ``q_init`` value.  Accepted steps never increase the pose error; the
    damping factor adapts within [1e-6, 1e2].  If the first descent stalls,
    up to three deterministic mid-range restarts are tried before raising
    :class:`NoConvergence` (each bounded by ``max_iters``); unreachable
    targets surface the same way, there is no reachability precheck.
    """
    arm = model.arm(req.hand)
    active = list(arm.arm_joints)
    idx = np.array([model.joint_index[j] for j in active])
    lo = model.lower_limits[idx]
    hi = model.upper_limits[idx]
    hand_idx = model.link_index[arm.hand_link]
    ancestry = model._cache.ancestry[hand_idx]

    q0 = np.array([req.q_init[name] for name in model.joint_names])
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    alt = mid + 0.35 * half * np.where(np.arange(len(idx)) % 2 == 0, 1.0, -1.0)
    starts = [q0]
    for arm_values in (mid, alt, mid - 0.35 * half):
        qs = q0.copy()
        qs[idx] = arm_values
        starts.append(qs)

    best: tuple[float, float] | None = None
    total_iters = 0
    for q_start in starts:
        q, iters, pos_err, rot_err, trace = _solve_arm(
            model, req, q_start, idx, lo, hi, hand_idx, ancestry
        )
        total_iters += iters
        if pos_err <= req.tol_pos and rot_err <= req.tol_rot:
            return IkResult(JointVector(model.joint_names, q), total_iters,
                            pos_err, rot_err, trace)
        if best is None or pos_err + rot_err < best[0] + best[1]:
            best = (pos_err, rot_err)
    raise NoConvergence(best[0], best[1], ik_pass)


def scapulohumeral_ik(
    model: RobotModel, req: IkRequest, params: RhythmParams | None = None
) -> RhythmIkResult:
    """Two-pass arm IK with the scapula driven at a fixed rhythm ratio.

    Pass 1 solves with the scapula at its initial angles.  The scapula
    angles are then set to ``ratio`` times the paired first-pass shoulder
    angles (clamped into the scapula limits, with a flag when clamping
    fires), and pass 2 re-solves the arm around the moved scapula.
    """
    params = params or RhythmParams()
    first = ik_fixed_scapula(model, req, ik_pass=1)

    pairs = rhythm_pairs(model, req.hand)
    prescale: dict[str, float] = {}
    clamped: dict[str, bool] = {}
    shoulder_angles: dict[str, float] = {}
    scapula_values: dict[str, float] = {}
    for scap_joint, shoulder_joint in pairs:
        shoulder = first.q[shoulder_joint]
        raw = params.ratio * shoulder
        joint = model.joint(scap_joint)
        value = float(np.clip(raw, joint.lower, joint.upper))
        prescale[scap_joint] = raw
        clamped[scap_joint] = value != raw
        shoulder_angles[shoulder_joint] = shoulder
        scapula_values[scap_joint] = value

    q_second_init = first.q.replaced(scapula_values)
    second_req = IkRequest(
        target=req.target,
        hand=req.hand,
        q_init=q_second_init,
        position_weight=req.position_weight,
        orientation_weight=req.orientation_weight,
        max_iters=req.max_iters,
        tol_pos=req.tol_pos,
        tol_rot=req.tol_rot,
    )
    second = ik_fixed_scapula(model, second_req, ik_pass=2)
    return RhythmIkResult(
        q=second.q,
        first_pass=first,
        second_pass=second,
        scapula_prescale=prescale,
        scapula_clamped=clamped,
        shoulder_first_pass=shoulder_angles,
    )
