"""Builder for the default upper-body model shipped with the package.

Dimensions are humanlike (upper arm 0.30 m, forearm 0.25 m).  Muscle
attachment points are constructed, not hand-tuned: the muscles crossing
each glenohumeral joint sit on rings around the humerus axis at a mid-task
reference posture, and the scapula muscles come in mirrored antagonist
pairs.  Equally spaced ring points and mirrored pairs make the summed
moment of equal tensions vanish at the reference posture, which is what
lets a uniform-tension stiffening procedure settle without drifting.

Per arm: 6 muscles tie the scapula to the trunk, 7 cross the glenohumeral
joint (2 of them deep rotators with small moment arms, 2 biarticular ones
continuing past the elbow), and 3 drive the wrist.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kinematics import link_frames
from .model import JointVector, RobotModel
from .muscles import muscle_lengths

__all__ = ["default_model_dict", "build_default_model", "REFERENCE_POSTURE_DEG"]

# Mid-task arm posture the glenohumeral/elbow muscle rings are balanced at.
REFERENCE_POSTURE_DEG = {"shoulder_pitch": -35.0, "elbow": -65.0}

_UPPER_ARM = 0.30
_FOREARM = 0.25
_PALM = 0.07

_SCAP_MOUNT = np.array([-0.045, 0.10, 0.40])
_SCAP_TO_GH = np.array([0.015, 0.085, 0.02])
_HEAD = np.array([0.06, 0.0, 0.52])

# glenohumeral ring: 5 shallow muscles, equally spaced around the humerus
_GH_RING_PHI_DEG = [0.0, 72.0, 144.0, 216.0, 288.0]
_GH_RING_TWIST_DEG = [0.0, 25.0, -25.0, 0.0, 0.0]
_GH_RING_NAMES = ["biceps_long", "delt_front", "delt_back", "triceps_long", "delt_lat"]
_GH_R_SCAP, _GH_H_SCAP = 0.045, 0.025
_GH_R_ARM, _GH_H_ARM = 0.034, -0.115

# deep rotator pair: close to the joint, strongly twisted
_DEEP_SCAP = {"cuff_int": (0.028, 25.0, 0.005), "cuff_ext": (0.028, 335.0, 0.005)}
_DEEP_ARM = {"cuff_int": (0.022, -45.0, -0.040), "cuff_ext": (0.022, 45.0, -0.040)}

# wrist ring: 3 tendons, 120 deg apart, twists summing to zero
_WRIST_PHI_DEG = [0.0, 120.0, 240.0]
_WRIST_TWIST_DEG = [60.0, -60.0, 0.0]
_WRIST_NAMES = ["wrist_front", "wrist_med", "wrist_lat"]
_WRIST_R_FOREARM, _WRIST_H_FOREARM = 0.027, 0.05
_WRIST_R_HAND, _WRIST_H_HAND = 0.024, -0.035


def _skeleton_doc() -> dict:
    """Links and joints, left side explicit and right side mirrored."""
    links = [
        {"name": "trunk", "parent": None, "xyz_m": [0.0, 0.0, 0.0]},
        {"name": "head", "parent": "trunk", "xyz_m": list(_HEAD)},
    ]
    joints = []

    def add(side: str, sign: float) -> None:
        s = side[0]
        mount = _SCAP_MOUNT * [1.0, sign, 1.0]
        gh = _SCAP_TO_GH * [1.0, sign, 1.0]
        links.extend(
            [
                {"name": f"{s}_scap_mount", "parent": "trunk", "xyz_m": list(mount)},
                {"name": f"{s}_scapula", "parent": f"{s}_scap_mount", "xyz_m": [0, 0, 0]},
                {"name": f"{s}_gh_roll", "parent": f"{s}_scapula", "xyz_m": list(gh)},
                {"name": f"{s}_gh_pitch", "parent": f"{s}_gh_roll", "xyz_m": [0, 0, 0]},
                {"name": f"{s}_upper_arm", "parent": f"{s}_gh_pitch", "xyz_m": [0, 0, 0]},
                {"name": f"{s}_forearm", "parent": f"{s}_upper_arm", "xyz_m": [0, 0, -_UPPER_ARM]},
                {"name": f"{s}_wrist", "parent": f"{s}_forearm", "xyz_m": [0, 0, -_FOREARM]},
                {"name": f"{s}_hand", "parent": f"{s}_wrist", "xyz_m": [0, 0, 0]},
                {"name": f"{s}_palm", "parent": f"{s}_hand", "xyz_m": [0, 0, -_PALM]},
            ]
        )

        def lim(lo: float, hi: float, mirror: bool) -> list[float]:
            return [-hi, -lo] if (mirror and sign < 0) else [lo, hi]

        joints.extend(
            [
                {"name": f"{s}_scapula_roll", "child": f"{s}_scap_mount",
                 "axis": [1, 0, 0], "limits_deg": lim(-25, 28, True)},
                {"name": f"{s}_scapula_yaw", "child": f"{s}_scapula",
                 "axis": [0, 0, 1], "limits_deg": lim(-25, 25, True)},
                {"name": f"{s}_shoulder_roll", "child": f"{s}_gh_roll",
                 "axis": [1, 0, 0], "limits_deg": lim(-40, 95, True)},
                {"name": f"{s}_shoulder_pitch", "child": f"{s}_gh_pitch",
                 "axis": [0, 1, 0], "limits_deg": lim(-120, 45, False)},
                {"name": f"{s}_shoulder_yaw", "child": f"{s}_upper_arm",
                 "axis": [0, 0, 1], "limits_deg": lim(-100, 100, True)},
                {"name": f"{s}_elbow", "child": f"{s}_forearm",
                 "axis": [0, 1, 0], "limits_deg": lim(-140, 0, False)},
                {"name": f"{s}_wrist_pitch", "child": f"{s}_wrist",
                 "axis": [0, 1, 0], "limits_deg": lim(-70, 70, False)},
                {"name": f"{s}_wrist_yaw", "child": f"{s}_hand",
                 "axis": [0, 0, 1], "limits_deg": lim(-100, 100, True)},
            ]
        )

    add("left", 1.0)
    add("right", -1.0)

    hands = {
        side: {
            "hand_link": f"{side[0]}_palm",
            "scapula_joints": [f"{side[0]}_scapula_roll", f"{side[0]}_scapula_yaw"],
            "glenohumeral_joints": [
                f"{side[0]}_shoulder_roll",
                f"{side[0]}_shoulder_pitch",
                f"{side[0]}_shoulder_yaw",
            ],
            "elbow_joints": [f"{side[0]}_elbow"],
            "wrist_joints": [f"{side[0]}_wrist_pitch", f"{side[0]}_wrist_yaw"],
        }
        for side in ("left", "right")
    }
    return {"links": links, "joints": joints, "hands": hands, "camera": "head"}


def _reference_arm_pose(skeleton: RobotModel, side: str) -> JointVector:
    s = side[0]
    q = skeleton.zero_joints()
    return q.replaced(
        {
            f"{s}_shoulder_pitch": np.radians(REFERENCE_POSTURE_DEG["shoulder_pitch"]),
            f"{s}_elbow": np.radians(REFERENCE_POSTURE_DEG["elbow"]),
        }
    )


def _to_local(frames, model: RobotModel, link: str, world_pt: np.ndarray) -> list[float]:
    i = model.link_index[link]
    return [float(v) for v in frames.rot[i].T @ (world_pt - frames.pos[i])]


def _ring_point(center: np.ndarray, axis: np.ndarray, e1: np.ndarray, e2: np.ndarray,
                radius: float, phi_deg: float, height: float) -> np.ndarray:
    phi = np.radians(phi_deg)
    return center + radius * (np.cos(phi) * e1 + np.sin(phi) * e2) + height * axis


def _pull_moment(about: np.ndarray, arm_pt: np.ndarray, far_pt: np.ndarray) -> np.ndarray:
    """Moment about ``about`` of a unit pull at ``arm_pt`` toward ``far_pt``."""
    u = far_pt - arm_pt
    u = u / np.linalg.norm(u)
    return np.cross(arm_pt - about, u)


def _balance(residual_fn, params: np.ndarray, step: float = 1e-4,
             iters: int = 4) -> np.ndarray:
    """Drive ``residual_fn(params)`` to zero with a min-norm Newton update."""
    p = params.astype(float).copy()
    for _ in range(iters):
        r = residual_fn(p)
        jac = np.empty((len(r), len(p)))
        for k in range(len(p)):
            d = np.zeros_like(p)
            d[k] = step
            jac[:, k] = (residual_fn(p + d) - residual_fn(p - d)) / (2 * step)
        p -= np.linalg.lstsq(jac, r, rcond=None)[0]
    return p


def _arm_muscles(skeleton: RobotModel, side: str, sign: float) -> list[dict]:
    """Glenohumeral ring + deep rotators + elbow antagonists + wrist trio.

    All points are designed in world space at the reference posture and
    back-transformed into their link frames.  A min-norm correction of the
    ring origins/twists zeroes the net moment of equal tensions about the
    glenohumeral center, the elbow axis, and the wrist axes.
    """
    s = side[0]
    q_ref = _reference_arm_pose(skeleton, side)
    frames = link_frames(skeleton, q_ref)

    gh = frames.pos[skeleton.link_index[f"{s}_upper_arm"]]
    elbow = frames.pos[skeleton.link_index[f"{s}_forearm"]]
    wrist = frames.pos[skeleton.link_index[f"{s}_wrist"]]
    y = np.array([0.0, 1.0, 0.0])

    arm_axis = (elbow - gh) / np.linalg.norm(elbow - gh)  # distal
    e1 = np.cross(arm_axis, y)  # front-up of the humerus
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(arm_axis, e1)

    fore_axis = (wrist - elbow) / np.linalg.norm(wrist - elbow)
    fore_up = np.cross(fore_axis, y)  # flexor side of the forearm
    fore_up /= np.linalg.norm(fore_up)

    def ring(radius, phi_deg, height, center=gh, axis=arm_axis, b1=None, b2=None):
        return _ring_point(center, axis, e1 if b1 is None else b1,
                           e2 if b2 is None else b2, radius, sign * phi_deg, height)

    # ---- elbow antagonists: match the flexor/extensor moment arms --------
    crease = fore_axis - arm_axis  # inside-of-elbow direction
    crease /= np.linalg.norm(crease)
    knee = elbow - 0.050 * arm_axis + 0.024 * e1
    olecranon = elbow - 0.032 * crease
    heel = elbow - 0.050 * arm_axis - 0.026 * e1
    triceps_ins = elbow + 0.050 * fore_axis - 0.026 * fore_up

    def elbow_residual(p):
        ins = elbow + 0.042 * fore_axis + p[0] * fore_up
        flex = _pull_moment(elbow, ins, knee) @ y
        ext = _pull_moment(elbow, olecranon, heel) @ y
        return np.array([flex + ext])

    ins_up = _balance(elbow_residual, np.array([0.010]))[0]
    biceps_ins = elbow + 0.042 * fore_axis + ins_up * fore_up

    # ---- glenohumeral ring + deep rotators -------------------------------
    deep_pts = {
        name: (
            ring(*_DEEP_SCAP[name][:2], -_DEEP_SCAP[name][2]),
            ring(*_DEEP_ARM[name][:2], -_DEEP_ARM[name][2]),
        )
        for name in ("cuff_int", "cuff_ext")
    }

    def gh_layout(p):
        origins, arm_pts = [], []
        for k, (phi, twist) in enumerate(zip(_GH_RING_PHI_DEG, _GH_RING_TWIST_DEG)):
            origins.append(
                ring(_GH_R_SCAP, phi + np.degrees(p[2 * k]), -_GH_H_SCAP + p[2 * k + 1])
            )
            arm_pts.append(ring(_GH_R_ARM, phi + twist, -_GH_H_ARM))
        return origins, arm_pts

    def gh_residual(p):
        origins, arm_pts = gh_layout(p)
        total = np.zeros(3)
        for o, a in zip(origins, arm_pts):
            total += _pull_moment(gh, a, o)
        for o, a in deep_pts.values():
            total += _pull_moment(gh, a, o)
        return total

    gh_p = _balance(gh_residual, np.zeros(10))
    ring_origins, ring_arm_pts = gh_layout(gh_p)

    # ---- wrist trio -------------------------------------------------------
    w_b1, w_b2 = fore_up, np.cross(fore_axis, fore_up)
    yaw_axis = -fore_axis  # hand z at the reference posture

    def wrist_layout(p):
        fore_pts, hand_pts = [], []
        for k, (phi, twist) in enumerate(zip(_WRIST_PHI_DEG, _WRIST_TWIST_DEG)):
            fore_pts.append(
                ring(_WRIST_R_FOREARM, phi, -_WRIST_H_FOREARM,
                     center=wrist, axis=fore_axis, b1=w_b1, b2=w_b2)
            )
            hand_pts.append(
                ring(_WRIST_R_HAND, phi + twist + np.degrees(p[k]),
                     -_WRIST_H_HAND, center=wrist, axis=fore_axis, b1=w_b1, b2=w_b2)
            )
        return fore_pts, hand_pts

    def wrist_residual(p):
        fore_pts, hand_pts = wrist_layout(p)
        total = np.zeros(3)
        for f, h in zip(fore_pts, hand_pts):
            total += _pull_moment(wrist, h, f)
        return np.array([total @ y, total @ yaw_axis])

    wrist_p = _balance(wrist_residual, np.zeros(3))
    wrist_fore_pts, wrist_hand_pts = wrist_layout(wrist_p)

    # ---- emit via-point paths --------------------------------------------
    muscles: list[dict] = []

    def span(name, points):
        muscles.append(
            {
                "name": f"{s}_{name}",
                "via_points": [
                    {"link": lk, "xyz_m": _to_local(frames, skeleton, lk, pt)}
                    for lk, pt in points
                ],
            }
        )

    scap, upper, fore, hand = f"{s}_scapula", f"{s}_upper_arm", f"{s}_forearm", f"{s}_hand"
    for name, origin, arm_pt in zip(_GH_RING_NAMES, ring_origins, ring_arm_pts):
        if name == "biceps_long":
            span(name, [(scap, origin), (upper, arm_pt), (upper, knee), (fore, biceps_ins)])
        elif name == "triceps_long":
            span(name, [(scap, origin), (upper, arm_pt), (upper, heel),
                        (fore, olecranon), (fore, triceps_ins)])
        else:
            span(name, [(scap, origin), (upper, arm_pt)])
    for name, (o, a) in deep_pts.items():
        span(name, [(scap, o), (upper, a)])
    for name, f_pt, h_pt in zip(_WRIST_NAMES, wrist_fore_pts, wrist_hand_pts):
        span(name, [(fore, f_pt), (hand, h_pt)])

    return muscles


def _scapula_muscles(side: str, sign: float) -> list[dict]:
    """Three mirrored antagonist pairs acting on the scapula plate.

    Anchors sit either mirrored through the mount's horizontal plane
    (roll pairs) or through its sagittal plane (yaw pair), and roll-pair
    anchors lie radially inward of their attachments, so equal tensions
    produce zero net moment about both scapula axes at the zero posture.
    """
    s = side[0]

    def entry(name, anchor, attach):
        return {
            "name": f"{s}_{name}",
            "via_points": [
                {"link": "trunk", "xyz_m": [float(v) for v in np.asarray(anchor) * [1, sign, 1]]},
                {"link": f"{s}_scapula", "xyz_m": [float(v) for v in np.asarray(attach) * [1, sign, 1]]},
            ],
        }

    # attachments in the scapula frame (origin at the mount point), anchors
    # in the trunk frame
    base = _SCAP_MOUNT
    pairs = [
        ("scap_elev_med", base + [0.0, 0.0, 0.115], [-0.005, 0.035, 0.075]),
        ("scap_dep_med", base + [0.0, 0.0, -0.115], [-0.005, 0.035, -0.075]),
        ("scap_retract", base + [-0.055, -0.060, 0.0], [-0.060, -0.030, 0.0]),
        ("scap_protract", base + [0.055, -0.060, 0.0], [0.060, -0.030, 0.0]),
        ("scap_elev_lat", base + [0.0, -0.025, 0.115], [0.0, 0.040, 0.060]),
        ("scap_dep_lat", base + [0.0, -0.025, -0.115], [0.0, 0.040, -0.060]),
    ]
    return [entry(name, anchor, attach) for name, anchor, attach in pairs]


def default_model_dict() -> dict:
    doc = _skeleton_doc()
    doc["name"] = "upper_body_v1"
    doc["muscles"] = []
    doc["groups"] = []
    skeleton = RobotModel.from_dict(
        {
            **doc,
            "muscles": [],
            "groups": [
                {"name": "all", "joints": [j["name"] for j in doc["joints"]], "muscles": []}
            ],
            "expected_counts": {},
        }
    )

    for side, sign in (("left", 1.0), ("right", -1.0)):
        s = side[0]
        scap = _scapula_muscles(side, sign)
        arm = _arm_muscles(skeleton, side, sign)
        doc["muscles"].extend(scap + arm)
        doc["groups"].append(
            {
                "name": f"{side}_scapula",
                "joints": [f"{s}_scapula_roll", f"{s}_scapula_yaw"],
                "muscles": [m["name"] for m in scap],
            }
        )
        doc["groups"].append(
            {
                "name": f"{side}_arm",
                "joints": [
                    f"{s}_shoulder_roll", f"{s}_shoulder_pitch", f"{s}_shoulder_yaw",
                    f"{s}_elbow", f"{s}_wrist_pitch", f"{s}_wrist_yaw",
                ],
                "muscles": [m["name"] for m in arm],
            }
        )

    doc["expected_counts"] = {
        "scapula_muscles_per_arm": 6,
        "glenohumeral_crossings_per_arm": 7,
    }

    model = RobotModel.from_dict(doc)
    rest = muscle_lengths(model, model.zero_joints())
    for entry, value in zip(doc["muscles"], rest):
        entry["rest_length_m"] = float(value)
    return doc


def build_default_model() -> RobotModel:
    return RobotModel.from_dict(default_model_dict())


def write_default_model(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(default_model_dict(), fh, indent=1)
        fh.write("\n")
