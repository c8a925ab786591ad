"""Robot model: link tree, revolute joints, muscle via-point paths, groups.

The on-disk format is a UTF-8 JSON document with ``links``, ``joints``,
``muscles``, ``groups``, ``hands`` and ``camera`` sections.  File units are
degrees and meters; everything is converted to radians at load time.  See the
README for the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .transforms import Pose, quat_from_rpy

__all__ = [
    "Link",
    "Joint",
    "MusclePath",
    "Group",
    "ArmLayout",
    "JointVector",
    "RobotModel",
    "ModelError",
    "UnknownLink",
    "UnknownJoint",
    "UnknownGroup",
    "load_robot_model",
    "load_default_model",
]

DEFAULT_MODEL_RESOURCE = "default_model.json"


class ModelError(ValueError):
    """Raised when a robot model file violates the schema or its invariants."""


class UnknownLink(KeyError):
    pass


class UnknownJoint(KeyError):
    pass


class UnknownGroup(KeyError):
    pass


@dataclass(frozen=True)
class Link:
    """Frame in the kinematic tree with a fixed offset from its parent."""

    name: str
    parent: str | None
    origin: Pose


@dataclass(frozen=True)
class Joint:
    """Revolute joint acting on ``child_link``, rotating about ``axis``.

    The child link's frame is its fixed origin composed with the joint
    rotation; ``axis`` is expressed in that frame.  Limits are radians.
    """

    name: str
    child_link: str
    axis: np.ndarray
    lower: float
    upper: float


@dataclass(frozen=True)
class MusclePath:
    """Straight-line muscle routed through fixed points on the skeleton."""

    name: str
    via_points: tuple[tuple[str, np.ndarray], ...]
    rest_length: float | None = None  # length at the zero posture, informational


@dataclass(frozen=True)
class Group:
    """Functionally close joints and muscles trained/updated together."""

    name: str
    joints: tuple[str, ...]
    muscles: tuple[str, ...]


@dataclass(frozen=True)
class ArmLayout:
    hand_link: str
    scapula_joints: tuple[str, ...]
    glenohumeral_joints: tuple[str, ...]
    elbow_joints: tuple[str, ...]
    wrist_joints: tuple[str, ...]

    @property
    def arm_joints(self) -> tuple[str, ...]:
        return self.glenohumeral_joints + self.elbow_joints + self.wrist_joints


class JointVector:
    """Named joint angles (radians) in the model's stable joint order."""

    __slots__ = ("names", "values")

    def __init__(self, names, values):
        self.names = tuple(names)
        self.values = np.array(values, dtype=float).reshape(len(self.names))

    @classmethod
    def zeros(cls, names) -> "JointVector":
        names = tuple(names)
        return cls(names, np.zeros(len(names)))

    @classmethod
    def from_dict(cls, names, mapping, default: float = 0.0) -> "JointVector":
        names = tuple(names)
        unknown = set(mapping) - set(names)
        if unknown:
            raise UnknownJoint(sorted(unknown)[0])
        return cls(names, [float(mapping.get(n, default)) for n in names])

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise UnknownJoint(name) from None

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, JointVector)
            and self.names == other.names
            and np.array_equal(self.values, other.values)
        )

    def asdict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def copy(self) -> "JointVector":
        return JointVector(self.names, self.values.copy())

    def replaced(self, mapping: dict[str, float]) -> "JointVector":
        out = self.values.copy()
        for name, value in mapping.items():
            try:
                out[self.names.index(name)] = float(value)
            except ValueError:
                raise UnknownJoint(name) from None
        return JointVector(self.names, out)

    def subset(self, names) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.values[idx]

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        pairs = ", ".join(f"{n}={np.degrees(v):.2f}deg" for n, v in zip(self.names, self.values))
        return f"JointVector({pairs})"


@dataclass
class _KinematicCache:
    """Index arrays for fast tree sweeps; built once per model."""

    topo_links: list[int] = field(default_factory=list)
    link_parent: np.ndarray | None = None
    link_local_pos: np.ndarray | None = None
    link_local_rot: np.ndarray | None = None
    link_joint: np.ndarray | None = None  # joint index per link, -1 if fixed
    jointed_links: np.ndarray | None = None  # child link index per joint
    joint_child_link: np.ndarray | None = None  # alias kept in joint order
    joint_axis_local: np.ndarray | None = None
    # ancestry[l, j] is True when joint j lies on the path root -> link l
    ancestry: np.ndarray | None = None
    via_link_idx: np.ndarray | None = None
    via_offsets: np.ndarray | None = None
    muscle_first_point: np.ndarray | None = None  # index into via arrays
    muscle_point_count: np.ndarray | None = None


class RobotModel:
    """Immutable kinematic/muscular model; safe for concurrent reads."""

    def __init__(
        self,
        name: str,
        links: list[Link],
        joints: list[Joint],
        muscles: list[MusclePath],
        groups: list[Group],
        arms: dict[str, ArmLayout],
        camera_link: str,
        expected_counts: dict[str, int] | None = None,
    ):
        self.name = name
        self.links = list(links)
        self.joints = list(joints)
        self.muscles = list(muscles)
        self.groups = list(groups)
        self.arms = dict(arms)
        self.camera_link = camera_link
        self.expected_counts = dict(expected_counts or {})

        self.link_index = {l.name: i for i, l in enumerate(self.links)}
        self.joint_index = {j.name: i for i, j in enumerate(self.joints)}
        self.muscle_index = {m.name: i for i, m in enumerate(self.muscles)}
        self.group_index = {g.name: i for i, g in enumerate(self.groups)}
        self.joint_names = tuple(j.name for j in self.joints)
        self.muscle_names = tuple(m.name for m in self.muscles)
        self.lower_limits = np.array([j.lower for j in self.joints])
        self.upper_limits = np.array([j.upper for j in self.joints])

        self._validate()
        self._cache = self._build_cache()

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    def _validate(self) -> None:
        if len(self.link_index) != len(self.links):
            raise ModelError("duplicate link names")
        if len(self.joint_index) != len(self.joints):
            raise ModelError("duplicate joint names")
        if len(self.muscle_index) != len(self.muscles):
            raise ModelError("duplicate muscle names")

        roots = [l for l in self.links if l.parent is None]
        if len(roots) != 1:
            raise ModelError(f"model must have exactly one root link, found {len(roots)}")
        for link in self.links:
            if link.parent is not None and link.parent not in self.link_index:
                raise ModelError(f"link {link.name!r} has unknown parent {link.parent!r}")

        # acyclicity: walking parents from every link must reach the root
        for link in self.links:
            seen = set()
            cur: str | None = link.name
            while cur is not None:
                if cur in seen:
                    raise ModelError(f"link tree contains a cycle through {cur!r}")
                seen.add(cur)
                cur = self.links[self.link_index[cur]].parent

        jointed = {}
        for joint in self.joints:
            if joint.child_link not in self.link_index:
                raise ModelError(f"joint {joint.name!r} references unknown link {joint.child_link!r}")
            if joint.child_link in jointed:
                raise ModelError(
                    f"link {joint.child_link!r} is driven by more than one joint"
                )
            jointed[joint.child_link] = joint.name
            if not np.isclose(np.linalg.norm(joint.axis), 1.0, atol=1e-6):
                raise ModelError(f"joint {joint.name!r} axis is not unit length")
            if joint.lower > joint.upper:
                raise ModelError(f"joint {joint.name!r} has lower limit above upper limit")

        for muscle in self.muscles:
            if len(muscle.via_points) < 2:
                raise ModelError(f"muscle {muscle.name!r} needs at least 2 via points")
            for link_name, _ in muscle.via_points:
                if link_name not in self.link_index:
                    raise ModelError(
                        f"muscle {muscle.name!r} references unknown link {link_name!r}"
                    )
            for (a, _), (b, _) in zip(muscle.via_points, muscle.via_points[1:]):
                if not (self._is_ancestor(a, b) or self._is_ancestor(b, a)):
                    raise ModelError(
                        f"muscle {muscle.name!r}: consecutive via links {a!r}, {b!r} "
                        "are not on one ancestor line"
                    )

        self._validate_groups()
        self._validate_arms()

    def _validate_groups(self) -> None:
        joint_owner: dict[str, str] = {}
        muscle_owner: dict[str, str] = {}
        for group in self.groups:
            for jn in group.joints:
                if jn not in self.joint_index:
                    raise ModelError(f"group {group.name!r} lists unknown joint {jn!r}")
                if jn in joint_owner:
                    raise ModelError(f"joint {jn!r} appears in two groups")
                joint_owner[jn] = group.name
            for mn in group.muscles:
                if mn not in self.muscle_index:
                    raise ModelError(f"group {group.name!r} lists unknown muscle {mn!r}")
                if mn in muscle_owner:
                    raise ModelError(f"muscle {mn!r} appears in two groups")
                muscle_owner[mn] = group.name
        missing_j = set(self.joint_index) - set(joint_owner)
        missing_m = set(self.muscle_index) - set(muscle_owner)
        if missing_j:
            raise ModelError(f"joints not covered by any group: {sorted(missing_j)}")
        if missing_m:
            raise ModelError(f"muscles not covered by any group: {sorted(missing_m)}")

    def _validate_arms(self) -> None:
        for side, arm in self.arms.items():
            if arm.hand_link not in self.link_index:
                raise ModelError(f"{side} hand link {arm.hand_link!r} unknown")
            for jn in arm.scapula_joints + arm.glenohumeral_joints + arm.elbow_joints + arm.wrist_joints:
                if jn not in self.joint_index:
                    raise ModelError(f"{side} arm lists unknown joint {jn!r}")
            if len(arm.scapula_joints) < 2:
                raise ModelError(f"{side} scapula needs >= 2 DOF")
            if len(arm.glenohumeral_joints) != 3:
                raise ModelError(f"{side} glenohumeral joint needs exactly 3 DOF")
            if len(arm.elbow_joints) < 1:
                raise ModelError(f"{side} elbow needs >= 1 DOF")
            if len(arm.wrist_joints) < 2:
                raise ModelError(f"{side} wrist needs >= 2 DOF")

        n_scap = self.expected_counts.get("scapula_muscles_per_arm")
        n_gh = self.expected_counts.get("glenohumeral_crossings_per_arm")
        for side, arm in self.arms.items():
            if n_scap is not None:
                found = len(self.scapula_muscles(side))
                if found != n_scap:
                    raise ModelError(
                        f"{side} arm: expected {n_scap} scapula muscles, found {found}"
                    )
            if n_gh is not None:
                found = len(self.glenohumeral_muscles(side))
                if found != n_gh:
                    raise ModelError(
                        f"{side} arm: expected {n_gh} glenohumeral crossings, found {found}"
                    )

    def _is_ancestor(self, ancestor: str, descendant: str) -> bool:
        cur: str | None = descendant
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.links[self.link_index[cur]].parent
        return False

    def _build_cache(self) -> _KinematicCache:
        cache = _KinematicCache()
        n_links = len(self.links)
        cache.link_parent = np.full(n_links, -1, dtype=int)
        cache.link_local_pos = np.zeros((n_links, 3))
        cache.link_local_rot = np.zeros((n_links, 3, 3))
        cache.link_joint = np.full(n_links, -1, dtype=int)
        for i, link in enumerate(self.links):
            if link.parent is not None:
                cache.link_parent[i] = self.link_index[link.parent]
            cache.link_local_pos[i] = link.origin.position
            cache.link_local_rot[i] = link.origin.rotation_matrix()
        for j, joint in enumerate(self.joints):
            cache.link_joint[self.link_index[joint.child_link]] = j
        cache.joint_child_link = np.array(
            [self.link_index[j.child_link] for j in self.joints], dtype=int
        )
        cache.jointed_links = cache.joint_child_link
        cache.joint_axis_local = np.array([j.axis for j in self.joints]).reshape(-1, 3)

        # children-before-parents is impossible; order parents first
        order: list[int] = []
        visited = [False] * n_links
        def visit(i: int) -> None:
            if visited[i]:
                return
            p = cache.link_parent[i]
            if p >= 0:
                visit(p)
            visited[i] = True
            order.append(i)
        for i in range(n_links):
            visit(i)
        cache.topo_links = order

        ancestry = np.zeros((n_links, len(self.joints)), dtype=bool)
        for i in order:
            p = cache.link_parent[i]
            if p >= 0:
                ancestry[i] = ancestry[p]
            j = cache.link_joint[i]
            if j >= 0:
                ancestry[i, j] = True
        cache.ancestry = ancestry

        via_links: list[int] = []
        via_offsets: list[np.ndarray] = []
        first: list[int] = []
        counts: list[int] = []
        for muscle in self.muscles:
            first.append(len(via_links))
            counts.append(len(muscle.via_points))
            for link_name, offset in muscle.via_points:
                via_links.append(self.link_index[link_name])
                via_offsets.append(np.asarray(offset, dtype=float))
        cache.via_link_idx = np.array(via_links, dtype=int)
        cache.via_offsets = np.array(via_offsets).reshape(-1, 3)
        cache.muscle_first_point = np.array(first, dtype=int)
        cache.muscle_point_count = np.array(counts, dtype=int)
        return cache

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------
    @property
    def root_link(self) -> str:
        return next(l.name for l in self.links if l.parent is None)

    def zero_joints(self) -> JointVector:
        return JointVector.zeros(self.joint_names)

    def joint(self, name: str) -> Joint:
        try:
            return self.joints[self.joint_index[name]]
        except KeyError:
            raise UnknownJoint(name) from None

    def group(self, name: str) -> Group:
        try:
            return self.groups[self.group_index[name]]
        except KeyError:
            raise UnknownGroup(name) from None

    def arm(self, side: str) -> ArmLayout:
        try:
            return self.arms[side]
        except KeyError:
            raise ModelError(f"model has no arm {side!r}") from None

    def clamp(self, q: JointVector) -> tuple[JointVector, np.ndarray]:
        """Clamp all angles into their limits; also report what was clamped."""
        values = np.clip(q.values, self.lower_limits, self.upper_limits)
        clamped = values != q.values
        return JointVector(q.names, values), clamped

    def within_limits(self, q: JointVector, atol: float = 1e-9) -> bool:
        return bool(
            np.all(q.values >= self.lower_limits - atol)
            and np.all(q.values <= self.upper_limits + atol)
        )

    def joints_on_path(self, link_name: str) -> list[str]:
        """Joint names on the chain root -> ``link_name``, root side first."""
        if link_name not in self.link_index:
            raise UnknownLink(link_name)
        row = self._cache.ancestry[self.link_index[link_name]]
        return [self.joint_names[j] for j in range(len(self.joints)) if row[j]]

    def scapula_muscles(self, side: str) -> list[str]:
        """Muscles that tie the scapula to links outside the scapula subtree."""
        arm = self.arm(side)
        first_scap_link = self.joint(arm.scapula_joints[0]).child_link
        inside = {
            l.name for l in self.links if self._is_ancestor(first_scap_link, l.name)
        }
        gh_link = self.joint(arm.glenohumeral_joints[0]).child_link
        below_gh = {l.name for l in self.links if self._is_ancestor(gh_link, l.name)}
        scap_only = inside - below_gh
        out = []
        for muscle in self.muscles:
            links = {ln for ln, _ in muscle.via_points}
            if links & scap_only and links - inside:
                out.append(muscle.name)
        return out

    def glenohumeral_muscles(self, side: str) -> list[str]:
        """Muscles with via points on both sides of the glenohumeral joint."""
        arm = self.arm(side)
        gh_link = self.joint(arm.glenohumeral_joints[0]).child_link
        below = {l.name for l in self.links if self._is_ancestor(gh_link, l.name)}
        out = []
        for muscle in self.muscles:
            links = {ln for ln, _ in muscle.via_points}
            if links & below and links - below:
                out.append(muscle.name)
        return out

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "RobotModel":
        try:
            links = [
                Link(
                    name=entry["name"],
                    parent=entry.get("parent"),
                    origin=Pose(
                        np.array(entry.get("xyz_m", [0.0, 0.0, 0.0]), dtype=float),
                        quat_from_rpy(*np.radians(entry.get("rpy_deg", [0.0, 0.0, 0.0]))),
                    ),
                )
                for entry in doc["links"]
            ]
            joints = [
                Joint(
                    name=entry["name"],
                    child_link=entry["child"],
                    axis=np.array(entry["axis"], dtype=float),
                    lower=float(np.radians(entry["limits_deg"][0])),
                    upper=float(np.radians(entry["limits_deg"][1])),
                )
                for entry in doc["joints"]
            ]
            muscles = [
                MusclePath(
                    name=entry["name"],
                    via_points=tuple(
                        (pt["link"], np.array(pt["xyz_m"], dtype=float))
                        for pt in entry["via_points"]
                    ),
                    rest_length=entry.get("rest_length_m"),
                )
                for entry in doc["muscles"]
            ]
            groups = [
                Group(
                    name=entry["name"],
                    joints=tuple(entry["joints"]),
                    muscles=tuple(entry["muscles"]),
                )
                for entry in doc["groups"]
            ]
            arms = {
                side: ArmLayout(
                    hand_link=entry["hand_link"],
                    scapula_joints=tuple(entry["scapula_joints"]),
                    glenohumeral_joints=tuple(entry["glenohumeral_joints"]),
                    elbow_joints=tuple(entry["elbow_joints"]),
                    wrist_joints=tuple(entry["wrist_joints"]),
                )
                for side, entry in doc["hands"].items()
            }
            camera = doc["camera"]
        except KeyError as exc:
            raise ModelError(f"model document missing required key: {exc}") from exc
        return cls(
            name=doc.get("name", "unnamed"),
            links=links,
            joints=joints,
            muscles=muscles,
            groups=groups,
            arms=arms,
            camera_link=camera,
            expected_counts=doc.get("expected_counts"),
        )

    def to_dict(self) -> dict:
        def rpy_deg(pose: Pose) -> list[float]:
            # recover z-y-x Euler angles from the rotation matrix
            m = pose.rotation_matrix()
            pitch = float(np.arcsin(np.clip(-m[2, 0], -1.0, 1.0)))
            if abs(np.cos(pitch)) > 1e-9:
                roll = float(np.arctan2(m[2, 1], m[2, 2]))
                yaw = float(np.arctan2(m[1, 0], m[0, 0]))
            else:  # gimbal-degenerate; fold everything into yaw
                roll = 0.0
                yaw = float(np.arctan2(-m[0, 1], m[1, 1]))
            return [float(np.degrees(a)) for a in (roll, pitch, yaw)]

        return {
            "name": self.name,
            "links": [
                {
                    "name": l.name,
                    "parent": l.parent,
                    "xyz_m": [float(v) for v in l.origin.position],
                    "rpy_deg": rpy_deg(l.origin),
                }
                for l in self.links
            ],
            "joints": [
                {
                    "name": j.name,
                    "child": j.child_link,
                    "axis": [float(v) for v in j.axis],
                    "limits_deg": [float(np.degrees(j.lower)), float(np.degrees(j.upper))],
                }
                for j in self.joints
            ],
            "muscles": [
                {
                    "name": m.name,
                    "via_points": [
                        {"link": ln, "xyz_m": [float(v) for v in off]}
                        for ln, off in m.via_points
                    ],
                    **({"rest_length_m": m.rest_length} if m.rest_length is not None else {}),
                }
                for m in self.muscles
            ],
            "groups": [
                {"name": g.name, "joints": list(g.joints), "muscles": list(g.muscles)}
                for g in self.groups
            ],
            "hands": {
                side: {
                    "hand_link": a.hand_link,
                    "scapula_joints": list(a.scapula_joints),
                    "glenohumeral_joints": list(a.glenohumeral_joints),
                    "elbow_joints": list(a.elbow_joints),
                    "wrist_joints": list(a.wrist_joints),
                }
                for side, a in self.arms.items()
            },
            "camera": self.camera_link,
            "expected_counts": dict(self.expected_counts),
        }


def load_robot_model(path: str | Path) -> RobotModel:
    with open(path, "r", encoding="utf-8") as fh:
        return RobotModel.from_dict(json.load(fh))


def load_default_model() -> RobotModel:
    doc = json.loads(
        resources.files("shouldersim.data").joinpath(DEFAULT_MODEL_RESOURCE).read_text("utf-8")
    )
    return RobotModel.from_dict(doc)
