"""Articulated body model: skeleton tree, forward kinematics, sensors, capsules.

The body is a 15-joint tree (pelvis root, spine, head, and per side
shoulder/elbow/wrist plus hip/knee/ankle) posed by per-joint local
rotations and a root translation. Six sensors are rigidly mounted:
pelvis (index 0), left/right wrist, left/right knee, head (index 5).
Body volume for line-of-sight tests is a set of capsules stretched
between joint pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolationError
from .geometry import Quaternion, Vec3, quat_rotate

PELVIS_SENSOR = 0
L_WRIST_SENSOR = 1
R_WRIST_SENSOR = 2
L_KNEE_SENSOR = 3
R_KNEE_SENSOR = 4
HEAD_SENSOR = 5
N_SENSORS = 6

SENSOR_NAMES = ("pelvis", "l_wrist", "r_wrist", "l_knee", "r_knee", "head")


@dataclass(frozen=True, slots=True)
class Joint:
    name: str
    parent: int  # -1 for root
    offset: Vec3  # from parent, in the parent frame


@dataclass(frozen=True, slots=True)
class Capsule:
    """Body segment volume: a sphere of the given radius swept from joint j0 to j1."""

    j0: int
    j1: int
    radius: float


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    capsules: tuple[Capsule, ...]
    body_height: float

    def __post_init__(self):
        if not 1.5 <= self.body_height <= 2.0:
            raise ContractViolationError(f"body height {self.body_height} outside [1.5, 2.0] m")
        if self.joints[0].parent != -1:
            raise ContractViolationError("joint 0 must be the root")
        for i, j in enumerate(self.joints[1:], start=1):
            if not 0 <= j.parent < i:
                raise ContractViolationError(f"joint {i} parent {j.parent} breaks tree order")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True, slots=True)
class SensorMount:
    joint: int
    offset: Vec3  # in the joint frame
    rotation: Quaternion  # sensor frame relative to the joint frame


@dataclass(frozen=True)
class SensorPlacement:
    mounts: tuple[SensorMount, ...]

    def __post_init__(self):
        if len(self.mounts) != N_SENSORS:
            raise ContractViolationError(f"expected {N_SENSORS} sensor mounts")


@dataclass
class MotionClip:
    """Posed motion at a fixed frame rate: per-frame local rotations + root path."""

    name: str
    kind: str
    rate: float  # Hz
    local_rot: list[list[Quaternion]]  # [frame][joint]
    root_pos: list[Vec3]  # [frame]
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.local_rot)

    @property
    def duration(self) -> float:
        return self.n_frames / self.rate


def default_skeleton(height: float = 1.70) -> Skeleton:
    """Symmetric adult skeleton scaled uniformly to the given standing height."""
    s = height / 1.70
    j = [
        Joint("pelvis", -1, Vec3.zero()),
        Joint("spine", 0, Vec3(0.0, 0.0, 0.26 * s)),
        Joint("head", 1, Vec3(0.0, 0.0, 0.31 * s)),
        Joint("l_shoulder", 1, Vec3(0.0, 0.19 * s, 0.17 * s)),
        Joint("l_elbow", 3, Vec3(0.0, 0.28 * s, 0.0)),
        Joint("l_wrist", 4, Vec3(0.0, 0.26 * s, 0.0)),
        Joint("r_shoulder", 1, Vec3(0.0, -0.19 * s, 0.17 * s)),
        Joint("r_elbow", 6, Vec3(0.0, -0.28 * s, 0.0)),
        Joint("r_wrist", 7, Vec3(0.0, -0.26 * s, 0.0)),
        Joint("l_hip", 0, Vec3(0.0, 0.095 * s, -0.06 * s)),
        Joint("l_knee", 9, Vec3(0.0, 0.0, -0.42 * s)),
        Joint("l_ankle", 10, Vec3(0.0, 0.0, -0.41 * s)),
        Joint("r_hip", 0, Vec3(0.0, -0.095 * s, -0.06 * s)),
        Joint("r_knee", 12, Vec3(0.0, 0.0, -0.42 * s)),
        Joint("r_ankle", 13, Vec3(0.0, 0.0, -0.41 * s)),
    ]
    caps = [
        Capsule(0, 1, 0.13 * s),  # lower torso
        Capsule(1, 2, 0.10 * s),  # chest + neck
        Capsule(2, 2, 0.11 * s),  # head (sphere)
        Capsule(3, 4, 0.045 * s),  # upper arms
        Capsule(6, 7, 0.045 * s),
        Capsule(4, 5, 0.04 * s),  # forearms
        Capsule(7, 8, 0.04 * s),
        Capsule(9, 10, 0.075 * s),  # thighs
        Capsule(12, 13, 0.075 * s),
        Capsule(10, 11, 0.055 * s),  # shins
        Capsule(13, 14, 0.055 * s),
    ]
    return Skeleton(tuple(j), tuple(caps), height)


def default_placement(skel: Skeleton) -> SensorPlacement:
    """Standard six-sensor strap-down placement on the default skeleton."""
    yaw180 = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), np.pi)
    tilt = Quaternion.from_axis_angle(Vec3(0.0, 1.0, 0.0), 0.25)
    mounts = (
        SensorMount(skel.joint_index("pelvis"), Vec3(-0.11, 0.0, 0.03), yaw180),
        SensorMount(skel.joint_index("l_wrist"), Vec3(0.0, 0.02, 0.035), Quaternion.identity()),
        SensorMount(skel.joint_index("r_wrist"), Vec3(0.0, -0.02, 0.035), Quaternion.identity()),
        SensorMount(skel.joint_index("l_knee"), Vec3(0.06, 0.0, -0.06), tilt),
        SensorMount(skel.joint_index("r_knee"), Vec3(0.06, 0.0, -0.06), tilt),
        SensorMount(skel.joint_index("head"), Vec3(-0.09, 0.0, 0.05), yaw180),
    )
    return SensorPlacement(mounts)


def fk_pose(
    skel: Skeleton, local_rot: list[Quaternion], root_pos: Vec3
) -> tuple[list[Vec3], list[Quaternion]]:
    """Global joint positions and orientations for one posed frame.

    Child global orientation composes the parent global with the child
    local; child position adds the parent-rotated offset.
    """
    n = skel.n_joints
    if len(local_rot) != n:
        raise ContractViolationError(f"expected {n} local rotations, got {len(local_rot)}")
    pos: list[Vec3] = [Vec3.zero()] * n
    rot: list[Quaternion] = [Quaternion.identity()] * n
    pos[0] = root_pos
    rot[0] = local_rot[0]
    for i in range(1, n):
        p = skel.joints[i].parent
        rot[i] = (rot[p] * local_rot[i]).normalized()
        pos[i] = pos[p] + quat_rotate(rot[p], skel.joints[i].offset)
    return pos, rot


def forward_kinematics(
    skel: Skeleton, clip: MotionClip, frame: int
) -> tuple[list[Vec3], list[Quaternion]]:
    """FK for one frame of a clip. Out-of-range frames raise IndexError."""
    if not 0 <= frame < clip.n_frames:
        raise IndexError(f"frame {frame} outside [0, {clip.n_frames})")
    return fk_pose(skel, clip.local_rot[frame], clip.root_pos[frame])


def tpose(skel: Skeleton) -> tuple[list[Vec3], list[Quaternion]]:
    """The calibration pose: identity rotations, root at standing height."""
    idq = Quaternion.identity()
    return fk_pose(skel, [idq] * skel.n_joints, Vec3(0.0, 0.0, 0.96 * skel.body_height / 1.70))


def sensor_pose(
    placement: SensorPlacement, sensor: int, joint_pos: list[Vec3], joint_rot: list[Quaternion]
) -> tuple[Vec3, Quaternion]:
    """World pose of one sensor given a posed skeleton frame."""
    m = placement.mounts[sensor]
    p = joint_pos[m.joint] + quat_rotate(joint_rot[m.joint], m.offset)
    q = (joint_rot[m.joint] * m.rotation).normalized()
    return p, q


def sensor_truth(
    skel: Skeleton, clip: MotionClip, placement: SensorPlacement
) -> tuple[np.ndarray, list[list[Quaternion]]]:
    """Ground-truth sensor trajectories: positions (T, 6, 3) and orientations."""
    t_frames = clip.n_frames
    pos = np.zeros((t_frames, N_SENSORS, 3))
    quats: list[list[Quaternion]] = []
    for t in range(t_frames):
        jp, jr = fk_pose(skel, clip.local_rot[t], clip.root_pos[t])
        row: list[Quaternion] = []
        for s in range(N_SENSORS):
            p, q = sensor_pose(placement, s, jp, jr)
            pos[t, s] = (p.x, p.y, p.z)
            row.append(q)
        quats.append(row)
    return pos, quats


def world_capsules(skel: Skeleton, joint_pos: list[Vec3]) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Capsule endpoints in world coordinates for a posed frame."""
    out = []
    for c in skel.capsules:
        p0 = joint_pos[c.j0]
        p1 = joint_pos[c.j1]
        out.append((np.array([p0.x, p0.y, p0.z]), np.array([p1.x, p1.y, p1.z]), c.radius))
    return out


def capsules_at_joint(skel: Skeleton, joint: int) -> tuple[int, ...]:
    """Indices of capsules having the given joint as an endpoint."""
    return tuple(i for i, c in enumerate(skel.capsules) if joint in (c.j0, c.j1))


def sensor_exclusions(skel: Skeleton, placement: SensorPlacement) -> tuple[tuple[int, ...], ...]:
    """Per sensor: capsules to ignore in occlusion tests (the mounting segments)."""
    return tuple(capsules_at_joint(skel, m.joint) for m in placement.mounts)


def _dist_to_segments(points: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Distance from each point (k, 3) to the segment p0-p1."""
    d = p1 - p0
    len2 = float(d @ d)
    if len2 == 0.0:
        return np.linalg.norm(points - p0, axis=1)
    t = np.clip((points - p0) @ d / len2, 0.0, 1.0)
    proj = p0 + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def occlusion_ratio(
    capsules: list[tuple[np.ndarray, np.ndarray, float]],
    p_i: np.ndarray,
    p_j: np.ndarray,
    resolution: int = 64,
    exclude: tuple[int, ...] = (),
) -> float:
    """Fraction of the sight line between two points that runs inside the body.

    Samples `resolution` midpoints along the segment and counts those inside
    any capsule not listed in `exclude` (the two mounting segments). Segments
    shorter than 1 mm return 0. The sample weights are built symmetrically,
    so swapping the endpoints gives the bitwise-identical answer.
    """
    if resolution < 32:
        raise ContractViolationError(f"occlusion resolution {resolution} < 32")
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    if float(np.linalg.norm(p_j - p_i)) < 1e-3:
        return 0.0
    k = np.arange(resolution)
    w2 = (k + 0.5) / resolution
    w1 = (resolution - k - 0.5) / resolution
    points = w1[:, None] * p_i + w2[:, None] * p_j
    inside = np.zeros(resolution, dtype=bool)
    for idx, (c0, c1, r) in enumerate(capsules):
        if idx in exclude:
            continue
        inside |= _dist_to_segments(points, c0, c1) <= r
    return float(inside.sum()) / resolution


def pairwise_occlusion(
    skel: Skeleton,
    placement: SensorPlacement,
    joint_pos: list[Vec3],
    sensor_pos: np.ndarray,
    resolution: int = 64,
) -> np.ndarray:
    """Occlusion ratio for all 15 sensor pairs of a posed frame -> (6, 6) symmetric."""
    caps = world_capsules(skel, joint_pos)
    excl = sensor_exclusions(skel, placement)
    out = np.zeros((N_SENSORS, N_SENSORS))
    for i in range(N_SENSORS):
        for j in range(i + 1, N_SENSORS):
            c = occlusion_ratio(
                caps, sensor_pos[i], sensor_pos[j], resolution, exclude=excl[i] + excl[j]
            )
            out[i, j] = out[j, i] = c
    return out


def check_continuity(clip: MotionClip, max_step_deg: float = 20.0) -> None:
    """Raise if any joint rotates more than max_step_deg between frames."""
    limit = np.deg2rad(max_step_deg)
    for t in range(1, clip.n_frames):
        for j in range(len(clip.local_rot[t])):
            ang = (clip.local_rot[t - 1][j].conjugate() * clip.local_rot[t][j]).normalized().rotation_angle()
            if ang > limit:
                raise ContractViolationError(
                    f"clip {clip.name}: joint {j} jumps {np.rad2deg(ang):.1f} deg at frame {t}"
                )


def validate_kind(kind: str, known: tuple[str, ...]) -> None:
    if kind not in known:
        raise ConfigError(f"unknown motion kind '{kind}' (known: {', '.join(known)})")
