"""Skeleton table, forward kinematics, sensors, and occlusion geometry."""
import math

import numpy as np
import pytest

from uip.errors import ContractViolationError
from uip.geometry import Quaternion, Vec3, quat_angle_between, quat_rotate
from uip.rng import derive_rng
from uip.skeleton import (
    MotionClip,
    N_SENSORS,
    SENSOR_NAMES,
    check_continuity,
    default_placement,
    default_skeleton,
    fk_pose,
    occlusion_ratio,
    pairwise_occlusion,
    sensor_pose,
    sensor_truth,
    tpose,
    world_capsules,
)

JOINT_ORDER = (
    "pelvis",
    "spine",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
)


def test_joint_table_order_and_tree(skel):
    assert tuple(j.name for j in skel.joints) == JOINT_ORDER
    assert skel.n_joints == 15
    assert skel.joints[0].parent == -1
    for i, j in enumerate(skel.joints[1:], start=1):
        assert 0 <= j.parent < i
    assert SENSOR_NAMES == ("pelvis", "l_wrist", "r_wrist", "l_knee", "r_knee", "head")


def test_joint_index_lookup(skel):
    assert skel.joint_index("pelvis") == 0
    assert skel.joint_index("r_ankle") == 14
    with pytest.raises(KeyError):
        skel.joint_index("tail")


def test_height_scaling_is_uniform():
    a, b = default_skeleton(1.60), default_skeleton(2.00)
    ratio = 2.00 / 1.60
    for ja, jb in zip(a.joints[1:], b.joints[1:]):
        off_a, off_b = ja.offset.to_array(), jb.offset.to_array()
        assert np.allclose(off_b, off_a * ratio, atol=1e-12)
    for ca, cb in zip(a.capsules, b.capsules):
        assert math.isclose(cb.radius, ca.radius * ratio, rel_tol=1e-12)


def test_height_bounds_enforced():
    with pytest.raises(ContractViolationError):
        default_skeleton(1.2)
    with pytest.raises(ContractViolationError):
        default_skeleton(2.3)


def test_fk_identity_matches_offset_sums(skel):
    # With identity local rotations, each joint sits at the sum of offsets
    # along its chain: FK reduced to pure translation.
    idq = [Quaternion.identity()] * skel.n_joints
    root = Vec3(0.3, -0.2, 1.0)
    pos, rot = fk_pose(skel, idq, root)
    for i in range(skel.n_joints):
        expect = root.to_array().copy()
        j = i
        while skel.joints[j].parent >= 0:
            expect += skel.joints[j].offset.to_array()
            j = skel.joints[j].parent
        assert np.allclose(pos[i].to_array(), expect, atol=1e-12)
        assert quat_angle_between(rot[i], Quaternion.identity()) == 0.0


def test_fk_root_rotation_rotates_everything(skel):
    q = Quaternion.from_axis_angle(Vec3(0, 0, 1), 0.9)
    local = [Quaternion.identity()] * skel.n_joints
    local[0] = q
    root = Vec3(0.0, 0.0, 1.0)
    pos, _ = fk_pose(skel, local, root)
    base, _ = fk_pose(skel, [Quaternion.identity()] * skel.n_joints, root)
    for i in range(skel.n_joints):
        want = quat_rotate(q, base[i] - root) + root
        assert np.allclose(pos[i].to_array(), want.to_array(), atol=1e-12)


def test_fk_elbow_bend_moves_only_descendants(skel):
    local = [Quaternion.identity()] * skel.n_joints
    local[skel.joint_index("l_elbow")] = Quaternion.from_axis_angle(Vec3(1, 0, 0), 0.8)
    bent, _ = fk_pose(skel, local, Vec3.zero())
    straight, _ = fk_pose(skel, [Quaternion.identity()] * skel.n_joints, Vec3.zero())
    wrist = skel.joint_index("l_wrist")
    for i in range(skel.n_joints):
        same = np.allclose(bent[i].to_array(), straight[i].to_array(), atol=1e-12)
        assert same == (i != wrist)


def test_fk_wrong_arity_rejected(skel):
    with pytest.raises(ContractViolationError):
        fk_pose(skel, [Quaternion.identity()] * 14, Vec3.zero())


def test_bone_lengths_survive_posing(skel):
    rng = derive_rng(4, "skel", "bones")
    for _ in range(10):
        local = [
            Quaternion.from_rotvec(Vec3(*rng.normal(0, 0.4, 3))) for _ in range(skel.n_joints)
        ]
        pos, _ = fk_pose(skel, local, Vec3(*rng.normal(0, 1, 3)))
        for i in range(1, skel.n_joints):
            p = skel.joints[i].parent
            length = (pos[i] - pos[p]).norm()
            assert math.isclose(length, skel.joints[i].offset.norm(), abs_tol=1e-10)


def test_tpose_head_near_standing_height(skel):
    pos, rot = tpose(skel)
    assert len(pos) == skel.n_joints
    head = pos[skel.joint_index("head")]
    assert 0.8 * skel.body_height < head.z < 1.05 * skel.body_height
    for q in rot:
        assert quat_angle_between(q, Quaternion.identity()) == 0.0
    # Ankles nearly on the floor.
    for name in ("l_ankle", "r_ankle"):
        assert abs(pos[skel.joint_index(name)].z) < 0.12


def test_sensor_pose_applies_mount(skel, placement):
    pos, rot = tpose(skel)
    for s in range(N_SENSORS):
        m = placement.mounts[s]
        p, q = sensor_pose(placement, s, pos, rot)
        want_p = pos[m.joint] + quat_rotate(rot[m.joint], m.offset)
        assert np.allclose(p.to_array(), want_p.to_array(), atol=1e-12)
        assert quat_angle_between(q, (rot[m.joint] * m.rotation).normalized()) < 1e-12


def test_sensor_truth_matches_manual_fk(skel, placement):
    frames = 3
    rng = derive_rng(4, "skel", "truth")
    clip = MotionClip(
        name="t",
        kind="idle",
        rate=100.0,
        local_rot=[
            [Quaternion.from_rotvec(Vec3(*rng.normal(0, 0.2, 3))) for _ in range(skel.n_joints)]
            for _ in range(frames)
        ],
        root_pos=[Vec3(*rng.normal(0, 0.5, 3)) for _ in range(frames)],
    )
    pos, quats = sensor_truth(skel, clip, placement)
    assert pos.shape == (frames, N_SENSORS, 3)
    for t in range(frames):
        jp, jr = fk_pose(skel, clip.local_rot[t], clip.root_pos[t])
        for s in range(N_SENSORS):
            p, q = sensor_pose(placement, s, jp, jr)
            assert np.allclose(pos[t, s], p.to_array(), atol=1e-12)
            assert quat_angle_between(q, quats[t][s]) < 1e-12


def test_occlusion_ratio_endpoints(skel):
    pos, _ = tpose(skel)
    caps = world_capsules(skel, pos)
    # A segment far above the body is fully clear.
    a = np.array([0.0, -2.0, 3.5])
    b = np.array([0.0, 2.0, 3.5])
    assert occlusion_ratio(caps, a, b) == 0.0
    # A segment running through the torso capsule is mostly covered.
    lo = np.array([0.0, 0.0, 0.9])
    hi = np.array([0.0, 0.0, 1.1])
    assert occlusion_ratio(caps, lo, hi) > 0.8


def test_pairwise_occlusion_symmetric_zero_diagonal(skel, placement):
    pos, rot = tpose(skel)
    spos = np.stack(
        [sensor_pose(placement, s, pos, rot)[0].to_array() for s in range(N_SENSORS)]
    )
    occ = pairwise_occlusion(skel, placement, pos, spos)
    assert occ.shape == (N_SENSORS, N_SENSORS)
    assert np.array_equal(occ, occ.T)
    assert np.array_equal(np.diag(occ), np.zeros(N_SENSORS))
    assert np.all((occ >= 0.0) & (occ <= 1.0))


def test_check_continuity_accepts_smooth_rejects_jump(skel):
    idq = [Quaternion.identity()] * skel.n_joints
    turned = list(idq)
    turned[3] = Quaternion.from_axis_angle(Vec3(1, 0, 0), math.radians(45.0))
    smooth = MotionClip(
        name="s", kind="idle", rate=100.0, local_rot=[idq, idq], root_pos=[Vec3.zero()] * 2
    )
    check_continuity(smooth)
    jumpy = MotionClip(
        name="j", kind="idle", rate=100.0, local_rot=[idq, turned], root_pos=[Vec3.zero()] * 2
    )
    with pytest.raises(ContractViolationError):
        check_continuity(jumpy)
