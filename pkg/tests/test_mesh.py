import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from msmr.mesh import (
    DegenerateFrameError,
    JointRegressor,
    KinematicChain,
    Mesh,
    MeshError,
    Skinning,
    SkinningError,
    compute_local_frames,
    parse_obj,
    pose,
    pose_mesh,
    read_obj,
    regress_joints,
    root_center,
    write_obj,
)
from msmr.mesh.assets import load_hand
from msmr.mesh.kinematics import ChainError
from msmr.mesh.regressor import fit_regressor
from msmr.mesh.shapes import cylinder, icosphere, octahedron


def line_chain(joints, flexion, mesh_vertices):
    """Serial chain 0 -> 1 -> ... with the last joint a tip."""
    n = len(joints)
    parent = (0,) + tuple(range(n - 1))
    nxt = tuple(range(1, n)) + (-1,)
    chain = KinematicChain(np.asarray(joints, float), parent, nxt, tuple(flexion) + (None,) * (n - len(flexion)))
    tri = np.array([[0, 1, 2]])
    return chain, Mesh(np.asarray(mesh_vertices, float), tri)


class TestMesh:
    def test_rejects_out_of_range_face(self):
        with pytest.raises(MeshError, match="index"):
            Mesh(np.zeros((3, 3)), np.array([[0, 1, 3]]))

    def test_rejects_degenerate_face(self):
        with pytest.raises(MeshError):
            Mesh(np.zeros((3, 3)), np.array([[0, 1, 1]]))

    def test_obj_roundtrip_is_exact(self, tmp_path):
        m = icosphere(1)
        m = m.with_vertices(m.vertices * np.pi)
        write_obj(tmp_path / "a.obj", m)
        back = read_obj(tmp_path / "a.obj")
        assert np.array_equal(back.vertices, m.vertices)
        assert np.array_equal(back.faces, m.faces)

    def test_obj_quads_are_fanned_and_slashes_ignored(self):
        m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n")
        assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_obj_error_reports_line(self):
        with pytest.raises(MeshError, match="line 2"):
            parse_obj("v 0 0 0\nv 1 oops 0\n")

    def test_closed_shapes(self):
        for m in (octahedron(), icosphere(1), cylinder(0.02, 0.1)):
            assert m.is_manifold() and m.is_closed()


class TestFrames:
    def test_axis_aligned_example(self):
        chain, mesh = line_chain([[0, 0, 0], [0, 0, 1]], [0], [[1, 0, 0.5], [0, 1, 0], [0, 0, 2]])
        f = compute_local_frames(chain, mesh)[0]
        assert np.allclose(f.z, [0, 0, 1], atol=1e-12)
        assert np.allclose(f.x, [1, 0, 0], atol=1e-12)
        assert np.allclose(f.y, [0, 1, 0], atol=1e-12)

    def test_collinear_flexion_vertex_names_joint(self):
        chain, mesh = line_chain([[0, 0, 0], [0, 0, 1], [0, 0, 2]], [0, 1], [[1, 0, 0], [0, 0, 3], [0, 0, 0.5]])
        with pytest.raises(DegenerateFrameError, match="joint 1"):
            compute_local_frames(chain, mesh)

    def test_template_frames_are_right_handed_orthonormal(self):
        hand = load_hand()
        for f in compute_local_frames(hand.chain, hand.mesh):
            for axis in (f.x, f.y, f.z):
                assert abs(np.linalg.norm(axis) - 1) < 1e-9
            assert abs(f.x @ f.z) < 1e-9 and abs(f.x @ f.y) < 1e-9 and abs(f.y @ f.z) < 1e-9
            assert np.linalg.norm(np.cross(f.x, f.y) - f.z) < 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_frames_commute_with_rigid_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        joints = np.cumsum(rng.normal(size=(n, 3)), axis=0)
        verts = rng.normal(size=(max(n, 3), 3)) * 2
        chain, mesh = line_chain(joints, list(range(n - 1)), verts)
        R = Rotation.random(random_state=seed).as_matrix()
        t = rng.normal(size=3)
        base = compute_local_frames(chain, mesh)
        moved = compute_local_frames(chain.with_joints(joints @ R.T + t), mesh.with_vertices(verts @ R.T + t))
        for a, b in zip(base, moved):
            assert np.allclose(R @ a.origin + t, b.origin, atol=1e-9)
            for u, v in ((a.x, b.x), (a.y, b.y), (a.z, b.z)):
                assert np.allclose(R @ u, v, atol=1e-9)


class TestPose:
    def test_zero_angles_bit_exact(self):
        hand = load_hand()
        out = pose_mesh(hand.mesh, hand.chain, hand.skinning)
        assert np.array_equal(out.vertices, hand.mesh.vertices)

    def test_terminal_joint_moves_only_its_segment(self):
        hand = load_hand()
        angles = np.zeros((21, 3))
        angles[19] = [0.4, 0.0, 0.0]
        out = pose_mesh(hand.mesh, hand.chain.with_angles(angles), hand.skinning)
        seg = hand.skinning.bone_child == 20
        moved = np.any(out.vertices != hand.mesh.vertices, axis=1)
        assert np.array_equal(moved, seg)
        origin = hand.chain.joints[19]
        d0 = np.linalg.norm(hand.mesh.vertices[seg] - origin, axis=1)
        d1 = np.linalg.norm(out.vertices[seg] - origin, axis=1)
        assert np.max(np.abs(d0 - d1)) < 1e-9

    def test_random_pose_is_rigid_per_segment(self):
        hand = load_hand()
        rng = np.random.default_rng(3)
        out = pose_mesh(hand.mesh, hand.chain.with_angles(rng.uniform(-1, 1, (21, 3))), hand.skinning)
        for bone in np.unique(hand.skinning.bone_child):
            idx = np.flatnonzero(hand.skinning.bone_child == bone)
            a = hand.mesh.vertices[idx]
            b = out.vertices[idx]
            da = np.linalg.norm(a[:, None] - a[None], axis=-1)
            db = np.linalg.norm(b[:, None] - b[None], axis=-1)
            assert np.max(np.abs(da - db)) < 1e-9

    def test_two_thirty_degree_flexions_equal_sixty(self):
        joints = [[0, 0, 0], [0, 1, 0], [0, 2, 0]]
        verts = [[0.2, 1.5, 0.1], [0.0, 1.9, -0.2], [0.1, 1.2, 0.3], [0, 0.5, 0.1]]
        chain = KinematicChain(np.array(joints, float), (0, 0, 1), (1, 2, -1), (3, 0, None))
        mesh = Mesh(np.array(verts, float), np.array([[0, 1, 2], [0, 2, 3]]))
        skin = Skinning(np.array([2, 2, 2, 1]))
        step = np.zeros((3, 3))
        step[1, 0] = np.radians(30)
        once = pose(chain.with_angles(step), mesh, skin)
        again = pose(chain.with_joints(once.joints).with_angles(step), once.mesh, skin)
        direct = pose(chain.with_angles(2 * step), mesh, skin)
        assert np.allclose(again.mesh.vertices, direct.mesh.vertices, atol=1e-9)
        assert np.allclose(again.joints, direct.joints, atol=1e-9)

    def test_angles_are_clamped_not_wrapped(self):
        hand = load_hand()
        a = np.full((21, 3), 5.0)
        assert np.allclose(hand.chain.with_angles(a).angles, np.radians(60))
        assert np.allclose(hand.chain.with_angles(-a).angles, -np.radians(60))

    def test_unassigned_vertex_raises(self):
        hand = load_hand()
        bad = hand.skinning.bone_child.copy()
        bad[7] = -1
        angles = np.zeros((21, 3))
        angles[2, 0] = 0.1
        with pytest.raises(SkinningError, match="vertex 7"):
            pose(hand.chain.with_angles(angles), hand.mesh, Skinning(bad))

    def test_chain_needs_single_root(self):
        with pytest.raises(ChainError):
            KinematicChain(np.zeros((3, 3)), (0, 1, 1), (1, 2, -1), (None, None, None))

    def test_chain_json_roundtrip(self):
        hand = load_hand()
        back = KinematicChain.from_json(json.loads(json.dumps(hand.chain.to_json())))
        assert np.array_equal(back.joints, hand.chain.joints)
        assert back.parent == hand.chain.parent and back.flexion_vertex == hand.chain.flexion_vertex


class TestRegressor:
    def test_one_hot_rows_select_vertices(self):
        v = np.random.default_rng(0).normal(size=(10, 3))
        reg = JointRegressor(sp.csr_matrix((np.ones(3), ([0, 1, 2], [4, 0, 9])), shape=(3, 10)))
        assert np.array_equal(regress_joints(v, reg), v[[4, 0, 9]])

    def test_uniform_row_is_centroid(self):
        v = np.random.default_rng(1).normal(size=(7, 3))
        reg = JointRegressor(sp.csr_matrix(np.full((1, 7), 1 / 7)))
        assert np.allclose(regress_joints(v, reg)[0], v.mean(0), atol=1e-12)

    def test_translation_equivariance(self):
        hand = load_hand()
        t = np.array([0.3, -1.2, 2.5])
        a = regress_joints(hand.mesh.vertices + t, hand.regressor)
        b = regress_joints(hand.mesh.vertices, hand.regressor) + t
        assert np.allclose(a, b, atol=1e-12)

    def test_dimension_mismatch(self):
        reg = JointRegressor(sp.csr_matrix(np.full((1, 7), 1 / 7)))
        with pytest.raises(MeshError, match="7"):
            regress_joints(np.zeros((8, 3)), reg)

    def test_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            JointRegressor(sp.csr_matrix(np.full((1, 4), 0.2)))

    def test_template_regressor_reproduces_annotated_joints(self):
        hand = load_hand()
        err = np.linalg.norm(regress_joints(hand.mesh.vertices, hand.regressor) - hand.chain.joints, axis=1)
        assert err.max() < 5e-3

    def test_fit_regressor_is_valid(self):
        rng = np.random.default_rng(2)
        v = rng.normal(size=(30, 3))
        j = v[:5].copy()
        reg = fit_regressor(v, j, k=4)
        assert np.allclose(regress_joints(v, reg), j, atol=1e-6)

    def test_json_roundtrip(self):
        hand = load_hand()
        back = JointRegressor.from_json(json.loads(json.dumps(hand.regressor.to_json())))
        assert (back.matrix != hand.regressor.matrix).nnz == 0


class TestRootCenter:
    def test_centered_input_unchanged(self):
        j = np.random.default_rng(0).normal(size=(21, 3))
        j[9] = 0
        v = np.random.default_rng(1).normal(size=(5, 3))
        v2, j2 = root_center(v, j, 9)
        assert np.array_equal(v2, v) and np.array_equal(j2, j)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_root_at_origin_and_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        v, j = rng.normal(size=(12, 3)) * 10, rng.normal(size=(21, 3)) * 10
        v1, j1 = root_center(v, j, 9)
        assert np.max(np.abs(j1[9])) < 1e-12
        v2, j2 = root_center(v1, j1, 9)
        assert np.allclose(v2, v1, atol=1e-12) and np.allclose(j2, j1, atol=1e-12)
