"""Smoke tests for the python surface, cross-checked against numpy."""

import numpy as np
import pytest

import handmesh as hm


def test_skeleton_shape_and_degrees():
    edges = hm.skeleton_edges()
    assert len(edges) == 20
    adj = hm.skeleton_adjacency()
    assert adj.shape == (21, 21)
    assert np.array_equal(adj, adj.T)
    degrees = adj.sum(axis=1)
    assert degrees[0] == 5  # wrist
    for tip in (4, 8, 12, 16, 20):
        assert degrees[tip] == 1


def test_laplacian_against_numpy():
    adj = hm.skeleton_adjacency()
    lap = hm.normalized_laplacian(adj)
    deg = adj.sum(axis=1)
    expected = np.eye(21) - adj / np.sqrt(np.outer(deg, deg))
    assert np.allclose(lap, expected, atol=1e-12)
    eig = np.linalg.eigvalsh(lap)
    assert eig.min() >= -1e-9
    assert eig.max() <= 2.0 + 1e-9

    lam = hm.lambda_max(lap)
    assert abs(lam - eig.max()) < 1e-6
    scaled = hm.scaled_laplacian(lap, lam)
    scaled_eig = np.linalg.eigvalsh(scaled)
    assert scaled_eig.min() >= -1.0 - 1e-9
    assert scaled_eig.max() <= 1.0 + 1e-9


def test_cheb_graph_conv_matches_dense_recurrence():
    rng = np.random.default_rng(0)
    adj = hm.skeleton_adjacency()
    lap = hm.normalized_laplacian(adj)
    scaled = hm.scaled_laplacian(lap, hm.lambda_max(lap))
    feats = rng.normal(size=(21, 3))
    weights = [rng.normal(size=(3, 5)) for _ in range(4)]

    out = hm.cheb_graph_conv(scaled, feats, weights)
    t = [np.eye(21), scaled]
    for _ in range(2):
        t.append(2.0 * scaled @ t[-1] - t[-2])
    expected = sum(t[k] @ feats @ weights[k] for k in range(4))
    assert np.allclose(out, expected, atol=1e-9)


def test_positional_encoding_distinct_rows():
    table = hm.positional_encoding(8, 8, 16)
    assert table.shape == (64, 16)
    assert np.allclose(table[0, 0::2][:4], 0.0)  # row-half sines at position 0
    assert len(np.unique(table.round(12), axis=0)) == 64


def test_rodrigues_is_a_rotation():
    rng = np.random.default_rng(1)
    for _ in range(50):
        r = hm.rodrigues(rng.normal(size=3))
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(r) - 1.0) < 1e-12
    assert np.allclose(hm.rodrigues(np.zeros(3)), np.eye(3))


def test_hand_model_contracts():
    hand = hm.HandModel(seed=2024)
    assert hand.template_vertices.shape == (778, 3)
    assert hand.shape_basis.shape == (10, 778, 3)
    assert np.allclose(hand.joint_regressor.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(hand.skinning_weights.sum(axis=1), 1.0, atol=1e-9)
    assert hand.skinning_weights.min() >= 0.0
    assert hand.parents[0] == -1

    verts, joints = hand.lbs(np.zeros(48), np.zeros(10))
    assert verts.shape == (778, 3)
    assert joints.shape == (21, 3)
    assert np.allclose(verts, hand.template_vertices, atol=1e-12)

    # identical seeds regenerate the same model
    again = hm.HandModel(seed=2024)
    assert np.array_equal(again.template_vertices, hand.template_vertices)


def test_lbs_root_rotation_is_rigid():
    hand = hm.HandModel(seed=2024)
    theta = np.zeros(48)
    theta[:3] = [0.4, -0.2, 0.9]
    verts, joints = hand.lbs(theta, np.zeros(10))
    rest_verts, rest_joints = hand.lbs(np.zeros(48), np.zeros(10))
    r = hm.rodrigues(theta[:3])
    root = rest_joints[0]
    assert np.allclose(verts, (rest_verts - root) @ r.T + root, atol=1e-9)
    assert np.allclose(joints, (rest_joints - root) @ r.T + root, atol=1e-9)


def test_projection_matches_pinhole():
    rng = np.random.default_rng(2)
    joints = np.column_stack([
        rng.uniform(-50, 50, 21),
        rng.uniform(-50, 50, 21),
        rng.uniform(400, 800, 21),
    ])
    pose = hm.project(joints, focal=530.0, center_u=128.0, center_v=128.0)
    expected_u = 530.0 * joints[:, 0] / joints[:, 2] + 128.0
    expected_v = 530.0 * joints[:, 1] / joints[:, 2] + 128.0
    assert np.allclose(pose[:, 0], expected_u, atol=1e-12)
    assert np.allclose(pose[:, 1], expected_v, atol=1e-12)
    behind = joints.copy()
    behind[3, 2] = -1.0
    with pytest.raises(ArithmeticError):
        hm.project(behind, focal=530.0, center_u=128.0, center_v=128.0)


def test_procrustes_recovers_similarity():
    rng = np.random.default_rng(3)
    gt = rng.normal(size=(21, 3)) * 30
    r = hm.rodrigues(rng.normal(size=3))
    pred = 1.7 * gt @ r.T + np.array([5.0, -3.0, 11.0])
    aligned = hm.procrustes_align(pred, gt)
    assert hm.mpjpe(aligned, gt) < 1e-9
    assert hm.pa_mpjpe(pred, gt) < 1e-9
    noisy = gt + rng.normal(size=gt.shape)
    assert hm.pa_mpjpe(noisy, gt) <= hm.mpjpe(noisy, gt) + 1e-9


def test_metric_values():
    errors = np.full(21, 25.0)
    assert abs(hm.auc(errors) - 0.5) <= 0.011
    assert hm.auc(np.zeros(21)) == pytest.approx(1.0)
    mesh = np.mgrid[0:10, 0:10, 0:8].reshape(3, -1).T[:778] * 40.0
    assert hm.f_score(mesh, mesh, 5.0) == 1.0
    report = hm.evaluate_metrics([(mesh[:21], mesh[:21], mesh, mesh)])
    assert report["mpjpe_mm"] == 0.0
    assert report["auc_pck"] == pytest.approx(1.0)
    assert report["f_at_5"] == pytest.approx(1.0)


def test_generate_samples_deterministic():
    a = hm.generate_samples(seed=7, n_samples=3, occlusion_level=0.5, image_size=64)
    b = hm.generate_samples(seed=7, n_samples=3, occlusion_level=0.5, image_size=64)
    assert len(a) == 3
    for sa, sb in zip(a, b):
        assert np.array_equal(sa["image"], sb["image"])
        assert np.array_equal(sa["joints3d"], sb["joints3d"])
        assert sa["occlusion_ratio"] == sb["occlusion_ratio"]
    s = a[0]
    assert s["image"].shape == (3, 64, 64)
    assert s["image"].min() >= 0.0 and s["image"].max() <= 1.0
    assert s["pose2d"].shape == (21, 2)
    assert s["mesh"].shape == (778, 3)
    assert 0.0 <= s["occlusion_ratio"] <= 1.0
    # pose2d is the projection of the camera-frame joints
    pose = hm.project(s["joints3d"], focal=530.0 * 64 / 256, center_u=32.0, center_v=32.0)
    assert np.allclose(pose, s["pose2d"], atol=1e-9)


def test_write_dataset(tmp_path):
    stem = str(tmp_path / "split")
    manifest, buffers = hm.write_dataset(stem, seed=3, n_samples=2, occlusion_level=0.2,
                                         image_size=64)
    import json
    import os
    assert os.path.exists(manifest)
    assert os.path.exists(buffers)
    meta = json.load(open(manifest))
    assert meta["meta"]["kind"] == "dataset"
    assert meta["meta"]["count"] == 2
