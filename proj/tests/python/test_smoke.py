"""End-to-end smoke tests for the Python bindings.

Numerical correctness is covered by the C++ test suite; these check that the
boundary behaves: arrays cross with the right shapes and dtypes, errors map to
Python exceptions, and the main flows (forward, solve, train, checkpoint,
metrics, I/O) run on small inputs.
"""

import math

import numpy as np
import pytest

import pansharp as ps


def random_image(rng, h, w, b):
    return rng.standard_normal((h, w, b)).astype(np.float32)


def test_version_string():
    assert isinstance(ps.__version__, str) and ps.__version__


def test_make_network_reports_shape():
    net = ps.make_network(kernel_size=3, feature_count=4, ms_bands=2,
                          prox_kernel=3, stages=2, seed=7)
    assert net.kernel_size == 3
    assert net.feature_count == 4
    assert net.ms_bands == 2
    assert net.stage_count == 2
    # closed form: s^2 K (2 + 5 B) + 18 T kp^2 K^2 + 3
    assert net.parameter_count == 9 * 4 * (2 + 5 * 2) + 18 * 2 * 9 * 16 + 3


def test_forward_shapes_and_determinism():
    rng = np.random.default_rng(0)
    net = ps.make_network(3, 4, 2, 3, 2, seed=1)
    pan = random_image(rng, 12, 10, 1)
    ms_up = random_image(rng, 12, 10, 2)
    out = ps.network_forward(net, pan, ms_up)
    assert out["fused"].shape == (12, 10, 2)
    assert out["c"].shape == out["u"].shape == out["v"].shape == (12, 10, 4)
    again = ps.network_forward(net, pan, ms_up)
    np.testing.assert_array_equal(out["fused"], again["fused"])


def test_forward_rejects_band_mismatch():
    rng = np.random.default_rng(1)
    net = ps.make_network(3, 4, 2, 3, 1, seed=1)
    with pytest.raises(ValueError):
        ps.network_forward(net, random_image(rng, 8, 8, 1), random_image(rng, 8, 8, 3))


def test_solver_descends_and_reconstructs():
    rng = np.random.default_rng(2)
    net = ps.make_network(3, 3, 2, 3, 1, seed=3)
    pan = random_image(rng, 16, 16, 1)
    ms_up = random_image(rng, 16, 16, 2)
    res = ps.solve(net, pan, ms_up, lambda_u=1e-3, lambda_v=1e-3, lambda_c=1e-3,
                   max_sweeps=30)
    obj = res["objective"]
    assert len(obj) == res["sweeps"] + 1
    assert all(b <= a * (1 + 1e-9) for a, b in zip(obj, obj[1:]))
    assert res["fused"].shape == (16, 16, 2)
    rebuilt = ps.reconstruct(net, res["c"], res["u"], res["v"])
    np.testing.assert_allclose(rebuilt, res["fused"], rtol=0, atol=0)


def test_train_two_epochs_runs():
    rng = np.random.default_rng(3)
    net = ps.make_network(3, 3, 2, 3, 1, seed=4)
    samples = []
    for _ in range(3):
        c = rng.standard_normal((10, 10, 3)).astype(np.float32)
        u = rng.standard_normal((10, 10, 3)).astype(np.float32)
        v = rng.standard_normal((10, 10, 3)).astype(np.float32)
        pan = ps.synthesize_pan(net, c, u)
        ms_up = ps.synthesize_ms(net, c, v)
        truth = ps.reconstruct(net, c, u, v)
        samples.append((pan, ms_up, truth))
    history = ps.train(net, samples, learning_rate=1e-4, epochs=2, batch_size=2, seed=5)
    assert [row["epoch"] for row in history] == [0, 1]
    assert all(math.isfinite(row["mean_loss"]) for row in history)


def test_checkpoint_round_trip(tmp_path):
    net = ps.make_network(3, 4, 3, 3, 2, seed=9)
    path = str(tmp_path / "model.ppn")
    ps.save_checkpoint(net, path)
    back = ps.load_checkpoint(path)
    assert back.parameter_count == net.parameter_count
    rng = np.random.default_rng(4)
    pan = random_image(rng, 8, 8, 1)
    ms_up = random_image(rng, 8, 8, 3)
    np.testing.assert_array_equal(ps.network_forward(net, pan, ms_up)["fused"],
                                  ps.network_forward(back, pan, ms_up)["fused"])


def test_raster_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    img = random_image(rng, 6, 7, 3)
    path = str(tmp_path / "img.mbt")
    ps.write_raster(img, path)
    np.testing.assert_array_equal(ps.read_raster(path), img)
    with pytest.raises(OSError):
        ps.read_raster(str(tmp_path / "missing.mbt"))


def test_metric_identities():
    rng = np.random.default_rng(6)
    img = rng.standard_normal((64, 64, 4)) + 10.0
    assert ps.sam(img, img) <= 1e-9
    assert ps.ergas(img, img, ratio=4) <= 1e-9
    assert abs(ps.scc(img, img) - 1.0) <= 1e-9
    assert abs(ps.q2n(img, img, block=32) - 1.0) <= 1e-9
    report = ps.evaluate_reduced(img, img, ratio=4)
    assert report["mode"] == "reduced"
    assert report["sam_degrees"] <= 1e-9


def test_metric_errors_are_python_exceptions():
    flat = np.zeros((32, 32, 3))
    with pytest.raises(ValueError):
        ps.sam(flat, flat)
    with pytest.raises(ValueError):
        ps.q2n(np.ones((8, 8, 2)), np.ones((8, 8, 2)), block=32)


def test_qnr_composition():
    assert ps.qnr(0.0, 0.0) == 1.0
    assert abs(ps.qnr(0.2, 0.5) - 0.4) <= 1e-12


def test_wald_protocol_shapes():
    rng = np.random.default_rng(7)
    img = random_image(rng, 32, 24, 2)
    low = ps.blur_decimate(img, ratio=4)
    assert low.shape == (8, 6, 2)
    up = ps.exp_upsample(low, ratio=4)
    assert up.shape == (32, 24, 2)
    const = np.full((8, 8, 1), 3.5, dtype=np.float32)
    np.testing.assert_array_equal(ps.blur_decimate(const, 2),
                                  np.full((4, 4, 1), 3.5, dtype=np.float32))
    with pytest.raises(ValueError):
        ps.exp_upsample(img, ratio=3)


def test_soft_threshold_scalar():
    assert ps.soft_threshold(2.0, 0.5) == 1.5
    assert ps.soft_threshold(-2.0, 0.5) == -1.5
    assert ps.soft_threshold(0.3, 0.5) == 0.0


def test_conv_adjoint_identity():
    rng = np.random.default_rng(8)
    weights = rng.standard_normal((2, 3, 3, 3)).astype(np.float32)
    x = rng.standard_normal((9, 8, 3)).astype(np.float32)
    y = rng.standard_normal((9, 8, 2)).astype(np.float32)
    ax = ps.conv2d_same(x, weights)
    aty = ps.conv2d_adjoint(y, weights)
    lhs = float(np.sum(ax.astype(np.float64) * y.astype(np.float64)))
    rhs = float(np.sum(x.astype(np.float64) * aty.astype(np.float64)))
    scale = np.linalg.norm(ax) * np.linalg.norm(y) + 1e-30
    assert abs(lhs - rhs) / scale <= 1e-6


def test_thread_count_control():
    ps.set_thread_count(2)
    assert ps.thread_count() == 2
    ps.set_thread_count(1)
    assert ps.thread_count() == 1
