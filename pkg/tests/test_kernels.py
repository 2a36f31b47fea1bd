"""Backend agreement: the compiled kernels must reproduce the numpy
fallback bit for bit on the stencil and shrinkage kernels, and to rounding
on the dense solver loop (which uses BLAS on the numpy side)."""

import numpy as np
import pytest

from regcomplex import rng
from regcomplex._kernels import _py

core = pytest.importorskip("regcomplex._kernels._core")


@pytest.fixture
def image():
    return rng.Xorshift64Star(31).normals(48 * 32), 48, 32  # width 48, height 32


@pytest.fixture
def kern():
    coords = np.arange(-3.0, 4.0)
    k = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / 8.0)
    return k / k.sum()


def test_blur_apply_bitwise(image, kern):
    x, w, h = image
    assert np.array_equal(_py.blur_apply(x, kern, w, h), core.blur_apply(x, kern, w, h))


def test_blur_adjoint_bitwise(image, kern):
    x, w, h = image
    assert np.array_equal(_py.blur_adjoint(x, kern, w, h), core.blur_adjoint(x, kern, w, h))


def test_grad_bitwise(image):
    x, w, h = image
    assert np.array_equal(_py.grad2d_apply(x, w, h), core.grad2d_apply(x, w, h))
    g = rng.Xorshift64Star(32).normals(2 * w * h)
    assert np.array_equal(_py.grad2d_adjoint(g, w, h), core.grad2d_adjoint(g, w, h))


def test_soft_threshold_bitwise():
    x = rng.Xorshift64Star(33).normals(1000)
    assert np.array_equal(_py.soft_threshold(x, 0.37), core.soft_threshold(x, 0.37))


@pytest.mark.parametrize("planar", [False, True])
def test_group_kernels_bitwise(planar):
    v = rng.Xorshift64Star(34).normals(64)
    for args in ((32, 2, 0.5), (16, 4, 1.25)):
        n_groups, gsize, t = args
        assert np.array_equal(
            _py.group_l2_shrink(v, n_groups, gsize, t, planar),
            core.group_l2_shrink(v, n_groups, gsize, t, planar))
        assert np.array_equal(
            _py.group_l2_project(v, n_groups, gsize, t, planar),
            core.group_l2_project(v, n_groups, gsize, t, planar))
        assert np.array_equal(
            _py.group_l2_norms(v, n_groups, gsize, planar),
            core.group_l2_norms(v, n_groups, gsize, planar))


def test_fb_loop_matches_fallback_to_rounding():
    gen = rng.Xorshift64Star(35)
    a = gen.normals(12 * 20).reshape(12, 20)
    b = gen.normals(12)
    tau = 0.9 / np.linalg.norm(a, 2) ** 2
    x0 = np.zeros(20)
    xhat = gen.normals(20)
    rp = _py.fb_l1_dense(a, b, 0.05, tau, x0, 2000, 500, xhat)
    rc = core.fb_l1_dense(a, b, 0.05, tau, x0, 2000, 500, xhat)
    assert np.array_equal(rp[1], rc[1])
    np.testing.assert_allclose(rp[0], rc[0], rtol=0, atol=1e-12)
    np.testing.assert_allclose(rp[2], rc[2], rtol=1e-12)
    np.testing.assert_allclose(rp[3], rc[3], rtol=1e-12)


def test_fb_recording_schedule():
    gen = rng.Xorshift64Star(36)
    a = gen.normals(6).reshape(2, 3)
    b = gen.normals(2)
    tau = 0.5 / np.linalg.norm(a, 2) ** 2
    for impl in (_py, core):
        x, ks, objs, dists = impl.fb_l1_dense(a, b, 0.1, tau, np.zeros(3), 7, 3, None)
        assert ks.tolist() == [0, 3, 6, 7]
        assert objs.shape == (4,)
        assert dists is None
        x2, ks2, objs2, _ = impl.fb_l1_dense(a, b, 0.1, tau, np.zeros(3), 7, 0, None)
        assert ks2.size == 0 and objs2.size == 0
        assert np.array_equal(x, x2)


def test_mirror_padding_reflects_edges():
    # 1x4 image, kernel that just picks the left neighbour
    kern = np.zeros((3, 3))
    kern[1, 0] = 1.0
    x = np.array([1.0, 2.0, 3.0, 4.0])
    out = _py.blur_apply(x, kern, 4, 1)
    # left neighbour of pixel 0 mirrors back to pixel 0
    assert out.tolist() == [1.0, 1.0, 2.0, 3.0]
    assert np.array_equal(out, core.blur_apply(x, kern, 4, 1))
