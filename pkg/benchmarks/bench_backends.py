"""Timing comparison of the compiled kernels against the numpy fallback.

Both backends are imported side by side (independently of the
REGCOMPLEX_BACKEND selection), so one run prints the full table:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from regcomplex import rng
from regcomplex._kernels import _py

try:
    from regcomplex._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench(name, make_call, repeats):
    py_time = timeit(make_call(_py), repeats)
    if _core is None:
        print(f"{name:<38} python {py_time * 1e3:9.3f} ms   (extension unavailable)")
        return
    cy_time = timeit(make_call(_core), repeats)
    print(f"{name:<38} python {py_time * 1e3:9.3f} ms   cython "
          f"{cy_time * 1e3:9.3f} ms   speedup {py_time / cy_time:6.1f}x")


def main():
    gen = rng.Xorshift64Star(1)
    w = h = 64
    img = gen.normals(w * h)
    coords = np.arange(-3.0, 4.0)
    kern = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / 8.0)
    kern /= kern.sum()
    grad_field = gen.normals(2 * w * h)

    print(f"image {w}x{h}, kernel {kern.shape[0]}x{kern.shape[0]}")
    bench("blur apply", lambda m: lambda: m.blur_apply(img, kern, w, h), 50)
    bench("blur adjoint", lambda m: lambda: m.blur_adjoint(img, kern, w, h), 50)
    bench("gradient apply", lambda m: lambda: m.grad2d_apply(img, w, h), 200)
    bench("gradient adjoint", lambda m: lambda: m.grad2d_adjoint(grad_field, w, h), 200)
    bench("soft threshold (4096)", lambda m: lambda: m.soft_threshold(img, 0.1), 200)
    bench("pairwise shrink (4096 planar)",
          lambda m: lambda: m.group_l2_shrink(grad_field, w * h, 2, 0.1, True), 200)

    a = gen.normals(30 * 50).reshape(30, 50)
    b = gen.normals(30)
    tau = 0.9 / np.linalg.norm(a, 2) ** 2
    x0 = np.zeros(50)
    bench("forward-backward, 30x50, 10^4 iters",
          lambda m: lambda: m.fb_l1_dense(a, b, 0.3, tau, x0, 10000, 0, None), 3)


if __name__ == "__main__":
    main()
