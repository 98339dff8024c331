import numpy as np
import pytest

from mdclt import _kernels_py, kernels

compiled = pytest.importorskip("mdclt._kernels")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("threads", [1, 3])
def test_uniforms_backends_identical(threads):
    a = compiled.replicate_uniforms(2**63 + 17, 5, 300, 77, threads)
    b = _kernels_py.replicate_uniforms(2**63 + 17, 5, 300, 77, threads)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("p", [1, 2, 5])
def test_rect_counts_backends_identical(p):
    gen = np.random.default_rng(p)
    x = gen.standard_normal((3000, p))
    c = gen.standard_normal((200, p))
    c[:10] = x[:10]  # ties on the boundary count as inside
    a = compiled.rect_counts(x, c, 2)
    b = _kernels_py.rect_counts(x, c, 1)
    brute = np.array([np.sum(np.all(x <= r, axis=1)) for r in c])
    assert np.array_equal(np.asarray(a), brute)
    assert np.array_equal(np.asarray(b), brute)


def test_pure_python_env(monkeypatch):
    import importlib

    monkeypatch.setenv("MDCLT_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("MDCLT_PURE_PYTHON")
        importlib.reload(kernels)
