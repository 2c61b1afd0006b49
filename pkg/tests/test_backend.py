import subprocess
import sys

import numpy as np
import pytest

from conftest import random_data, random_model
from somgmm import _core_py, backend


def _inputs(rng, K=7, D=5, N=40):
    m = random_model(rng, K, D)
    x = random_data(rng, N, D).samples
    return m.weights, m.centroids, m.precision_roots, x


def test_compiled_backend_selected_when_available(rng):
    try:
        import somgmm._core  # noqa: F401
    except ImportError:
        pytest.skip("extension not built")
    assert backend.BACKEND == "cython"


def test_backends_agree(rng):
    try:
        from somgmm._core import log_joints as compiled
    except ImportError:
        pytest.skip("extension not built")
    for _ in range(10):
        args = _inputs(rng)
        a = compiled(*args)
        b = _core_py.log_joints(*args)
        assert np.max(np.abs(a - b)) < 1e-12


def test_backends_agree_with_zero_weight(rng):
    try:
        from somgmm._core import log_joints as compiled
    except ImportError:
        pytest.skip("extension not built")
    w, mu, d, x = _inputs(rng, K=3)
    w = np.array([0.0, 0.4, 0.6])
    a = compiled(w, mu, d, x)
    b = _core_py.log_joints(w, mu, d, x)
    assert np.all(a[:, 0] == -np.inf) and np.all(b[:, 0] == -np.inf)
    assert np.max(np.abs(a[:, 1:] - b[:, 1:])) < 1e-12


def test_fallback_chunking_matches_single_pass(rng, monkeypatch):
    args = _inputs(rng, N=100)
    whole = _core_py.log_joints(*args)
    monkeypatch.setattr(_core_py, "_CHUNK_ELEMS", 64)  # force many chunks
    chunked = _core_py.log_joints(*args)
    assert np.array_equal(whole, chunked)


def test_env_var_forces_fallback():
    code = ("import os; os.environ['SOMGMM_BACKEND']='python'; "
            "from somgmm import backend; print(backend.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
