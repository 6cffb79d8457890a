import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gabor_lattice import _backend

PY = _backend.load("python")
compiled = pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")


def test_selection():
    assert PY.NAME == "python"
    assert _backend.BACKEND in _backend.available()


def test_forced_pure_python():
    env = dict(os.environ, GPL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from gabor_lattice import _backend; print(_backend.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout.strip()
    assert out == "python"


def _signal(seed, n=257):
    rng = np.random.default_rng(seed)
    t = -2 + np.arange(n) / 64
    return t[0], 1 / 64, (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.exp(-t * t)


@compiled
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gabor_points_agree(seed):
    C = _backend.load("cython")
    t0, dt, v = _signal(seed)
    rng = np.random.default_rng(seed + 1)
    xs = rng.uniform(-4, 4, 60)
    ws = rng.uniform(-5, 5, 60)
    a = C.gabor_points(t0, dt, v, xs, ws)
    b = PY.gabor_points(t0, dt, v, xs, ws)
    assert np.max(np.abs(a - b)) < 1e-12 * max(1.0, np.max(np.abs(b)))


@compiled
def test_gabor_design_agree():
    C = _backend.load("cython")
    rng = np.random.default_rng(3)
    xs = rng.uniform(-3, 3, 40)
    ws = rng.uniform(-3, 3, 40)
    a = C.gabor_design(-1.0, 1 / 64, 129, xs, ws)
    b = PY.gabor_design(-1.0, 1 / 64, 129, xs, ws)
    assert a.shape == b.shape and np.max(np.abs(a - b)) < 1e-12


@compiled
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 9), st.floats(0.5, 2.0))
def test_sis_spectrogram_agree(seed, m, beta):
    C = _backend.load("cython")
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m)
    xs = rng.uniform(-5, 5, 50)
    ws = rng.uniform(-3, 3, 50)
    a, ra = C.sis_spectrogram(c, -2, beta, xs, ws)
    b, rb = PY.sis_spectrogram(c, -2, beta, xs, ws)
    assert np.max(np.abs(a - b)) < 1e-12 * max(1.0, np.max(np.abs(b)))
    assert ra < 1e-12 and rb < 1e-12


@pytest.mark.parametrize("name", ["gabor_points", "sis_spectrogram"])
def test_empty_inputs(name):
    for mod in [_backend.load(n) for n in _backend.available()]:
        if name == "gabor_points":
            out = mod.gabor_points(0.0, 0.1, np.ones(5, dtype=complex), np.zeros(0), np.zeros(0))
        else:
            out, _ = mod.sis_spectrogram(np.ones(2, dtype=complex), 0, 1.0, np.zeros(0), np.zeros(0))
        assert out.size == 0
