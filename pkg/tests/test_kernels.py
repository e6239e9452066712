import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constructor_kit import _kernels
from constructor_kit.core import Attribute, Substrate, Task
from constructor_kit.oracles import OracleConfig, quantum_possible, validate_witness

from conftest import random_ray

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")


def planted(n, dim, blocks, rng):
    ks = np.full((n, blocks + 1), dim, dtype=np.int64)
    ks[:, blocks] = n
    K = int(ks.max())
    M = np.zeros((blocks + 1, n, n, K, K), dtype=np.complex128)
    bases = [[np.linalg.qr(rng.standard_normal((dim + 1, dim))
                           + 1j * rng.standard_normal((dim + 1, dim)))[0]
              for _ in range(blocks)] for _ in range(n)]
    for b in range(blocks):
        for r in range(n):
            for s in range(n):
                M[b, r, s, :dim, :dim] = bases[r][b].conj().T @ bases[s][b]
    M[blocks, :, :, :n, :n] = np.eye(n)
    free = np.ones(ks.shape, dtype=np.bool_)

    def start():
        C = np.zeros((n, blocks + 1, K), dtype=np.complex128)
        for r in range(n):
            for b in range(blocks + 1):
                C[r, b, :ks[r, b]] = random_ray(rng, int(ks[r, b]))
        return C

    sol = start()
    G = np.ones((n, n), dtype=np.complex128)
    for b in range(blocks + 1):
        for r in range(n):
            for s in range(n):
                G[r, s] *= sol[r, b].conj() @ M[b, r, s] @ sol[s, b]
    return G, M, ks, free, start()


def test_backend_reports_numba_when_available():
    assert _kernels.backend() == ("numba" if _kernels.HAVE_NUMBA else "numpy")


def test_env_flag_forces_numpy():
    env = dict(os.environ, CONSTRUCTOR_KIT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from constructor_kit import _kernels; print(_kernels.backend())"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"


@needs_numba
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 2))
def test_numba_and_numpy_sweeps_agree(seed, n, blocks):
    # One sweep pins the update rule.  Sweeps are a nonconvex iteration, so
    # rounding differences grow over many sweeps, and once the residual is
    # near zero the constrained least-squares step is ill-conditioned.
    rng = np.random.default_rng(seed)
    G, M, ks, free, C0 = planted(n, 2, blocks, rng)
    c_np, c_nb = C0.copy(), C0.copy()
    r_np, it_np = _kernels.als_sweeps(G, M, ks, free, c_np, 1, 0.0, use_numba=False)
    r_nb, it_nb = _kernels.als_sweeps(G, M, ks, free, c_nb, 1, 0.0, use_numba=True)
    assert it_np == it_nb == 1
    assert r_np == pytest.approx(r_nb, rel=1e-8, abs=1e-9)
    if min(r_np, r_nb) > 1e-6:
        assert np.allclose(c_np, c_nb, atol=1e-9)


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_sweeps_solve_planted_problems(use_numba):
    rng = np.random.default_rng(3)
    G, M, ks, free, C = planted(3, 2, 1, rng)
    best = np.inf
    for _ in range(8):
        C = C.copy()
        for r in range(3):
            for b in range(2):
                C[r, b, :ks[r, b]] = random_ray(rng, int(ks[r, b]))
        res, _ = _kernels.als_sweeps(G, M, ks, free, C, 500, 1e-12, use_numba=use_numba)
        best = min(best, res)
        if best < 1e-10:
            break
    assert best < 1e-10
    assert _kernels.residual(G, M, C) == pytest.approx(res, abs=1e-9)


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_subspace_targets_go_through_the_numeric_solver(use_numba):
    rng = np.random.default_rng(11)
    s = Substrate.quantum("s", 3)
    xs = [random_ray(rng, 3) for _ in range(3)]
    u = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    pairs = []
    for x in xs:
        y = u @ x
        other = random_ray(rng, 3)
        other -= np.vdot(y, other) * y
        basis = np.stack([y, other / np.linalg.norm(other)], axis=1)
        pairs.append((Attribute.rays(s, [x]), Attribute.subspace(s, basis)))
    task = Task(tuple(pairs))
    v = quantum_possible(task, config=OracleConfig(use_numba=use_numba))
    assert v.possible
    assert validate_witness(task, v)
