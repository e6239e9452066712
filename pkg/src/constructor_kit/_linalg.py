"""Small dense linear-algebra helpers shared by the attribute and oracle code."""

from __future__ import annotations

from functools import reduce

import numpy as np

TAU_NORM = 1e-9
TAU_RAY = 1e-9
TAU_RANK = 1e-9


def as_vector(values, dim: int | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=np.complex128).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected a vector of length {dim}, got {v.shape[0]}")
    return v


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first non-negligible entry is real positive."""
    idx = int(np.argmax(np.abs(v) > 1e-12))
    a = v[idx]
    if abs(a) == 0:
        return v
    return v * (abs(a) / a)


def orthonormalize(vectors: np.ndarray, tol: float = TAU_RANK) -> np.ndarray:
    """Orthonormal basis (columns) for the span of the columns of ``vectors``."""
    m = np.asarray(vectors, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[1] == 0:
        return np.zeros((m.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    r = int(np.sum(s > tol))
    q = u[:, :r]
    # Canonical column phases keep fingerprints stable for one-dimensional spans.
    if r == 1:
        q = canonical_phase(q[:, 0])[:, None]
    return q


def complement(basis: np.ndarray, dim: int, tol: float = TAU_RANK) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(basis)`` in C^dim."""
    if basis.shape[1] == 0:
        return np.eye(dim, dtype=np.complex128)
    u, s, _ = np.linalg.svd(basis, full_matrices=True)
    r = int(np.sum(s > tol))
    return u[:, r:]


def rank(m: np.ndarray, tol: float = TAU_RANK) -> int:
    if m.size == 0:
        return 0
    return int(np.sum(np.linalg.svd(m, compute_uv=False) > tol))


def span_contains(basis: np.ndarray, vectors: np.ndarray, tol: float = TAU_RANK) -> bool:
    """True when every column of ``vectors`` lies in ``span(basis)`` (basis orthonormal)."""
    if vectors.shape[1] == 0:
        return True
    if basis.shape[1] == 0:
        return bool(np.all(np.abs(vectors) <= tol))
    resid = vectors - basis @ (basis.conj().T @ vectors)
    return bool(np.max(np.abs(resid)) <= max(tol, 1e-9))


def intersection_dim(a: np.ndarray, b: np.ndarray, tol: float = TAU_RANK) -> int:
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0
    return a.shape[1] + b.shape[1] - rank(np.hstack([a, b]), tol)


def max_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """Largest |<u|v>| over unit u in span(a), v in span(b): top principal-angle cosine."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0.0
    return float(min(1.0, np.linalg.svd(a.conj().T @ b, compute_uv=False)[0]))


def rays_equal(u: np.ndarray, v: np.ndarray, tol: float = TAU_RAY) -> bool:
    return abs(np.vdot(u, v)) >= 1.0 - tol


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)


def split_product(vec: np.ndarray, dims: list[int], tol: float = 1e-9) -> list[np.ndarray] | None:
    """Factor a unit vector into a tensor product over consecutive ``dims``.

    Returns ``None`` when the vector is entangled across any cut.
    """
    factors = []
    rest = vec
    for d in dims[:-1]:
        mat = rest.reshape(d, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        if s.size > 1 and s[1] > tol:
            return None
        factors.append(u[:, 0] * s[0])
        rest = vh[0]
    factors.append(rest)
    return [normalize(f) for f in factors]


def reduced_density(vec: np.ndarray, dims: list[int], keep: list[int]) -> np.ndarray:
    """Reduced density matrix of a pure state over the subsystems in ``keep``."""
    n = len(dims)
    psi = vec.reshape(dims)
    traced = [i for i in range(n) if i not in keep]
    perm = list(keep) + traced
    psi = np.transpose(psi, perm)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    m = psi.reshape(dk, -1)
    return m @ m.conj().T
