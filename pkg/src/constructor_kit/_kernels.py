"""Hot loops of the quantum feasibility solver.

The solver looks for unit vectors ``c[r, b]`` (one per row ``r`` and block
``b``) such that for all row pairs

    G[r, s] = prod_b  c[r, b]^H  M[b, r, s]  c[s, b]

where the last block is the ancilla (``M = I``).  :func:`als_sweeps` runs
Gauss-Seidel sweeps of unit-norm constrained least squares over every free
block.  Two implementations are kept in lock-step: a numba-compiled loop
nest and a vectorised numpy version.  Set ``CONSTRUCTOR_KIT_DISABLE_NUMBA=1``
to force the numpy path (also used when numba is not importable).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("CONSTRUCTOR_KIT_DISABLE_NUMBA", "") not in ("", "0")

try:
    if _DISABLE:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------- numpy path


def _unit_ls_np(h: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin ||A c - t|| over unit c, given h = A^H A and b = A^H t."""
    lam, q = np.linalg.eigh(h)
    beta = q.conj().T @ b
    bn = np.linalg.norm(beta)
    if bn < 1e-300:
        return q[:, 0].copy()
    lo, hi = lam[0] - bn, lam[0]
    if abs(beta[0]) < 1e-14 * bn:
        # Possible hard case: try mu = lam_min and pad with the bottom eigenvector.
        d = lam[1:] - lam[0]
        if d.size and np.all(d > 1e-14):
            part = beta[1:] / d
            pn = np.linalg.norm(part)
            if pn <= 1.0:
                y = np.zeros_like(beta)
                y[1:] = part
                y[0] = np.sqrt(max(0.0, 1.0 - pn * pn))
                return q @ y
    for _ in range(100):
        mu = 0.5 * (lo + hi)
        nrm = np.sum(np.abs(beta) ** 2 / (lam - mu) ** 2)
        if nrm > 1.0:
            hi = mu
        else:
            lo = mu
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    y = beta / (lam - lo)
    y /= np.linalg.norm(y)
    return q @ y


def _block_values_np(C, M, b):
    # P[r, s] = c[r,b]^H M[b,r,s] c[s,b]
    return np.einsum("rk,rskl,sl->rs", C[:, b, :].conj(), M[b], C[:, b, :])


def _residual_np(G, C, M):
    model = np.ones_like(G)
    for b in range(M.shape[0]):
        model *= _block_values_np(C, M, b)
    n = G.shape[0]
    off = ~np.eye(n, dtype=bool)
    if not off.any():
        return 0.0
    return float(np.max(np.abs(G - model)[off]))


def _sweeps_np(G, M, ks, free, C, iters, tol):
    n, nb = free.shape
    vals = np.stack([_block_values_np(C, M, b) for b in range(nb)])
    res = _residual_np(G, C, M)
    for it in range(iters):
        if res <= tol:
            return res, it
        for r in range(n):
            for b in range(nb):
                if not free[r, b]:
                    continue
                k = ks[r, b]
                others = np.prod(np.delete(vals[:, r, :], b, axis=0), axis=0)
                mask = np.arange(n) != r
                # w_s = W_rs * M[b, r, s] c[s, b]
                w = others[mask, None] * np.einsum("skl,sl->sk", M[b, r, mask, :k, :], C[mask, b, :])
                h = w.T @ w.conj()
                rhs = w.T @ G[r, mask].conj()
                c = _unit_ls_np(h, rhs)
                C[r, b, :k] = c
                row = C[r, b, :].conj() @ np.einsum("skl,sl->sk", M[b, r], C[:, b, :]).T
                vals[b, r, :] = row
                vals[b, :, r] = row.conj()
                vals[b, r, r] = 1.0
        res = _residual_np(G, C, M)
    return res, iters


# --------------------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _unit_ls_nb(h, b):
        lam, q = np.linalg.eigh(h)
        k = b.shape[0]
        beta = np.zeros(k, dtype=np.complex128)
        for i in range(k):
            acc = 0j
            for j in range(k):
                acc += np.conj(q[j, i]) * b[j]
            beta[i] = acc
        bn = 0.0
        for i in range(k):
            bn += abs(beta[i]) ** 2
        bn = np.sqrt(bn)
        out = np.zeros(k, dtype=np.complex128)
        if bn < 1e-300:
            for j in range(k):
                out[j] = q[j, 0]
            return out
        lo = lam[0] - bn
        hi = lam[0]
        if abs(beta[0]) < 1e-14 * bn and k > 1:
            ok = True
            pn = 0.0
            for i in range(1, k):
                d = lam[i] - lam[0]
                if d <= 1e-14:
                    ok = False
                    break
                pn += abs(beta[i] / d) ** 2
            if ok and pn <= 1.0:
                y = np.zeros(k, dtype=np.complex128)
                for i in range(1, k):
                    y[i] = beta[i] / (lam[i] - lam[0])
                y[0] = np.sqrt(max(0.0, 1.0 - pn))
                for j in range(k):
                    acc = 0j
                    for i in range(k):
                        acc += q[j, i] * y[i]
                    out[j] = acc
                return out
        for _ in range(100):
            mu = 0.5 * (lo + hi)
            nrm = 0.0
            for i in range(k):
                nrm += abs(beta[i]) ** 2 / (lam[i] - mu) ** 2
            if nrm > 1.0:
                hi = mu
            else:
                lo = mu
            if hi - lo <= 1e-15 * max(1.0, abs(hi)):
                break
        y = np.zeros(k, dtype=np.complex128)
        yn = 0.0
        for i in range(k):
            y[i] = beta[i] / (lam[i] - lo)
            yn += abs(y[i]) ** 2
        yn = np.sqrt(yn)
        for j in range(k):
            acc = 0j
            for i in range(k):
                acc += q[j, i] * y[i]
            out[j] = acc / yn
        return out

    @njit(cache=True)
    def _pair_value_nb(C, M, b, r, s):
        kmax = C.shape[2]
        acc = 0j
        for i in range(kmax):
            ci = np.conj(C[r, b, i])
            if ci == 0:
                continue
            inner = 0j
            for j in range(kmax):
                inner += M[b, r, s, i, j] * C[s, b, j]
            acc += ci * inner
        return acc

    @njit(cache=True)
    def _residual_nb(G, vals):
        nb, n = vals.shape[0], vals.shape[1]
        worst = 0.0
        for r in range(n):
            for s in range(n):
                if r == s:
                    continue
                m = 1.0 + 0j
                for b in range(nb):
                    m *= vals[b, r, s]
                d = abs(G[r, s] - m)
                if d > worst:
                    worst = d
        return worst

    @njit(cache=True)
    def _sweeps_nb(G, M, ks, free, C, iters, tol):
        n, nb = free.shape
        vals = np.empty((nb, n, n), dtype=np.complex128)
        for b in range(nb):
            for r in range(n):
                for s in range(n):
                    vals[b, r, s] = _pair_value_nb(C, M, b, r, s)
        res = _residual_nb(G, vals)
        for it in range(iters):
            if res <= tol:
                return res, it
            for r in range(n):
                for b in range(nb):
                    if not free[r, b]:
                        continue
                    k = ks[r, b]
                    h = np.zeros((k, k), dtype=np.complex128)
                    rhs = np.zeros(k, dtype=np.complex128)
                    w = np.zeros(k, dtype=np.complex128)
                    for s in range(n):
                        if s == r:
                            continue
                        other = 1.0 + 0j
                        for g in range(nb):
                            if g != b:
                                other *= vals[g, r, s]
                        for i in range(k):
                            acc = 0j
                            for j in range(C.shape[2]):
                                acc += M[b, r, s, i, j] * C[s, b, j]
                            w[i] = other * acc
                        gc = np.conj(G[r, s])
                        for i in range(k):
                            rhs[i] += w[i] * gc
                            for j in range(k):
                                h[i, j] += w[i] * np.conj(w[j])
                    c = _unit_ls_nb(h, rhs)
                    for i in range(k):
                        C[r, b, i] = c[i]
                    for s in range(n):
                        if s == r:
                            vals[b, r, r] = 1.0
                            continue
                        v = _pair_value_nb(C, M, b, r, s)
                        vals[b, r, s] = v
                        vals[b, s, r] = np.conj(v)
            res = _residual_nb(G, vals)
        return res, iters


def als_sweeps(G, M, ks, free, C, iters: int, tol: float, use_numba: bool | None = None):
    """Run up to ``iters`` sweeps in place on ``C``; returns ``(residual, sweeps_used)``.

    Shapes: ``G`` (n, n); ``M`` (blocks, n, n, K, K); ``ks`` and ``free``
    (n, blocks); ``C`` (n, blocks, K) with zero padding past ``ks``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        res, it = _sweeps_nb(G, M, ks, free, C, int(iters), float(tol))
    else:
        res, it = _sweeps_np(G, M, ks, free, C, int(iters), float(tol))
    return float(res), int(it)


def residual(G, M, C) -> float:
    return _residual_np(G, C, M)
