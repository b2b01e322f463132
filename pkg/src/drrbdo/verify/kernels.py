"""Monte Carlo inner-loop kernels, each with a numba and a numpy implementation.

Uniform variates always come from the caller's numpy Generator so both
implementations consume identical random streams.
"""
import math

import numpy as np

from .._accel import njit, pick

_TWO_PI = 2.0 * math.pi


@njit
def _box_muller_nb(U):
    # U: (count, 2*q) uniforms in [0, 1) -> (count, 2*q) standard normals
    out = np.empty_like(U)
    count, w = U.shape
    for i in range(count):
        for j in range(0, w, 2):
            r = math.sqrt(-2.0 * math.log(1.0 - U[i, j]))
            t = _TWO_PI * U[i, j + 1]
            out[i, j] = r * math.cos(t)
            out[i, j + 1] = r * math.sin(t)
    return out


def _box_muller_np(U):
    r = np.sqrt(-2.0 * np.log1p(-U[:, 0::2]))
    t = _TWO_PI * U[:, 1::2]
    out = np.empty_like(U)
    out[:, 0::2] = r * np.cos(t)
    out[:, 1::2] = r * np.sin(t)
    return out


box_muller = pick(_box_muller_nb, _box_muller_np)


@njit
def _linear_fail_count_nb(c0, a, U):
    # counts rows with c0 + a . w > 0, w = Box-Muller(U[row]); a padded to U's width
    count, w = U.shape
    fails = 0
    for i in range(count):
        acc = c0
        for j in range(0, w, 2):
            r = math.sqrt(-2.0 * math.log(1.0 - U[i, j]))
            t = _TWO_PI * U[i, j + 1]
            acc += a[j] * r * math.cos(t) + a[j + 1] * r * math.sin(t)
        if acc > 0.0:
            fails += 1
    return fails


def _linear_fail_count_np(c0, a, U):
    return int(np.count_nonzero(c0 + _box_muller_np(U) @ a > 0.0))


linear_fail_count = pick(_linear_fail_count_nb, _linear_fail_count_np)


@njit
def _exact_fail_count_nb(directions, stiffness, load, pi_bar, X):
    # X: (count, n) perturbed areas; returns (failures, skipped)
    count, n = X.shape
    d = load.shape[0]
    fails = 0
    skipped = 0
    K = np.empty((d, d))
    u = np.empty(d)
    for s in range(count):
        bad = False
        for j in range(n):
            if X[s, j] <= 0.0:
                bad = True
                break
        if bad:
            skipped += 1
            continue
        K[:, :] = 0.0
        for j in range(n):
            kj = stiffness[j] * X[s, j]
            for p in range(d):
                bp = directions[j, p]
                if bp == 0.0:
                    continue
                for q in range(d):
                    K[p, q] += kj * bp * directions[j, q]
        # in-place Cholesky, lower triangle
        ok = True
        for i in range(d):
            for k in range(i + 1):
                acc = K[i, k]
                for m in range(k):
                    acc -= K[i, m] * K[k, m]
                if i == k:
                    if acc <= 1e-12 * abs(K[i, i]) or acc <= 0.0:
                        ok = False
                        break
                    K[i, i] = math.sqrt(acc)
                else:
                    K[i, k] = acc / K[k, k]
            if not ok:
                break
        if not ok:
            skipped += 1
            continue
        # compliance p^T K^{-1} p = |L^{-1} p|^2
        pi = 0.0
        for i in range(d):
            acc = load[i]
            for m in range(i):
                acc -= K[i, m] * u[m]
            u[i] = acc / K[i, i]
            pi += u[i] * u[i]
        if pi > pi_bar:
            fails += 1
    return fails, skipped


def _exact_fail_count_np(directions, stiffness, load, pi_bar, X, chunk=4096):
    fails = 0
    skipped = 0
    for start in range(0, len(X), chunk):
        Xc = X[start:start + chunk]
        ok = np.all(Xc > 0.0, axis=1)
        skipped += int(np.count_nonzero(~ok))
        Xc = Xc[ok]
        if len(Xc) == 0:
            continue
        K = np.einsum("sj,jp,jq->spq", Xc * stiffness, directions, directions)
        try:
            L = np.linalg.cholesky(K)
            good = np.ones(len(Xc), dtype=bool)
        except np.linalg.LinAlgError:
            L = np.empty_like(K)
            good = np.zeros(len(Xc), dtype=bool)
            for s in range(len(Xc)):
                try:
                    L[s] = np.linalg.cholesky(K[s])
                    good[s] = True
                except np.linalg.LinAlgError:
                    pass
            skipped += int(np.count_nonzero(~good))
            L = L[good]
        if len(L) == 0:
            continue
        v = np.linalg.solve(L, np.broadcast_to(load, (len(L), len(load)))[..., None])[..., 0]
        fails += int(np.count_nonzero(np.einsum("si,si->s", v, v) > pi_bar))
    return fails, skipped


exact_fail_count = pick(_exact_fail_count_nb, _exact_fail_count_np)
