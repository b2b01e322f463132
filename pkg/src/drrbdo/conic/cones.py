"""Cone blocks, Jordan-algebra helpers and Nesterov-Todd scalings.

All cones here are symmetric (self-dual), so primal slacks and dual
multipliers live in the same block structure.  Inside the solver every
block is handled in its NT-scaled coordinates, where the scaled point
``lam`` satisfies ``W z = W^{-T} s = lam``.
"""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import StructuralError
from .linalg import _tri_indices, factor_spd, smat_batch, svec_batch, svec_length

NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"
KINDS = (NONNEG, SOC, PSD)


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructuralError(f"unknown cone kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise StructuralError(f"cone dimension must be a positive integer, got {self.dim!r}")

    @property
    def size(self):
        return svec_length(self.dim) if self.kind == PSD else self.dim

    @property
    def degree(self):
        return 1 if self.kind == SOC else self.dim


class ConeSpec:
    """Ordered product of cone blocks partitioning a slack vector."""

    def __init__(self, blocks):
        self.blocks = tuple(b if isinstance(b, ConeBlock) else ConeBlock(*b) for b in blocks)
        if not self.blocks:
            raise StructuralError("a cone spec needs at least one block")
        self.slices = []
        start = 0
        for b in self.blocks:
            self.slices.append(slice(start, start + b.size))
            start += b.size
        self.size = start
        self.degree = sum(b.degree for b in self.blocks)

    def __iter__(self):
        return iter(zip(self.blocks, self.slices))

    def __len__(self):
        return len(self.blocks)

    def __eq__(self, other):
        return isinstance(other, ConeSpec) and self.blocks == other.blocks

    def __repr__(self):
        inner = ", ".join(f"{b.kind}({b.dim})" for b in self.blocks)
        return f"ConeSpec[{inner}]"

    def as_list(self):
        return [[b.kind, b.dim] for b in self.blocks]

    def split(self, v):
        return [v[sl] for sl in self.slices]

    def identity(self):
        e = np.zeros(self.size)
        for b, sl in self:
            e[sl] = block_identity(b)
        return e

    def min_eig(self, v):
        """Smallest Jordan eigenvalue over all blocks (negative => outside the cone)."""
        return min(block_min_eig(b, v[sl]) for b, sl in self)

    def contains(self, v, tol=0.0):
        """Membership test with absolute slack ``tol`` (scaled by the block norm for PSD)."""
        for b, sl in self:
            x = v[sl]
            if b.kind == NONNEG:
                if np.min(x) < -tol:
                    return False
            elif b.kind == SOC:
                if x[0] < np.linalg.norm(x[1:]) - tol:
                    return False
            elif block_min_eig(b, x) < -tol * max(1.0, np.linalg.norm(x)):
                return False
        return True


def block_identity(b):
    if b.kind == NONNEG:
        return np.ones(b.dim)
    if b.kind == SOC:
        e = np.zeros(b.dim)
        e[0] = 1.0
        return e
    rows, cols, _ = _tri_indices(b.dim)
    return (rows == cols).astype(float)


def block_min_eig(b, x):
    if b.kind == NONNEG:
        return float(np.min(x))
    if b.kind == SOC:
        return float(x[0] - np.linalg.norm(x[1:]))
    return float(np.linalg.eigvalsh(smat_batch(x[None, :])[0])[0])


def block_interior(b, x):
    if b.kind == NONNEG:
        return bool(np.all(x > 0.0))
    if b.kind == SOC:
        return bool(x[0] > np.linalg.norm(x[1:]))
    return factor_spd(smat_batch(x[None, :])[0], check=False, pivot_rtol=0.0)[1]


def _congruence(Q, X):
    """svec(Q smat(x) Q^T) for each column x of X (vector or size-by-k array)."""
    vec = X.ndim == 1
    cols = X[:, None] if vec else X
    mats = smat_batch(cols.T)
    out = svec_batch(Q @ mats @ Q.T).T
    return out[:, 0] if vec else out


class BlockScaling:
    """NT scaling of one block at a strictly interior pair (s, z)."""

    def __init__(self, b, s, z):
        self.block = b
        kind = b.kind
        if kind == NONNEG:
            self.d = np.sqrt(s / z)
            self.lam = np.sqrt(s * z)
        elif kind == SOC:
            J = np.ones(b.dim)
            J[1:] = -1.0
            sJs = s[0] ** 2 - s[1:] @ s[1:]
            zJz = z[0] ** 2 - z[1:] @ z[1:]
            if not (sJs > 0 and zJz > 0):
                raise FloatingPointError("second-order cone iterate left the interior")
            sb = s / math.sqrt(sJs)
            zb = z / math.sqrt(zJz)
            gamma = math.sqrt((1.0 + zb @ sb) / 2.0)
            wb = (sb + J * zb) / (2.0 * gamma)
            beta = (sJs / zJz) ** 0.25
            w0, w1 = wb[0], wb[1:]
            core = np.eye(b.dim - 1) + np.outer(w1, w1) / (1.0 + w0)
            W = np.empty((b.dim, b.dim))
            W[0, 0] = w0
            W[0, 1:] = w1
            W[1:, 0] = w1
            W[1:, 1:] = core
            Winv = W.copy()
            Winv[0, 1:] = -w1
            Winv[1:, 0] = -w1
            self.W = beta * W
            self.Winv = Winv / beta
            self.lam = self.W @ z
        else:
            S = smat_batch(s[None, :])[0]
            Z = smat_batch(z[None, :])[0]
            Ls, ok_s = factor_spd(S, check=False, pivot_rtol=0.0)
            Lz, ok_z = factor_spd(Z, check=False, pivot_rtol=0.0)
            if not (ok_s and ok_z):
                raise FloatingPointError("semidefinite iterate left the interior")
            U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
            if lam[-1] <= 0.0:
                raise FloatingPointError("degenerate semidefinite scaling")
            rs = 1.0 / np.sqrt(lam)
            self.R = (Ls @ Vt.T) * rs
            self.Rinv = (U.T @ Lz.T) * rs[:, None]
            self.eig = lam
            rows, cols, _ = _tri_indices(b.dim)
            self.lam = np.where(rows == cols, lam[rows], 0.0)
            self._pair = (lam[rows] + lam[cols]) / 2.0

    # W^{-T} x ; accepts vectors or column stacks
    def winvt(self, X):
        k = self.block.kind
        if k == NONNEG:
            return X / (self.d if X.ndim == 1 else self.d[:, None])
        if k == SOC:
            return self.Winv @ X
        return _congruence(self.Rinv, X)

    def winv(self, x):
        k = self.block.kind
        if k == NONNEG:
            return x / self.d
        if k == SOC:
            return self.Winv @ x
        return _congruence(self.Rinv.T, x)

    def wt(self, x):
        k = self.block.kind
        if k == NONNEG:
            return self.d * x
        if k == SOC:
            return self.W @ x
        return _congruence(self.R, x)

    def w(self, x):
        k = self.block.kind
        if k == NONNEG:
            return self.d * x
        if k == SOC:
            return self.W @ x
        return _congruence(self.R.T, x)

    def lam_prod(self, v):
        """lam o v."""
        k = self.block.kind
        lam = self.lam
        if k == NONNEG:
            return lam * v
        if k == SOC:
            out = lam[0] * v
            out[0] = lam @ v
            out[1:] += v[0] * lam[1:]
            return out
        return self._pair * v

    def lam_div(self, v):
        """Solve lam o u = v for u."""
        k = self.block.kind
        lam = self.lam
        if k == NONNEG:
            return v / lam
        if k == SOC:
            det = lam[0] ** 2 - lam[1:] @ lam[1:]
            u0 = (lam[0] * v[0] - lam[1:] @ v[1:]) / det
            out = np.empty_like(v)
            out[0] = u0
            out[1:] = (v[1:] - u0 * lam[1:]) / lam[0]
            return out
        return v / self._pair

    def max_step(self, dv):
        """Largest alpha with lam + alpha*dv in the cone (inf if unbounded)."""
        k = self.block.kind
        lam = self.lam
        if k == NONNEG:
            neg = dv < 0
            return float(np.min(-lam[neg] / dv[neg])) if np.any(neg) else math.inf
        if k == SOC:
            return _soc_step(lam, dv)
        rs = 1.0 / np.sqrt(self.eig)
        D = smat_batch(dv[None, :])[0] * np.outer(rs, rs)
        t = np.linalg.eigvalsh(D)[0]
        return -1.0 / t if t < 0 else math.inf


def jordan_prod(b, x, y):
    """x o y for a block in unscaled coordinates (used for the corrector term)."""
    if b.kind == NONNEG:
        return x * y
    if b.kind == SOC:
        out = x[0] * y + y[0] * x
        out[0] = x @ y
        return out
    X = smat_batch(x[None, :])[0]
    Y = smat_batch(y[None, :])[0]
    P = X @ Y
    return svec_batch(((P + P.T) / 2.0)[None])[0]


def _soc_step(lam, d):
    a = d[0] ** 2 - d[1:] @ d[1:]
    b = lam[0] * d[0] - lam[1:] @ d[1:]
    c = lam[0] ** 2 - lam[1:] @ lam[1:]
    if abs(a) <= 1e-300:
        return -c / (2.0 * b) if b < 0 else math.inf
    disc = b * b - a * c
    if disc < 0:
        return math.inf
    q = -(b + math.copysign(math.sqrt(disc), b))
    roots = [r for r in (q / a, c / q if q != 0 else math.inf) if r > 0]
    return min(roots) if roots else math.inf
