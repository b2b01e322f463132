"""Dense primal-dual interior-point method for linear cone programs.

Problem form::

    minimize    c @ y
    subject to  s = h - G @ y,   s in K

with dual ``maximize -h @ z  s.t.  G.T @ z + c = 0,  z in K``.  K is a
product of nonnegative orthants, second-order cones and PSD cones (the
latter in svec coordinates).  Directions come from Nesterov-Todd scaling
with a Mehrotra predictor-corrector; the start point need not be feasible.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import StructuralError
from .cones import BlockScaling, ConeSpec, block_interior, jordan_prod

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
MAX_ITERATIONS = "max-iterations"

_DIVERGENCE = 1e8


@dataclass
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99


@dataclass
class ConeProgram:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: ConeSpec

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.h = np.asarray(self.h, dtype=float)
        if not isinstance(self.cones, ConeSpec):
            self.cones = ConeSpec(self.cones)

    def validate(self):
        m, n = self.G.shape
        if self.c.shape != (n,):
            raise StructuralError(f"objective has length {self.c.size}, G has {n} columns")
        if self.h.shape != (m,):
            raise StructuralError(f"offset h has length {self.h.size}, G has {m} rows")
        if self.cones.size != m:
            raise StructuralError(f"cones cover {self.cones.size} slack entries, G has {m} rows")
        if not (np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.c))):
            raise StructuralError("program data contains non-finite values")

    def to_json(self):
        """Debug dump; field names follow ``schemas/cone_program.schema.json``."""
        return {
            "objective": self.c.tolist(),
            "G": self.G.tolist(),
            "h": self.h.tolist(),
            "cones": [{"kind": b.kind, "dim": b.dim} for b in self.cones.blocks],
        }

    @classmethod
    def from_json(cls, doc):
        return cls(doc["objective"], doc["G"], doc["h"], ConeSpec([(b["kind"], b["dim"]) for b in doc["cones"]]))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


@dataclass
class ConeSolution:
    status: str
    y: np.ndarray
    s: np.ndarray
    z: np.ndarray
    duals: list
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    trajectory: list = field(default_factory=list, repr=False)
    message: str = ""

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _norm(v):
    return float(np.linalg.norm(v))


def _shift_into_cone(v, cones):
    # push v strictly inside K by a multiple of the identity (CVXOPT-style start)
    t = cones.min_eig(v)
    if t < 1e-8 * max(1.0, _norm(v)):
        v = v + (1.0 - t) * cones.identity()
    return v


def _start(prog):
    G, h, c, cones = prog.G, prog.h, prog.c, prog.cones
    y = np.linalg.lstsq(G, h, rcond=None)[0]
    s = _shift_into_cone(h - G @ y, cones)
    z = np.linalg.lstsq(G.T, -c, rcond=None)[0]
    z = _shift_into_cone(z, cones)
    return y, s, z


class _Factor:
    def __init__(self, M):
        n = M.shape[0]
        scale = max(1.0, float(np.max(np.abs(np.diag(M))))) if n else 1.0
        try:
            self._cho = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
            self._lu = None
        except np.linalg.LinAlgError:
            self._cho = None
            self._lu = scipy.linalg.lu_factor(M + 1e-13 * scale * np.eye(n), check_finite=False)

    def solve(self, b):
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, b, check_finite=False)
        return scipy.linalg.lu_solve(self._lu, b, check_finite=False)


def solve(program, settings=None, **overrides):
    """Solve a :class:`ConeProgram`; never raises on numerical trouble.

    Numerical breakdown and stalls are reported as ``max-iterations`` with a
    message, so a non-optimal status must always be checked by the caller.
    """
    settings = settings or SolverSettings()
    if overrides:
        settings = SolverSettings(**{**settings.__dict__, **overrides})
    program.validate()
    G, h, c, cones = program.G, program.h, program.c, program.cones
    tol = settings.tol
    blocks = list(cones)
    hnorm = max(1.0, _norm(h))
    cnorm = max(1.0, _norm(c))
    e = cones.identity()

    y, s, z = _start(program)
    y0n, z0n = max(1.0, _norm(y)), max(1.0, _norm(z))
    trajectory = []
    status, message = MAX_ITERATIONS, "iteration cap reached"
    it = 0

    for it in range(settings.max_iter + 1):
        rx = G.T @ z + c
        rz = G @ y + s - h
        pcost = float(c @ y)
        dcost = float(-h @ z)
        gap = float(s @ z)
        pres = _norm(rz) / hnorm
        dres = _norm(rx) / cnorm
        relgap = gap / (1.0 + abs(pcost))
        trajectory.append(dict(iteration=it, pcost=pcost, dcost=dcost, gap=gap, pres=pres, dres=dres))
        log.debug("it %3d pcost % .9e dcost % .9e gap %.2e pres %.2e dres %.2e", it, pcost, dcost, gap, pres, dres)

        if pres <= tol and dres <= tol and relgap <= tol:
            status, message = OPTIMAL, ""
            break
        hz = float(h @ z)
        if hz < 0 and _norm(G.T @ z) <= tol * -hz and _norm(z) > 10.0 * z0n:
            status, message = PRIMAL_INFEASIBLE, "dual ray certifies primal infeasibility"
            break
        cy = pcost
        if cy < 0 and _norm(G @ y + s) <= tol * -cy and _norm(y) > 10.0 * y0n:
            status, message = DUAL_INFEASIBLE, "primal ray certifies unboundedness"
            break
        if _norm(z) > _DIVERGENCE * z0n and hz < 0:
            status, message = PRIMAL_INFEASIBLE, "dual iterates diverged"
            break
        if _norm(y) > _DIVERGENCE * y0n and cy < 0:
            status, message = DUAL_INFEASIBLE, "primal iterates diverged"
            break
        if it == settings.max_iter:
            break

        try:
            scal = [BlockScaling(b, s[sl], z[sl]) for b, sl in blocks]
            lam = np.concatenate([sc.lam for sc in scal])
            Ghat = np.vstack([sc.winvt(G[sl]) for sc, (b, sl) in zip(scal, blocks)])
            fac = _Factor(Ghat.T @ Ghat)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            message = f"numerical breakdown at iteration {it}: {exc}"
            break

        def newton(dx, dz, ds):
            # G^T dZ = dx ; G dY + dS = dz ; lam o (W dZ + W^{-T} dS) = ds
            q = np.concatenate([sc.lam_div(ds[sl]) for sc, (b, sl) in zip(scal, blocks)])
            wdz = np.concatenate([sc.winvt(dz[sl]) for sc, (b, sl) in zip(scal, blocks)])
            dy = fac.solve(dx + Ghat.T @ (wdz - q))
            dzt = Ghat @ dy - wdz + q
            return dy, q - dzt, dzt

        def max_step(dst, dzt):
            a = math.inf
            for sc, (b, sl) in zip(scal, blocks):
                a = min(a, sc.max_step(dst[sl]), sc.max_step(dzt[sl]))
            return a

        lamsq = np.concatenate([sc.lam_prod(lam[sl]) for sc, (b, sl) in zip(scal, blocks)])
        mu = gap / cones.degree

        dy_a, ds_a, dz_a = newton(-rx, -rz, -lamsq)
        alpha_a = min(1.0, max_step(ds_a, dz_a))
        sigma = (1.0 - alpha_a) ** 3

        corr = np.concatenate([jordan_prod(b, ds_a[sl], dz_a[sl]) for b, sl in blocks])
        dy, dst, dzt = newton(-rx, -rz, -lamsq - corr + sigma * mu * e)
        if not (np.all(np.isfinite(dy)) and np.all(np.isfinite(dst)) and np.all(np.isfinite(dzt))):
            message = f"numerical breakdown at iteration {it}: non-finite search direction"
            break
        alpha = min(1.0, settings.step_fraction * max_step(dst, dzt))

        ds = np.concatenate([sc.wt(dst[sl]) for sc, (b, sl) in zip(scal, blocks)])
        dz = np.concatenate([sc.winv(dzt[sl]) for sc, (b, sl) in zip(scal, blocks)])
        for _ in range(60):
            s_new = s + alpha * ds
            z_new = z + alpha * dz
            if all(block_interior(b, s_new[sl]) and block_interior(b, z_new[sl]) for b, sl in blocks):
                break
            alpha *= 0.8
        else:
            message = f"numerical breakdown at iteration {it}: no interior step"
            break
        if alpha < 1e-12:
            message = f"stalled at iteration {it}: step length {alpha:.1e}"
            break
        y = y + alpha * dy
        s, z = s_new, z_new

    rx = G.T @ z + c
    rz = G @ y + s - h
    pcost = float(c @ y)
    return ConeSolution(
        status=status,
        y=y,
        s=s,
        z=z,
        duals=cones.split(z),
        primal_objective=pcost,
        dual_objective=float(-h @ z),
        primal_residual=_norm(rz) / hnorm,
        dual_residual=_norm(rx) / cnorm,
        gap=float(s @ z) / (1.0 + abs(pcost)),
        iterations=it,
        trajectory=trajectory,
        message=message,
    )
