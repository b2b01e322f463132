"""Incremental assembly of :class:`ConeProgram` instances from named variables."""
import numpy as np

from .cones import NONNEG, ConeSpec
from .solver import ConeProgram


class ProgramBuilder:
    """Collects variables and cone constraints written as ``slack = const + sum_v A_v @ v``.

    All rows passed to :meth:`nonneg` end up in a single nonnegative block,
    placed where the first such call happened.
    """

    def __init__(self):
        self.slices = {}
        self.nvar = 0
        self._blocks = []
        self._nonneg = None

    def var(self, name, size):
        sl = slice(self.nvar, self.nvar + size)
        self.slices[name] = sl
        self.nvar += size
        return sl

    def nonneg(self, const, terms):
        const = np.atleast_1d(np.asarray(const, dtype=float))
        if self._nonneg is None:
            self._nonneg = [NONNEG, 0, []]
            self._blocks.append(self._nonneg)
        self._nonneg[1] += len(const)
        self._nonneg[2].append((const, terms))

    def cone(self, kind, dim, const, terms):
        const = np.atleast_1d(np.asarray(const, dtype=float))
        self._blocks.append([kind, dim, [(const, terms)]])

    def build(self, objective):
        rows = sum(len(const) for _, _, groups in self._blocks for const, _ in groups)
        G = np.zeros((rows, self.nvar))
        h = np.zeros(rows)
        r = 0
        for _, _, groups in self._blocks:
            for const, terms in groups:
                m = len(const)
                h[r:r + m] = const
                for name, A in terms.items():
                    G[r:r + m, self.slices[name]] -= np.asarray(A, dtype=float).reshape(m, -1)
                r += m
        c = np.zeros(self.nvar)
        for name, coef in objective.items():
            c[self.slices[name]] = coef
        cones = ConeSpec([(kind, dim) for kind, dim, _ in self._blocks])
        return ConeProgram(c, G, h, cones)

    def unpack(self, y):
        return {name: np.array(y[sl]) for name, sl in self.slices.items()}
