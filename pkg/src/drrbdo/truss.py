"""Plane-truss finite elements: stiffness, compliance and its gradient.

Units follow the problem files: lengths in mm, forces in N, moduli in MPa.
Design variables are member areas expressed in multiples of the file's
``area_unit`` (mm^2 per design unit); compliance is returned in N*mm and
divided by ``compliance_unit`` only for reporting.
"""
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .conic.linalg import factor_spd
from .errors import MechanismError, StructuralError


@dataclass
class TrussModel:
    nodes: np.ndarray            # (N, 2) mm
    members: np.ndarray          # (n, 2) node indices
    E: np.ndarray                # (n,) MPa
    fixed_dofs: np.ndarray
    load: np.ndarray             # (d,) N on free dofs
    x_min: np.ndarray            # (n,) design units
    pi_bar: float                # N*mm
    area_unit: float = 1.0
    compliance_unit: float = 1.0
    name: str = ""
    free_dofs: np.ndarray = field(init=False, repr=False)
    lengths: np.ndarray = field(init=False, repr=False)
    directions: np.ndarray = field(init=False, repr=False)   # (n, d) unit member vectors b_j
    stiffness: np.ndarray = field(init=False, repr=False)    # (n,) E_j*area_unit/L_j

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.members = np.asarray(self.members, dtype=int).reshape(-1, 2)
        n = len(self.members)
        self.E = np.broadcast_to(np.asarray(self.E, dtype=float), (n,)).copy()
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=int))
        ndof = 2 * len(self.nodes)
        if np.any(self.fixed_dofs < 0) or np.any(self.fixed_dofs >= ndof):
            raise StructuralError("fixed dof index out of range")
        self.free_dofs = np.setdiff1d(np.arange(ndof), self.fixed_dofs)
        d = len(self.free_dofs)
        self.load = np.asarray(self.load, dtype=float)
        if self.load.shape != (d,):
            raise StructuralError(f"load has {self.load.size} entries, model has {d} free dofs")
        self.x_min = np.broadcast_to(np.asarray(self.x_min, dtype=float), (n,)).copy()
        if np.any(self.x_min <= 0):
            raise StructuralError("area lower bounds must be positive")
        if not self.pi_bar > 0:
            raise StructuralError("compliance bound must be positive")
        if np.any(self.members < 0) or np.any(self.members >= len(self.nodes)):
            raise StructuralError("member references an unknown node")

        pos = -np.ones(ndof, dtype=int)
        pos[self.free_dofs] = np.arange(d)
        self.lengths = np.empty(n)
        self.directions = np.zeros((n, d))
        for j, (a, b) in enumerate(self.members):
            delta = self.nodes[b] - self.nodes[a]
            L = float(np.hypot(*delta))
            if L == 0.0:
                raise StructuralError(f"member {j} has coincident endpoints")
            cs = delta / L
            self.lengths[j] = L
            for dof, val in ((2 * a, -cs[0]), (2 * a + 1, -cs[1]), (2 * b, cs[0]), (2 * b + 1, cs[1])):
                if pos[dof] >= 0:
                    self.directions[j, pos[dof]] = val
        self.stiffness = self.E * self.area_unit / self.lengths
        Kmin = assemble(self, self.x_min)
        if not factor_spd(Kmin)[1]:
            raise StructuralError("stiffness at the area lower bounds is singular (unstable structure)")

    @property
    def n_members(self):
        return len(self.members)

    @property
    def n_dofs(self):
        return len(self.free_dofs)

    def member_matrix(self, j):
        b = self.directions[j]
        return self.stiffness[j] * np.outer(b, b)

    def member_matrices(self):
        B = self.directions
        return self.stiffness[:, None, None] * B[:, :, None] * B[:, None, :]


@dataclass
class DesignPoint:
    areas: np.ndarray            # design units
    volume: float                # mm^3
    compliance: float            # N*mm
    gradient: np.ndarray         # N*mm per design unit
    margin: dict = field(default_factory=dict)

    def report(self, model):
        return {
            "areas": self.areas.tolist(),
            "areas_mm2": (self.areas * model.area_unit).tolist(),
            "volume": self.volume,
            "compliance": self.compliance / model.compliance_unit,
            "compliance_Nmm": self.compliance,
            "gradient": self.gradient.tolist(),
            "margin": self.margin,
        }


def _schema(name):
    return json.loads(resources.files("drrbdo.schemas").joinpath(name).read_text())


def bundled_path(name):
    """Path of a bundled data file (``two_bar``, ``grid_29``, ...)."""
    fname = name if name.endswith(".json") else name + ".json"
    return Path(str(resources.files("drrbdo.data").joinpath(fname)))


def model_from_dict(doc, name=""):
    jsonschema.validate(doc, _schema("truss.schema.json"))
    nodes = np.asarray(doc["nodes"], dtype=float)
    members = np.asarray([m[:2] for m in doc["members"]], dtype=int)
    E = np.asarray([m[2] for m in doc["members"]], dtype=float)
    fixed = np.asarray(doc["fixed_dofs"], dtype=int)
    ndof = 2 * len(nodes)
    free = np.setdiff1d(np.arange(ndof), fixed)
    full = np.zeros(ndof)
    for dof, val in doc["loads"]:
        full[int(dof)] += val
    if np.any(full[fixed] != 0):
        raise StructuralError("load applied on a fixed dof")
    area_unit = float(doc.get("area_unit", 1.0))
    x_min = np.asarray(doc["x_min"], dtype=float) / area_unit
    return TrussModel(
        nodes=nodes,
        members=members,
        E=E,
        fixed_dofs=fixed,
        load=full[free],
        x_min=x_min,
        pi_bar=float(doc["pi_bar"]),
        area_unit=area_unit,
        compliance_unit=float(doc.get("compliance_unit", 1.0)),
        name=name or doc.get("name", ""),
    )


def load_model(path):
    """Read a truss problem file; bare names resolve to the bundled problems."""
    p = Path(path)
    if not p.exists():
        p = bundled_path(str(path))
    with open(p) as fh:
        doc = json.load(fh)
    return model_from_dict(doc, name=p.stem)


def element_geometry(model, j):
    """Unit member vector over free dofs and member length."""
    if not 0 <= j < model.n_members:
        raise IndexError(f"member index {j} out of range")
    return model.directions[j].copy(), float(model.lengths[j])


def _areas(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_members,):
        raise StructuralError(f"expected {model.n_members} areas, got shape {x.shape}")
    return x


def assemble(model, x):
    x = _areas(model, x)
    if np.any(x < 0):
        raise StructuralError("negative member area")
    B = model.directions
    return (B.T * (model.stiffness * x)) @ B


def _displacement(model, x):
    K = assemble(model, x)
    L, ok = factor_spd(K)
    if not ok:
        raise MechanismError(x)
    w = np.linalg.solve(L, model.load)
    return np.linalg.solve(L.T, w)


def compliance(model, x):
    u = _displacement(model, _areas(model, x))
    return float(model.load @ u)


def compliance_gradient(model, x):
    """d(compliance)/dx_j = -u^T K_j u (self-adjoint load case)."""
    u = _displacement(model, _areas(model, x))
    return -model.stiffness * (model.directions @ u) ** 2


def compliance_and_gradient(model, x):
    u = _displacement(model, _areas(model, x))
    return float(model.load @ u), -model.stiffness * (model.directions @ u) ** 2


def volume(model, x):
    """Structural volume in mm^3."""
    return float(model.area_unit * (model.lengths @ _areas(model, x)))


def design_point(model, x, margin=None):
    x = np.asarray(x, dtype=float)
    pi, grad = compliance_and_gradient(model, x)
    return DesignPoint(areas=x.copy(), volume=volume(model, x), compliance=pi, gradient=grad, margin=dict(margin or {}))
