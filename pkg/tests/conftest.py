import os

import numpy as np
import pytest

from drrbdo.conic import ConeProgram, ConeSpec
from drrbdo.conic.linalg import svec
from drrbdo.robust import load_uncertainty
from drrbdo.truss import load_model

OVERNIGHT = os.environ.get("DRRBDO_OVERNIGHT", "") not in ("", "0")


def pytest_collection_modifyitems(config, items):
    if OVERNIGHT:
        return
    skip = pytest.mark.skip(reason="overnight scale; set DRRBDO_OVERNIGHT=1")
    for item in items:
        if "overnight" in item.keywords:
            item.add_marker(skip)


def planted_program(rng, blocks, n):
    """Random strictly complementary instance with a known optimum.

    Returns ``(program, optimal_value)``: s*, z* are complementary per block,
    h = G y* + s*, c = -G^T z*, so (y*, s*, z*) is primal-dual optimal.
    """
    cones = ConeSpec(blocks)
    s = np.zeros(cones.size)
    z = np.zeros(cones.size)
    for b, sl in cones:
        if b.kind == "nonneg":
            mask = rng.random(b.dim) < 0.5
            s[sl] = np.where(mask, rng.random(b.dim) + 0.1, 0.0)
            z[sl] = np.where(mask, 0.0, rng.random(b.dim) + 0.1)
        elif b.kind == "soc":
            u = rng.standard_normal(b.dim - 1)
            u /= np.linalg.norm(u)
            s[sl] = (rng.random() + 0.5) * np.r_[1.0, u]
            z[sl] = (rng.random() + 0.5) * np.r_[1.0, -u]
        else:
            Q = np.linalg.qr(rng.standard_normal((b.dim, b.dim)))[0]
            k = int(rng.integers(1, b.dim))
            d1 = np.r_[rng.random(k) + 0.1, np.zeros(b.dim - k)]
            d2 = np.r_[np.zeros(k), rng.random(b.dim - k) + 0.1]
            s[sl] = svec(Q @ np.diag(d1) @ Q.T)
            z[sl] = svec(Q @ np.diag(d2) @ Q.T)
    G = rng.standard_normal((cones.size, n))
    y = rng.standard_normal(n)
    c = -G.T @ z
    return ConeProgram(c, G, G @ y + s, cones), float(c @ y)


def random_blocks(rng):
    return [("nonneg", int(rng.integers(1, 6))), ("soc", int(rng.integers(2, 6))), ("psd", int(rng.integers(2, 6)))]


@pytest.fixture(scope="session")
def two_bar():
    return load_model("two_bar")


@pytest.fixture(scope="session")
def grid_29():
    return load_model("grid_29")


@pytest.fixture(scope="session")
def two_bar_unc():
    return load_uncertainty("two_bar_unc")


@pytest.fixture(scope="session")
def grid_29_unc():
    return load_uncertainty("grid_29_unc")
