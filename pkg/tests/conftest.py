import numpy as np
import pytest

from crlab.corpus import (GENERIC_S5, heisenberg_spec, linear_embedding, perturbed_sphere_spec, sphere_section,
                          sphere_spec, whitney_map)
from crlab.cr_manifold import admissible_coframe
from crlab.forms import FrameCalculus
from crlab.immersion import MapGeometry
from crlab.jets import get_context
from crlab.pseudoconformal import chern_moser_tensor, deb_coefficients
from crlab.pseudohermitian import Connections, webster_connection, webster_curvature


class Source:
    """Source-side pipeline of one hypersurface, computed on first use."""

    def __init__(self, spec, order=6, rotation=None):
        self.spec = spec
        self.ctx = get_context(2 * spec.n + 1, order)
        self.cf = admissible_coframe(spec, self.ctx, rotation)
        self.calc = FrameCalculus(self.cf.E, self.cf.Theta)
        self.conn = webster_connection(self.cf, self.calc)
        self.conns = Connections(self.calc, self.conn.omega)
        self.pack = webster_curvature(self.conn, self.cf, self.calc)
        chern_moser_tensor(self.pack)
        self.deb = deb_coefficients(self.pack, self.conn, self.cf, self.calc)


_cache = {}


def cached(key, build):
    if key not in _cache:
        _cache[key] = build()
    return _cache[key]


@pytest.fixture(scope="session")
def heis():
    return cached("heis", lambda: Source(heisenberg_spec(2)))


@pytest.fixture(scope="session")
def sphere2():
    return cached("sphere2", lambda: Source(sphere_spec(2, GENERIC_S5)))


@pytest.fixture(scope="session")
def sphere2_north():
    return cached("sphere2_north", lambda: Source(sphere_spec(2, (0, 0, 1))))


@pytest.fixture(scope="session")
def perturbed():
    return cached("perturbed", lambda: Source(perturbed_sphere_spec()))


@pytest.fixture(scope="session")
def whitney_geom():
    return cached("whitney", lambda: MapGeometry(whitney_map(2), order=5))


@pytest.fixture(scope="session")
def linear_geom():
    return cached("linear", lambda: MapGeometry(linear_embedding(2, 1), order=5))


@pytest.fixture(scope="session")
def section_geom():
    return cached("section", lambda: MapGeometry(sphere_section(), order=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
