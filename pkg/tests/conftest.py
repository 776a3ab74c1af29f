import numpy as np
import pytest

from dunklab.bundles import make_bundle
from dunklab.families import (cyclic_family, symmetric_family, wreath_family)
from dunklab.operators import ParameterSet, regular_points
from dunklab.torus import enumerate_hypertori


class FamilyInstance:
    def __init__(self, name, torus, group, seed=20240):
        self.name = name
        self.torus = torus
        self.group = group
        self.hypertori = enumerate_hypertori(group, torus, seed=seed)
        self.seed = seed

    def generic_bundle(self, seed=101, beta_scale=0.2):
        rng = np.random.default_rng(seed)
        for _ in range(32):
            m = rng.uniform(0.07, 0.93, 2 * self.torus.n)
            beta = (rng.normal(size=self.torus.n)
                    + 1j * rng.normal(size=self.torus.n)) * beta_scale
            bundle = make_bundle(m, beta, self.group)
            if bundle.stabilizer_free:
                return bundle
        raise RuntimeError("no generic bundle found")

    def params(self, value=0.3 - 0.12j):
        return ParameterSet.constant(self.hypertori, value)

    def points(self, count=10, seed=9090, clearance=0.05):
        return regular_points(self.torus, self.hypertori, count, seed, clearance)


_CACHE = {}


def _instance(name):
    if name not in _CACHE:
        builders = {
            "cyclic2": lambda: cyclic_family(2),
            "cyclic3": lambda: cyclic_family(3),
            "cyclic4": lambda: cyclic_family(4),
            "cyclic6": lambda: cyclic_family(6),
            "symmetric2": lambda: symmetric_family(2),
            "symmetric3": lambda: symmetric_family(3),
            "wreath22": lambda: wreath_family(2, 2),
        }
        torus, group = builders[name]()
        _CACHE[name] = FamilyInstance(name, torus, group)
    return _CACHE[name]


@pytest.fixture(scope="session")
def cyclic2():
    return _instance("cyclic2")


@pytest.fixture(scope="session")
def cyclic3():
    return _instance("cyclic3")


@pytest.fixture(scope="session")
def cyclic4():
    return _instance("cyclic4")


@pytest.fixture(scope="session")
def cyclic6():
    return _instance("cyclic6")


@pytest.fixture(scope="session")
def symmetric2():
    return _instance("symmetric2")


@pytest.fixture(scope="session")
def symmetric3():
    return _instance("symmetric3")


@pytest.fixture(scope="session")
def wreath22():
    return _instance("wreath22")


@pytest.fixture(scope="session")
def all_families():
    return [_instance(k) for k in
            ("cyclic2", "cyclic3", "cyclic4", "cyclic6",
             "symmetric2", "symmetric3", "wreath22")]
