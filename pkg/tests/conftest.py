"""Shared fixture builders for the test suite.

Everything is deterministic: fixed 32-byte seeds, fixed alphabets, and
families regenerated from frozen seeds, so expected values frozen into
tests stay valid run after run.
"""

import pytest

from hiddenpath.fieldcore import Boundary, Modulus, ParameterSet
from hiddenpath.observables import (
    LinearProjected,
    NonlinearLocal,
    Telescoping,
    TransitionEnergy,
)
from hiddenpath.pathgen import NoiseSpec


def seed(k: int) -> bytes:
    return bytes([k]) * 32


def make_params(q=5, n=1, T=3, macro=((1,), (2,)), micro=((0,), (3,)),
                noise=None, family=None, boundary=None, seed_byte=2,
                ) -> ParameterSet:
    return ParameterSet(
        modulus=Modulus(q), n=n, T=T,
        macro_alphabet=tuple(tuple(v) for v in macro),
        micro_alphabet=tuple(tuple(v) for v in micro),
        noise=noise or NoiseSpec.disabled(),
        seed=seed(seed_byte),
        family=family,
        boundary=boundary,
    )


@pytest.fixture
def toy_linear() -> ParameterSet:
    """q=5, n=2, T=4 LinearProjected instance with a 32400-object support."""
    fam = LinearProjected.generate(6, 3, seed(1), q=5, n=2, T=4)
    return make_params(q=5, n=2, T=4,
                       macro=((0, 1), (1, 0), (2, 3)),
                       micro=((0, 0), (0, 1)),
                       family=fam)


@pytest.fixture
def tiny_energy() -> ParameterSet:
    """q=5, n=1, T=4 TransitionEnergy instance, 512-object support."""
    fam = TransitionEnergy.generate(4, 3, seed(4), q=5, n=1, T=4)
    return make_params(q=5, n=1, T=4, family=fam,
                       boundary=Boundary(start=(0,)))


@pytest.fixture
def tiny_nonlinear() -> ParameterSet:
    """The singleton-fiber NonlinearLocal fixture: injective on 1024 objects."""
    fam = NonlinearLocal.generate(10, 3, seed(3), q=5, n=1, T=5)
    return make_params(q=5, n=1, T=5, family=fam, seed_byte=0x23,
                       boundary=Boundary(start=(0,)))


@pytest.fixture
def toy_1296() -> ParameterSet:
    """The q=101, n=1, T=4, b=2, r=3, pinned-start instance (1296 objects)."""
    return make_params(q=101, n=1, T=4,
                       macro=((100,), (1,)),
                       micro=((100,), (0,), (1,)),
                       boundary=Boundary(start=(0,)))


@pytest.fixture
def tele_1296(toy_1296) -> ParameterSet:
    fam = Telescoping.generate(7, seed(7), q=101, n=1, T=4)
    return ParameterSet(
        modulus=toy_1296.modulus, n=1, T=4,
        macro_alphabet=toy_1296.macro_alphabet,
        micro_alphabet=toy_1296.micro_alphabet,
        noise=toy_1296.noise, seed=toy_1296.seed,
        family=fam, boundary=toy_1296.boundary)
