import numpy as np
import pytest

from mpanderson.geometry import CubeSpec
from mpanderson.operators import GridSpec, assemble
from mpanderson.randomfield import InteractionSpec, region_for, sample_disorder


def make_op(center=(0, 0), L=2, h=0.5, g=8.0, seed=0, index=0, C_U=1.0, N=None, d=1):
    cube = CubeSpec.around(center, L, N=N, d=d)
    dis = sample_disorder(region_for(cube), seed, index)
    return assemble(GridSpec(cube, h), dis, InteractionSpec(C_U=C_U), g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
