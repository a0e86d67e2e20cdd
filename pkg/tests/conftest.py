import pathlib

import numpy as np
import pytest

from dabnet.net import NetworkSpec, init_random_weights
from dabnet.tensor import Tensor, Rng

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def net_spec():
    return NetworkSpec()


@pytest.fixture(scope="session")
def store7(net_spec):
    # one shared random store; tests must not mutate it
    return init_random_weights(net_spec, seed=7)


def rand_tensor(rng: Rng, dims, lo=-1.0, hi=1.0) -> Tensor:
    n = 1
    for d in dims:
        n *= d
    return Tensor(rng.uniform(n, lo, hi).reshape(dims))
