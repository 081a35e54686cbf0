import numpy as np
import pytest

from wkbcover.acceptance import REF_Q1, REF_R, REF_T, REF_Z, reference_spec
from wkbcover.cover import build_cover, homology_basis


@pytest.fixture(scope="session")
def ref_spec():
    return reference_spec()


@pytest.fixture(scope="session")
def ref_spec_noq1():
    return reference_spec(with_Q1=False)


@pytest.fixture(scope="session")
def ref_cover(ref_spec):
    cov = build_cover(ref_spec)
    return cov, homology_basis(cov)


@pytest.fixture(scope="session")
def ref_point():
    from wkbcover.moduli import ModuliPoint
    return ModuliPoint.from_data(REF_Z, REF_R, REF_T, REF_Q1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
