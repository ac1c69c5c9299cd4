import numpy as np
import pytest

import rlwe_forge as rf
from rlwe_forge import embedding as emb
from rlwe_forge import lattice as lat
from rlwe_forge import residue as res
from rlwe_forge import rlwe as rl

# The frozen small vulnerable instance used across the attack tests:
# K = Q(zeta_105)^H with H = <4, 13> (order 12, totally complex), n = 4.
# q = 11 has residue degree 2 (N = 121) and the reduced error distribution
# at sigma0 = 1 sits ~0.49 statistical distance from uniform, found with
# the vulnerability_search harness.  q = 13 splits (f = 1) and is safe
# (distance ~0.006), giving the strong/weak pair for modulus switching.
SMALL = {"m": 105, "gens": [4, 13], "q": 11, "sigma0": 1.0}
SMALL_N = 121
SMALL_M = 605  # 5 N
SWITCH_STRONG_Q = 13
SWITCH_WEAK_P = 11
SWITCH_TAU = 1.0


@pytest.fixture(scope="session")
def small_subgroup():
    return rf.new_subgroup(SMALL["m"], SMALL["gens"])


@pytest.fixture(scope="session")
def small_geometry(small_subgroup):
    E = emb.embedding_matrix(small_subgroup)
    L = lat.make_bundle(E.A_w_np)
    return E, L


@pytest.fixture(scope="session")
def small_ctx(small_subgroup):
    return res.build_residue_context(small_subgroup, SMALL["q"])


def small_instance(seed, geometry=None, q=None, sigma0=None):
    return rl.subfield_instance(SMALL["m"], SMALL["gens"],
                                q if q is not None else SMALL["q"],
                                sigma0 if sigma0 is not None else SMALL["sigma0"],
                                seed=seed, geometry=geometry)


@pytest.fixture(scope="session")
def subgroup_3003():
    return rf.new_subgroup(3003, [2276, 2729, 1123])


@pytest.fixture(scope="session")
def subgroup_2805():
    return rf.new_subgroup(2805, [1684, 1618])


@pytest.fixture(scope="session")
def embedding_2805(subgroup_2805):
    return emb.embedding_matrix(subgroup_2805)


@pytest.fixture(scope="session")
def ctx_3003(subgroup_3003):
    return res.build_residue_context(subgroup_3003, 131)


@pytest.fixture(scope="session")
def zeta5_bundle():
    E = emb.embedding_matrix(rf.new_subgroup(5, [1]))
    return E, lat.make_bundle(E.A_w_np)
