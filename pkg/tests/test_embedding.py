import math

import mpmath as mp
import numpy as np
import pytest

import rlwe_forge as rf
from rlwe_forge import embedding as emb
from rlwe_forge import lattice as lat
from rlwe_forge.subgroups import permutation_indices


def test_zeta3_columns():
    E = emb.embedding_matrix(rf.new_subgroup(3, [1]))
    assert E.n == 2 and (E.r1, E.r2) == (0, 1)
    norms = np.linalg.norm(E.A_w_np, axis=0)
    assert np.allclose(norms, math.sqrt(2))


def test_prime_discriminants():
    for p, expect in ((5, 125), (7, 7**5), (11, 11**9)):
        E = emb.embedding_matrix(rf.new_subgroup(p, [1]))
        d = emb.discriminant_abs(E)
        assert d.nearest == expect
        assert abs(float(d.value) - expect) <= 1e-6 * expect


def test_zeta3_discriminant():
    d = emb.discriminant_abs(emb.embedding_matrix(rf.new_subgroup(3, [1])))
    assert d.nearest == 3


def test_totally_real_signature():
    H = rf.new_subgroup(13, [5])
    E = emb.embedding_matrix(H)
    assert (E.r1, E.r2) == (3, 0)
    assert np.allclose(E.T, np.eye(3))


def test_t_matrix_unitary_small():
    E = emb.embedding_matrix(rf.new_subgroup(5, [1]))
    assert np.max(np.abs(E.T.conj().T @ E.T - np.eye(4))) < 1e-12


def test_discriminant_precision_stability(subgroup_2805):
    d1 = emb.discriminant_abs(emb.embedding_matrix(subgroup_2805, 100))
    d2 = emb.discriminant_abs(emb.embedding_matrix(subgroup_2805, 200))
    assert float(abs(d1.value - d2.value) / d2.value) < 1e-6
    assert float(d1.value) > 0


def test_det_matches_gs_product_3003(subgroup_3003):
    E = emb.embedding_matrix(subgroup_3003, 100)
    _, norms = lat.gram_schmidt(E.A_w_np)
    covol = float(np.exp(np.sum(np.log(norms))))
    disc = emb.discriminant_abs(E).value
    assert abs(covol - float(mp.sqrt(disc))) < 1e-6 * covol


def test_sigma_from_sigma0():
    assert emb.sigma_from_sigma0(1.0, 1.0, 7) == 1.0
    expect = 0.5 * 251.0 ** (249 / 500)
    got = emb.sigma_from_sigma0(0.5, mp.mpf(251) ** 249, 250)
    assert abs(got - expect) < 1e-9 * expect
    base = emb.sigma_from_sigma0(0.7, 125.0, 4)
    assert abs(emb.sigma_from_sigma0(1.4, 125.0, 4) - 2 * base) < 1e-12


def test_gram_invariance_small(small_subgroup, small_geometry):
    E, _ = small_geometry
    G = emb.gram_matrix(E)
    n = E.n
    with mp.workprec(E.precision_bits):
        scale = max(abs(G[i, j]) for i in range(n) for j in range(n))
        for c in small_subgroup.cosets:
            perm = permutation_indices(small_subgroup, c)
            for i in range(n):
                for j in range(n):
                    assert abs(G[perm[i], perm[j]] - G[i, j]) < scale * mp.mpf(2) ** -50


def test_column_norms_equal(subgroup_3003):
    E = emb.embedding_matrix(subgroup_3003, 100)
    norms = np.linalg.norm(E.A_w_np, axis=0)
    assert (norms.max() - norms.min()) / norms.max() < 1e-10


def test_hardware_path_matches_mpmath(small_subgroup):
    E53 = emb.embedding_matrix(small_subgroup, 53)
    E100 = emb.embedding_matrix(small_subgroup, 100)
    assert np.max(np.abs(E53.A_w_np - E100.A_w_np)) < 1e-12


def test_rejects_low_precision(small_subgroup):
    with pytest.raises(ValueError):
        emb.embedding_matrix(small_subgroup, 20)
