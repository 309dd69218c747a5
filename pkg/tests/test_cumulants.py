import itertools

import numpy as np
import pytest

from fermicluster import cumulants, fock, mixed
from fermicluster.fock import ANNIHILATE, CREATE
from fermicluster.grassmann import derivatives
from fermicluster.model import hubbard_dimer, random_model


@pytest.mark.parametrize("n", [1, 2, 3])
def test_source_commutation(n):
    res = mixed.bch_residuals(n)
    assert res["corrected"] < 1e-12
    # the other orientation of the pairing does not close
    assert res["as_printed"] > 1


def test_commutator_is_source_pairing():
    n = 2
    comm = mixed.commutator(n)
    expected = mixed.source_pairing(comm.gens, mixed.minus_names(n), mixed.plus_names(n))
    for mask, op in comm.terms.items():
        assert np.max(np.abs(op - expected.terms.get(mask, 0) * np.eye(4))) < 1e-14


def test_generating_function_derivatives_are_moments(dimer):
    z = mixed.generating_function(dimer, max_degree=4, normalized=True)
    for xs in itertools.product(range(4), repeat=2):
        for ys in itertools.product(range(4), repeat=2):
            names = [f"c+{x}" for x in xs] + [f"c-{y}" for y in reversed(ys)]
            assert abs(derivatives(z, names).body - fock.gamma(dimer, 2, xs, ys)) < 1e-12


def test_cumulant_routes_agree(rng):
    spec = random_model(3, rng)
    for m in (1, 2):
        a = cumulants.cumulant_table(spec, m, cumulants.PARTITION).entries
        b = cumulants.cumulant_table(spec, m, cumulants.GRASSMANN_LOG).entries
        assert np.max(np.abs(a - b)) < 1e-12


def test_gamma1_truncated_equals_moment(dimer):
    t = cumulants.cumulant_table(dimer, 1).entries
    assert np.max(np.abs(t - fock.gamma_table(dimer, 1))) < 1e-13


def test_free_two_point_cumulant_vanishes(rng):
    spec = random_model(3, rng, coupling=0.0)
    assert np.max(np.abs(cumulants.cumulant_table(spec, 2).entries)) < 1e-12


def test_set_partitions_count():
    bell = [1, 1, 2, 5, 15, 52]
    for k, b in enumerate(bell):
        assert sum(1 for _ in cumulants.set_partitions(range(k))) == b


def test_reorder_identity():
    for pattern in cumulants.balanced_patterns(2):
        for idx in itertools.product(range(2), repeat=4):
            assert cumulants.reorder_residual(2, pattern, idx) < 1e-13


def test_unordered_matches_normal_order(dimer):
    pattern = (CREATE, CREATE, ANNIHILATE, ANNIHILATE)
    for idx in [(0, 1, 1, 0), (0, 3, 2, 1), (1, 2, 3, 0)]:
        direct = cumulants.unordered_truncated(dimer, pattern, idx)
        part = cumulants.truncated_by_partitions(dimer, list(zip(pattern, idx)))
        assert abs(direct - part) < 1e-13


def test_unordered_modulus_order_independent(dimer):
    vals = [
        abs(cumulants.unordered_truncated(dimer, pat, cumulants.arrange(pat, (0, 1), (1, 0))))
        for pat in cumulants.balanced_patterns(2)
    ]
    assert max(vals) - min(vals) < 1e-12 and vals[0] > 1e-3


def test_slot_permutation_antisymmetry(dimer):
    word = cumulants.normal_slots(2, (0, 1, 1, 0))
    base = cumulants.truncated_by_partitions(dimer, word)
    for p in itertools.permutations(range(4)):
        sign = cumulants.sequence_sign(p)
        assert abs(cumulants.truncated_by_partitions(dimer, [word[i] for i in p]) - sign * base) < 1e-12


def test_index_only_permutation_is_not_a_symmetry():
    """Permuting indices across the creation/annihilation split is not antisymmetry.

    On one Hubbard site gamma_2^T(1, 1; 0, 0) vanishes by Pauli while
    gamma_2^T(0, 1; 1, 0) does not.
    """
    site = hubbard_dimer(t=0.0, U=0.8, mu=0.3, beta=1.5)
    g = cumulants.cumulant_table(site, 2).entries
    assert abs(g[1, 1, 0, 0]) < 1e-14
    assert abs(g[0, 1, 1, 0]) > 1e-3


def test_unbalanced_truncated_expectations_vanish(rng):
    for spec in [hubbard_dimer(t=1.0, U=0.3, mu=0.5, beta=1.0), random_model(3, rng)]:
        assert cumulants.unbalanced_max(spec, 4) <= 1e-10
