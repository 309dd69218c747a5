import itertools

import numpy as np
import pytest

from fermicluster import fock
from fermicluster.fock import ANNIHILATE, CREATE
from fermicluster.model import InteractionTerm, ModelError, ModelSpec, hubbard_dimer, random_model


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_car(n):
    eye = np.eye(1 << n)
    for x, y in itertools.product(range(n), repeat=2):
        a, c = fock.build_ladder(n, x, ANNIHILATE), fock.build_ladder(n, y, CREATE)
        b = fock.build_ladder(n, y, ANNIHILATE)
        assert np.allclose(a @ c + c @ a, (x == y) * eye, atol=0)
        assert np.allclose(a @ b + b @ a, 0, atol=0)


def test_ladders_are_adjoint_and_readonly():
    a = fock.build_ladder(3, 1, ANNIHILATE)
    assert np.array_equal(a.conj().T, fock.build_ladder(3, 1, CREATE))
    with pytest.raises(ValueError):
        a[0, 0] = 1


def test_number_operator_diagonal():
    n = fock.number_operator(3)
    assert np.array_equal(np.diag(n), [bin(s).count("1") for s in range(8)])


def test_single_mode_partition_function():
    eps, beta = 0.7, 1.3
    spec = ModelSpec(1, np.array([[eps]]), 0.2, beta)
    assert fock.partition_function(spec) == pytest.approx(1 + np.exp(-beta * (eps - 0.2)), rel=1e-14)


def test_free_gamma1_is_fermi(rng):
    spec = random_model(3, rng, coupling=0.0)
    w, u = np.linalg.eigh(spec.energy)
    f = (u / (1 + np.exp(spec.beta * w))) @ u.conj().T
    g1 = fock.gamma_table(spec, 1)
    # gamma_1(x; y) = <a+_x a-_y> = f_{yx}
    assert np.max(np.abs(g1 - f.T)) < 1e-12


def test_hubbard_atomic_limit():
    spec = hubbard_dimer(t=0.0, U=1.1, mu=0.4, beta=2.0)
    z_site = 1 + 2 * np.exp(2.0 * 0.4) + np.exp(-2.0 * (1.1 - 0.8))
    assert fock.partition_function(spec) == pytest.approx(z_site**2, rel=1e-12)


def test_hamiltonian_hermitian(rng):
    spec = random_model(3, rng)
    h = fock.hamiltonian(spec)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_interaction_antisymmetrization_preserves_operator(rng):
    spec = random_model(3, rng)
    raw = spec.interactions[0].raw_tensor(3)
    op = sum(
        raw[idx] * fock.monomial(3, [(CREATE, idx[0]), (CREATE, idx[1]), (ANNIHILATE, idx[2]), (ANNIHILATE, idx[3])])
        for idx in itertools.product(range(3), repeat=4)
    )
    assert np.max(np.abs(op - fock.build_V(spec))) < 1e-12


def test_model_validation():
    with pytest.raises(ModelError):
        ModelSpec(2, np.array([[0, 1], [2, 0]]), 0.0, 1.0)
    with pytest.raises(ModelError):
        ModelSpec(1, np.zeros((1, 1)), 0.0, 0.0)
    with pytest.raises(ModelError):
        InteractionTerm(2, {(0, 1, 1): 1.0})
