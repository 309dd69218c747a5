import numpy as np
import pytest

from fermicluster import symbols
from fermicluster.fock import ANNIHILATE, CREATE, monomial


def rand_op(n, rng):
    d = 1 << n
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_normal_form_roundtrip(n, rng):
    a = rand_op(n, rng)
    assert np.max(np.abs(symbols.operator_from_normal(symbols.normal_form(a), n) - a)) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trace_via_symbol(n, rng):
    a = rand_op(n, rng)
    assert abs(symbols.trace_via_symbol(a) - np.trace(a)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_symbol_product(n, rng):
    a, b = rand_op(n, rng), rand_op(n, rng)
    lhs = symbols.symbol_product(symbols.symbol_of(a), symbols.symbol_of(b))
    assert lhs.max_abs_diff(symbols.symbol_of(a @ b)) < 1e-10


def test_identity_symbol():
    g = symbols.symbol_of(np.eye(4))
    # exp((psibar, psi)) on two modes
    assert g.body == 1 and len(g.terms) == 4


def test_normal_coefficients_of_monomial():
    op = monomial(2, [(CREATE, 1), (ANNIHILATE, 0)])
    coeffs = symbols.normal_coefficients(op)
    assert coeffs == {(0b10, 0b01): 1.0}
