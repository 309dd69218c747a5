import itertools

import numpy as np
import pytest

from fermicluster import bounds
from fermicluster.model import InteractionTerm, ModelSpec, hubbard_dimer, random_hermitian


def brute_1inf(t):
    a = np.abs(t)
    best = 0.0
    for j in range(a.ndim):
        for xj in range(a.shape[j]):
            s = sum(a[idx] for idx in itertools.product(*(range(k) for k in a.shape)) if idx[j] == xj)
            best = max(best, s)
    return best


def test_norm_1inf_examples(rng):
    assert bounds.norm_1inf(0.7 * np.eye(3)) == pytest.approx(0.7)
    f = rng.normal(size=(3, 3))
    a = np.abs(f)
    assert bounds.norm_1inf(f) == pytest.approx(max(a.sum(axis=1).max(), a.sum(axis=0).max()))
    for shape in [(4, 4), (3, 3, 3, 3), (4, 4, 4, 4)]:
        t = rng.normal(size=shape) * (rng.random(size=shape) < 0.3)
        assert bounds.norm_1inf(t) == pytest.approx(brute_1inf(t))


def test_v_norm():
    d = hubbard_dimer(U=0.7)
    assert bounds.v_norm(d, 1.5) == pytest.approx(0.7 * 1.5**4)
    assert bounds.v_norm(d.free(), 2.0) == 0
    two = ModelSpec(2, np.zeros((2, 2)), 0.0, 1.0, (InteractionTerm(1, {(0, 1): 0.2, (1, 0): 0.2}), InteractionTerm(2, {(0, 1, 1, 0): 0.5})))
    assert bounds.v_norm(two, 2.0) == pytest.approx(0.2 * 4 + 0.5 * 16)


def test_determinant_bound(rng):
    single = ModelSpec(1, np.zeros((1, 1)), 0.0, 1.0)
    assert bounds.determinant_bound(single) == pytest.approx(1.0)
    e = random_hermitian(3, rng)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    a = ModelSpec(3, e, 0.0, 1.2)
    b = ModelSpec(3, q @ e @ q.conj().T, 0.0, 1.2)
    assert bounds.determinant_bound(a) == pytest.approx(bounds.determinant_bound(b), rel=1e-12)


def test_detbound_sampling(rng, dimer):
    for size in (1, 2, 3):
        assert bounds.detbound_sample_check(dimer, size, 500, rng).ok


def test_decay_constant_closed_forms():
    s = ModelSpec(1, np.zeros((1, 1)), 0.0, 2.0)
    assert bounds.decay_constant(s) == pytest.approx(1.0, rel=1e-8)
    assert bounds.decay_constant(ModelSpec(1, np.zeros((1, 1)), 0.0, 4.0)) == pytest.approx(2.0, rel=1e-8)
    eps, beta = 0.9, 1.7
    s = ModelSpec(1, np.array([[eps]]), 0.0, beta)
    closed = (1 / (1 + np.exp(-beta * eps))) * (1 - np.exp(-beta * eps)) / eps
    assert bounds.decay_constant(s) == pytest.approx(closed, rel=1e-8)


def test_decay_constant_diagonal_multi_mode():
    eps = np.array([0.3, -1.2, 2.0])
    beta = 1.1
    s = ModelSpec(3, np.diag(eps), 0.0, beta)
    closed = [(1 / (1 + np.exp(-beta * e))) * (1 - np.exp(-beta * e)) / e for e in eps]
    assert bounds.decay_constant(s) == pytest.approx(max(closed), rel=1e-8)


def test_decay_constant_rejects_bad_tolerance(dimer):
    with pytest.raises(ValueError):
        bounds.decay_constant(dimer, 0.0)


def test_clustering_free(dimer):
    rep = bounds.clustering_check(dimer.free(), 2)
    assert rep.hypothesis_ok
    assert rep.rows[0].lhs < 1e-14 and rep.rows[1].lhs < 1e-14
    assert all(r.passed for r in rep.rows)


def test_clustering_dimer_at_04(dimer):
    spec = dimer.scaled(bounds.coupling_for_target(dimer, 0.4))
    rep = bounds.clustering_check(spec, 2)
    assert rep.hypothesis_value == pytest.approx(0.4)
    assert rep.hypothesis_ok and rep.all_passed
    assert rep.omega == 2 * rep.alpha / rep.delta**2
    for r in rep.rows:
        assert r.rhs == pytest.approx(bounds.clustering_rhs(r.m, rep.alpha, rep.delta, rep.v_norm_3delta), rel=1e-12)
    half = bounds.clustering_check(spec.scaled(0.5), 1)
    assert rep.rows[0].lhs / half.rows[0].lhs == pytest.approx(2.0, rel=0.2)


def test_clustering_hypothesis_violated(dimer):
    rep = bounds.clustering_check(dimer, 2)
    assert not rep.hypothesis_ok
    assert all(r.passed is None for r in rep.rows)
