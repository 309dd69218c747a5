import numpy as np
import pytest

from fermicluster import discretize as dz
from fermicluster import fock
from fermicluster.grassmann import GeneratorSet, Multivector
from fermicluster.model import InteractionTerm, ModelSpec, random_hermitian


def test_fermi_basics(rng):
    assert np.allclose(dz.fermi(2.0, np.zeros((3, 3))), 0.5 * np.eye(3), atol=1e-15)
    e = random_hermitian(3, rng)
    assert np.max(np.abs(dz.fermi(1.3, e) + dz.fermi(1.3, -e) - np.eye(3))) < 1e-12
    w, u = np.linalg.eigh(e)
    direct = (u * (1 / (1 + np.exp(1.3 * w)))) @ u.conj().T
    assert np.max(np.abs(dz.fermi(1.3, e) - direct)) < 1e-14


def test_fermi_extreme_energies():
    f = dz.fermi(1.0, np.diag([-800.0, 800.0]))
    assert np.allclose(np.diag(f).real, [1.0, 0.0])


def test_kernel_values(rng):
    beta = 2.0
    assert np.allclose(dz.kernel(beta / 2, beta, np.zeros((2, 2))), -0.5 * np.eye(2))
    e = random_hermitian(2, rng)
    assert np.allclose(dz.kernel(0.0, beta, e), dz.fermi(beta, e))
    jump = dz.kernel(0.0, beta, e, tie="gt") - dz.kernel(0.0, beta, e)
    assert np.max(np.abs(jump + np.eye(2))) < 1e-12
    with pytest.raises(ValueError):
        dz.kernel(beta, beta, e)
    with pytest.raises(ValueError):
        dz.kernel(-beta - 1e-9, beta, e)


def test_kernel_antiperiodic(rng):
    e = random_hermitian(2, rng)
    for tau in (0.3, 1.1):
        assert np.max(np.abs(dz.kernel(tau - 2.0, 2.0, e) + dz.kernel(tau, 2.0, e))) < 1e-12


def test_slice_grid():
    g = dz.SliceGrid(7, 0.3)
    assert g.tau(7) == 0.3
    with pytest.raises(ValueError):
        dz.SliceGrid(0, 1.0)


def test_q_r_small_cases():
    eps, beta = 0.4, 1.0
    u = np.exp(-beta * eps)
    e = np.array([[eps]])
    assert dz.build_Q(1, beta, e)[0, 0] == pytest.approx(1 + u)
    assert dz.build_R(1, beta, e)[0, 0] == pytest.approx(1 / (1 + u))
    u2 = np.exp(-beta * eps / 2)
    q2 = dz.build_Q(2, beta, e)
    assert np.allclose(q2, [[1, u2], [-u2, 1]])
    assert np.linalg.det(q2) == pytest.approx(1 + u2**2)


@pytest.mark.parametrize("N", [2, 4, 8])
def test_q_r_inverse(N, rng):
    e = random_hermitian(3, rng)
    q, r = dz.build_Q(N, 1.7, e), dz.build_R(N, 1.7, e)
    assert np.max(np.abs(q @ r - np.eye(3 * N))) < 1e-12
    assert np.max(np.abs(r - np.linalg.inv(q))) < 1e-12


def test_slice_covariance_is_time_ordered_kernel(rng):
    e = random_hermitian(2, rng)
    N, beta = 4, 1.5
    g = dz.slice_covariance(N, beta, e)
    for m in range(N):
        for k in range(N):
            block = g[2 * m:2 * m + 2, 2 * k:2 * k + 2]
            assert np.max(np.abs(block + dz.kernel((m - k) * beta / N, beta, e))) < 1e-12


def test_lie_error():
    z = np.zeros((3, 3))
    assert dz.lie_error(z, z, 5)[0] == 0
    a, b = np.diag([0.5, -1.0, 0.2]), np.diag([0.3, 0.1, -0.7])
    e1, bound = dz.lie_error(a, b, 64)
    e2, _ = dz.lie_error(a, b, 128)
    assert e1 <= bound
    assert 1.6 <= e1 / e2 <= 2.4


def onsite(lam, eps=0.4, beta=1.3):
    return ModelSpec(1, np.array([[eps]]), 0.0, beta, (InteractionTerm(1, {(0, 0): lam}),))


def test_trace_side_simple_cases(dimer):
    free = dimer.free()
    for N in (1, 3, 16):
        assert dz.trace_side_Z(free, N) == pytest.approx(dz.free_partition_function(free), rel=1e-12)
    spec = onsite(0.7)
    k0 = fock.build_K0(spec)
    expected = np.trace(fock.hermitian_function(k0, lambda w: np.exp(-spec.beta * w)) @ (np.eye(2) - spec.beta * fock.build_V(spec)))
    assert dz.trace_side_Z(spec, 1) == pytest.approx(expected)


def test_grassmann_side_free(dimer):
    assert dz.grassmann_side_Z(dimer.free(), 3) == pytest.approx(dz.free_partition_function(dimer), rel=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_grassmann_side_single_mode(N):
    spec = onsite(0.7)
    assert abs(dz.grassmann_side_Z(spec, N) - dz.trace_side_Z(spec, N)) < 1e-10


def test_grassmann_side_with_sources(dimer):
    t = dz.trace_side_Z(dimer, 2, sources=True, max_source_degree=2)
    g = dz.grassmann_side_Z(dimer, 2, sources=True, max_source_degree=2)
    assert t.max_abs_diff(g) < 1e-8 * abs(t.body)


def test_budget_guard(dimer):
    with pytest.raises(dz.BudgetExceeded):
        dz.grassmann_side_Z(dimer, 6, budget=100)


@pytest.mark.parametrize("embedding", ["exact", "grid"])
def test_convolution_methods_agree(dimer, embedding):
    a = dz.convolution_rhs(dimer, 2, embedding, True, 2, method="wick")
    b = dz.convolution_rhs(dimer, 2, embedding, True, 2, method="transfer")
    assert a.max_abs_diff(b) < 1e-10 * abs(a.body)


def test_exact_embedding_reproduces_trace(dimer):
    for N in (1, 2, 4):
        rhs = dz.convolution_rhs(dimer, N, "exact", exponentiate=False)
        t = dz.trace_side_Z(dimer, N, sources=True, max_source_degree=2)
        assert rhs.max_abs_diff(t) < 1e-10 * abs(t.body)


def test_free_two_point_recovered(dimer):
    free = dimer.free()
    rhs = dz.convolution_rhs(free, 64)
    f = dz.fermi(free.beta, free.energy)
    z0 = dz.free_partition_function(free)
    gens = GeneratorSet.sources(4)
    for x in range(4):
        for y in range(4):
            coeff = rhs.coefficient([f"c-{x}", f"c+{y}"]) / z0
            assert abs(coeff - f[x, y]) < 1e-8
    assert isinstance(rhs, Multivector) and rhs.gens == gens


def test_embeddings_share_the_limit(dimer):
    diffs = []
    for N in (8, 32):
        a = dz.convolution_rhs(dimer, N, "grid")
        b = dz.convolution_rhs(dimer, N, "exact")
        diffs.append(a.max_abs_diff(b))
    assert diffs[1] < diffs[0] / 3


def test_convergence_ratio(dimer):
    rows = dz.convergence_study(dimer, [8, 16, 32])
    assert all(1.6 <= r.ratio <= 2.4 for r in rows[1:])


def test_reexp_free_and_scaling(dimer):
    assert dz.reexp_delta(dimer.free(), 4) == (0.0, 0.0)
    small = [dz.reexp_delta(dimer.scaled(lam / 0.3), 4)[0] for lam in (1e-2, 1e-3)]
    assert small[0] / small[1] == pytest.approx(100, rel=0.05)


def test_reexp_methods_agree(dimer):
    a = dz.reexp_delta(dimer, 3, method="wick")
    b = dz.reexp_delta(dimer, 3, method="transfer")
    assert a[0] == pytest.approx(b[0], rel=1e-9)
    assert a[0] <= a[1]
