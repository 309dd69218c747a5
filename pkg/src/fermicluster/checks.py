"""Invariant checks shared by the ``verify`` command and the acceptance tests.

Every check returns :class:`Check` records carrying the measured value, the
threshold it is compared with and the verdict.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fermicluster import bounds, cumulants, discretize, fock, mixed, symbols
from fermicluster.grassmann import sequence_sign
from fermicluster.model import ModelSpec, random_hermitian, random_model

RATIO_BAND = (1.6, 2.4)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def _le(name, value, threshold, detail=""):
    value = float(value)
    return Check(name, value, float(threshold), bool(value <= threshold), detail)


def _in_band(name, ratios, band=RATIO_BAND, detail=""):
    ratios = [float(r) for r in ratios]
    worst = max(ratios, key=lambda r: max(band[0] - r, r - band[1], 0.0)) if ratios else float("nan")
    ok = bool(ratios) and all(band[0] <= r <= band[1] for r in ratios)
    text = detail or "ratios " + ", ".join(format(r, ".4g") for r in ratios)
    return Check(name, worst, band[1], ok, text)


def random_operator(n: int, rng: np.random.Generator) -> np.ndarray:
    d = 1 << n
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


# fock / grassmann ---------------------------------------------------------------


def check_car(n: int) -> Check:
    err = 0.0
    for x in range(n):
        ax = fock.build_ladder(n, x, fock.ANNIHILATE)
        for y in range(n):
            ay = fock.build_ladder(n, y, fock.ANNIHILATE)
            cy = fock.build_ladder(n, y, fock.CREATE)
            err = max(err, np.max(np.abs(ax @ cy + cy @ ax - (x == y) * np.eye(1 << n))))
            err = max(err, np.max(np.abs(ax @ ay + ay @ ax)))
    return _le(f"CAR relations, n={n}", err, 1e-14)


def check_symbol_calculus(rng: np.random.Generator, trials: int = 100, max_modes: int = 3) -> list[Check]:
    trace_err = prod_err = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, max_modes + 1))
        a = random_operator(n, rng)
        b = random_operator(n, rng)
        trace_err = max(trace_err, abs(symbols.trace_via_symbol(a) - np.trace(a)))
        lhs = symbols.symbol_product(symbols.symbol_of(a), symbols.symbol_of(b))
        prod_err = max(prod_err, lhs.max_abs_diff(symbols.symbol_of(a @ b)))
    return [
        _le(f"trace via symbol ({trials} random operators)", trace_err, 1e-10),
        _le(f"symbol of product ({trials} random operators)", prod_err, 1e-10),
    ]


def check_bch(n: int) -> Check:
    return _le(f"source commutation identity, n={n}", mixed.bch_check(n), 1e-12)


def check_reorder(n: int) -> Check:
    worst = 0.0
    for pattern in cumulants.balanced_patterns(2):
        for idx in itertools.product(range(n), repeat=4):
            worst = max(worst, cumulants.reorder_residual(n, pattern, idx))
    return _le(f"reordering identity, n={n}, m=2", worst, 1e-12)


# time discretization --------------------------------------------------------------


def check_kernel(spec: ModelSpec) -> list[Check]:
    e = spec.energy
    eye = np.eye(spec.n_modes)
    f_sum = np.max(np.abs(discretize.fermi(spec.beta, e) + discretize.fermi(spec.beta, -e) - eye))
    jump = np.max(np.abs(discretize.kernel(0.0, spec.beta, e, tie="gt") - discretize.kernel(0.0, spec.beta, e) + eye))
    return [_le("f(E) + f(-E) = 1", f_sum, 1e-12), _le("kernel jump at 0 is -1", jump, 1e-12)]


def check_free_Z(spec: ModelSpec, n_list) -> Check:
    free = spec.free()
    z0 = discretize.free_partition_function(free)
    ztr = fock.partition_function(free)
    err = abs(z0 - ztr)
    for N in n_list:
        err = max(err, abs(discretize.trace_side_Z(free, N) - z0))
    return _le(f"free partition function, N in {list(n_list)}", err / z0, 1e-10, "relative error")


def check_inverse(e: np.ndarray, beta: float, n_list) -> list[Check]:
    qr = rq = 0.0
    for N in n_list:
        q = discretize.build_Q(N, beta, e)
        r = discretize.build_R(N, beta, e)
        qr = max(qr, np.max(np.abs(q @ r - np.eye(q.shape[0]))))
        rq = max(rq, np.max(np.abs(r - np.linalg.inv(q))))
    return [
        _le(f"Q R = 1, N in {list(n_list)}", qr, 1e-12),
        _le(f"closed-form R = inverse of Q, N in {list(n_list)}", rq, 1e-12),
    ]


def check_finite_identity(spec: ModelSpec, n_list, source_degree: int = 2) -> Check:
    worst = 0.0
    for N in n_list:
        t = discretize.trace_side_Z(spec, N, sources=True, max_source_degree=source_degree)
        g = discretize.grassmann_side_Z(spec, N, sources=True, max_source_degree=source_degree)
        worst = max(worst, t.max_abs_diff(g) / abs(t.body))
    return _le(f"finite-N trace = Gaussian integral, N in {list(n_list)}", worst, 1e-8)


def check_convergence(spec: ModelSpec, n_list, source_degree: int = 2) -> tuple[list[Check], list]:
    rows = discretize.convergence_study(spec, n_list, source_degree)
    ratios = [r.ratio for r in rows if r.ratio is not None]
    return [_in_band(f"convolution formula error halves as N doubles, N in {list(n_list)}", ratios)], rows


def check_lie(rng: np.random.Generator, trials: int = 50, dim: int = 4, n_pair=(64, 128)) -> list[Check]:
    worst = 0.0
    ratios = []
    for _ in range(trials):
        pair = []
        for _k in range(2):
            m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            pair.append(m * rng.uniform(0.0, 2.0) / np.linalg.norm(m, 2))
        a, b = pair
        e1, bound1 = discretize.lie_error(a, b, n_pair[0])
        e2, bound2 = discretize.lie_error(a, b, n_pair[1])
        worst = max(worst, e1 / bound1, e2 / bound2)
        if e2 > 0:
            ratios.append(e1 / e2)
    return [
        _le(f"Lie product error within bound ({trials} pairs)", worst, 1.0, "max error/bound"),
        _in_band(f"Lie product error ~ 1/N, N = {n_pair[0]} -> {n_pair[1]}", ratios, detail=f"{len(ratios)} pairs"),
    ]


def check_reexp(spec: ModelSpec, n_list) -> list[Check]:
    values, worst = [], 0.0
    for N in n_list:
        val, bound = discretize.reexp_delta(spec, N)
        values.append(val)
        worst = max(worst, val / bound if bound > 0 else (0.0 if val == 0 else np.inf))
    out = [_le(f"reexponentiation error within bound, N in {list(n_list)}", worst, 1.0, "max value/bound")]
    if all(v > 0 for v in values):
        out.append(_in_band("reexponentiation error ~ 1/N", [a / b for a, b in zip(values, values[1:])]))
    return out


# cumulants ---------------------------------------------------------------------------


def check_cumulant_oracle(specs, m_max: int = 2) -> Check:
    worst = 0.0
    for spec in specs:
        for m in range(1, m_max + 1):
            a = cumulants.cumulant_table(spec, m, cumulants.PARTITION).entries
            b = cumulants.cumulant_table(spec, m, cumulants.GRASSMANN_LOG).entries
            worst = max(worst, np.max(np.abs(a - b)))
    return _le(f"partition formula = log generating function ({len(specs)} models, m <= {m_max})", worst, 1e-9)


def random_oracle_models(rng: np.random.Generator, count: int, max_modes: int = 4) -> list[ModelSpec]:
    return [random_model(int(rng.integers(2, max_modes + 1)), rng) for _ in range(count)]


def check_quasifree(spec: ModelSpec) -> list[Check]:
    free = spec.free()
    g1 = cumulants.cumulant_table(free, 1).entries
    f = discretize.fermi(free.beta, free.energy)
    out = [_le("free gamma_1 = Fermi function", np.max(np.abs(g1 - f.T)), 1e-10)]
    g2 = cumulants.cumulant_table(free, 2).entries
    out.append(_le("free gamma_2^T = 0", np.max(np.abs(g2)), 1e-10))
    return out


def check_unbalanced(spec: ModelSpec, max_degree: int = 4) -> Check:
    value = cumulants.unbalanced_max(spec, max_degree)
    return _le("truncated expectations with m != n creators/annihilators vanish", value, 1e-10)


def check_antisymmetry(spec: ModelSpec) -> Check:
    """gamma_2^T under all 24 permutations of its operator slots (creation/annihilation label travels)."""
    n = spec.n_modes
    worst = 0.0
    perms = list(itertools.permutations(range(4)))
    for idx in itertools.product(range(n), repeat=4):
        word = cumulants.normal_slots(2, idx)
        base = cumulants.truncated_by_partitions(spec, word)
        for p in perms:
            val = cumulants.truncated_by_partitions(spec, [word[i] for i in p])
            worst = max(worst, abs(val - sequence_sign(p) * base))
    return _le("gamma_2^T antisymmetric under slot permutations (24)", worst, 1e-10)


def check_order_independence(spec: ModelSpec) -> Check:
    n = spec.n_modes
    worst = 0.0
    for creators in itertools.product(range(n), repeat=2):
        for annihilators in itertools.product(range(n), repeat=2):
            vals = [
                abs(cumulants.unordered_truncated(spec, pat, cumulants.arrange(pat, creators, annihilators)))
                for pat in cumulants.balanced_patterns(2)
            ]
            worst = max(worst, max(vals) - min(vals))
    return _le("|unordered truncated| independent of the 6 orderings", worst, 1e-10)


# bounds --------------------------------------------------------------------------------


def check_detbound(spec: ModelSpec, rng: np.random.Generator, trials: int = 10000, max_size: int = 4) -> Check:
    worst = 0.0
    per = max(1, trials // max_size)
    for size in range(1, max_size + 1):
        worst = max(worst, bounds.detbound_sample_check(spec, size, per, rng).max_ratio)
    return _le(f"sampled determinants <= delta^(2n) ({per * max_size} draws)", worst, 1.0, "max |det|/delta^(2n)")


def check_clustering(spec: ModelSpec, m_max: int = 2, quad_tol: float = 1e-10) -> tuple[list[Check], bounds.BoundsReport]:
    rep = bounds.clustering_check(spec, m_max, quad_tol)
    if not rep.hypothesis_ok:
        return [], rep
    out = [
        Check(f"l1-clustering m={r.m}", r.lhs, r.rhs, bool(r.passed), f"lhs <= rhs + {bounds.ROUNDOFF:g}")
        for r in rep.rows
    ]
    return out, rep


def check_clustering_family(rng: np.random.Generator, count: int = 10, max_modes: int = 3, quad_tol: float = 1e-10) -> list[Check]:
    """Random models scaled into 0.1 <= omega ||V||_{3 delta} <= 0.5."""
    worst = 0.0
    ratios = []
    for _ in range(count):
        base = random_model(int(rng.integers(2, max_modes + 1)), rng)
        target = float(rng.uniform(0.1, 0.5))
        spec = base.scaled(bounds.coupling_for_target(base, target, quad_tol))
        rep = bounds.clustering_check(spec, 2, quad_tol)
        if not rep.hypothesis_ok:
            raise AssertionError("scaled model violates the hypothesis")
        worst = max(worst, max(r.lhs / r.rhs for r in rep.rows))
        half = bounds.clustering_check(spec.scaled(0.5), 1, quad_tol)
        ratios.append(rep.rows[0].lhs / half.rows[0].lhs)
    return [
        _le(f"l1-clustering on {count} scaled random models", worst, 1.0, "max lhs/rhs"),
        _in_band("m=1 deviation linear in the coupling", ratios),
    ]


# suite -----------------------------------------------------------------------------------


def verify_suite(spec: ModelSpec, run, rng: np.random.Generator) -> list[Check]:
    """All invariants for one model with parameters from a RunConfig."""
    n = spec.n_modes
    out: list[Check] = [check_car(n)]
    out += check_symbol_calculus(rng, run.symbol_trials, min(n, 3))
    out.append(check_bch(min(n, 3)))
    out.append(check_reorder(min(n, 2)))
    out += check_kernel(spec)
    out.append(check_free_Z(spec, run.N))
    out += check_inverse(spec.energy, spec.beta, sorted(set(run.N) | {1, 2}))
    out += check_inverse(random_hermitian(min(n, 3), rng), spec.beta, [1, 2, 4, 8, 16])
    out.append(check_finite_identity(spec, run.identity_N, run.source_degree))
    if spec.interactions and len(run.N) > 1:
        out += check_convergence(spec, run.N, run.source_degree)[0]
    out += check_lie(rng, run.lie_trials)
    out += check_reexp(spec, run.reexp_N)
    out.append(check_cumulant_oracle([spec] + random_oracle_models(rng, run.oracle_models), run.m_max))
    out += check_quasifree(spec)
    out.append(check_unbalanced(spec, 2 * run.m_max))
    out.append(check_antisymmetry(spec))
    out.append(check_order_independence(spec))
    out.append(check_detbound(spec, rng, run.detbound_trials, run.detbound_max_size))
    out += check_clustering(spec, run.m_max, run.quad_tol)[0]
    return out
