"""Truncated expectations (cumulants) by two independent routes.

``partition``: Moebius inversion over set partitions of the operator slots,
with the fermionic sign of the permutation that groups the slots into blocks.

``grassmann-log``: Grassmann derivatives of log Z(c-, c+).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from fermicluster.fock import ANNIHILATE, CREATE, build_ladder, density_matrix, expectation, monomial
from fermicluster.grassmann import GeneratorSet, Multivector, derivatives, nilpotent_exp, nilpotent_log, sequence_sign
from fermicluster.mixed import MixedElement, generating_function, mixed_product
from fermicluster.model import ModelSpec

PARTITION, GRASSMANN_LOG = "partition-formula", "grassmann-log"


def set_partitions(items):
    """All set partitions of a list; blocks keep the original item order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def normal_slots(m: int, indices) -> list[tuple[int, int]]:
    """Operator slots for gamma^T_m(x1..xm; x(m+1)..x2m): a+_x1..a+_xm a-_x2m..a-_x(m+1)."""
    indices = list(indices)
    if len(indices) != 2 * m:
        raise ValueError(f"expected {2 * m} indices, got {len(indices)}")
    return [(CREATE, x) for x in indices[:m]] + [(ANNIHILATE, x) for x in reversed(indices[m:])]


def truncated_by_partitions(spec: ModelSpec, ops) -> complex:
    """Fermionic cumulant of the ordered operator word ``ops``."""
    ops = list(ops)
    n = spec.n_modes
    cache: dict[tuple[int, ...], complex] = {}

    def moment(block):
        key = tuple(block)
        if key not in cache:
            cache[key] = expectation(spec, monomial(n, [ops[i] for i in block]))
        return cache[key]

    total = 0j
    for part in set_partitions(range(len(ops))):
        blocks = sorted(part, key=min)
        sign = sequence_sign([i for b in blocks for i in b])
        k = len(blocks)
        weight = (-1) ** (k - 1) * math.factorial(k - 1)
        val = 1.0 + 0j
        for b in blocks:
            val *= moment(b)
            if val == 0:
                break
        total += sign * weight * val
    return total


def gamma_truncated_partition(spec: ModelSpec, m: int, indices) -> complex:
    if m < 1:
        raise ValueError("m must be >= 1")
    return truncated_by_partitions(spec, normal_slots(m, indices))


def log_generating_function(spec: ModelSpec, max_degree: int | None = None) -> Multivector:
    """F(c-, c+) = log Z(c-, c+)."""
    from fermicluster.mixed import degree_filter

    z = generating_function(spec, max_degree=max_degree)
    return nilpotent_log(z, degree_filter(max_degree))


def unbalanced_max(spec: ModelSpec, max_degree: int = 4) -> float:
    """Largest |coefficient| of log Z(c-, c+) with unequal numbers of c+ and c-.

    These are the truncated expectations with m creators and n != m
    annihilators; they vanish for particle-number conserving models.
    """
    n = spec.n_modes
    f = log_generating_function(spec, max_degree)
    plus = (1 << n) - 1
    worst = 0.0
    for mask, c in f.terms.items():
        if bin(mask & plus).count("1") != bin(mask >> n).count("1"):
            worst = max(worst, abs(c))
    return worst


def _gamma_t_from_log(f: Multivector, m: int, indices) -> complex:
    indices = list(indices)
    names = [f"c+{x}" for x in indices[:m]] + [f"c-{x}" for x in reversed(indices[m:])]
    return derivatives(f, names).body


def gamma_truncated_grassmann(spec: ModelSpec, m: int, indices) -> complex:
    return _gamma_t_from_log(log_generating_function(spec, 2 * m), m, indices)


@dataclass
class CumulantTable:
    """gamma_m^T (or gamma_m when ``truncated`` is False) on Ind^{2m}."""

    order: int
    entries: np.ndarray
    method: str
    truncated: bool = True

    def __getitem__(self, idx):
        return self.entries[tuple(idx)]


def cumulant_table(spec: ModelSpec, m: int, method: str = GRASSMANN_LOG) -> CumulantTable:
    n = spec.n_modes
    out = np.zeros((n,) * (2 * m), dtype=complex)
    if method == GRASSMANN_LOG:
        f = log_generating_function(spec, 2 * m)
        for idx in itertools.product(range(n), repeat=2 * m):
            out[idx] = _gamma_t_from_log(f, m, idx)
    elif method == PARTITION:
        for idx in itertools.product(range(n), repeat=2 * m):
            out[idx] = gamma_truncated_partition(spec, m, idx)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CumulantTable(m, out, method)


def moment_table(spec: ModelSpec, m: int) -> CumulantTable:
    from fermicluster.fock import gamma_table

    return CumulantTable(m, gamma_table(spec, m), "trace", truncated=False)


# general (unordered) monomials ----------------------------------------------


def slot_sources(k: int) -> GeneratorSet:
    return GeneratorSet(tuple(f"s{i}" for i in range(k)))


def slot_generating_operator(n: int, sigma, indices) -> MixedElement:
    """prod_i exp(c_i a^{sigma_i}(x_i)) in slot order, one source per slot."""
    gens = slot_sources(len(sigma))
    dim = 1 << n
    out = MixedElement.scalar(gens, dim)
    for i, (s, x) in enumerate(zip(sigma, indices)):
        factor = MixedElement.scalar(gens, dim) + MixedElement.term(gens, dim, [f"s{i}"], build_ladder(n, x, s))
        out = mixed_product(out, factor)
    return out


def normal_ordered_slot_operator(n: int, sigma, indices) -> MixedElement:
    """:prod_i exp(c_i a^{sigma_i}(x_i)): with creation slots moved left."""
    order = [i for i, s in enumerate(sigma) if s == CREATE] + [i for i, s in enumerate(sigma) if s != CREATE]
    gens = slot_sources(len(sigma))
    dim = 1 << n
    out = MixedElement.scalar(gens, dim)
    for i in order:
        factor = MixedElement.scalar(gens, dim) + MixedElement.term(
            gens, dim, [f"s{i}"], build_ladder(n, indices[i], sigma[i])
        )
        out = mixed_product(out, factor)
    return out


def reorder_prefactor(sigma, indices) -> Multivector:
    """exp(-sum_i sum_{j in L_i} (c_j^-, c_i^+)) with L_i the annihilators left of slot i."""
    gens = slot_sources(len(sigma))
    q = Multivector(gens)
    for i, si in enumerate(sigma):
        if si != CREATE:
            continue
        for j in range(i):
            if sigma[j] == ANNIHILATE and indices[j] == indices[i]:
                q = q - Multivector.word(gens, [f"s{j}", f"s{i}"])
    return nilpotent_exp(q)


def reorder_residual(n: int, sigma, indices) -> float:
    """Max entry of prod exp(c a) - prefactor * :prod exp(c a):."""
    lhs = slot_generating_operator(n, sigma, indices)
    pre = MixedElement.from_multivector(reorder_prefactor(sigma, indices), 1 << n)
    rhs = mixed_product(pre, normal_ordered_slot_operator(n, sigma, indices))
    return (lhs - rhs).max_abs()


def unordered_truncated(spec: ModelSpec, sigma, indices) -> complex:
    """Truncated expectation of prod_i a^{sigma_i}(x_i) via the slot generating function."""
    sigma = list(sigma)
    indices = list(indices)
    if len(sigma) != len(indices):
        raise ValueError("sigma and indices must have equal length")
    k = len(sigma)
    rho = density_matrix(spec)
    g = (rho @ slot_generating_operator(spec.n_modes, sigma, indices)).trace()
    f = nilpotent_log(g)
    sign = -1 if (k * (k - 1) // 2) % 2 else 1
    return sign * f.terms.get((1 << k) - 1, 0j)


def balanced_patterns(m: int) -> list[tuple[int, ...]]:
    """All orderings of m creation and m annihilation slots."""
    out = []
    for pos in itertools.combinations(range(2 * m), m):
        out.append(tuple(CREATE if i in pos else ANNIHILATE for i in range(2 * m)))
    return out


def arrange(pattern, creators, annihilators) -> list[int]:
    """Indices laid out along ``pattern``, creators and annihilators each in order."""
    c, a = iter(creators), iter(annihilators)
    return [next(c) if s == CREATE else next(a) for s in pattern]
