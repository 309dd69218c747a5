"""Operator <-> Grassmann symbol dictionary.

Normal-ordered monomials are a+_S a-_T with both index sets ascending; their
Grassmann counterpart is psibar_S psi_T on :meth:`GeneratorSet.fields`.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.linalg import solve_triangular

from fermicluster.fock import ANNIHILATE, CREATE, monomial
from fermicluster.grassmann import (
    GeneratorSet,
    Multivector,
    berezin,
    nilpotent_exp,
    pair_measure,
    product,
)


def _bits(mask: int, n: int) -> list[int]:
    return [x for x in range(n) if mask >> x & 1]


@functools.cache
def _normal_basis(n: int):
    """Pairs (S, T) sorted by |S|+|T| and the lower-triangular element matrix."""
    dim = 1 << n
    pairs = sorted(
        ((s, t) for s in range(dim) for t in range(dim)),
        key=lambda p: (bin(p[0]).count("1") + bin(p[1]).count("1"), p),
    )
    cols = []
    for s, t in pairs:
        ops = [(CREATE, x) for x in _bits(s, n)] + [(ANNIHILATE, y) for y in _bits(t, n)]
        cols.append(monomial(n, ops))
    rows_s = np.array([p[0] for p in pairs])
    rows_t = np.array([p[1] for p in pairs])
    basis = np.stack([c[rows_s, rows_t] for c in cols], axis=1)
    basis.setflags(write=False)
    return pairs, basis, tuple(cols)


def normal_coefficients(a: np.ndarray) -> dict[tuple[int, int], complex]:
    """Coefficients a_{S,T} with A = sum a_{S,T} a+_S a-_T (masks S, T)."""
    n = a.shape[0].bit_length() - 1
    pairs, basis, _ = _normal_basis(n)
    rhs = np.array([a[s, t] for s, t in pairs], dtype=complex)
    coef = solve_triangular(basis, rhs, lower=True)
    return {p: c for p, c in zip(pairs, coef) if c != 0}


def normal_form(a: np.ndarray, gens: GeneratorSet | None = None) -> Multivector:
    """N(A)(psibar, psi) as a multivector on ``GeneratorSet.fields(n)``."""
    n = a.shape[0].bit_length() - 1
    gens = gens or GeneratorSet.fields(n)
    return Multivector(gens, {s | t << n: c for (s, t), c in normal_coefficients(a).items()})


def operator_from_normal(f: Multivector, n: int) -> np.ndarray:
    """Inverse of :func:`normal_form`: replace psibar -> a+, psi -> a- in normal order."""
    _, _, cols = _normal_basis(n)
    pairs, _, _ = _normal_basis(n)
    index = {p: i for i, p in enumerate(pairs)}
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    low = (1 << n) - 1
    for mask, c in f.terms.items():
        out += c * cols[index[(mask & low, mask >> n)]]
    return out


def pairing(gens: GeneratorSet, bars, psis, sign: float = 1.0) -> Multivector:
    """sign * sum_x bars_x psis_x."""
    out = Multivector(gens)
    for b, p in zip(bars, psis):
        out = out + Multivector.word(gens, [b, p], sign)
    return out


def _names(n, prefix=""):
    return [f"{prefix}psibar{x}" for x in range(n)], [f"{prefix}psi{x}" for x in range(n)]


def symbol_of(a: np.ndarray) -> Multivector:
    """Gra{A} = exp((psibar, psi)) N(A)(psibar, psi)."""
    n = a.shape[0].bit_length() - 1
    gens = GeneratorSet.fields(n)
    bars, psis = _names(n)
    return product(nilpotent_exp(pairing(gens, bars, psis)), normal_form(a, gens))


def symbol_product(ga: Multivector, gb: Multivector) -> Multivector:
    """Gra{AB} = int D(psibar', psi') GA(psibar, psi') exp(-(psibar', psi')) GB(psibar', psi)."""
    n = len(ga.gens) // 2
    base = GeneratorSet.fields(n)
    if ga.gens != base or gb.gens != base:
        raise ValueError("symbols must live on GeneratorSet.fields(n)")
    big = base + GeneratorSet.fields(n, prefix="p")
    bars, psis = _names(n)
    pbars, ppsis = _names(n, "p")
    a_emb = ga.relabel(big, {**dict(zip(bars, bars)), **dict(zip(psis, ppsis))})
    b_emb = gb.relabel(big, {**dict(zip(bars, pbars)), **dict(zip(psis, psis))})
    weight = nilpotent_exp(pairing(big, pbars, ppsis, -1.0))
    integrand = product(product(a_emb, weight), b_emb)
    reduced = berezin(integrand, pair_measure(pbars, ppsis))
    return reduced.relabel(base, {nm: nm for nm in bars + psis})


def trace_via_symbol(a: np.ndarray) -> complex:
    """Tr A = int D(psibar, psi) Gra{A}(-psibar, psi) exp(-(psibar, psi))."""
    n = a.shape[0].bit_length() - 1
    g = symbol_of(a)
    bars, psis = _names(n)
    flipped = g.scale_generators({b: -1.0 for b in bars})
    weight = nilpotent_exp(pairing(g.gens, bars, psis, -1.0))
    return berezin(product(flipped, weight), pair_measure(bars, psis)).body
