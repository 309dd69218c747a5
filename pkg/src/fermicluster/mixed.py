"""Source-valued Fock operators: the algebra generated by Grassmann sources and a+/a-.

An element is sum_S c^S O_S with the source monomial to the left.  Sources
anticommute with ladder operators, so moving c^T to the left of an operator
of parity p costs (-1)^{|T| p}; operators are split into (-1)^N-even and odd
parts before multiplying.
"""

from __future__ import annotations

import numpy as np

from fermicluster.fock import ANNIHILATE, CREATE, build_ladder, density_matrix, parity_split
from fermicluster.grassmann import GeneratorSet, Multivector, nilpotent_exp, reorder_sign
from fermicluster.model import ModelSpec


def degree_filter(max_degree: int | None):
    if max_degree is None:
        return None
    return lambda mask: bin(mask).count("1") <= max_degree


class MixedElement:
    """Map from source bitmask to an operator component (dense Fock matrix)."""

    __slots__ = ("gens", "dim", "terms", "_split")
    __array_ufunc__ = None  # make ndarray @ MixedElement defer to __rmatmul__

    def __init__(self, gens: GeneratorSet, dim: int, terms=None):
        self.gens = gens
        self.dim = dim
        self.terms = {} if terms is None else dict(terms)
        self._split = {}

    @classmethod
    def scalar(cls, gens, dim, value=1.0) -> MixedElement:
        return cls(gens, dim, {0: value * np.eye(dim, dtype=complex)})

    @classmethod
    def from_multivector(cls, f: Multivector, dim: int) -> MixedElement:
        eye = np.eye(dim, dtype=complex)
        return cls(f.gens, dim, {m: c * eye for m, c in f.terms.items()})

    @classmethod
    def term(cls, gens, dim, source_names, op: np.ndarray, coeff=1.0) -> MixedElement:
        word = Multivector.word(gens, source_names, coeff)
        return cls(gens, dim, {m: c * np.asarray(op, dtype=complex) for m, c in word.terms.items()})

    def _parts(self, mask):
        if mask not in self._split:
            self._split[mask] = parity_split(self.terms[mask])
        return self._split[mask]

    def __add__(self, other: MixedElement) -> MixedElement:
        out = {k: v.copy() for k, v in self.terms.items()}
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v.copy()
        return MixedElement(self.gens, self.dim, out)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, MixedElement):
            return mixed_product(self, other)
        return MixedElement(self.gens, self.dim, {k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, op: np.ndarray) -> MixedElement:
        """Right multiplication by a plain operator (no sources)."""
        return MixedElement(self.gens, self.dim, {k: v @ op for k, v in self.terms.items()})

    def __rmatmul__(self, op: np.ndarray) -> MixedElement:
        """Left multiplication by a plain operator; requires ``op`` to be even."""
        even, odd = parity_split(np.asarray(op))
        if np.max(np.abs(odd), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(op))):
            raise ValueError("left multiplication is only defined here for even operators")
        return MixedElement(self.gens, self.dim, {k: op @ v for k, v in self.terms.items()})

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.terms.values()), default=0.0)

    def trace(self) -> Multivector:
        """Tr over Fock space, leaving a source multivector."""
        return Multivector(self.gens, {k: np.trace(v) for k, v in self.terms.items()})

    def truncated(self, max_degree: int | None) -> MixedElement:
        if max_degree is None:
            return self
        keep = {k: v for k, v in self.terms.items() if bin(k).count("1") <= max_degree}
        return MixedElement(self.gens, self.dim, keep)


def mixed_product(a: MixedElement, b: MixedElement, max_degree: int | None = None) -> MixedElement:
    if a.gens != b.gens:
        raise ValueError("mixed elements live on different source sets")
    nbits = len(a.gens)
    out: dict[int, np.ndarray] = {}
    for sa in a.terms:
        even, odd = a._parts(sa)
        for sb, ob in b.terms.items():
            if sa & sb:
                continue
            key = sa | sb
            if max_degree is not None and bin(key).count("1") > max_degree:
                continue
            sign = int(reorder_sign(sa, sb, nbits))
            left = even - odd if bin(sb).count("1") % 2 else even + odd
            val = sign * (left @ ob)
            out[key] = out[key] + val if key in out else val
    return MixedElement(a.gens, a.dim, out)


def source_ladder_exp(gens, n, pairs, max_degree=None) -> MixedElement:
    """prod_i (1 + c_i a_i) = exp(sum_i c_i a_i) for pairs (source name, kind, mode).

    Each c_i a_i is even and squares to zero, so the factors commute and the
    exponential is the ordered product.
    """
    dim = 1 << n
    out = MixedElement.scalar(gens, dim)
    for name, kind, x in pairs:
        factor = MixedElement.scalar(gens, dim) + MixedElement.term(
            gens, dim, [name], build_ladder(n, x, kind)
        )
        out = mixed_product(out, factor, max_degree)
    return out


def source_pairing(gens, left_names, right_names, sign=1.0) -> Multivector:
    out = Multivector(gens)
    for a, b in zip(left_names, right_names):
        out = out + Multivector.word(gens, [a, b], sign)
    return out


def plus_names(n):
    return [f"c+{x}" for x in range(n)]


def minus_names(n):
    return [f"c-{x}" for x in range(n)]


def mixed_exponential(n: int, kind: int, max_degree=None) -> MixedElement:
    """exp((c+, a+)) for ``kind=CREATE`` or exp((c-, a-)) for ``kind=ANNIHILATE``."""
    gens = GeneratorSet.sources(n)
    names = plus_names(n) if kind == CREATE else minus_names(n)
    return source_ladder_exp(gens, n, [(nm, kind, x) for x, nm in enumerate(names)], max_degree)


def bch_residuals(n: int) -> dict[str, float]:
    """Residuals of exp((c+,a+)) exp((c-,a-)) = exp((c-,a-)) exp((c+,a+)) exp(Q).

    ``corrected`` uses Q = (c-, c+) = [(c+,a+), (c-,a-)]; ``as_printed`` uses
    Q = (c+, c-), which does not close.
    """
    gens = GeneratorSet.sources(n)
    dim = 1 << n
    ep = mixed_exponential(n, CREATE)
    em = mixed_exponential(n, ANNIHILATE)
    lhs = mixed_product(ep, em)
    base = mixed_product(em, ep)
    out = {}
    for label, q in (
        ("corrected", source_pairing(gens, minus_names(n), plus_names(n))),
        ("as_printed", source_pairing(gens, plus_names(n), minus_names(n))),
    ):
        rhs = mixed_product(base, MixedElement.from_multivector(nilpotent_exp(q), dim))
        out[label] = (lhs - rhs).max_abs()
    return out


def bch_check(n: int) -> float:
    """Entrywise max residual of the corrected commutation identity."""
    return bch_residuals(n)["corrected"]


def commutator(n: int) -> MixedElement:
    """[(c+, a+), (c-, a-)] computed in the mixed algebra."""
    gens = GeneratorSet.sources(n)
    dim = 1 << n
    x = MixedElement(gens, dim)
    y = MixedElement(gens, dim)
    for i in range(n):
        x = x + MixedElement.term(gens, dim, [f"c+{i}"], build_ladder(n, i, CREATE))
        y = y + MixedElement.term(gens, dim, [f"c-{i}"], build_ladder(n, i, ANNIHILATE))
    return mixed_product(x, y) - mixed_product(y, x)


def generating_operator(n: int, max_degree=None) -> MixedElement:
    """exp((c+, a+)) exp((c-, a-)) on the source set ``GeneratorSet.sources(n)``."""
    return mixed_product(
        mixed_exponential(n, CREATE, max_degree), mixed_exponential(n, ANNIHILATE, max_degree), max_degree
    )


def generating_function(spec: ModelSpec, max_degree: int | None = None, normalized: bool = False) -> Multivector:
    """Z(c-, c+) = Tr[rho exp((c+, a+)) exp((c-, a-))] as a source multivector.

    With ``normalized=True`` the body is 1 (i.e. Z(c-, c+)/Z(0, 0)).
    """
    from fermicluster.fock import partition_function

    rho = density_matrix(spec)
    gen_op = generating_operator(spec.n_modes, max_degree)
    z = (rho @ gen_op).trace()
    return z if normalized else z * partition_function(spec)
