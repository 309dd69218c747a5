"""Finite Grassmann algebra, Berezin integration and Grassmann Gaussian measures.

A :class:`Multivector` stores coefficients keyed by bitmask over an ordered
:class:`GeneratorSet`; the monomial for mask ``S`` is the product of the
generators in ``S`` in ascending position.

Sign conventions (all other signs follow from these):

* Berezin integration is a left derivative; ``berezin(A, [gb, g])`` means
  ``int dgb dg A`` with the innermost (last listed) generator acting first,
  so ``int dgb dg (g gb) = 1``.
* The Gaussian measure with covariance ``C`` has ``int dmu_C psi_i psibar_j = C_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSIBAR, PSI, SOURCE_PLUS, SOURCE_MINUS = "psibar", "psi", "c+", "c-"


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered generator names with a role tag and a (slice, site) label each."""

    names: tuple
    roles: tuple = ()
    labels: tuple = ()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("generator names must be unique")
        if not self.roles:
            object.__setattr__(self, "roles", (None,) * len(self.names))
        if not self.labels:
            object.__setattr__(self, "labels", (None,) * len(self.names))

    def __len__(self):
        return len(self.names)

    def index(self, name) -> int:
        return self.names.index(name)

    def positions(self, names) -> list[int]:
        lookup = {nm: i for i, nm in enumerate(self.names)}
        return [lookup[nm] for nm in names]

    @classmethod
    def fields(cls, n: int, prefix: str = "", slice_label=None) -> GeneratorSet:
        """psibar_0..psibar_{n-1}, psi_0..psi_{n-1}."""
        names = tuple(f"{prefix}psibar{x}" for x in range(n)) + tuple(
            f"{prefix}psi{x}" for x in range(n)
        )
        roles = (PSIBAR,) * n + (PSI,) * n
        labels = tuple((slice_label, x) for x in range(n)) * 2
        return cls(names, roles, labels)

    @classmethod
    def sources(cls, n: int) -> GeneratorSet:
        """c+_0..c+_{n-1}, c-_0..c-_{n-1}."""
        names = tuple(f"c+{x}" for x in range(n)) + tuple(f"c-{x}" for x in range(n))
        roles = (SOURCE_PLUS,) * n + (SOURCE_MINUS,) * n
        labels = tuple((None, x) for x in range(n)) * 2
        return cls(names, roles, labels)

    def __add__(self, other: GeneratorSet) -> GeneratorSet:
        return GeneratorSet(
            self.names + other.names, self.roles + other.roles, self.labels + other.labels
        )


def popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def reorder_sign(a, b, nbits: int):
    """Sign of e_A e_B = sign * e_{A|B} for disjoint masks (vectorized)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    parity = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    for j in range(nbits):
        parity ^= (b >> j) & 1 & popcount(a >> (j + 1))
    return 1 - 2 * (parity & 1)


def sequence_sign(positions) -> int:
    """Sign of sorting a word of distinct generator positions; 0 on a repeat."""
    positions = list(positions)
    if len(set(positions)) != len(positions):
        return 0
    inv = sum(
        1
        for i in range(len(positions))
        for j in range(i + 1, len(positions))
        if positions[i] > positions[j]
    )
    return -1 if inv % 2 else 1


class Multivector:
    """Element of the Grassmann algebra over ``gens`` with complex coefficients."""

    __slots__ = ("gens", "terms")

    def __init__(self, gens: GeneratorSet, terms=None):
        self.gens = gens
        self.terms = {} if terms is None else {int(k): complex(v) for k, v in terms.items() if v != 0}

    # construction -----------------------------------------------------------

    @classmethod
    def scalar(cls, gens, value=1.0) -> Multivector:
        return cls(gens, {0: value})

    @classmethod
    def generator(cls, gens, name, coeff=1.0) -> Multivector:
        return cls(gens, {1 << gens.index(name): coeff})

    @classmethod
    def word(cls, gens, names, coeff=1.0) -> Multivector:
        """The ordered product of the named generators times ``coeff``."""
        pos = gens.positions(names)
        sign = sequence_sign(pos)
        if sign == 0:
            return cls(gens)
        mask = 0
        for p in pos:
            mask |= 1 << p
        return cls(gens, {mask: sign * coeff})

    @classmethod
    def linear(cls, gens, names, coeffs) -> Multivector:
        return cls(gens, {1 << gens.index(nm): c for nm, c in zip(names, coeffs)})

    # basic structure ---------------------------------------------------------

    def copy(self) -> Multivector:
        return Multivector(self.gens, dict(self.terms))

    @property
    def body(self) -> complex:
        return self.terms.get(0, 0j)

    def coefficient(self, names) -> complex:
        """Coefficient of the ordered word ``names`` (sign-adjusted)."""
        pos = self.gens.positions(names)
        sign = sequence_sign(pos)
        if sign == 0:
            return 0j
        mask = sum(1 << p for p in pos)
        return sign * self.terms.get(mask, 0j)

    def grade(self, k: int) -> Multivector:
        return Multivector(self.gens, {m: c for m, c in self.terms.items() if bin(m).count("1") == k})

    def even(self) -> Multivector:
        return Multivector(self.gens, {m: c for m, c in self.terms.items() if bin(m).count("1") % 2 == 0})

    def odd(self) -> Multivector:
        return Multivector(self.gens, {m: c for m, c in self.terms.items() if bin(m).count("1") % 2 == 1})

    def truncate(self, mask_filter) -> Multivector:
        return Multivector(self.gens, {m: c for m, c in self.terms.items() if mask_filter(m)})

    def max_abs_diff(self, other: Multivector) -> float:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0) - other.terms.get(k, 0)) for k in keys), default=0.0)

    def _check(self, other):
        if self.gens != other.gens:
            raise ValueError("multivectors live on different generator sets")

    # arithmetic --------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Multivector):
            other = Multivector.scalar(self.gens, other)
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Multivector(self.gens, out)

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.gens, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return product(self, other)
        return Multivector(self.gens, {k: v * other for k, v in self.terms.items()})

    def __rmul__(self, other):
        return Multivector(self.gens, {k: v * other for k, v in self.terms.items()})

    def __repr__(self):
        parts = []
        for mask in sorted(self.terms, key=lambda m: (bin(m).count("1"), m)):
            word = "*".join(self.gens.names[i] for i in range(len(self.gens)) if mask >> i & 1)
            parts.append(f"({self.terms[mask]:.6g}){'*' + word if word else ''}")
        return " + ".join(parts) or "0"

    # substitutions -------------------------------------------------------------

    def relabel(self, gens: GeneratorSet, mapping: dict) -> Multivector:
        """Rename generators into ``gens``; ``mapping`` sends old names to new names."""
        out: dict[int, complex] = {}
        new_pos = {old: gens.index(new) for old, new in mapping.items()}
        for mask, c in self.terms.items():
            word = [new_pos[self.gens.names[i]] for i in range(len(self.gens)) if mask >> i & 1]
            sign = sequence_sign(word)
            if sign == 0:
                continue
            key = sum(1 << p for p in word)
            out[key] = out.get(key, 0) + sign * c
        return Multivector(gens, out)

    def scale_generators(self, factors: dict) -> Multivector:
        """Multiply each named generator by a scalar (e.g. psibar -> -psibar)."""
        pos = {self.gens.index(k): v for k, v in factors.items()}
        out = {}
        for mask, c in self.terms.items():
            for p, f in pos.items():
                if mask >> p & 1:
                    c = c * f
            out[mask] = c
        return Multivector(self.gens, out)


def product(a: Multivector, b: Multivector, mask_filter=None) -> Multivector:
    """Graded (exterior) product; ``mask_filter`` optionally drops result masks."""
    a._check(b)
    if not a.terms or not b.terms:
        return Multivector(a.gens)
    ka = np.fromiter(a.terms.keys(), dtype=np.int64, count=len(a.terms))
    va = np.fromiter(a.terms.values(), dtype=complex, count=len(a.terms))
    kb = np.fromiter(b.terms.keys(), dtype=np.int64, count=len(b.terms))
    vb = np.fromiter(b.terms.values(), dtype=complex, count=len(b.terms))
    out: dict[int, complex] = {}
    # chunk over a to bound memory
    chunk = max(1, 2_000_000 // len(kb))
    for start in range(0, len(ka), chunk):
        ka_c = ka[start:start + chunk, None]
        va_c = va[start:start + chunk, None]
        disjoint = (ka_c & kb[None, :]) == 0
        ia, ib = np.nonzero(disjoint)
        if ia.size == 0:
            continue
        ma, mb = ka_c[ia, 0], kb[ib]
        keys = ma | mb
        vals = reorder_sign(ma, mb, len(a.gens)) * va_c[ia, 0] * vb[ib]
        if mask_filter is not None:
            keep = np.fromiter((mask_filter(int(k)) for k in keys), dtype=bool, count=keys.size)
            keys, vals = keys[keep], vals[keep]
        uniq, inv = np.unique(keys, return_inverse=True)
        sums = np.zeros(uniq.size, dtype=complex)
        np.add.at(sums, inv, vals)
        for k, v in zip(uniq.tolist(), sums.tolist()):
            out[k] = out.get(k, 0) + v
    return Multivector(a.gens, out)


def _soul(a: Multivector) -> Multivector:
    return Multivector(a.gens, {k: v for k, v in a.terms.items() if k != 0})


def nilpotent_exp(a: Multivector, mask_filter=None) -> Multivector:
    """exp(a); the soul is nilpotent so the series terminates."""
    body = a.body
    soul = _soul(a)
    result = Multivector.scalar(a.gens, 1.0)
    power = Multivector.scalar(a.gens, 1.0)
    k = 0
    while True:
        k += 1
        power = product(power, soul, mask_filter) * (1.0 / k)
        if not power.terms:
            break
        result = result + power
    return result * np.exp(body)


def nilpotent_log(u: Multivector, mask_filter=None) -> Multivector:
    """log(u) for u with nonzero body; principal branch for the body."""
    body = u.body
    if abs(body) == 0:
        raise ZeroDivisionError("logarithm of a multivector with zero body")
    x = _soul(u) * (1.0 / body)
    result = Multivector.scalar(u.gens, np.log(body))
    power = Multivector.scalar(u.gens, 1.0)
    k = 0
    while True:
        k += 1
        power = product(power, x, mask_filter)
        if not power.terms:
            break
        result = result + power * ((-1) ** (k + 1) / k)
    return result


def derivative(a: Multivector, name) -> Multivector:
    """Left derivative with respect to one generator."""
    p = a.gens.index(name)
    bit = 1 << p
    below = bit - 1
    out = {}
    for mask, c in a.terms.items():
        if mask & bit:
            sign = -1 if bin(mask & below).count("1") % 2 else 1
            out[mask ^ bit] = sign * c
    return Multivector(a.gens, out)


def derivatives(a: Multivector, names) -> Multivector:
    """d/d n1 d/d n2 ... d/d nk a, the last listed derivative acting first."""
    for nm in reversed(list(names)):
        a = derivative(a, nm)
    return a


def berezin(a: Multivector, names) -> Multivector:
    """int d n1 ... d nk a with the innermost (last listed) generator integrated first."""
    return derivatives(a, names)


def pair_measure(psibar_names, psi_names) -> list:
    """Generator order of D(psibar, psi) = prod_x d psibar_x d psi_x."""
    out = []
    for b, p in zip(psibar_names, psi_names):
        out += [b, p]
    return out


def seminorm(a: Multivector, q: float) -> float:
    """sum over degrees m of q^m times the l1 norm of the degree-m coefficients.

    The body (m = 0) is included; without it the product inequality fails.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    return float(sum(abs(c) * q ** bin(m).count("1") for m, c in a.terms.items()))


# Gaussian measures ------------------------------------------------------------


def wick_determinant(cov: np.ndarray, psi_forms, psibar_forms) -> complex:
    """int dmu_C (a_1.psi)(b_1.psibar)...(a_k.psi)(b_k.psibar) for linear forms a_i, b_j."""
    if len(psi_forms) != len(psibar_forms):
        return 0j
    if not psi_forms:
        return 1.0 + 0j
    a = np.asarray(psi_forms)
    b = np.asarray(psibar_forms)
    return complex(np.linalg.det(a @ cov @ b.T))


@dataclass(frozen=True)
class GrassmannGaussian:
    """Gaussian measure on pairs (psibar_i, psi_i) with int dmu psi_i psibar_j = C_ij."""

    covariance: np.ndarray

    def moment(self, word) -> complex:
        """Integral of an ordered word of ``("psi", i)`` / ``("psibar", j)`` factors."""
        return gaussian_moment(self.covariance, word)


def gaussian_moment(cov: np.ndarray, word) -> complex:
    """Wick determinant for an ordered word of ``(role, index)`` factors."""
    psis = [i for i, (role, _) in enumerate(word) if role == PSI]
    bars = [i for i, (role, _) in enumerate(word) if role == PSIBAR]
    if len(psis) != len(bars) or len(psis) + len(bars) != len(word):
        return 0j
    # reorder to psi_1 psibar_1 psi_2 psibar_2 ...
    target = []
    for p, b in zip(psis, bars):
        target += [p, b]
    sign = sequence_sign(target)
    rows = [word[p][1] for p in psis]
    cols = [word[b][1] for b in bars]
    if not rows:
        return 1.0 + 0j
    return sign * complex(np.linalg.det(np.asarray(cov)[np.ix_(rows, cols)]))


def gaussian_integral(cov: np.ndarray, f: Multivector, psibar_names, psi_names) -> Multivector:
    """int dmu_C f over the listed generators; other generators ride along.

    Each monomial is split into (external)(internal) with the reorder sign and
    the internal part is replaced by its Wick determinant.
    """
    gens = f.gens
    pb = {gens.index(nm): i for i, nm in enumerate(psibar_names)}
    ps = {gens.index(nm): i for i, nm in enumerate(psi_names)}
    internal_mask = sum(1 << p for p in list(pb) + list(ps))
    out: dict[int, complex] = {}
    for mask, c in f.terms.items():
        imask = mask & internal_mask
        emask = mask & ~internal_mask
        sign = int(reorder_sign(emask, imask, len(gens)))
        word = []
        for p in range(len(gens)):
            if imask >> p & 1:
                word.append((PSIBAR, pb[p]) if p in pb else (PSI, ps[p]))
        # reorder_sign gives e_E e_I = s e_mask, so e_mask = s e_E e_I
        val = gaussian_moment(cov, word)
        if val != 0:
            out[emask] = out.get(emask, 0) + sign * c * val
    return Multivector(gens, out)


def gaussian_weight(cov: np.ndarray, gens: GeneratorSet, psibar_names, psi_names) -> Multivector:
    """exp(-(psibar, C^{-1} psi)) for invertible C."""
    inv = np.linalg.inv(cov)
    quad = Multivector(gens)
    for i, b in enumerate(psibar_names):
        for j, p in enumerate(psi_names):
            if inv[i, j] != 0:
                quad = quad + Multivector.word(gens, [b, p], -inv[i, j])
    return nilpotent_exp(quad)


def berezin_gaussian(cov: np.ndarray, f: Multivector, psibar_names, psi_names) -> Multivector:
    """Brute-force int dmu_C f as a normalized Berezin integral against the weight."""
    w = gaussian_weight(cov, f.gens, psibar_names, psi_names)
    order = pair_measure(psibar_names, psi_names)
    norm = berezin(w, order).body
    return berezin(product(w, f), order) * (1.0 / norm)


def shift(f: Multivector, mapping: dict) -> Multivector:
    """Substitute generator g -> g + sum_k coeff_k h_k for each entry of ``mapping``.

    ``mapping`` maps a generator name to a list of ``(name, coeff)`` pairs that
    are added to it.  Each monomial is expanded binomially in its original order.
    """
    gens = f.gens
    repl = {}
    for p, nm in enumerate(gens.names):
        choices = [(p, 1.0)]
        for other, c in mapping.get(nm, ()):
            choices.append((gens.index(other), c))
        repl[p] = choices
    out: dict[int, complex] = {}
    for mask, c in f.terms.items():
        factors = [repl[p] for p in range(len(gens)) if mask >> p & 1]
        partial = {(): c}
        for options in factors:
            nxt = {}
            for word, val in partial.items():
                for pos, coeff in options:
                    if pos in word:
                        continue
                    key = word + (pos,)
                    nxt[key] = nxt.get(key, 0) + val * coeff
            partial = nxt
        for word, val in partial.items():
            sign = sequence_sign(word)
            if sign and val != 0:
                key = sum(1 << p for p in word)
                out[key] = out.get(key, 0) + sign * val
    return Multivector(gens, out)


def gaussian_convolve(cov, f: Multivector, psibar_names, psi_names, phibar_names, phi_names) -> Multivector:
    """(mu_C * F)(phibar, phi) = int dmu_C(psibar, psi) F(psibar + phibar, psi + phi)."""
    mapping = {}
    for b, pb in zip(psibar_names, phibar_names):
        mapping[b] = [(pb, 1.0)]
    for p, ph in zip(psi_names, phi_names):
        mapping[p] = [(ph, 1.0)]
    return gaussian_integral(cov, shift(f, mapping), psibar_names, psi_names)

