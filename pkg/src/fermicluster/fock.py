"""Exact Fock-space operators, Gibbs state and reduced density matrices.

Basis states are integers whose bit ``x`` is the occupation of mode ``x``.
Ladder operators carry the Jordan-Wigner string over all modes below ``x``.
"""

from __future__ import annotations

import functools
import itertools
import warnings

import numpy as np

from fermicluster.model import ModelError, ModelSpec

RESIDUAL_TOL = 1e-11
Z_FLOOR = 1e-300
CREATE, ANNIHILATE = +1, -1


@functools.cache
def _ladders(n: int) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
    dim = 1 << n
    plus, minus = [], []
    for x in range(n):
        a = np.zeros((dim, dim))
        below = (1 << x) - 1
        for s in range(dim):
            if not s >> x & 1:
                a[s | 1 << x, s] = (-1) ** bin(s & below).count("1")
        a.setflags(write=False)
        at = a.T.copy()
        at.setflags(write=False)
        plus.append(a)
        minus.append(at)
    return tuple(plus), tuple(minus)


def build_ladder(n: int, x: int, kind: int) -> np.ndarray:
    """a+_x (``kind=CREATE``) or a-_x (``kind=ANNIHILATE``) on n modes; entries 0, +-1."""
    if not 0 <= x < n:
        raise IndexError(f"mode {x} out of range for {n} modes")
    plus, minus = _ladders(n)
    if kind == CREATE:
        return plus[x]
    if kind == ANNIHILATE:
        return minus[x]
    raise ValueError(f"kind must be CREATE (+1) or ANNIHILATE (-1), got {kind}")


def number_operator(n: int) -> np.ndarray:
    return np.diag([bin(s).count("1") for s in range(1 << n)]).astype(float)


def parity_operator(n: int) -> np.ndarray:
    return np.diag([(-1) ** bin(s).count("1") for s in range(1 << n)]).astype(float)


def parity_split(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Even and odd parts of ``a`` under conjugation by (-1)^N."""
    p = np.array([(-1) ** bin(s).count("1") for s in range(a.shape[0])])
    conj = p[:, None] * a * p[None, :]
    return (a + conj) / 2, (a - conj) / 2


def monomial(n: int, ops) -> np.ndarray:
    """Product of ladder operators given as ``(kind, mode)`` pairs, left to right."""
    out = np.eye(1 << n)
    for kind, x in ops:
        out = out @ build_ladder(n, x, kind)
    return out


def build_K0(spec: ModelSpec) -> np.ndarray:
    n = spec.n_modes
    e = spec.energy
    plus, minus = _ladders(n)
    k0 = np.zeros((1 << n, 1 << n), dtype=complex)
    for x in range(n):
        for y in range(n):
            if e[x, y] != 0:
                k0 += e[x, y] * (plus[x] @ minus[y])
    return k0


def build_V(spec: ModelSpec) -> np.ndarray:
    n = spec.n_modes
    dim = 1 << n
    v = np.zeros((dim, dim), dtype=complex)
    for m, coeffs in spec.interaction_tensors().items():
        if m > n:
            warnings.warn(
                f"order-{m} interaction on {n} modes vanishes identically", stacklevel=2
            )
            continue
        for idx in zip(*np.nonzero(coeffs)):
            ops = [(CREATE, x) for x in idx[:m]] + [(ANNIHILATE, x) for x in idx[m:]]
            v += coeffs[idx] * monomial(n, ops)
    return v


def hamiltonian(spec: ModelSpec) -> np.ndarray:
    """K0 + V, i.e. H - mu N."""
    return build_K0(spec) + build_V(spec)


def _eigh_checked(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise ModelError("H - mu N is not hermitian")
    w, u = np.linalg.eigh(h)
    resid = np.max(np.linalg.norm(h @ u - u * w, axis=0), initial=0.0)
    if resid > RESIDUAL_TOL * max(np.linalg.norm(h, 2), 1.0):
        raise ArithmeticError(f"eigensolver residual {resid:.3e} too large")
    return w, u


def hermitian_function(h: np.ndarray, fn) -> np.ndarray:
    """fn(h) for hermitian h through its eigendecomposition."""
    w, u = _eigh_checked(h)
    return (u * fn(w)) @ u.conj().T


def gibbs(spec: ModelSpec) -> np.ndarray:
    """exp(-beta (H - mu N))."""
    return hermitian_function(hamiltonian(spec), lambda w: np.exp(-spec.beta * w))


def partition_function(spec: ModelSpec) -> float:
    w, _ = _eigh_checked(hamiltonian(spec))
    return float(np.sum(np.exp(-spec.beta * w)))


@functools.lru_cache(maxsize=32)
def _normalized_state(spec_key) -> np.ndarray:
    spec = spec_key.spec
    w, u = _eigh_checked(hamiltonian(spec))
    shift = w.min()
    weights = np.exp(-spec.beta * (w - shift))
    z = weights.sum() * np.exp(-spec.beta * shift)
    if not z > Z_FLOOR:
        raise ArithmeticError(f"partition function {z:.3e} is degenerate")
    rho = (u * (weights / weights.sum())) @ u.conj().T
    rho.setflags(write=False)
    return rho


class _Key:
    """Identity-hashed wrapper so specs holding arrays can be cache keys."""

    __slots__ = ("spec",)

    def __init__(self, spec):
        self.spec = spec

    def __hash__(self):
        return id(self.spec)

    def __eq__(self, other):
        return self.spec is other.spec


def density_matrix(spec: ModelSpec) -> np.ndarray:
    """Normalized grand-canonical density matrix rho / Tr rho."""
    return _normalized_state(_Key(spec))


def expectation(spec: ModelSpec, a: np.ndarray) -> complex:
    return complex(np.trace(density_matrix(spec) @ a))


def gamma_mn(spec: ModelSpec, xs, ys) -> complex:
    """<a+_x1 ... a+_xm a-_yn ... a-_y1>, annihilators in descending slot order."""
    ops = [(CREATE, x) for x in xs] + [(ANNIHILATE, y) for y in reversed(ys)]
    return expectation(spec, monomial(spec.n_modes, ops))


def gamma(spec: ModelSpec, m: int, xs, ys) -> complex:
    if len(xs) != m or len(ys) != m:
        raise ValueError(f"gamma_{m} needs {m} creation and {m} annihilation indices")
    return gamma_mn(spec, xs, ys)


def gamma_table(spec: ModelSpec, m: int) -> np.ndarray:
    """Dense table gamma_m[x1..xm, y1..ym]."""
    n = spec.n_modes
    out = np.zeros((n,) * (2 * m), dtype=complex)
    for idx in itertools.product(range(n), repeat=2 * m):
        out[idx] = gamma_mn(spec, idx[:m], idx[m:])
    return out
