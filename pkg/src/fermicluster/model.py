"""Model description: index set, one-body matrix, chemical potential, interactions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12


class ModelError(ValueError):
    """Raised for an inconsistent model specification."""


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class InteractionTerm:
    """Normal-ordered m-body term sum v(x1..x2m) a+_x1..a+_xm a-_x(m+1)..a-_x2m.

    ``coefficients`` maps 2m-tuples of mode indices to complex values.  The
    dense coefficient tensor returned by :meth:`tensor` is antisymmetrized
    separately in the creation and the annihilation slots, which leaves the
    operator unchanged.
    """

    order: int
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise ModelError(f"interaction order must be >= 1, got {self.order}")
        for key in self.coefficients:
            if len(key) != 2 * self.order:
                raise ModelError(
                    f"order-{self.order} term needs {2 * self.order} indices, got {key}"
                )

    def raw_tensor(self, n_modes: int) -> np.ndarray:
        """Coefficients exactly as supplied, as a dense tensor."""
        raw = np.zeros((n_modes,) * (2 * self.order), dtype=complex)
        for key, value in self.coefficients.items():
            if any(x < 0 or x >= n_modes for x in key):
                raise ModelError(f"interaction index out of range in {key}")
            raw[key] += value
        return raw

    def tensor(self, n_modes: int) -> np.ndarray:
        m = self.order
        raw = self.raw_tensor(n_modes)
        out = np.zeros_like(raw)
        perms = list(itertools.permutations(range(m)))
        for p in perms:
            for q in perms:
                axes = list(p) + [m + i for i in q]
                out += _perm_sign(p) * _perm_sign(q) * np.transpose(raw, axes)
        return out / math.factorial(m) ** 2


@dataclass(frozen=True)
class ModelSpec:
    n_modes: int
    kinetic: np.ndarray
    mu: float
    beta: float
    interactions: tuple = ()

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ModelError(f"n_modes must be a positive integer, got {self.n_modes}")
        if not self.beta > 0:
            raise ModelError(f"beta must be positive, got {self.beta}")
        kin = np.array(self.kinetic, dtype=complex)
        if kin.shape != (self.n_modes, self.n_modes):
            raise ModelError(f"kinetic matrix has shape {kin.shape}, expected n x n")
        if np.max(np.abs(kin - kin.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ModelError("kinetic matrix is not hermitian")
        kin.setflags(write=False)
        object.__setattr__(self, "kinetic", kin)
        object.__setattr__(self, "interactions", tuple(self.interactions))
        for term in self.interactions:
            if not isinstance(term, InteractionTerm):
                raise ModelError("interactions must be InteractionTerm instances")

    @property
    def energy(self) -> np.ndarray:
        """The one-body matrix of K0 = H0 - mu N."""
        return self.kinetic - self.mu * np.eye(self.n_modes)

    def interaction_tensors(self, antisymmetric: bool = True) -> dict[int, np.ndarray]:
        """Coefficient tensors keyed by order, summed over terms.

        With ``antisymmetric=False`` the supplied kernels are returned as given.
        """
        out: dict[int, np.ndarray] = {}
        for term in self.interactions:
            t = term.tensor(self.n_modes) if antisymmetric else term.raw_tensor(self.n_modes)
            out[term.order] = out.get(term.order, 0) + t
        return out

    def free(self) -> ModelSpec:
        return ModelSpec(self.n_modes, self.kinetic, self.mu, self.beta, ())

    def scaled(self, factor: float) -> ModelSpec:
        """Same model with every interaction coefficient multiplied by ``factor``."""
        terms = tuple(
            InteractionTerm(t.order, {k: factor * v for k, v in t.coefficients.items()})
            for t in self.interactions
        )
        return ModelSpec(self.n_modes, self.kinetic, self.mu, self.beta, terms)


def hubbard_dimer(t: float = 1.0, U: float = 0.3, mu: float = 0.5, beta: float = 1.0) -> ModelSpec:
    """Two-site Hubbard model; mode index is 2*site + spin."""
    kin = np.zeros((4, 4))
    for s in (0, 1):
        kin[s, 2 + s] = kin[2 + s, s] = -t
    coeffs = {(2 * i, 2 * i + 1, 2 * i + 1, 2 * i): U for i in (0, 1)}
    terms = (InteractionTerm(2, coeffs),) if U != 0 else ()
    return ModelSpec(4, kin, mu, beta, terms)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_model(
    n: int,
    rng: np.random.Generator,
    coupling: float = 0.3,
    beta: float | None = None,
    mu: float | None = None,
) -> ModelSpec:
    """Random hermitian one-body matrix plus a random hermitian two-body term."""
    kin = random_hermitian(n, rng)
    beta = float(rng.uniform(0.5, 2.0)) if beta is None else beta
    mu = float(rng.uniform(-0.5, 0.5)) if mu is None else mu
    terms = ()
    if n >= 2 and coupling != 0:
        w = rng.normal(size=(n,) * 4) + 1j * rng.normal(size=(n,) * 4)
        v = (w + np.conj(np.transpose(w, (3, 2, 1, 0)))) / 2
        coeffs = {idx: coupling * v[idx] for idx in itertools.product(range(n), repeat=4)}
        terms = (InteractionTerm(2, coeffs),)
    return ModelSpec(n, kin, mu, beta, terms)
