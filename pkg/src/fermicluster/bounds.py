"""Determinant bound, decay constant, interaction norms and the l1-clustering check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fermicluster.cumulants import GRASSMANN_LOG, cumulant_table
from fermicluster.discretize import fermi
from fermicluster.fock import build_V
from fermicluster.model import ModelSpec

GAUSS_POINTS = 16
MAX_LEVELS = 20
# absolute slack for roundoff in the exact cumulants (lhs is exactly 0 at V = 0)
ROUNDOFF = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive refinement did not converge."""


def norm_1inf(table) -> float:
    """max_j sup_{x_j} sum over the other arguments of |f|."""
    a = np.abs(np.asarray(table))
    if a.ndim == 0:
        return float(a)
    best = 0.0
    for j in range(a.ndim):
        others = tuple(i for i in range(a.ndim) if i != j)
        best = max(best, float(np.max(a.sum(axis=others))) if others else float(np.max(a)))
    return best


def v_norm(spec: ModelSpec, h: float, antisymmetric: bool = False) -> float:
    """||V||_h = sum_m |v_m|_{1,inf} h^{2m} for the kernels as supplied."""
    if not h > 0:
        raise ValueError("h must be positive")
    tensors = spec.interaction_tensors(antisymmetric=antisymmetric)
    return float(sum(norm_1inf(t) * h ** (2 * m) for m, t in tensors.items()))


def determinant_bound(spec: ModelSpec) -> float:
    """delta = 2 max_sigma sum_l f_beta(sigma eps_l) from the Gram representation."""
    w = np.linalg.eigvalsh(spec.energy)
    f = np.diag(fermi(spec.beta, np.diag(w))).real
    g = np.diag(fermi(spec.beta, np.diag(-w))).real
    return float(2 * max(f.sum(), g.sum()))


def _log_fermi(beta, w):
    """log f_beta(w), stable for large |beta w|."""
    return -np.logaddexp(0.0, beta * w)


def _kernel_entries(w, u, beta, taus):
    """C(tau, E) for an array of tau in [-beta, beta); returns shape (len(taus), n, n)."""
    taus = np.asarray(taus, dtype=float)
    upper = taus > 0
    # -f(-E) e^{-tau E} for tau > 0, f(E) e^{-tau E} for tau <= 0
    logf = np.where(upper[:, None], _log_fermi(beta, -w)[None, :], _log_fermi(beta, w)[None, :])
    vals = np.exp(logf - taus[:, None] * w[None, :])
    vals = np.where(upper[:, None], -vals, vals)
    return np.einsum("xl,tl,yl->txy", u, vals, u.conj())


def decay_constant(spec: ModelSpec, quad_tol: float = 1e-10) -> float:
    """alpha = sup_y sum_x int_0^beta |C(tau, E)_{xy}| dtau by composite Gauss panels."""
    if not quad_tol > 0:
        raise ValueError("quad_tol must be positive")
    w, u = np.linalg.eigh(spec.energy)
    beta = spec.beta
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)

    def integrate(panels):
        edges = np.linspace(0.0, beta, panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        taus = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        wts = (half[:, None] * weights[None, :]).ravel()
        vals = np.abs(_kernel_entries(w, u, beta, taus))
        return np.tensordot(wts, vals, axes=1)

    prev = integrate(1)
    for level in range(1, MAX_LEVELS + 1):
        cur = integrate(1 << level)
        scale = max(float(np.max(cur)), 1e-300)
        if float(np.max(np.abs(cur - prev))) <= quad_tol * scale:
            return float(np.max(cur.sum(axis=0)))
        prev = cur
    raise QuadratureError(f"decay constant did not converge within {MAX_LEVELS} levels")


def omega(alpha: float, delta: float) -> float:
    return 2 * alpha / delta**2


def _unit_vectors(rng, count, dim):
    z = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass
class DetBoundSample:
    size: int
    trials: int
    delta: float
    max_ratio: float

    @property
    def ok(self) -> bool:
        return self.max_ratio <= 1.0


def detbound_sample_check(spec: ModelSpec, size: int, trials: int, rng: np.random.Generator) -> DetBoundSample:
    """max over random draws of |det(<p_i, q_j> C(tau_i - tau'_j)_{x_i y_j})| / delta^{2 size}."""
    if size < 1:
        raise ValueError("determinant size must be >= 1")
    delta = determinant_bound(spec)
    n = spec.n_modes
    beta = spec.beta
    w, u = np.linalg.eigh(spec.energy)
    worst = 0.0
    for _ in range(trials):
        p = _unit_vectors(rng, size, size)
        q = _unit_vectors(rng, size, size)
        t1 = rng.uniform(0.0, beta, size)
        t2 = rng.uniform(0.0, beta, size)
        xs = rng.integers(0, n, size)
        ys = rng.integers(0, n, size)
        diffs = (t1[:, None] - t2[None, :]).ravel()
        c = _kernel_entries(w, u, beta, diffs).reshape(size, size, n, n)
        entries = c[np.arange(size)[:, None], np.arange(size)[None, :], xs[:, None], ys[None, :]]
        gram = p.conj() @ q.T
        val = abs(np.linalg.det(gram * entries))
        worst = max(worst, float(val) / delta ** (2 * size))
    return DetBoundSample(size, trials, delta, worst)


@dataclass
class ClusterRow:
    m: int
    lhs: float
    rhs: float
    passed: bool | None  # None when the hypothesis fails


@dataclass
class BoundsReport:
    delta: float
    alpha: float
    omega: float
    v_norm_3delta: float
    hypothesis_ok: bool
    rows: list[ClusterRow] = field(default_factory=list)

    @property
    def hypothesis_value(self) -> float:
        return self.omega * self.v_norm_3delta

    def rhs(self, m: int) -> float:
        return clustering_rhs(m, self.alpha, self.delta, self.v_norm_3delta)

    @property
    def all_passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)


def clustering_rhs(m: int, alpha: float, delta: float, vnorm: float) -> float:
    return 2 * math.factorial(m) ** 2 * alpha ** (2 * m) * delta ** (-2 * m) * vnorm


def is_hermitian_interaction(spec: ModelSpec, tol: float = 1e-10) -> bool:
    v = build_V(spec)
    return float(np.max(np.abs(v - v.conj().T), initial=0.0)) <= tol * max(1.0, float(np.max(np.abs(v), initial=0.0)))


def bounds_summary(spec: ModelSpec, quad_tol: float = 1e-10) -> BoundsReport:
    delta = determinant_bound(spec)
    alpha = decay_constant(spec, quad_tol)
    om = omega(alpha, delta)
    vn = v_norm(spec, 3 * delta)
    ok = is_hermitian_interaction(spec) and om * vn <= 0.5
    return BoundsReport(delta, alpha, om, vn, ok)


def first_order_deviation(spec: ModelSpec) -> np.ndarray:
    """gamma_1^T - gamma_1^T|_{V=0}; the free value is f_beta(E)^T in (x; y) order."""
    g1 = cumulant_table(spec, 1, GRASSMANN_LOG).entries
    return g1 - fermi(spec.beta, spec.energy).T


def clustering_check(spec: ModelSpec, m_max: int = 2, quad_tol: float = 1e-10) -> BoundsReport:
    """Both sides of the l1-clustering inequalities for m = 1..m_max."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    rep = bounds_summary(spec, quad_tol)
    for m in range(1, m_max + 1):
        if m == 1:
            lhs = norm_1inf(first_order_deviation(spec))
        else:
            lhs = norm_1inf(cumulant_table(spec, m, GRASSMANN_LOG).entries)
        rhs = rep.rhs(m)
        rep.rows.append(ClusterRow(m, lhs, rhs, (lhs <= rhs + ROUNDOFF) if rep.hypothesis_ok else None))
    return rep


def coupling_for_target(spec: ModelSpec, target: float = 0.4, quad_tol: float = 1e-10) -> float:
    """Factor s such that spec.scaled(s) has omega * ||V||_{3 delta} = target.

    delta and alpha depend only on the one-body part, so the norm is linear in s.
    """
    rep = bounds_summary(spec, quad_tol)
    value = rep.omega * rep.v_norm_3delta
    if value == 0:
        raise ValueError("model has no interaction to scale")
    return target / value
