"""Euclidean time discretization: propagator, slice covariances and finite-N identities.

Slice k = 1..N carries the interaction factor applied at imaginary time
(k-1) beta/N in the trace; the source monomial exp((c+,a+)) exp((c-,a-)) sits
just before slice 1.  The Gaussian covariance between slices is
``<psi_m psibar_n> = -C(tau_m - tau_n)`` with the tie tau_m = tau_n taken on the
tau <= 0 branch (normal order within a slice); in block form this is
``R^(N) - 1`` with R^(N) the inverse of Q^(N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from fermicluster.fock import build_K0, build_V, hermitian_function
from fermicluster.grassmann import (
    PSI,
    PSIBAR,
    GeneratorSet,
    Multivector,
    gaussian_moment,
    nilpotent_exp,
    product,
    reorder_sign,
    seminorm,
    shift,
)
from fermicluster.mixed import MixedElement, degree_filter, generating_operator, mixed_product
from fermicluster.model import ModelSpec
from fermicluster.symbols import operator_from_normal

WICK_BUDGET = 1 << 20


class BudgetExceeded(RuntimeError):
    """The Wick expansion would exceed its term budget."""


# one-body kernels ----------------------------------------------------------------


def _eig(e: np.ndarray):
    e = np.asarray(e, dtype=complex)
    if np.max(np.abs(e - e.conj().T), initial=0.0) > 1e-12:
        raise ValueError("matrix is not hermitian")
    return np.linalg.eigh(e)


def _fermi_scalar(beta, w):
    # (1 + e^{beta w})^{-1} without overflow
    x = beta * np.asarray(w, dtype=float)
    return np.where(x > 0, np.exp(-np.abs(x)) / (1 + np.exp(-np.abs(x))), 1 / (1 + np.exp(-np.abs(x))))


def fermi(beta: float, e: np.ndarray) -> np.ndarray:
    """f_beta(E) = (1 + exp(beta E))^{-1}."""
    w, u = _eig(np.atleast_2d(e))
    return (u * _fermi_scalar(beta, w)) @ u.conj().T


def kernel(tau: float, beta: float, e: np.ndarray, tie: str = "le") -> np.ndarray:
    """C(tau, E) = -1_{tau>0} f(-E) e^{-tau E} + 1_{tau<=0} f(E) e^{-tau E}.

    ``tie="gt"`` evaluates tau = 0 on the tau > 0 branch (the limit from above).
    """
    if not -beta <= tau < beta:
        raise ValueError(f"tau={tau} outside [-beta, beta)")
    w, u = _eig(np.atleast_2d(e))
    upper = tau > 0 or (tau == 0 and tie == "gt")
    if upper:
        vals = -_fermi_scalar(beta, -w) * np.exp(-tau * w)
    else:
        vals = _fermi_scalar(beta, w) * np.exp(-tau * w)
    return (u * vals) @ u.conj().T


@dataclass(frozen=True)
class SliceGrid:
    n_slices: int
    beta: float

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("need at least one slice")

    def tau(self, m: int) -> float:
        return m * self.beta / self.n_slices

    @property
    def step(self) -> float:
        return self.beta / self.n_slices


def _power(e, beta, N, k):
    """u_N^k = exp(-k beta E / N) for integer k (any sign)."""
    w, u = _eig(np.atleast_2d(e))
    return (u * np.exp(-k * beta * w / N)) @ u.conj().T


def build_Q(N: int, beta: float, e: np.ndarray) -> np.ndarray:
    """Q_{mn} = delta_{mn} - u delta_{m-1,n} + u delta_{m,1} delta_{N,n} in (N n) x (N n) blocks."""
    e = np.atleast_2d(e)
    n = e.shape[0]
    u = _power(e, beta, N, 1)
    q = np.eye(N * n, dtype=complex)
    for m in range(1, N):
        q[m * n:(m + 1) * n, (m - 1) * n:m * n] -= u
    q[0:n, (N - 1) * n:N * n] += u
    return q


def build_R(N: int, beta: float, e: np.ndarray) -> np.ndarray:
    """Closed form R_{mn} = u^{m-n} (1_{m>=n} - (1 + u^{-N})^{-1})."""
    e = np.atleast_2d(e)
    n = e.shape[0]
    w, vecs = _eig(e)
    # (1 + u^{-N})^{-1} = f_beta(E)
    r = np.zeros((N * n, N * n), dtype=complex)
    for m in range(N):
        for k in range(N):
            d = m - k
            step = np.exp(-d * beta * w / N)
            vals = step * ((1.0 if d >= 0 else 0.0) - _fermi_scalar(beta, w))
            r[m * n:(m + 1) * n, k * n:(k + 1) * n] = (vecs * vals) @ vecs.conj().T
    return r


def slice_covariance(N: int, beta: float, e: np.ndarray) -> np.ndarray:
    """<psi_m psibar_n> = -C(tau_m - tau_n), equal slices on the tau <= 0 branch."""
    e = np.atleast_2d(e)
    return build_R(N, beta, e) - np.eye(N * e.shape[0])


# modified Lie product formula ------------------------------------------------------


def lie_error(a: np.ndarray, b: np.ndarray, N: int) -> tuple[float, float]:
    """(||e^{A+B} - [e^{A/N}(1 + B/N)]^N||, (4/N)(||A||+||B||)^2 e^{||A||+||B||}), spectral norms."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    step = expm(a / N) @ (np.eye(a.shape[0]) + b / N)
    approx = np.linalg.matrix_power(step, N)
    err = float(np.linalg.norm(expm(a + b) - approx, 2))
    s = float(np.linalg.norm(a, 2) + np.linalg.norm(b, 2))
    return err, 4.0 / N * s * s * math.exp(s)


# trace side -----------------------------------------------------------------------


def transfer_factors(spec: ModelSpec, N: int) -> tuple[np.ndarray, np.ndarray]:
    """(C_N, D_N) = (exp(-beta K0 / N), 1 - beta V / N)."""
    h = spec.beta / N
    c = hermitian_function(build_K0(spec), lambda w: np.exp(-h * w))
    d = np.eye(c.shape[0]) - h * build_V(spec)
    return c, d


def trace_side_Z(spec: ModelSpec, N: int, sources: bool = False, max_source_degree: int | None = None):
    """Tr[(C_N D_N)^N exp((c+,a+)) exp((c-,a-))]; a scalar when ``sources`` is False."""
    c, d = transfer_factors(spec, N)
    rho_n = np.linalg.matrix_power(c @ d, N)
    if not sources:
        return complex(np.trace(rho_n))
    return (rho_n @ generating_operator(spec.n_modes, max_source_degree)).trace()


# Grassmann side ----------------------------------------------------------------------


def interaction_symbol(spec: ModelSpec, gens: GeneratorSet | None = None, prefix: str = "") -> Multivector:
    """V(psibar, psi): a+ -> psibar, a- -> psi in the normal-ordered form of V."""
    n = spec.n_modes
    gens = gens or GeneratorSet.fields(n)
    out = Multivector(gens)
    for m, coeffs in spec.interaction_tensors().items():
        for idx in zip(*np.nonzero(coeffs)):
            names = [f"{prefix}psibar{x}" for x in idx[:m]] + [f"{prefix}psi{x}" for x in idx[m:]]
            out = out + Multivector.word(gens, names, coeffs[idx])
    return out


def _time_ordered_covariance(beta, e, times, orders):
    """<psi_a psibar_b> = -C(t_a - t_b) with the branch fixed by (time, order) keys."""
    e = np.atleast_2d(e)
    n = e.shape[0]
    w, u = _eig(e)
    f_plus = _fermi_scalar(beta, w)
    f_minus = _fermi_scalar(beta, -w)
    k = len(times)
    g = np.zeros((k * n, k * n), dtype=complex)
    for a in range(k):
        for b in range(k):
            tau = times[a] - times[b]
            later = (times[a], orders[a]) > (times[b], orders[b])
            vals = (f_minus if later else -f_plus) * np.exp(-tau * w)
            g[a * n:(a + 1) * n, b * n:(b + 1) * n] = (u * vals) @ u.conj().T
    return g


def _alternatives(f: Multivector, n_src: int, n_modes: int, slot: int):
    """Split each monomial of a (sources + fields) multivector into source and field words."""
    src_mask = (1 << n_src) - 1
    out = []
    for mask, c in f.terms.items():
        s = mask & src_mask
        fm = mask >> n_src
        word = [(PSIBAR, slot * n_modes + x) for x in range(n_modes) if fm >> x & 1]
        word += [(PSI, slot * n_modes + x) for x in range(n_modes) if fm >> (n_modes + x) & 1]
        out.append((c, s, tuple(word)))
    return out


def wick_expand(cov, factors, source_gens: GeneratorSet, max_source_degree=None, budget=WICK_BUDGET) -> Multivector:
    """int dmu_cov prod_k F_k where each F_k is a list of (coeff, source mask, field word).

    In every alternative the source monomial stands to the left of the field
    word.  Each product term is reduced to (sources)(fields) and the field
    word to a Wick determinant.
    """
    nbits = len(source_gens)
    total = 1
    for f in factors:
        total *= len(f)
    if total > budget:
        raise BudgetExceeded(f"{total} Wick terms exceed the budget {budget}")
    out: dict[int, complex] = {}
    cap = max_source_degree

    def rec(k, coeff, smask, sdeg, fwords, parity):
        if k == len(factors):
            word = [x for w in fwords for x in w]
            npsi = sum(1 for r, _ in word if r == PSI)
            if 2 * npsi != len(word):
                return
            val = gaussian_moment(cov, word)
            if val != 0:
                sign = -1 if parity % 2 else 1
                out[smask] = out.get(smask, 0) + sign * coeff * val
            return
        flen = sum(len(w) for w in fwords)
        for c, s, w in factors[k]:
            if s & smask:
                continue
            d = bin(s).count("1")
            if cap is not None and sdeg + d > cap:
                continue
            # move the new sources left past the accumulated fields, then merge masks
            p = parity + d * flen
            if s:
                p += 0 if reorder_sign(smask, s, nbits) == 1 else 1
            rec(k + 1, coeff * c, smask | s, sdeg + d, fwords + [w], p)

    rec(0, 1.0 + 0j, 0, 0, [], 0)
    return Multivector(source_gens, out)


def _source_slot_factors(n: int):
    """exp((c+, psibar_0)) exp((c-, psi_0)) as per-mode factors (slot 0 = source slot)."""
    gens = GeneratorSet.sources(n)
    factors = []
    for x in range(n):
        factors.append([(1.0, 0, ()), (1.0, 1 << gens.index(f"c+{x}"), ((PSIBAR, x),))])
    for x in range(n):
        factors.append([(1.0, 0, ()), (1.0, 1 << gens.index(f"c-{x}"), ((PSI, x),))])
    return factors


def _slice_factor(spec: ModelSpec, h: float, slot: int, exponentiate: bool):
    n = spec.n_modes
    v = interaction_symbol(spec)
    f = nilpotent_exp(v * -h) if exponentiate else 1.0 - h * v
    return _alternatives(f, 0, n, slot)


def grassmann_side_Z(
    spec: ModelSpec,
    N: int,
    sources: bool = False,
    max_source_degree: int | None = 2,
    budget: int = WICK_BUDGET,
):
    """Z0 * int dmu exp((c+, psibar_0) + (c-, psi_0)) prod_k (1 - (beta/N) V(psibar_k, psi_k)).

    Slot 0 carries the source monomial at time 0 ordered before slice 1; the
    covariance is the time-ordered free propagator on slots 0..N.  Expanded
    over slice subsets and evaluated with Wick determinants.
    """
    n = spec.n_modes
    e = spec.energy
    h = spec.beta / N
    z0 = free_partition_function(spec)
    times = [0.0] + [(k - 1) * h for k in range(1, N + 1)]
    orders = [-1] + [0] * N
    cov = _time_ordered_covariance(spec.beta, e, times, orders)
    gens = GeneratorSet.sources(n)
    factors = [_slice_factor(spec, h, k, False) for k in range(1, N + 1)]
    if sources:
        factors = _source_slot_factors(n) + factors
    result = wick_expand(cov, factors, gens, max_source_degree if sources else 0, budget) * z0
    return result if sources else result.body


def free_partition_function(spec: ModelSpec) -> float:
    """Z0 = det(1 + exp(-beta E))."""
    w = np.linalg.eigvalsh(spec.energy)
    return float(np.prod(1 + np.exp(-spec.beta * w)))


# shifted (convolution) form -----------------------------------------------------------


def source_embedding(spec: ModelSpec, N: int, embedding: str = "grid"):
    """Per-slice matrices (Mbar_k, M_k) with etabar_k = Mbar_k^T c-, eta_k = M_k c+.

    ``grid``: etabar_k = C(beta - tau_k)^T c-, eta_k = C(tau_k - tau_1) c+ on
    the grid tau_k = k beta/N.
    ``exact``: the propagator to the source slot, which reproduces the trace
    at every finite N: etabar_k = C(beta - (k-1)beta/N)^T c-,
    eta_k = C((k-1)beta/N + 0) c+.  Both converge to the same limit.
    """
    e = spec.energy
    beta = spec.beta
    h = beta / N
    out = []
    for k in range(1, N + 1):
        if embedding == "grid":
            mbar = kernel(beta - k * h, beta, e) if k < N else kernel(0.0, beta, e)
            mk = kernel((k - 1) * h, beta, e)
        elif embedding == "exact":
            t = (k - 1) * h
            # C(beta - t) = -C(-t) by antiperiodicity; at t = 0 the tau <= 0 branch
            mbar = -kernel(-t, beta, e)
            mk = kernel(t, beta, e, tie="gt")
        else:
            raise ValueError(f"unknown embedding {embedding!r}")
        out.append((mbar, mk))
    return out


def shifted_slice_factor(spec: ModelSpec, h: float, mbar, mk, exponentiate: bool, max_source_degree=None) -> Multivector:
    """F(psibar + etabar, psi + eta) on sources(n) + fields(n) with F = exp(-hV) or 1 - hV."""
    n = spec.n_modes
    gens = GeneratorSet.sources(n) + GeneratorSet.fields(n)
    v = interaction_symbol(spec, gens)
    mapping = {}
    for y in range(n):
        mapping[f"psibar{y}"] = [(f"c-{x}", mbar[x, y]) for x in range(n) if mbar[x, y] != 0]
        mapping[f"psi{y}"] = [(f"c+{x}", mk[y, x]) for x in range(n) if mk[y, x] != 0]
    vs = shift(v, mapping)
    src_mask = (1 << 2 * n) - 1
    filt = None
    if max_source_degree is not None:
        filt = lambda m: bin(m & src_mask).count("1") <= max_source_degree  # noqa: E731
        vs = vs.truncate(filt)
    return nilpotent_exp(vs * -h, filt) if exponentiate else 1.0 - h * vs


def _prefactor(spec: ModelSpec) -> Multivector:
    """Z0 exp((c-, f_beta(E) c+))."""
    n = spec.n_modes
    gens = GeneratorSet.sources(n)
    f = fermi(spec.beta, spec.energy)
    q = Multivector(gens)
    for x in range(n):
        for y in range(n):
            if f[x, y] != 0:
                q = q + Multivector.word(gens, [f"c-{x}", f"c+{y}"], f[x, y])
    return nilpotent_exp(q) * free_partition_function(spec)


def convolution_rhs(
    spec: ModelSpec,
    N: int,
    embedding: str = "grid",
    exponentiate: bool = True,
    max_source_degree: int | None = 2,
    method: str = "transfer",
    budget: int = WICK_BUDGET,
) -> Multivector:
    """Z0 exp((c-, f c+)) (mu * prod_k F_k)(etabar, eta) at finite N.

    ``method="transfer"`` evaluates the Gaussian convolution as a trace of
    source-valued transfer operators; ``method="wick"`` by Wick expansion.
    """
    n = spec.n_modes
    h = spec.beta / N
    emb = source_embedding(spec, N, embedding)
    slices = [shifted_slice_factor(spec, h, mb, mk, exponentiate, max_source_degree) for mb, mk in emb]
    gens = GeneratorSet.sources(n)
    if method == "wick":
        cov = slice_covariance(N, spec.beta, spec.energy)
        factors = [_alternatives(f, 2 * n, n, k) for k, f in enumerate(slices)]
        integral = wick_expand(cov, factors, gens, max_source_degree, budget)
    elif method == "transfer":
        integral = transfer_integral(spec, slices, max_source_degree) * (1.0 / free_partition_function(spec))
    else:
        raise ValueError(f"unknown method {method!r}")
    pre = _prefactor(spec)
    return product(pre, integral, degree_filter(max_source_degree))


def slice_operator(f: Multivector, n: int) -> MixedElement:
    """Normal-ordered operator of a (sources + fields) multivector, sources kept left."""
    src_bits = 2 * n
    src_mask = (1 << src_bits) - 1
    by_source: dict[int, dict[int, complex]] = {}
    for mask, c in f.terms.items():
        by_source.setdefault(mask & src_mask, {})[mask >> src_bits] = c
    gens = GeneratorSet.sources(n)
    field_gens = GeneratorSet.fields(n)
    terms = {s: operator_from_normal(Multivector(field_gens, t), n) for s, t in by_source.items()}
    return MixedElement(gens, 1 << n, terms)


def transfer_integral(spec: ModelSpec, slices, max_source_degree=None) -> Multivector:
    """Tr[C :F_N: C :F_(N-1): ... C :F_1:] for per-slice multivectors F_k."""
    n = spec.n_modes
    N = len(slices)
    c = hermitian_function(build_K0(spec), lambda w: np.exp(-spec.beta / N * w))
    gens = GeneratorSet.sources(n)
    acc = MixedElement.scalar(gens, 1 << n)
    for f in reversed(slices):
        acc = mixed_product(acc, c @ slice_operator(f, n), max_source_degree)
    return acc.trace()


# convergence and reexponentiation ----------------------------------------------------------


def exact_generating_function(spec: ModelSpec, max_source_degree: int | None = 2) -> Multivector:
    from fermicluster.mixed import generating_function

    return generating_function(spec, max_degree=max_source_degree)


@dataclass
class ConvergenceRow:
    N: int
    body_rel_error: float
    max_coeff_error: float
    ratio: float | None
    trace_rel_error: float
    trace_ratio: float | None


def convergence_study(spec: ModelSpec, n_list, max_source_degree: int | None = 2, embedding: str = "grid") -> list[ConvergenceRow]:
    """Deviation of the finite-N convolution formula (and of the trace side) from exact Z."""
    exact = exact_generating_function(spec, max_source_degree)
    z = exact.body.real
    rows: list[ConvergenceRow] = []
    prev = prev_t = None
    for N in n_list:
        rhs = convolution_rhs(spec, N, embedding, True, max_source_degree)
        body_err = abs(rhs.body - exact.body) / abs(z)
        coeff_err = rhs.max_abs_diff(exact) / abs(z)
        t_err = abs(trace_side_Z(spec, N) - z) / abs(z)
        ratio = prev / body_err if prev is not None and body_err > 0 else None
        t_ratio = prev_t / t_err if prev_t is not None and t_err > 0 else None
        rows.append(ConvergenceRow(N, body_err, coeff_err, ratio, t_err, t_ratio))
        prev, prev_t = body_err, t_err
    return rows


def reexp_delta(spec: ModelSpec, N: int, q: float | None = None, method: str = "transfer") -> tuple[float, float]:
    """(|int dmu Delta|, (beta^2 |||V|||_q^2 / N) exp(beta |||V|||_delta)).

    Delta = prod_k exp(-beta V_k / N) - prod_k (1 - beta V_k / N); ``q``
    defaults to the determinant bound delta.
    """
    from fermicluster.bounds import determinant_bound

    delta = determinant_bound(spec)
    q = delta if q is None else q
    h = spec.beta / N
    if method == "transfer":
        c = hermitian_function(build_K0(spec), lambda w: np.exp(-h * w))
        v = interaction_symbol(spec)
        d_exp = operator_from_normal(nilpotent_exp(v * -h), spec.n_modes)
        d_lin = np.eye(c.shape[0]) - h * build_V(spec)
        diff = np.trace(np.linalg.matrix_power(c @ d_exp, N)) - np.trace(np.linalg.matrix_power(c @ d_lin, N))
        value = abs(diff) / free_partition_function(spec)
    elif method == "wick":
        cov = slice_covariance(N, spec.beta, spec.energy)
        gens = GeneratorSet.sources(spec.n_modes)
        a = wick_expand(cov, [_slice_factor(spec, h, k, True) for k in range(N)], gens, 0)
        b = wick_expand(cov, [_slice_factor(spec, h, k, False) for k in range(N)], gens, 0)
        value = abs(a.body - b.body)
    else:
        raise ValueError(f"unknown method {method!r}")
    vn = interaction_symbol(spec)
    bound = spec.beta ** 2 * seminorm(vn, q) ** 2 / N * math.exp(spec.beta * seminorm(vn, delta))
    return float(value), float(bound)


__all__ = [
    "BudgetExceeded",
    "ConvergenceRow",
    "SliceGrid",
    "build_Q",
    "build_R",
    "convolution_rhs",
    "fermi",
    "grassmann_side_Z",
    "kernel",
    "lie_error",
    "reexp_delta",
    "slice_covariance",
    "convergence_study",
    "trace_side_Z",
]
