"""
Optimal rank-k approximations of a process observed at n sites.

Three criteria are checked numerically:

* in-sample projection error ``sum_i E(Y(s_i) - Pi[Y(s_i) | W])^2`` over
  k-dimensional ``W = span(B'Y)``, minimised by the leading eigenvectors of
  ``V`` with minimum ``sum_{i>k} lambda_i``;
* integrated error over the domain for ``W`` inside the span of the
  observations, whose minimum splits into the tail of the predictive
  process spectrum plus the integrated kriging variance;
* Frobenius distance to rank-k matrices (Eckart-Young).

Minimisers are verified by the exact identity at the claimed optimum and by
randomized domination: random and perturbed-optimal candidates never do better.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import Design
from .kernels import KernelSpec, kernel_diagonal, kernel_matrix
from .kriging import cholesky_factor
from .spectral import ContinuousSpectrum, assemble_covariance, dense_eigen, quadrature_nodes, tail_sum


@dataclass(frozen=True)
class SubspaceSpec:
    """Coefficients ``B`` (n x k) of full column rank; the subspace is ``span(B'Y)``."""

    coefficients: np.ndarray

    def __post_init__(self):
        B = np.array(self.coefficients, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2:
            raise ValueError(f"coefficients must be an n x k array, got shape {B.shape}")
        if B.shape[1] > 0:
            sv = np.linalg.svd(B, compute_uv=False)
            if sv[-1] <= 1e-10 * sv[0]:
                raise ValueError("coefficient columns are linearly dependent")
        B.setflags(write=False)
        object.__setattr__(self, "coefficients", B)

    @property
    def k(self) -> int:
        return self.coefficients.shape[1]


def projection_residual(V, B) -> float:
    """``trace(V) - trace((B'VB)^{-1} B'V^2 B)``, the summed in-sample projection error."""
    V = np.asarray(V, dtype=float)
    B = B.coefficients if isinstance(B, SubspaceSpec) else SubspaceSpec(B).coefficients
    if B.shape[0] != V.shape[0]:
        raise ValueError(f"B has {B.shape[0]} rows, V is {V.shape[0]} x {V.shape[0]}")
    trace = float(np.trace(V))
    if B.shape[1] == 0:
        return trace
    VB = V @ B
    G = B.T @ VB
    G = 0.5 * (G + G.T)
    g = np.linalg.eigvalsh(G)
    if g[0] <= 1e-12 * max(g[-1], 0.0):
        raise np.linalg.LinAlgError("B'VB is rank deficient; the subspace has dimension < k")
    H = VB.T @ VB
    return trace - float(np.trace(scipy.linalg.solve(G, H, assume_a="pos")))


@dataclass(frozen=True)
class DominationReport:
    """Outcome of an optimum-versus-random-candidates experiment."""

    check: str
    k: int
    minimum: float  # the claimed minimum value
    at_optimum: float  # objective at the claimed minimiser
    best_random: float  # smallest objective among the random candidates
    trials: int
    tolerance: float
    passes: bool


def _trial_rngs(seed, trials):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def _candidate_subspace(rng, Uk, trial):
    """Even trials: Gaussian subspace. Odd trials: the optimal basis plus a random perturbation."""
    n, k = Uk.shape
    G = rng.standard_normal((n, k))
    if trial % 2 == 0:
        return G
    scale = 10.0 ** rng.uniform(-4, 0)
    return Uk + scale * G / np.sqrt(n)


def optimality_c_check(V, k: int, trials: int = 500, seed: int = 0, rtol: float = 1e-8) -> DominationReport:
    """Leading eigenvectors minimise the in-sample projection error.

    The residual at ``span(u_1'Y, ..., u_k'Y)`` must equal
    ``sum_{i>k} lambda_i`` to relative ``rtol``, and no random subspace may
    fall below that minimum by more than ``rtol`` times the trace.
    """
    V = np.asarray(V, dtype=float)
    es = dense_eigen(V)
    k = int(k)
    minimum = tail_sum(es, k)
    Uk = es.eigenvectors[:, :k]
    at_opt = projection_residual(V, Uk)
    trace = float(np.trace(V))
    tol = rtol * max(abs(trace), 1e-300)
    best = np.inf
    if k > 0:
        for t, rng in enumerate(_trial_rngs(seed, trials)):
            best = min(best, projection_residual(V, _candidate_subspace(rng, Uk, t)))
    else:
        best = trace
    exact_ok = abs(at_opt - minimum) <= rtol * max(abs(minimum), 1e-300) + 1e-15 * trace
    passes = bool(exact_ok and best >= minimum - tol)
    return DominationReport("optimality_c", k, minimum, at_opt, float(best), int(trials), tol, passes)


def eckart_young_check(V, k: int, trials: int = 200, seed: int = 0, rtol: float = 1e-8) -> DominationReport:
    """``V_k`` is the closest rank-``k`` matrix to ``V`` in Frobenius norm.

    Checks ``|V - V_k|_F^2 = sum_{i>k} lambda_i^2`` and that random rank-``k``
    matrices (Gaussian factors, or ``V_k`` with perturbed factors) are farther away.
    """
    V = np.asarray(V, dtype=float)
    if V.shape[0] > 300:
        raise ValueError("dense Eckart-Young check limited to n <= 300")
    es = dense_eigen(V)
    lam, U = es.eigenvalues, es.eigenvectors
    # for symmetric V the singular values are |lambda|
    order = np.argsort(-np.abs(lam), kind="stable")
    lam, U = lam[order], U[:, order]
    k = int(k)
    Uk, lk = U[:, :k], lam[:k]
    Vk = (Uk * lk) @ Uk.T
    dist = float(np.sum((V - Vk) ** 2))
    minimum = float(np.sum(lam[k:][::-1] ** 2))
    scale = float(np.sum(V ** 2))
    tol = rtol * max(scale, 1e-300)
    best = np.inf if k > 0 else scale
    if k > 0:
        n = V.shape[0]
        for t, rng in enumerate(_trial_rngs(seed, trials)):
            if t % 2 == 0:
                F = rng.standard_normal((n, k))
                M = F @ np.diag(rng.uniform(0, 2 * abs(lk[0]), k)) @ F.T / n
            else:
                eps = 10.0 ** rng.uniform(-4, 0)
                L = Uk + eps * rng.standard_normal((n, k)) / np.sqrt(n)
                R = Uk + eps * rng.standard_normal((n, k)) / np.sqrt(n)
                M = (L * lk) @ R.T
            best = min(best, float(np.sum((V - M) ** 2)))
    exact_ok = abs(dist - minimum) <= rtol * max(minimum, 1e-300) + 1e-15 * scale
    passes = bool(exact_ok and best >= minimum - tol)
    return DominationReport("eckart_young", k, minimum, dist, float(best), int(trials), tol, passes)


# -- predictive process ------------------------------------------------------

def _whitened_cross(spec, design, quadrature_m, covariance=None):
    """``W = L^{-1} K(S, Q)`` so that the predictive-process kernel on nodes is ``W'W``."""
    nodes, weight = quadrature_nodes(design.domain, quadrature_m)
    V = assemble_covariance(spec, design) if covariance is None else np.asarray(covariance)
    L, _ = cholesky_factor(V)
    W = scipy.linalg.solve_triangular(L, kernel_matrix(spec, design.locations, nodes), lower=True)
    return W, nodes, weight


def predictive_process_spectrum(spec: KernelSpec, design: Design, quadrature_m: int = 4900) -> ContinuousSpectrum:
    """Nystrom eigenvalues of ``K*(s, x) = k(s)' V^{-1} k(x)`` on the midpoint grid.

    ``K*`` has rank at most ``n``, so its non-zero quadrature eigenvalues are
    those of the ``n x n`` matrix ``W W'`` times the weight ``|D| / m``.
    """
    if design.n > 500:
        raise ValueError("predictive process spectrum limited to n <= 500")
    if quadrature_m < 100:
        raise ValueError(f"quadrature_m must be >= 100, got {quadrature_m}")
    W, nodes, weight = _whitened_cross(spec, design, quadrature_m)
    lam = scipy.linalg.eigvalsh(W @ W.T)[::-1] * weight
    return ContinuousSpectrum(np.clip(lam, 0.0, None), nodes.shape[0], design.domain.volume)


@dataclass(frozen=True)
class OptimalityB:
    tail_star: float
    residual_integral: float

    @property
    def minimum(self) -> float:
        return self.tail_star + self.residual_integral


def optimality_b_decomposition(spec: KernelSpec, design: Design, k: int,
                               quadrature_m: int = 4900) -> OptimalityB:
    """Tail of the predictive-process spectrum after ``k`` terms and the integrated kriging variance."""
    if not 0 <= int(k) <= design.n:
        raise ValueError(f"k must be in [0, {design.n}], got {k}")
    if design.n > 500:
        raise ValueError("optimality B decomposition limited to n <= 500")
    W, nodes, weight = _whitened_cross(spec, design, quadrature_m)
    lam = np.clip(scipy.linalg.eigvalsh(W @ W.T)[::-1] * weight, 0.0, None)
    kss = kernel_diagonal(spec, nodes)
    kriging_var = kss - np.einsum("ij,ij->j", W, W)
    return OptimalityB(tail_sum(lam, int(k)), float(np.sum(kriging_var) * weight))


def subspace_integrated_residual(spec: KernelSpec, design: Design, B, quadrature_m: int = 4900,
                                 covariance=None) -> float:
    """Quadrature of ``E(Y(s) - Pi[Y(s) | span(B'Y)])^2`` over the domain."""
    B = B.coefficients if isinstance(B, SubspaceSpec) else SubspaceSpec(B).coefficients
    nodes, weight = quadrature_nodes(design.domain, quadrature_m)
    kss = kernel_diagonal(spec, nodes)
    if B.shape[1] == 0:
        return float(kss.sum() * weight)
    V = assemble_covariance(spec, design) if covariance is None else np.asarray(covariance)
    G = B.T @ V @ B
    C = B.T @ kernel_matrix(spec, design.locations, nodes)  # Cov(B'Y, Y(q))
    explained = np.einsum("ij,ij->j", C, scipy.linalg.solve(0.5 * (G + G.T), C, assume_a="pos"))
    return float(np.sum(kss - explained) * weight)


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    check: str
    instance: str
    k: int | str
    lhs: float
    rhs: float
    passed: bool


def report_rows(report: DominationReport, instance: str):
    """Two rows: optimum identity and random domination."""
    return [
        CheckRow(report.check + "_identity", instance, report.k, report.at_optimum, report.minimum,
                 abs(report.at_optimum - report.minimum) <= report.tolerance + 1e-8 * abs(report.minimum)),
        CheckRow(report.check + "_domination", instance, report.k, report.minimum - report.tolerance,
                 report.best_random, report.best_random >= report.minimum - report.tolerance),
    ]


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "instance", "k", "lhs", "rhs", "pass"])
        for r in rows:
            w.writerow([r.check, r.instance, r.k, repr(float(r.lhs)), repr(float(r.rhs)),
                        "true" if r.passed else "false"])
