"""
Simple (mean-zero) kriging with exact, pseudo-inverse and perturbed solvers.

Three ways to produce prediction weights for a point ``s`` with covariance
vector ``k(s) = (K(s, s_i))_i``:

``exact``
    Solve ``V alpha = k(s)`` through a Cholesky factor. A failed
    factorization is reported as :class:`IllConditionedError`.
``pseudo``
    ``alpha = (sum_{i<=k} u_i u_i' / lambda_i) k(s)``, the pseudo-inverse of
    the best rank-``k`` approximation ``V_k``.
``perturbed``
    Solve ``(V_k + tau I) alpha = k(s)`` in closed spectral form.

The prediction variance is always the explicit quadratic form
``K(s, s) - 2 alpha'k(s) + alpha' V alpha`` so the modes are comparable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import Design
from .kernels import KernelSpec, kernel_diagonal, kernel_matrix
from .spectral import EigenSystem, _values, assemble_covariance, dense_eigen, tail_sum, top_eigen

MODES = ("exact", "pseudo", "perturbed")
DEFAULT_CLIP = 1e-12


class IllConditionedError(np.linalg.LinAlgError):
    """Cholesky factorization of the covariance matrix hit a non-positive pivot.

    The matrix is numerically singular; use the ``pseudo`` mode instead.
    """


@dataclass(frozen=True)
class KrigingModel:
    design: Design
    spec: KernelSpec
    mode: str
    covariance: np.ndarray
    k: int | None = None
    tau: float | None = None
    factor: np.ndarray | None = None
    eigensystem: EigenSystem | None = None
    clip_threshold: float = DEFAULT_CLIP
    next_eigenvalue: float = 0.0
    pivot_ratio: float | None = None

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def retained(self) -> int:
        """Number of eigenpairs actually used (after clipping in ``pseudo`` mode)."""
        if self.eigensystem is None:
            return self.n
        return self.eigensystem.k


@dataclass(frozen=True)
class Prediction:
    point: np.ndarray
    weights: np.ndarray
    variance: float
    weight_norm: float

    def value(self, Y) -> float:
        """Predicted value ``weights' Y`` for observations ``Y`` at the design."""
        return float(self.weights @ np.asarray(Y, dtype=float))


def cholesky_factor(V):
    """Lower Cholesky factor and its pivot ratio ``(max L_ii / min L_ii)^2``."""
    try:
        L = scipy.linalg.cholesky(V, lower=True, check_finite=True)
    except np.linalg.LinAlgError as err:
        raise IllConditionedError(
            f"Cholesky factorization failed ({err}); the covariance matrix is numerically "
            "singular, use mode='pseudo' with k < n") from err
    d = np.diag(L)
    return L, float((d.max() / d.min()) ** 2)


def fit(spec: KernelSpec, design: Design, mode: str = "exact", k: int | None = None,
        tau: float | None = None, *, clip_threshold: float = DEFAULT_CLIP,
        covariance=None, eigensystem: EigenSystem | None = None,
        dense_max_n: int = 5000, max_bytes: int | None = None, seed: int = 0) -> KrigingModel:
    """Fit a kriging predictor.

    Parameters
    ----------
    mode : {'exact', 'pseudo', 'perturbed'}
    k : int
        Rank for ``pseudo``/``perturbed``, ``1 <= k <= n``.
    tau : float
        Ridge for ``perturbed``, > 0.
    covariance, eigensystem : optional
        Precomputed ``V_n`` and (complete or top-``k+1``) eigensystem, to
        avoid repeating an expensive decomposition.
    dense_max_n : int
        Above this ``n`` the top eigenpairs come from ``truncated_eigen``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    V = assemble_covariance(spec, design, max_bytes) if covariance is None else np.asarray(covariance).view()
    if V.shape != (design.n, design.n):
        raise ValueError(f"covariance has shape {V.shape}, expected {(design.n, design.n)}")
    V.setflags(write=False)
    n = design.n

    if mode == "exact":
        L, ratio = cholesky_factor(V)
        L.setflags(write=False)
        return KrigingModel(design, spec, mode, V, factor=L, pivot_ratio=ratio)

    if k is None or int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in [1, {n}], got {k}")
    k = int(k)
    if mode == "perturbed" and (tau is None or not tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")

    want = min(k + 1, n)
    es = eigensystem
    if es is None or es.k < want:
        es = top_eigen(V, want, dense_max_n=dense_max_n, seed=seed)
    lam, U = es.eigenvalues, es.eigenvectors
    next_lam = float(lam[k]) if k < n else 0.0
    keep = k
    if mode == "pseudo":
        floor = clip_threshold * float(lam[0])
        keep = int(np.count_nonzero(lam[:k] > floor))
        if keep < k:
            # the first excluded eigenvalue takes the role of lambda_{k+1}
            next_lam = float(lam[keep])
        if keep == 0:
            raise ValueError("no eigenvalue above the clip threshold")
    top = EigenSystem(lam[:keep], U[:, :keep], n, keep == n)
    return KrigingModel(design, spec, mode, V, k=k, tau=None if tau is None else float(tau),
                        eigensystem=top, clip_threshold=clip_threshold,
                        next_eigenvalue=max(next_lam, 0.0))


def weights(model: KrigingModel, kvec):
    kvec = np.asarray(kvec, dtype=float)
    if model.mode == "exact":
        return scipy.linalg.cho_solve((model.factor, True), kvec)
    lam, U = model.eigensystem.eigenvalues, model.eigensystem.eigenvectors
    c = U.T @ kvec
    if model.mode == "pseudo":
        return U @ (c / lam)
    tau = model.tau
    return U @ (c / (lam + tau)) + (kvec - U @ c) / tau


def quadratic_variance(model: KrigingModel, s, w, kvec=None) -> float:
    """``K(s, s) - 2 w'k(s) + w' V w`` for any weight vector ``w``."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if kvec is None:
        kvec = kernel_matrix(model.spec, s, model.design.locations)[0]
    kss = float(kernel_diagonal(model.spec, s)[0])
    return kss - 2.0 * float(w @ kvec) + float(w @ (model.covariance @ w))


def predict(model: KrigingModel, s) -> Prediction:
    s = np.asarray(s, dtype=float).ravel()
    if s.size != model.design.dim:
        raise ValueError(f"point has dimension {s.size}, design has {model.design.dim}")
    kvec = kernel_matrix(model.spec, s, model.design.locations)[0]
    w = weights(model, kvec)
    var = quadratic_variance(model, s, w, kvec)
    w.setflags(write=False)
    return Prediction(s, w, var, float(np.linalg.norm(w)))


@dataclass(frozen=True)
class ExcessRisk:
    excess: float
    bound: float
    alpha_norm: float
    next_eigenvalue: float

    def holds(self, atol: float = 1e-10) -> bool:
        return -atol <= self.excess <= self.bound + atol


def excess_risk(model_pseudo: KrigingModel, exact, s) -> ExcessRisk:
    """Extra prediction variance of the pseudo-inverse predictor and its bound.

    ``exact`` is an exact-mode model or the exact weight vector ``alpha(s)``.
    The bound is ``|alpha(s)|^2 * lambda_{k+1}`` with ``lambda_{n+1} = 0``.
    """
    if model_pseudo.mode != "pseudo":
        raise ValueError("excess_risk needs a pseudo-mode model")
    s = np.asarray(s, dtype=float).ravel()
    kvec = kernel_matrix(model_pseudo.spec, s, model_pseudo.design.locations)[0]
    if isinstance(exact, KrigingModel):
        if exact.mode != "exact":
            raise ValueError("the reference model must be in exact mode")
        alpha = weights(exact, kvec)
    else:
        if exact is None:
            raise ValueError("an exact reference is required")
        alpha = np.asarray(exact, dtype=float)
    w = weights(model_pseudo, kvec)
    excess = quadratic_variance(model_pseudo, s, w, kvec) - quadratic_variance(model_pseudo, s, alpha, kvec)
    norm2 = float(alpha @ alpha)
    return ExcessRisk(excess, norm2 * model_pseudo.next_eigenvalue, float(np.sqrt(norm2)),
                      model_pseudo.next_eigenvalue)


# -- in-sample error of the perturbed low-rank predictor --------------------

def _check_rank(lam, k):
    if int(k) != k or not 0 <= k <= lam.size:
        raise ValueError(f"k must be an integer in [0, {lam.size}], got {k}")
    return int(k)


def perturbation_mse_terms(eigenvalues, k: int, tau: float):
    """The two sums of the in-sample error: retained and truncated components."""
    lam = _values(eigenvalues)
    k = _check_rank(lam, k)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    head, tail = lam[:k], lam[k:]
    first = float(np.sum(head / (1.0 + head / tau) ** 2))
    second = float(np.sum(tail * (1.0 - tail / tau) ** 2))
    return first, second


def perturbation_mse(eigenvalues, k: int, tau: float) -> float:
    """``E |Y - V (V_k + tau I)^{-1} Y|^2`` from the complete spectrum of ``V``."""
    first, second = perturbation_mse_terms(eigenvalues, k, tau)
    return first + second


def perturbation_mse_oracle(V, k: int, tau: float, max_n: int = 2000) -> float:
    """Brute-force ``trace((I - A) V (I - A)')`` with ``A = V (V_k + tau I)^{-1}``."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    if n > max_n:
        raise ValueError(f"dense oracle limited to n <= {max_n}, got {n}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    es = dense_eigen(V)
    k = _check_rank(es.eigenvalues, k)
    Uk = es.eigenvectors[:, :k]
    M = (Uk * es.eigenvalues[:k]) @ Uk.T + tau * np.eye(n)
    # A = V M^{-1}; M is symmetric so A' = M^{-1} V
    A = scipy.linalg.solve(M, V, assume_a="sym").T
    R = np.eye(n) - A
    return float(np.sum((R @ V) * R))


def optimal_tau_threshold(eigenvalues, k: int) -> float:
    """``sum_{i>k} lambda_i^3 / sum_{i>k} lambda_i^2``; below it the tail error falls as tau grows.

    Round-off negatives in the tail are treated as zero. An all-zero tail gives 0.
    """
    lam = _values(eigenvalues)
    k = _check_rank(lam, k)
    if k >= lam.size:
        raise ValueError("k must be smaller than the number of eigenvalues")
    tail = np.clip(lam[k:], 0.0, None)
    den = float(np.sum(tail ** 2))
    return float(np.sum(tail ** 3)) / den if den > 0 else 0.0


def pseudo_insample_mse(eigenvalues, k: int) -> float:
    """Sum of in-sample squared errors of rank-``k`` pseudo kriging, ``sum_{i>k} lambda_i``."""
    lam = _values(eigenvalues)
    return tail_sum(lam, _check_rank(lam, k))


def write_predictions_csv(path, model: KrigingModel, predictions) -> None:
    """Rows ``sx,sy,mode,k,tau,variance,weight_norm`` (one coordinate column per dimension)."""
    coords = ["sx", "sy", "sz"][:model.design.dim] if model.design.dim <= 3 else [
        f"s{j + 1}" for j in range(model.design.dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coords + ["mode", "k", "tau", "variance", "weight_norm"])
        for p in predictions:
            w.writerow([repr(float(v)) for v in p.point] + [
                model.mode,
                "" if model.k is None else model.k,
                "" if model.tau is None else repr(model.tau),
                repr(p.variance),
                repr(p.weight_norm),
            ])
