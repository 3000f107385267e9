import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowrank_kriging.design import Box, Design, grid_design, random_design
from lowrank_kriging.kernels import K1, K2, K3, KernelSpec
from lowrank_kriging.kriging import (IllConditionedError, excess_risk, fit, optimal_tau_threshold,
                                     perturbation_mse, perturbation_mse_oracle,
                                     perturbation_mse_terms, predict, pseudo_insample_mse,
                                     write_predictions_csv)
from lowrank_kriging.spectral import assemble_covariance, dense_eigen
from lowrank_kriging.verification import grid_eigenvalues


def test_single_site_factor():
    spec = KernelSpec("exponential", range=0.3, variance=2.5)
    model = fit(spec, Design([[0.4, 0.6]], Box.unit(2)), "exact")
    assert model.factor.shape == (1, 1)
    assert model.factor[0, 0] == pytest.approx(math.sqrt(2.5))


def test_exact_factor_reconstructs(small_random):
    model = fit(K1, small_random, "exact")
    L = model.factor
    V = model.covariance
    assert np.linalg.norm(V - L @ L.T) <= 1e-8 * np.linalg.norm(V)


def test_exact_fails_on_dense_grid(grid70):
    try:
        model = fit(K3, grid70, "exact")
    except IllConditionedError as err:
        assert "pseudo" in str(err)
    else:
        assert model.pivot_ratio > 1e12


def test_pseudo_rank_100_on_dense_grid(grid70):
    model = fit(K3, grid70, "pseudo", 100, dense_max_n=1000)
    assert model.retained == 100
    assert model.eigensystem.eigenvalues[-1] > 0
    assert np.all(model.eigensystem.eigenvalues > model.clip_threshold * model.eigensystem.eigenvalues[0])


def test_two_point_weights_by_hand():
    d = Design([[0.0, 0.0], [0.25, 0.0]], Box.unit(2))
    p = predict(fit(K1, d, "exact"), (0.125, 0.0))
    # [[1, r], [r, 1]] a = (c, c)  =>  a_1 = a_2 = c / (1 + r)
    expected = math.exp(-0.5) / (1 + math.exp(-1))
    np.testing.assert_allclose(p.weights, [expected, expected], rtol=1e-14)
    assert expected == pytest.approx(0.443409, abs=1e-6)
    assert p.weight_norm == pytest.approx(math.sqrt(2) * expected)
    assert p.value([1.0, 3.0]) == pytest.approx(4 * expected)


def test_interpolation_at_sites(small_random):
    exact = fit(K1, small_random, "exact")
    full = fit(K1, small_random, "pseudo", small_random.n)
    for j in (0, 7, 19):
        s = small_random.locations[j]
        e = np.zeros(small_random.n)
        e[j] = 1.0
        for model in (exact, full):
            p = predict(model, s)
            np.testing.assert_allclose(p.weights, e, atol=1e-8)
            assert abs(p.variance) <= 1e-8


def test_full_rank_pseudo_equals_exact(small_random, rng):
    exact = fit(K2, small_random, "exact")
    full = fit(K2, small_random, "pseudo", small_random.n)
    for s in rng.random((5, 2)):
        np.testing.assert_allclose(predict(full, s).weights, predict(exact, s).weights, atol=1e-8)


def test_perturbed_weights_solve_ridge_system(small_random, rng):
    k, tau = 6, 0.05
    model = fit(K1, small_random, "perturbed", k, tau)
    es = dense_eigen(model.covariance)
    Vk = (es.eigenvectors[:, :k] * es.eigenvalues[:k]) @ es.eigenvectors[:, :k].T
    for s in rng.random((4, 2)):
        kvec = assemble_covariance(K1, Design(np.vstack([small_random.locations, s]), Box.unit(2)))[-1, :-1]
        direct = np.linalg.solve(Vk + tau * np.eye(small_random.n), kvec)
        np.testing.assert_allclose(predict(model, s).weights, direct, rtol=1e-9, atol=1e-12)


def test_fit_errors(small_random):
    with pytest.raises(ValueError):
        fit(K1, small_random, "pseudo", 0)
    with pytest.raises(ValueError):
        fit(K1, small_random, "pseudo", 21)
    with pytest.raises(ValueError):
        fit(K1, small_random, "perturbed", 5, 0.0)
    with pytest.raises(ValueError):
        fit(K1, small_random, "cholesky")


def test_clip_threshold_drops_tiny_eigenvalues():
    d = grid_design(20)
    model = fit(K3, d, "pseudo", 400)
    lam = model.eigensystem.eigenvalues
    assert model.retained < 400
    assert np.all(lam > 1e-12 * lam[0])
    assert model.next_eigenvalue <= 1e-12 * lam[0]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), mode=st.sampled_from(["exact", "pseudo", "perturbed"]),
       frac=st.floats(0.1, 1.0))
def test_variance_non_negative(seed, mode, frac):
    d = random_design(30, seed=seed)
    k = max(1, int(frac * 30))
    model = fit(K1, d, mode, None if mode == "exact" else k, 0.01 if mode == "perturbed" else None)
    for s in np.random.default_rng(seed).random((5, 2)):
        p = predict(model, s)
        assert p.variance >= -1e-8


def test_excess_risk_full_rank_is_zero(small_random, rng):
    exact = fit(K1, small_random, "exact")
    full = fit(K1, small_random, "pseudo", small_random.n)
    r = excess_risk(full, exact, rng.random(2))
    assert r.bound == 0.0
    assert abs(r.excess) <= 1e-10


@pytest.mark.parametrize("k", [50, 99])
def test_excess_risk_bound_n100(k):
    d = random_design(100, seed=17)
    exact = fit(K1, d, "exact")
    model = fit(K1, d, "pseudo", k, covariance=exact.covariance)
    lam = dense_eigen(exact.covariance).eigenvalues
    for s in np.random.default_rng(5).random((20, 2)):
        r = excess_risk(model, exact, s)
        assert r.next_eigenvalue == pytest.approx(lam[k], rel=1e-10)
        assert -1e-10 <= r.excess <= r.bound + 1e-10
        # the excess equals sum_{i>k} lambda_i (u_i' alpha)^2
        alpha = predict(exact, s).weights
        U = dense_eigen(exact.covariance).eigenvectors
        assert r.excess == pytest.approx(np.sum(lam[k:] * (U[:, k:].T @ alpha) ** 2), rel=1e-6, abs=1e-12)


def test_excess_risk_accepts_weights(small_random):
    exact = fit(K1, small_random, "exact")
    model = fit(K1, small_random, "pseudo", 5)
    s = (0.3, 0.3)
    a = excess_risk(model, exact, s)
    b = excess_risk(model, predict(exact, s).weights, s)
    assert a == b
    with pytest.raises(ValueError):
        excess_risk(exact, exact, s)
    with pytest.raises(ValueError):
        excess_risk(model, None, s)


def test_table2_values():
    lam = grid_eigenvalues(K3, 70)
    assert perturbation_mse(lam, 100, 0.001) == pytest.approx(0.006737, rel=1e-3)
    assert perturbation_mse(lam, 100, 1.0) == pytest.approx(5.618669, rel=1e-6)


def test_large_tau_limit(small_random):
    lam = dense_eigen(assemble_covariance(K1, small_random)).eigenvalues
    assert perturbation_mse(lam, 5, 1e9) == pytest.approx(lam.sum(), rel=1e-3)


def test_full_rank_has_no_tail(small_random):
    V = assemble_covariance(K2, small_random)
    lam = dense_eigen(V).eigenvalues
    tau = 0.3
    expected = float(np.sum(lam / (1 + lam / tau) ** 2))
    assert perturbation_mse(lam, 20, tau) == pytest.approx(expected, rel=1e-14)
    assert perturbation_mse_oracle(V, 20, tau) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_spectral_formula_matches_trace_oracle(seed):
    rng = np.random.default_rng(seed)
    d = random_design(20, seed=seed)
    V = assemble_covariance(K1, d)
    k = int(rng.integers(0, 21))
    tau = float(10 ** rng.uniform(-2, 1))
    lam = dense_eigen(V).eigenvalues
    assert perturbation_mse(lam, k, tau) == pytest.approx(perturbation_mse_oracle(V, k, tau), rel=1e-10)


def test_tau_at_next_eigenvalue_shrinks_tail(small_random):
    lam = dense_eigen(assemble_covariance(K1, small_random)).eigenvalues
    k = 8
    _, second = perturbation_mse_terms(lam, k, lam[k])
    assert second < lam[k:].sum()


def test_first_term_increasing_in_tau():
    lam = grid_eigenvalues(K2, 20)
    taus = np.logspace(-6, 3, 60)
    first = [perturbation_mse_terms(lam, 50, t)[0] for t in taus]
    assert all(b > a for a, b in zip(first, first[1:]))
    assert 0 < first[0] and first[-1] < lam[:50].sum()


def test_perturbation_errors():
    with pytest.raises(ValueError):
        perturbation_mse(np.ones(3), 1, 0.0)
    with pytest.raises(ValueError):
        perturbation_mse(np.ones(3), 4, 1.0)


def test_optimal_tau_threshold():
    assert optimal_tau_threshold(np.array([5.0, 0.7, 0.7, 0.7]), 1) == pytest.approx(0.7)
    assert optimal_tau_threshold(np.array([9.0, 2.0, 1.0]), 1) == pytest.approx(1.8)
    assert optimal_tau_threshold(np.array([1.0, 0.0, 0.0]), 1) == 0.0
    lam = grid_eigenvalues(K3, 70)
    assert optimal_tau_threshold(lam, 100) < lam[100]
    with pytest.raises(ValueError):
        optimal_tau_threshold(lam, lam.size)


def test_pseudo_insample_mse():
    lam = grid_eigenvalues(K3, 70)
    assert pseudo_insample_mse(lam, 100) == pytest.approx(2.834e-4, rel=0.05)
    assert pseudo_insample_mse(lam, lam.size) == 0.0
    assert pseudo_insample_mse(np.array([3.0, 2.0]), 0) == 5.0


def test_concurrent_predictions_agree(small_random, rng):
    model = fit(K1, small_random, "perturbed", 5, 0.1)
    pts = rng.random((40, 2))
    serial = [predict(model, s).variance for s in pts]
    with ThreadPoolExecutor(4) as ex:
        threaded = list(ex.map(lambda s: predict(model, s).variance, pts))
    assert serial == threaded


def test_predictions_csv(tmp_path, small_random):
    model = fit(K1, small_random, "perturbed", 5, 0.1)
    preds = [predict(model, s) for s in [(0.1, 0.2), (0.5, 0.5)]]
    path = tmp_path / "pred.csv"
    write_predictions_csv(path, model, preds)
    lines = path.read_text().splitlines()
    assert lines[0] == "sx,sy,mode,k,tau,variance,weight_norm"
    assert lines[1].startswith("0.1,0.2,perturbed,5,0.1,")
    assert len(lines) == 3
