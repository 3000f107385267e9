import numpy as np
import pytest

from lowrank_kriging.design import Box, Design, grid_design, random_design
from lowrank_kriging.kernels import K1, K2, K3
from lowrank_kriging.optimality import (CheckRow, SubspaceSpec, eckart_young_check,
                                        optimality_b_decomposition, optimality_c_check,
                                        predictive_process_spectrum, projection_residual,
                                        report_rows, subspace_integrated_residual,
                                        write_report_csv)
from lowrank_kriging.spectral import assemble_covariance, continuous_spectrum, dense_eigen, integrated_variance


def _cov(n=30, seed=4, spec=K1):
    return assemble_covariance(spec, random_design(n, seed=seed))


def test_residual_of_coordinate_subspace_on_diagonal():
    V = np.diag([4.0, 3.0, 2.0, 1.0])
    # projecting on Y_1, Y_3 leaves the variances of Y_2, Y_4
    B = np.eye(4)[:, [0, 2]]
    assert projection_residual(V, B) == pytest.approx(4.0)
    assert projection_residual(V, np.zeros((4, 0))) == pytest.approx(10.0)
    assert projection_residual(V, np.eye(4)) == pytest.approx(0.0, abs=1e-12)


def test_residual_matches_direct_regression():
    # independent oracle: residual covariance V - V B (B'VB)^{-1} B'V, summed on the diagonal
    V = _cov()
    B = np.random.default_rng(1).standard_normal((30, 4))
    C = V @ B
    resid = V - C @ np.linalg.inv(B.T @ V @ B) @ C.T
    assert projection_residual(V, B) == pytest.approx(np.trace(resid), rel=1e-10)


def test_residual_is_basis_invariant():
    V = _cov()
    rng = np.random.default_rng(2)
    B = rng.standard_normal((30, 5))
    M = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    assert projection_residual(V, B @ M) == pytest.approx(projection_residual(V, B), rel=1e-9)


def test_leading_eigenvectors_beat_random_subspaces():
    V = _cov()
    es = dense_eigen(V)
    k = 5
    best = es.eigenvalues[k:].sum()
    assert projection_residual(V, es.eigenvectors[:, :k]) == pytest.approx(best, rel=1e-10)
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert projection_residual(V, rng.standard_normal((30, k))) >= best - 1e-10


def test_subspace_spec_validation():
    with pytest.raises(ValueError):
        SubspaceSpec(np.ones((5, 2)))
    assert SubspaceSpec(np.arange(4.0)).k == 1
    with pytest.raises(np.linalg.LinAlgError):
        projection_residual(np.diag([1.0, 0.0]), np.array([[0.0], [1.0]]))
    with pytest.raises(ValueError):
        projection_residual(np.eye(3), np.eye(4)[:, :2])


def test_optimality_check_identity_matrix():
    rep = optimality_c_check(np.eye(6), 2, trials=50)
    assert rep.passes
    assert rep.minimum == pytest.approx(4.0)
    assert rep.best_random == pytest.approx(4.0)


def test_optimality_check_k_zero():
    V = _cov(20)
    rep = optimality_c_check(V, 0, trials=10)
    assert rep.passes and rep.minimum == pytest.approx(np.trace(V))


def test_optimality_check_n100():
    V = assemble_covariance(K2, random_design(100, seed=11))
    rep = optimality_c_check(V, 10, trials=500, seed=3)
    assert rep.passes
    assert rep.best_random > rep.minimum
    assert rep.trials == 500


def test_eckart_young_small():
    rep = eckart_young_check(np.diag([3.0, 2.0, 1.0]), 1, trials=50)
    assert rep.passes and rep.minimum == pytest.approx(5.0) and rep.at_optimum == pytest.approx(5.0)
    full = eckart_young_check(np.diag([3.0, 2.0, 1.0]), 3, trials=10)
    assert full.passes and full.minimum == pytest.approx(0.0)


def test_eckart_young_orders_by_magnitude():
    # an indefinite matrix: the best rank-1 approximation keeps the -5 eigenvalue
    rep = eckart_young_check(np.diag([2.0, -5.0, 1.0]), 1, trials=20)
    assert rep.passes and rep.minimum == pytest.approx(5.0)


def test_eckart_young_n100():
    V = assemble_covariance(K1, random_design(100, seed=12))
    assert eckart_young_check(V, 8, trials=200).passes
    with pytest.raises(ValueError):
        eckart_young_check(np.eye(301), 1)


def test_predictive_process_single_site():
    d = Design([[0.5, 0.5]], Box.unit(2))
    pp = predictive_process_spectrum(K1, d, quadrature_m=900)
    assert pp.eigenvalues.size == 1
    # rank one: the eigenvalue is int K(s, x)^2 dx / K(s, s)
    from lowrank_kriging.spectral import quadrature_nodes
    from lowrank_kriging.kernels import kernel_matrix

    nodes, w = quadrature_nodes(Box.unit(2), 900)
    assert pp.eigenvalues[0] == pytest.approx(np.sum(kernel_matrix(K1, d.locations, nodes) ** 2) * w, rel=1e-10)


@pytest.mark.parametrize("spec", [K1, K2])
def test_predictive_process_dominated(spec):
    design = grid_design(10)
    pp = predictive_process_spectrum(spec, design, quadrature_m=2500).eigenvalues
    full = continuous_spectrum(spec, Box.unit(2), quadrature_m=2500).eigenvalues[:pp.size]
    assert np.all(pp <= full * (1 + 1e-8) + 1e-12)
    # traces: int K*(s, s) ds <= int K(s, s) ds
    assert pp.sum() <= integrated_variance(spec, Box.unit(2), 2500)


def test_integrated_optimum_extremes():
    design = grid_design(8)
    total = integrated_variance(K2, Box.unit(2), 2500)
    zero = optimality_b_decomposition(K2, design, 0, quadrature_m=2500)
    assert zero.minimum == pytest.approx(total, rel=1e-10)
    full = optimality_b_decomposition(K2, design, design.n, quadrature_m=2500)
    assert full.tail_star == 0.0
    assert full.minimum == pytest.approx(full.residual_integral)
    assert 0 < full.residual_integral < total


def test_integrated_optimum_below_random_subspaces():
    design = grid_design(7)
    V = assemble_covariance(K1, design)
    k = 6
    opt = optimality_b_decomposition(K1, design, k, quadrature_m=900)
    rng = np.random.default_rng(8)
    for _ in range(30):
        B = rng.standard_normal((design.n, k))
        assert subspace_integrated_residual(K1, design, B, 900, covariance=V) >= opt.minimum - 1e-10


def test_integrated_optimum_at_most_eigenvector_subspace():
    # the leading eigenvectors of V_n are one admissible choice, so they cannot beat the minimum
    design = grid_design(7)
    V = assemble_covariance(K3, design)
    U = dense_eigen(V).eigenvectors[:, :5]
    opt = optimality_b_decomposition(K3, design, 5, quadrature_m=900)
    assert opt.minimum <= subspace_integrated_residual(K3, design, U, 900, covariance=V) + 1e-10


def test_report_rows_and_csv(tmp_path):
    rep = optimality_c_check(np.diag([3.0, 2.0, 1.0]), 1, trials=10)
    rows = report_rows(rep, "diag3")
    assert [r.check for r in rows] == ["optimality_c_identity", "optimality_c_domination"]
    assert all(r.passed for r in rows)
    rows.append(CheckRow("custom", "x", "-", 1.0, 2.0, False))
    path = tmp_path / "r.csv"
    write_report_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "check,instance,k,lhs,rhs,pass"
    assert lines[1].endswith(",true") and lines[-1] == "custom,x,-,1.0,2.0,false"
