"""
Which k-dimensional summary of the data is best?
================================================

Among all k linear combinations ``B'Y`` of the observations, the leading
eigenvectors of ``V`` minimise the summed in-sample projection error, and the
minimum is the tail sum of eigenvalues. Here 500 random subspaces try and fail
to beat it. The same experiment is repeated for the Frobenius-norm version
(best rank-k matrix), and for the error integrated over the whole domain, whose
minimum splits into a predictive-process eigenvalue tail plus the integrated
kriging variance.
"""
import numpy as np

from lowrank_kriging import K1, K2, grid_design, random_design
from lowrank_kriging.optimality import (eckart_young_check, optimality_b_decomposition, optimality_c_check,
                                        subspace_integrated_residual)
from lowrank_kriging.spectral import assemble_covariance

V = assemble_covariance(K2, random_design(100, seed=4))
for check in (optimality_c_check, eckart_young_check):
    rep = check(V, 10, seed=1)
    print(f"{rep.check:>13}: minimum {rep.minimum:.6g}, at optimum {rep.at_optimum:.6g}, "
          f"best of {rep.trials} random {rep.best_random:.6g}")

design = grid_design(8)
opt = optimality_b_decomposition(K1, design, 6, quadrature_m=2500)
print(f"\nintegrated error, k = 6: {opt.tail_star:.5f} (eigenvalue tail) + {opt.residual_integral:.5f} "
      f"(kriging variance) = {opt.minimum:.5f}")
rng = np.random.default_rng(0)
random_best = min(subspace_integrated_residual(K1, design, rng.standard_normal((design.n, 6)), 2500)
                  for _ in range(50))
print(f"best of 50 random subspaces: {random_best:.5f}")
