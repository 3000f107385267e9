"""Low-rank kriging for ill-conditioned kernel matrices."""
from .design import (Box, Design, RegularityReport, VoronoiSummary, check_regularity, grid_design,
                     random_design, read_design_csv, voronoi_summary, write_design_csv)
from .kernels import K1, K2, K3, K4, KernelSpec, c_delta, evaluate, kernel_matrix
from .kriging import (IllConditionedError, KrigingModel, Prediction, excess_risk, fit,
                      optimal_tau_threshold, perturbation_mse, perturbation_mse_oracle, predict,
                      pseudo_insample_mse)
from .optimality import (SubspaceSpec, eckart_young_check, optimality_b_decomposition,
                         optimality_c_check, predictive_process_spectrum, projection_residual)
from .spectral import (ContinuousSpectrum, EigenSystem, MemoryBudgetError, assemble_covariance,
                       condition_number, continuous_spectrum, dense_eigen, tail_sums,
                       truncated_eigen)

__version__ = "0.1.0"
