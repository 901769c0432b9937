"""Variational inference by Bregman proximal gradient over exponential
families: relaxed moment matching (exact and Monte Carlo), a Euclidean
bound-ascent baseline, closed-form proximal maps, and an experiment
harness."""

__version__ = "0.1.0"

from .algorithms import (InFamilyGeoAverage, QuadratureGeoAverage, RunTrace,
                         Schedule, Status, WeightedBatch, mc_prmm, prmm_exact,
                         renyi_bound_estimate, vrb)
from .divergences import (QuadratureGrid, bregman_gap, gaussian_grid,
                          geometric_average_in_family, grad_f, hessian_f_1d,
                          kl_in_family, quadrature_renyi, renyi_in_family)
from .errors import (BviError, DomainViolation, DualDomainViolation,
                     InvalidInput, NotPositiveDefinite, OracleFailure,
                     UnsupportedRegularizer)
from .expfam import (CenteredGaussian1D, DiagGaussian, ExponentialFamily,
                     FullGaussian, MeanParams, NaturalParams, family_from_json,
                     inner)
from .metrics import MetricReport, f1_zero_pattern, param_mse, test_mse_distribution
from .numerics import RngStream, SpectralDecomp, cholesky, log_sum_exp, sym_eigen
from .regularizers import (EigenBox, NullRegularizer, Regularizer,
                           SparseMeanL1, bregman_prox, regularizer_from_json)
from .targets import (GaussianTargetSpec, RegressionDataset, Target,
                      make_gaussian_target, make_regression_dataset,
                      make_regression_target, regression_log_posterior)
