"""Finite-section spectral measures of self-adjoint operators."""

__version__ = "0.1.0"

from .operators import (DomainProbe, Kind, OperatorError, OperatorSpec, TruncatedOperator,
                        build_truncation, domain_membership_report)
from .eigen import EigenDecomposition, cluster_eigenvalues, eigendecompose
from .family import (SpectralCDF, SpectralFamily, apply_F, cdf, polarization_measure,
                     riemann_stieltjes_sum, stieltjes_apply, tail_report)
from .resolvent import (ResolventQuery, operational_calculus_residual, resolvent_solve,
                        stone_limit_study, stone_reconstruct)
from .harness import (ConvergenceStudy, Gaussian, PointMasses, Semicircle, discontinuity_scan,
                      run_cdf_convergence, theorem_limits_check)
