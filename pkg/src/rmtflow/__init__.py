"""Noncolliding diffusion particle systems, matrix-valued stochastic
processes, symmetry-class eigenvalue densities, and numerical
verification of the determinantal identities that connect them."""

from .ensembles import (ChamberPoint, EnsembleSpec, density, exponent_psi,
                        h_poly, h_poly_log, in_chamber, log_density,
                        norm_constant)
from .errors import (ChamberMismatch, DomainError, NoConvergence,
                     NotHermitian, RmtFlowError, SpecError, StepCollapse,
                     TooFewSamples, UnsupportedDimension, ZeroWeight)
from .haar import (GroupTag, MCEstimate, haar_sample, hciz_lhs, hciz_report,
                   hciz_rhs, membership_residual)
from .kernels import (MeanderSpec, TransitionQuery, banana_density,
                      km_determinant, log_transition_density, meander_weight,
                      noncoll_probability, ntilde, star_density,
                      transition_density, watermelon_density)
from .linalg import hermitian_eig, radial_coordinates
from .matproc import (KINDS, MatrixProcessSpec, PathGrid, build_process,
                      eigen_path, sample_matrices, terminal_eigenvalues)
from .schur import (Partition, expansion_check, schur_eval, selberg_quadrature,
                    selberg_value)
from .sde import SdeSpec, integrate
from .specfun import Bessel, bessel_i_log_scaled, heat_kernel
from .stats import (EmpiricalSample, chamber_chi2, imhof_reweight, ks_test,
                    quadrature_cdf)

__version__ = "0.1.0"
