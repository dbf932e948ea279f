"""Central tolerance table.

Every numerical threshold used by library code or referenced by the
acceptance tests lives here, so tests and implementation cannot drift apart.
"""

# linear algebra
HERMITICITY_TOL = 1e-10          # max |M - M^dagger| entry allowed by hermitian_eig
EIG_ORTHO_TOL = 1e-9             # max |U^dagger U - I| entry
EIG_RECONSTRUCT_TOL = 1e-9       # relative reconstruction residual
PAIRING_TOL = 1e-8               # |lambda_i + lambda_{2N+1-i}| or intra-doublet gap

# special functions
BESSEL_SERIES_RELTOL = 1e-12
KERNEL_EQUALITY_TOL = 1e-12      # Bessel(+-1/2) vs C/D kernels
KERNEL_X0_LIMIT_TOL = 1e-8      # x=0 branch vs x -> 0 limit
DERIV_FD_RELTOL = 1e-6           # analytic d/dy kernel vs central differences

# quadrature
QUAD_ABSTOL = 1e-10
QUAD_RELTOL = 1e-8
NESTED_GL_POINTS = 64            # Gauss-Legendre points per dimension
TRUNCATION_SIGMAS = 12.0         # chamber truncation: max(x) + 12*sqrt(t)
CK_TOL = 1e-6                    # Chapman-Kolmogorov residual
NORMALIZATION_TOL = 1e-5         # integral of transition density over chamber

# series expansions
SCHUR_CUTOFF_DEFAULT = 12        # |mu| <= m partition truncation
SCHUR_GAP_FALLBACK = 1e-6        # min coordinate gap below which bialternant falls back
SERIES_SWITCH = 1.0              # use Schur-series determinants when sum(u)*sum(v) below this

# symmetry membership / group samplers
MEMBERSHIP_TOL = 1e-10           # defining relation residual for subspaces and groups
BRIDGE_ENDPOINT_TOL = 0.0        # bridges hit their endpoint exactly

# sde
MAX_HALVINGS = 20
MAX_DESCENT = 16                 # halving depth per grid step; deeper refinement retries at the floor
DRIFT_CAP = 0.25                 # halve while sub * max(drift/diffusion)^2 exceeds this
MAX_ATTEMPTS = 1 << 22           # per-grid-step attempt budget before giving up a path
DT_UNDERFLOW_FACTOR = 1e-12      # StepCollapse when dt < this * T
WARM_START_FRACTION = 1e-4       # origin start: sample analytic marginal at t_eps = this * T

# statistics
KS_MIN_SAMPLES = 20
CHI2_MIN_EXPECTED = 5.0
ESS_FRACTION = 0.1               # reweighting validity: n_eff > this * n

# acceptance thresholds (referenced by tests/test_acceptance.py)
ACC_P_VALUE = 0.01
ACC_POINTWISE = 1e-10
ACC_LIMIT_REL = 0.01             # 1% for small-x / large-T limits
ACC_GNK0_NORM = 1e-3
ACC_TT_LIMIT = 1e-3
ACC_MC_SIGMAS = 3.0
ACC_SCHUR_RESID = 1e-8
ACC_SCHUR_RATIO = 1e-4
ACC_SELBERG_REL = 1e-4
ACC_PSI_REL = 0.03
