"""
Configuration settings for the bound calculator.
"""

VERSION = "0.1.0"
SCHEMA_VERSION = 1

# Matrix validation
HERMITIAN_TOL = 1e-12  # relative to max(1, max|entry|)
EIGEN_CLAMP = 1e-12  # |eigenvalue| below this is treated as exactly zero
TRACE_RENORM_TOL = 1e-8  # density matrices farther than this from unit trace are rejected
SQRT_NORM_TOL = 1e-10  # tr(xi xi) must stay this close to 1
HS_REAL_TOL = 1e-12  # hs_inner of Hermitian pairs is reported real below this
IMAG_RESIDUE_TOL = 1e-10  # imaginary residue on a physical trace aborts above this
WYSI_CROSSCHECK_TOL = 1e-10

# Random state generation
MIN_EIGEN_FLOOR = 1e-10  # Ginibre draws are regenerated below this floor

# Bounds
DEGENERACY_THRESHOLD = 1e-10  # Hadamard ratio of the odd Gram matrix, shared with the oracle
ZERO_FISHER_THRESHOLD = 1e-14  # mu_2 at or below this has no information about the parameter
DEFAULT_ORDERS = (1, 3)

# Truncated oscillator
MIN_CONJUGATE_DIM = 8
BOUNDARY_BAND = 2
BOUNDARY_EPS = 1e-8

# Reports
DEFAULT_REPORT_PRECISION = 12  # significant digits
REPORT_FORMATS = ("json", "csv")

# Property suite
VERIFY_SEED = 2024
VERIFY_DIMS = (2, 3, 4, 5, 6, 7, 8)
VERIFY_SAMPLES = 100
VERIFY_TOLERANCE = 1.0  # multiplier on every property's base threshold
VERIFY_MAX_ORDER = 7
CONJUGATE_CHECK_DIM = 32
CONJUGATE_CHECK_RATIO = 0.2
CONJUGATE_CHECK_TIMES = (0.0, 0.25, 0.5, 1.0)

# CLI exit codes
EXIT_OK = 0
EXIT_SCHEMA_ERROR = 2
EXIT_NUMERICAL_ABORT = 3
EXIT_SUITE_FAILURE = 4

# Logging
LOG_LEVEL_ENV = "QCRB_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"
LOG_MAX_LENGTH = 1000
