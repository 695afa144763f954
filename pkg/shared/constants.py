"""
effham - Project Constants

Numerical thresholds and budgets shared by all backends.
"""

TOOL_NAME = "effham"
TOOL_VERSION = "0.4.0"

# Field flag inference
ROW_EQUALITY_TOL = 1e-12
CONVEXITY_SLACK = -1e-10
PERIODICITY_TOL = 1e-9
SUPPORT_TOL = 1e-12
QUADRATIC_FIT_TOL = 1e-8

# Flow integration
DEFAULT_DT = 1e-3
HALVING_TOL = 1e-7
MAX_HALVINGS = 4
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
FD_STEP = 1e-5

# Generating functions
DEFAULT_TAU = 0.02
NEAR_IDENTITY_BOUND = 0.5

# Min-max
DEFAULT_FIBER_NODES = 9
DEFAULT_BASE_NODES = 16
MAX_COMPLEX_CELLS = 1_500_000
BRUTE_ORACLE_MAX_CELLS = 10_000
BOX_GROWTH = 1.5
MAX_BOX_GROWTHS = 12
MAX_K = 4

# Weak KAM
DEFAULT_HORIZON = 50.0
VELOCITY_WINDOW_FACTOR = 1.5
VELOCITY_STEP = 0.02
MAX_WINDOW_GROWTHS = 6
QUADRATURE_PANELS = 10_000
BISECTION_TOL = 1e-10

# Homogenization properties
PROPERTY_BUDGET_FACTOR = 1.5
LIPSCHITZ_SLACK = 1.1
LEVELSET_ERROR = 1e-6
PROPERTY_ABS_FLOOR = 1e-9
PROPERTY_GRID_NODES = 9
DEFAULT_SHIFT = 0.3

# Hamilton-Jacobi experiments
MAX_EXPERIMENT_NODES = 4096
LONGTIME_HORIZONS = (25.0, 50.0)

# Environment variables
ENV_OUT = "EFFHAM_OUT"
ENV_THREADS = "EFFHAM_THREADS"
ENV_TOLERANCE_SCALE = "EFFHAM_TOLERANCE_SCALE"

# Fiber boxes
FIBER_BOX_SAFETY = 1.1
FIBER_BOX_SAMPLES = 33
MIN_BOX_RADIUS = 1e-3
