import os
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # Fallback to manual parsing if dotenv is missing
    try:
        with open('.env') as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith('#'): continue
                if '=' in line:
                    key, value = line.split('=', 1)
                    os.environ[key] = value
    except Exception:
        pass

# Method Defaults
# Knockoff proportion r/p, pi0 cutoff and the size of the lambda grid used
# for the Lasso path. Bare CLI commands reproduce these settings.
DEFAULT_RHO = 1.0
DEFAULT_T0 = 0.1
DEFAULT_GRID = 200
DEFAULT_LAMBDA_MIN_RATIO = 1e-3  # smallest grid lambda relative to ||X^T y||_inf

# Quadrature (integration by parts over F_Pi)
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 400
QUAD_TAIL_PROB = 1e-10   # quantiles of Pi used to truncate the integral
QUAD_TAIL_WIDTH = 10.0   # extra margin, in units of tau
QUAD_FAIL_TOL = 1e-8     # error estimate (relative) above which a flagged integral is rejected
QUAD_MAX_POINTS = 100

# Root Finding
ROOT_XTOL = 1e-13
ROOT_RTOL = 1e-13
TARGET_SCAN = 41          # alpha grid used to bracket FDP targets
TARGET_TOL = 1e-6
ALPHA_MAX = 8.0           # Phi(-8) ~ 6e-16, the curve is flat beyond
ZERO_LIMIT_LAMBDAS = (1e-5, 1e-6)
ZERO_LIMIT_RTOL = 1e-4

# Coordinate Descent
CD_TOL = 1e-10            # max coordinate change
CD_KKT_RTOL = 1e-8        # KKT residual, relative to ||X^T y||_inf
CD_POLISH_EVERY = 200     # sweeps between exact active-set solves
CD_MAX_SWEEPS = 100000

# Risk Minimization
ORACLE_GRID = 100
MIXTURE_SHAPES = (0.1, 0.8, 1.5, 2.2, 2.9, 3.6, 4.3, 5.0)
MIXTURE_LEVELS = (0, 1, 2, 3, 4)
MIXTURE_SUBSAMPLE = 2000

# Parallelism
# Replicates and sweep members are independent; cap the pool size here or
# with KAMP_THREADS in the environment.
THREADS = int(os.getenv("KAMP_THREADS", os.cpu_count() or 1))

# Logging
LOG_FILE = os.getenv("KAMP_LOG_FILE", "kamp.log")
LOG_LEVEL = os.getenv("KAMP_LOG_LEVEL", "INFO")
RUN_LOG = os.getenv("KAMP_RUN_LOG", "runs.jsonl")

# CSV
FLOAT_FORMAT = "%.17g"
