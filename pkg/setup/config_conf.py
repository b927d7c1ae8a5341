"""
Configuration module for gpscav.
Handles loading of settings from environment variables and the defaults of every
run-configuration key.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()

VERSION = "1.0.0"

# Base directories
BASE_DIR = Path(__file__).parent.parent
OUTPUT_DIR = Path(os.getenv("GPSCAV_OUTPUT_DIR", str(BASE_DIR / "gpscav_output")))
LOGS_DIR = Path(os.getenv("GPSCAV_LOGS_DIR", str(BASE_DIR / "logs")))
MANIFEST_NAME = "manifest.json"

# Ensure directories exist
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# Worker count override for run.threads
_threads_env = os.getenv("GPSCAV_THREADS")
GPSCAV_THREADS = int(_threads_env) if _threads_env and _threads_env.strip().isdigit() else None

# Run defaults
DEFAULT_SEED = 0
DEFAULT_THREADS = 1

# Geometry defaults
DEFAULT_BOUNDARY_SAMPLES = 2048  # Hausdorff boundary sampling
DEFAULT_REGULARITY_SAMPLES = 4096  # C^{6,alpha} sampling
MAX_FOURIER_MODES = 8

# Mesh defaults
DEFAULT_MESH_H = 0.05
DEFAULT_SMOOTHING_ITERATIONS = 25
MIN_ANGLE_DEGREES = 20.0

# Material defaults (homogeneous benchmark material)
DEFAULT_E = 1.0
DEFAULT_NU = 0.3
DEFAULT_THICKNESS = 1.0

# Solver defaults
DEFAULT_ORDER = 1
DEFAULT_SOLVER_TOL = 1e-10
DEFAULT_SOLVER_METHOD = "direct"

# Airy defaults
DEFAULT_SANDWICH_SLACK = 0.05
DEFAULT_FIT_RADIUS = 3.0  # in units of h_max
DEFAULT_PATCH_RADIUS = 0.5  # in units of r0

# Inverse defaults
DEFAULT_SIGMA_SAMPLES = 512
DEFAULT_D0_FACTOR = 0.1
DEFAULT_LPS_OFFSET = 1.5
DEFAULT_MAX_ITER = 50
DEFAULT_FD_STEP = 1e-4  # in units of r0
DEFAULT_STEP_TOL = 1e-5  # in units of r0
DEFAULT_DISCREPANCY_FACTOR = 1.5
