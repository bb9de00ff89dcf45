import os
from dotenv import load_dotenv

load_dotenv(override=False)  # Always load .env at import time

class Config:
	"""Numerical defaults for lapkit runs, overridable from the environment."""
	APP_TITLE = os.getenv("LAPKIT_APP_TITLE", "lapkit")
	APP_VERSION = os.getenv("LAPKIT_APP_VERSION", "1.0.0")
	LOG_LEVEL = os.getenv("LAPKIT_LOG_LEVEL", "INFO")

	# Grid defaults
	N_1D = int(os.getenv("LAPKIT_N_1D", 512))  # 1-D and radial grids
	N_3D = int(os.getenv("LAPKIT_N_3D", 64))  # full tensor grids in n >= 2
	HALF_WIDTH = float(os.getenv("LAPKIT_L", 20.0))
	MASK_DIVISOR = int(os.getenv("LAPKIT_MASK_DIVISOR", 8))  # mask width N/8

	# Reproducibility
	SEED = int(os.getenv("LAPKIT_SEED", "0x5EED"), 0)

	# Norm estimation
	PROBE_STEPS = int(os.getenv("LAPKIT_PROBE_STEPS", 30))
	NORM_STEPS = int(os.getenv("LAPKIT_NORM_STEPS", 40))
	NORM_RTOL = float(os.getenv("LAPKIT_NORM_RTOL", 1e-6))

	# Shifted solves
	SOLVER_TOL = float(os.getenv("LAPKIT_SOLVER_TOL", 1e-10))
	SOLVER_MAXITER = int(os.getenv("LAPKIT_SOLVER_MAXITER", 2000))
	SOLVER_RESTARTS = int(os.getenv("LAPKIT_SOLVER_RESTARTS", 3))
	DENSE_LIMIT = int(os.getenv("LAPKIT_DENSE_LIMIT", 1024))  # largest size assembled densely

	# Verdict thresholds
	BLOWUP_THRESHOLD = float(os.getenv("LAPKIT_BLOWUP_THRESHOLD", 3.0))
	TOL_GAP_FACTOR = float(os.getenv("LAPKIT_TOL_GAP_FACTOR", 1e-6))
	SUBSPACE_SIZE = int(os.getenv("LAPKIT_SUBSPACE_SIZE", 64))
	BOUNDED_CEILING = float(os.getenv("LAPKIT_BOUNDED_CEILING", 1e8))  # "is bounded" means below this

	# Batch front-end
	WORKERS = int(os.getenv("LAPKIT_WORKERS", 4))
	OUTPUT_DIR = os.getenv("LAPKIT_OUTPUT_DIR", "out")
	RECORD_TIMINGS = int(os.getenv("LAPKIT_RECORD_TIMINGS", 0)) == 1  # timings break byte-identical reports

	if not all([
		N_1D >= 16 and N_1D & (N_1D - 1) == 0,
		N_3D >= 16 and N_3D & (N_3D - 1) == 0,
		HALF_WIDTH > 0,
		MASK_DIVISOR >= 2,
		NORM_STEPS > 0,
		PROBE_STEPS > 0,
		NORM_RTOL > 0,
		SOLVER_TOL > 0,
		SOLVER_MAXITER > 0,
		SOLVER_RESTARTS >= 1,
		BLOWUP_THRESHOLD > 1,
		TOL_GAP_FACTOR >= 0,
		SUBSPACE_SIZE >= 8,
		WORKERS >= 1,
	]):
		raise EnvironmentError("Invalid lapkit environment. Please check the LAPKIT_* variables in your .env file.")

config = Config()

if __name__ == "__main__":
	# For debugging purposes, print the configuration
	print("Configuration loaded successfully:")
	for key, value in vars(Config).items():
		if not key.startswith('__'):
			print(f"{key}: {value}")
