"""Process settings, read from the environment (and a local .env file)."""
import os

from dotenv import load_dotenv

load_dotenv()

# Worker cap for per-nu parallel rows (joblib n_jobs)
WORKERS = max(1, int(os.getenv("ROCKAFELLIAN_WORKERS", "1")))
LOG_LEVEL = os.getenv("ROCKAFELLIAN_LOG_LEVEL", "INFO").upper()
LP_ATOM_CAP = int(os.getenv("ROCKAFELLIAN_LP_ATOM_CAP", "400"))
REPORT_DIR = os.getenv("ROCKAFELLIAN_REPORT_DIR", "reports")

# Numerical tolerances shared across modules
MERGE_TOL = 1e-12
MEMBERSHIP_TOL = 1e-12
FEASIBILITY_TOL = 1e-12
QUAD_ABS_TOL = 1e-10
LP_FEASIBILITY_TOL = 1e-9
DISTANCE_FLOOR = 1e-300

REPORT_SCHEMA_VERSION = 1
