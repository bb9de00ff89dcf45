from shared.config import config

from .errors import (
    AdmissibilityError,
    ConfigError,
    GridError,
    LapkitError,
    NoClosedFormError,
    SamplingError,
    SolverError,
)
from .report import emit_report, exit_code, load_config, load_report, run_config

__version__ = config.APP_VERSION
