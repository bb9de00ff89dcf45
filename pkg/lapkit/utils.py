import logging
from functools import wraps

import numpy as np

from shared.config import config

from .errors import SolverError

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)


def with_restarts(restarts: int = config.SOLVER_RESTARTS, retry_on_None: bool = True, raise_on_failure: bool = True):
    """Retry an iterative solve, doubling its `maxiter` budget on every attempt.

    The wrapped function receives `maxiter` and `attempt` keyword arguments. It
    signals non-convergence by raising SolverError or, with `retry_on_None`,
    by returning None.
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            budget = kwargs.pop("maxiter", config.SOLVER_MAXITER)
            last_error = None
            for attempt in range(restarts):
                try:
                    return_value = func(*args, maxiter=budget, attempt=attempt, **kwargs)
                    if return_value is None and retry_on_None:
                        last_error = SolverError(f"{func.__name__} returned no solution")
                        raise last_error
                    return return_value
                except SolverError as e:
                    last_error = e
                    if attempt < restarts - 1:
                        budget *= 2
                        logger.warning(f"Attempt {attempt + 1} of {func.__name__} failed ({e}). Restarting with maxiter={budget}...")

            if raise_on_failure:
                raise last_error if last_error else SolverError("Unknown solver failure")
            logger.error(f"{func.__name__} failed after {restarts} attempts: {last_error}")
            return None
        return wrapper
    return decorator


def bracket(x, power: float = 1.0):
    """<x>^power = (1 + x^2)^(power/2), elementwise."""
    return np.power(1.0 + np.square(x), 0.5 * power)


def smoothstep7(t):
    """Order-7 smoothstep: 0 for t <= 0, 1 for t >= 1, three vanishing derivatives at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def smoothstep7_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 140.0 * t**3 * (1.0 - t) ** 3


def smoothstep7_d2(t):
    t = np.clip(t, 0.0, 1.0)
    return 420.0 * t**2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t)
