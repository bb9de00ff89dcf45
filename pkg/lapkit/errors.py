class LapkitError(Exception):
    """Base class for every failure raised by lapkit."""


class GridError(LapkitError, ValueError):
    """Grid, symbol or state problems (non-finite symbols, mismatched grids)."""


class AdmissibilityError(LapkitError, ValueError):
    """A parameter lies outside the range the cited theorem allows."""


class NoClosedFormError(LapkitError):
    """No closed-form commutator identity exists for the requested triple."""


class SolverError(LapkitError):
    """An inner solve did not reach its residual tolerance after all restarts."""


class SamplingError(LapkitError, ValueError):
    """A sampled closure returned a non-finite value."""


class ConfigError(LapkitError, ValueError):
    """Cross-field inconsistency in a run config."""
