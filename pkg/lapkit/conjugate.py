import logging
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from shared.config import config
from shared.models import ConjugateSpec, GridSpec

from .errors import AdmissibilityError, GridError
from .grid_ops import LinearMap, bracket_q, build_operator, get_grid
from .utils import bracket

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)


class FProfile(NamedTuple):
    """F(x) = x<x>^-mu and its first four derivatives."""
    F: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    F3: np.ndarray
    F4: np.ndarray


class ConjugateMap(LinearMap):
    """A conjugate operator together with the ConjugateSpec it was built from."""

    def __init__(self, base: LinearMap, spec: ConjugateSpec):
        super().__init__(base.grid, base.op, hermitian=True, tag=base.tag)
        self.spec = spec


def position_decay_bound(n: int) -> float:
    """(1 + n/(n-2))^-2, the open upper end of the admissible mu range for n >= 3."""
    return (1.0 + n / (n - 2.0)) ** -2


def check_admissible(spec: ConjugateSpec, n: int) -> None:
    """Raise AdmissibilityError (or warn under `override`) when mu leaves the theorem's range."""
    mu = spec.mu
    problem = None
    if spec.kind == "position-decay":
        if n >= 3:
            bound = position_decay_bound(n)
            if not mu < bound:
                problem = f"position-decay needs 0 <= mu < (1+n/(n-2))^-2 = {bound:.6g} for n={n}, got mu={mu:g}"
        elif mu > 1.0:
            problem = f"position-decay needs 0 <= mu <= 1 for n={n}, got mu={mu:g}"
        elif n == 2:
            logger.warning("No position-decay theorem covers n=2; using the one-dimensional range 0 <= mu <= 1")
    elif spec.kind == "momentum-decay":
        if not 0.0 < mu < 2.0:
            problem = f"momentum-decay needs 0 < mu < 2, got mu={mu:g}"

    if problem is None:
        return
    if spec.override:
        logger.warning(f"Admissibility override: {problem}")
        return
    raise AdmissibilityError(problem)


def f_derivatives(mu: float, x: Union[float, np.ndarray]) -> FProfile:
    x = np.asarray(x, dtype=float)
    b = bracket(x)
    F = x * b**-mu
    F1 = (1 - mu) * b**-mu + mu * b ** (-mu - 2)
    F2 = -mu * x * b ** (-mu - 2) * (1 - mu + (mu + 2) * b**-2)
    c2 = mu * (1 - mu) * (1 + mu)
    c4 = 2 * mu * (mu + 2) * (1 + mu)
    c6 = -mu * (mu + 2) * (mu + 4)
    F3 = c2 * b ** (-mu - 2) + c4 * b ** (-mu - 4) + c6 * b ** (-mu - 6)
    F4 = x * (-(mu + 2) * c2 * b ** (-mu - 4) - (mu + 4) * c4 * b ** (-mu - 6) - (mu + 6) * c6 * b ** (-mu - 8))
    return FProfile(F, F1, F2, F3, F4)


def w_profile(mu: float, v1prime: Union[Callable, float, np.ndarray], x: Union[float, np.ndarray]) -> np.ndarray:
    """W(x) = -F(x) V1'(x) - F'''(x)/2. The sign is not checked here."""
    slope = v1prime(x) if callable(v1prime) else v1prime
    f = f_derivatives(mu, x)
    return -f.F * slope - 0.5 * f.F3


def _axes(grid: GridSpec, coords: Optional[Sequence[int]]) -> list:
    g = get_grid(grid)
    if coords is None:
        return list(range(g.dim))
    g.coord_subset(coords)
    return [j - 1 for j in coords]


def dilation_map(grid: GridSpec, coords: Optional[Sequence[int]] = None) -> LinearMap:
    """A_D = (1/2) sum_j (q_j p_j + p_j q_j) over the active coordinates."""
    g = get_grid(grid)
    axes = _axes(grid, coords)

    def apply(w):
        out = np.zeros_like(w)
        for j in axes:
            x = g.coords[j]
            out += x * g.deriv(w, j) + g.deriv(x * w, j)
        return 0.5 * out

    suffix = "" if coords is None else f" K={list(coords)}"
    return LinearMap.from_work(grid, apply, hermitian=True, tag=f"A_D{suffix}")


def momentum_decay_symbol(grid: GridSpec, mu: float, coords: Optional[Sequence[int]] = None) -> np.ndarray:
    """lambda(xi) = <xi_K>^-mu on the working dual lattice."""
    g = get_grid(grid)
    return bracket(np.sqrt(g.momentum_sq(coords)), -mu)


def build_conjugate(grid: GridSpec, spec: ConjugateSpec) -> ConjugateMap:
    g = get_grid(grid)
    coords = spec.active_coords
    if coords is not None and g.radial:
        raise GridError("partial-direction conjugates need a tensor grid")
    check_admissible(spec, grid.n)

    dilation = dilation_map(grid, coords)
    suffix = "" if coords is None else f" K={list(coords)}"
    flag = " [override]" if spec.override else ""

    if spec.kind == "dilation":
        return ConjugateMap(dilation.retag(f"A_D{suffix}{flag}"), spec)

    if spec.kind == "position-decay":
        damp = bracket_q(grid, -spec.mu / 2.0, coords)
        composed = damp @ dilation @ damp
        return ConjugateMap(composed.retag(f"A_F mu={spec.mu:g}{suffix}{flag}", hermitian=True), spec)

    lam = build_operator(grid, "momentum", momentum_decay_symbol(grid, spec.mu, coords), tag=f"<p>^-{spec.mu:g}")
    composed = 0.5 * (dilation @ lam + lam @ dilation)
    return ConjugateMap(composed.retag(f"A_u mu={spec.mu:g}{suffix}{flag}", hermitian=True), spec)
