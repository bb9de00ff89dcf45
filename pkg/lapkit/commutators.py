import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.config import config
from shared.models import CommutatorCheck, ConjugateSpec, GridSpec, PotentialSpec, PowerProfile

from .conjugate import build_conjugate, dilation_map, f_derivatives, momentum_decay_symbol
from .errors import ConfigError, GridError, NoClosedFormError
from .grid_ops import LinearMap, StateVector, build_operator, estimate_norm, get_grid, interior_states
from .potentials import PotentialModel, assemble_hamiltonian, sample_on_grid, spectral_x_derivative, work_points
from .utils import bracket

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

# tag -> (conjugate kind, order, operator part)
IDENTITIES: Dict[str, Tuple[str, int, str]] = {
    "lap-dilation-1": ("dilation", 1, "laplacian"),
    "lap-dilation-2": ("dilation", 2, "laplacian"),
    "lap-position-1": ("position-decay", 1, "laplacian"),
    "lap-position-2": ("position-decay", 2, "laplacian"),
    "lap-momentum-1": ("momentum-decay", 1, "laplacian"),
    "lap-momentum-2": ("momentum-decay", 2, "laplacian"),
    "s1-momentum-1": ("momentum-decay", 1, "s1"),
    "pot-dilation-1": ("dilation", 1, "potential"),
    "pot-dilation-2": ("dilation", 2, "potential"),
    "pot-position-1": ("position-decay", 1, "potential"),
    "pot-position-2": ("position-decay", 2, "potential"),
    "h-position-1d": ("position-decay", 1, "hamiltonian"),
}

# stand-in potential for potential identities when the run has V = 0
PROBE_POTENTIAL = PotentialSpec(real=PowerProfile(amplitude=1.0, exponent=4.0))


@dataclass
class CommutatorPair:
    discrete: LinearMap
    analytic: LinearMap
    tag: str


@dataclass
class RegularityTrend:
    coarse: List[float]
    fine: List[float]
    growth: List[float] = field(default_factory=list)
    label: str = "heuristic"

    @property
    def grows(self) -> bool:
        return any(g > 1.5 for g in self.growth)


def discrete_commutator(T: LinearMap, A: LinearMap, order: int = 1) -> LinearMap:
    """[T, iA] = i(TA - AT); order 2 iterates it once more."""
    if order not in (1, 2):
        raise ConfigError(f"commutator order must be 1 or 2, got {order}")
    result = (1j * (T @ A - A @ T)).retag(f"[{T.tag}, i{A.tag}]", hermitian=T.hermitian and A.hermitian)
    if order == 2:
        return discrete_commutator(result, A, 1)
    return result


# ---------------------------------------------------------------- closed forms, Laplacian part

def _laplacian_k(grid: GridSpec, coords: Optional[Sequence[int]], scale: float, tag: str) -> LinearMap:
    if coords is None:
        return (scale * build_operator(grid, "laplacian")).retag(tag, hermitian=True)
    g = get_grid(grid)
    return build_operator(grid, "momentum", scale * g.momentum_sq(coords), tag=tag)


def _kinetic_1d(grid: GridSpec, weight: np.ndarray, multiplier: np.ndarray, tag: str) -> LinearMap:
    """p weight(q) p + multiplier(q) on a one-dimensional working array."""
    g = get_grid(grid)
    return LinearMap.from_work(
        grid, lambda w: g.deriv(weight * g.deriv(w, 0), 0) + multiplier * w, hermitian=True, tag=tag
    )


def _laplacian_part(grid: GridSpec, spec: ConjugateSpec, order: int) -> LinearMap:
    g = get_grid(grid)
    coords = spec.active_coords
    mu = spec.mu

    if spec.kind == "dilation":
        scale = 2.0 if order == 1 else 4.0
        return _laplacian_k(grid, coords, scale, f"{scale:g}Δ" + ("" if coords is None else "_K"))

    if spec.kind == "position-decay":
        if g.dim == 1:
            x = g.coords[0]
            f = f_derivatives(mu, x)
            c = g.centrifugal
            if order == 1:
                extra = 2.0 * c * f.F / x**3 if c else 0.0
                return _kinetic_1d(grid, 2.0 * f.F1, -0.5 * f.F3 + extra, "2pF'p - F'''/2")
            extra = 0.0
            if c:
                extra = -2.0 * c * f.F * (f.F1 / x**3 - 3.0 * f.F / x**4)
            weight = 2.0 * (2.0 * f.F1**2 - f.F * f.F2)
            multiplier = -(f.F3 * f.F1 + f.F2**2) + 0.5 * f.F * f.F4 + extra
            return _kinetic_1d(grid, weight, multiplier, "2p(2F'^2 - FF'')p - (F'''F' + F''^2) + FF''''/2")
        if order == 2:
            raise NoClosedFormError("no closed form for [[Δ, iA_F], iA_F] in n >= 2")
        R = g.subset_radius(coords)
        damp = build_operator(grid, "position", bracket(R, -mu / 2.0), tag="g")
        decay = build_operator(grid, "position", bracket(R, -mu / 2.0 - 2.0), tag="g<q>^-2")
        A = dilation_map(grid, coords)
        lap_k = _laplacian_k(grid, coords, 1.0, "Δ_K")
        sym = A @ decay + decay @ A
        result = 2.0 * (damp @ lap_k @ damp) - (mu / 2.0) * (sym @ A @ damp + damp @ A @ sym)
        return result.retag("2gΔg - (mu/2)[(Ah+hA)Ag + gA(Ah+hA)]", hermitian=True)

    if g.radial and grid.n != 3:
        raise NoClosedFormError(f"momentum multipliers are inexact on the radial reduction for n={grid.n}")
    xi_k2 = g.momentum_sq(coords)
    lam = momentum_decay_symbol(grid, mu, coords)
    if order == 1:
        return build_operator(grid, "momentum", 2.0 * xi_k2 * lam, tag="2Δλ(p)")
    symbol = 2.0 * xi_k2 * lam**2 * (2.0 - mu * xi_k2 / (1.0 + xi_k2))
    return build_operator(grid, "momentum", symbol, tag="2Δλ²(2 - mu|p|²<p>^-2)")


def s1_commutator(grid: GridSpec, spec: ConjugateSpec) -> LinearMap:
    """[Δλ(p), iA_u] as a Fourier multiplier."""
    g = get_grid(grid)
    if spec.kind != "momentum-decay":
        raise NoClosedFormError("[Δλ(p), iA] has a closed form only for momentum-decay conjugates")
    if g.radial and grid.n != 3:
        raise NoClosedFormError(f"momentum multipliers are inexact on the radial reduction for n={grid.n}")
    mu = spec.mu
    xi2 = g.momentum_sq()
    xi_k2 = g.momentum_sq(spec.active_coords)
    lam = momentum_decay_symbol(grid, mu, spec.active_coords)
    symbol = lam**2 * (2.0 * xi_k2 - mu * xi2 * xi_k2 / (1.0 + xi_k2))
    return build_operator(grid, "momentum", symbol, tag="|p|²λ²(2 - mu|p|²<p>^-2)")


def s1_operator(grid: GridSpec, spec: ConjugateSpec) -> LinearMap:
    g = get_grid(grid)
    return build_operator(grid, "momentum", g.momentum_sq() * momentum_decay_symbol(grid, spec.mu, spec.active_coords),
                          tag="Δλ(p)")


# ---------------------------------------------------------------- closed forms, potential part

def _x_derivative_values(grid: GridSpec, model: PotentialModel, part: str, coords, allow_spectral: bool) -> np.ndarray:
    points = work_points(grid)
    values = model.x_derivative(points, part, coords)
    if values is not None:
        return np.asarray(values).reshape(get_grid(grid).work_shape)
    if not allow_spectral:
        raise NoClosedFormError(f"{model.tag}: no analytic gradient for the {part} part")
    sampled = sample_on_grid(grid, lambda x: model.value(x, part))
    return spectral_x_derivative(grid, sampled, coords)


def _potential_part(grid: GridSpec, spec: ConjugateSpec, order: int, model: PotentialModel, part: str,
                    allow_spectral: bool = False) -> LinearMap:
    g = get_grid(grid)
    coords = spec.active_coords
    label = "V1" if part == "real" else "V2"

    if spec.kind == "momentum-decay":
        raise NoClosedFormError("no closed form for [V, iA_u]: the commutator is nonlocal")

    U = _x_derivative_values(grid, model, part, coords, allow_spectral)

    if spec.kind == "dilation":
        if order == 1:
            return build_operator(grid, "position", -U, tag=f"-q·∇{label}")
        axes = range(g.dim) if coords is None else [j - 1 for j in coords]
        n_eff = 1 if g.radial else len(list(axes))

        def apply(w):
            qp = sum(g.coords[j] * g.deriv(w, j) for j in axes)
            pq = sum(g.deriv(g.coords[j] * U * w, j) for j in axes)
            return -1j * U * qp + 1j * pq - n_eff * U * w

        return LinearMap.from_work(grid, apply, hermitian=True, tag=f"-iU(q·p) + i(p·q)U - {n_eff}U, U=q·∇{label}")

    R = g.subset_radius(coords)
    if order == 1:
        return build_operator(grid, "position", -bracket(R, -spec.mu) * U, tag=f"-F·∇{label}")

    if not model.is_radial or coords is not None:
        raise NoClosedFormError("second-order A_F potential identity needs a radial profile and all coordinates")
    r = g.radius
    _, v1, v2 = model.radial_derivatives(r, part)
    if v1 is None or v2 is None:
        raise NoClosedFormError(f"{model.tag}: no analytic second derivative for the {part} part")
    f = f_derivatives(spec.mu, r)
    return build_operator(grid, "position", f.F * (f.F1 * v1 + f.F * v2), tag=f"F(F'v' + Fv'') [{label}]")


def analytic_commutator(grid: GridSpec, spec: ConjugateSpec, order: int, laplacian: bool = True,
                        potential: Optional[PotentialSpec] = None, part: str = "real",
                        allow_spectral: bool = False) -> LinearMap:
    """Closed-form [T, iA] (order 1) or [[T, iA], iA] (order 2) for T = Δ and/or the potential.

    `part` selects V1 ("real"), V2 ("imag") or V1 + iV2 ("full").
    """
    if order not in (1, 2):
        raise ConfigError(f"commutator order must be 1 or 2, got {order}")
    pieces = []
    if laplacian:
        pieces.append(_laplacian_part(grid, spec, order))
    if potential is not None:
        model = PotentialModel(potential, grid.n)
        if part in ("real", "full"):
            pieces.append(_potential_part(grid, spec, order, model, "real", allow_spectral))
        if part in ("imag", "full") and model.has_imaginary:
            pieces.append(1j * _potential_part(grid, spec, order, model, "imag", allow_spectral))
    if not pieces:
        raise ConfigError("analytic_commutator needs the Laplacian, a potential, or both")
    result = pieces[0]
    for piece in pieces[1:]:
        result = result + piece
    return result.retag(" + ".join(p.tag for p in pieces))


# ---------------------------------------------------------------- identity catalogue

def identity_pair(tag: str, grid: GridSpec, conjugate: ConjugateSpec,
                  potential: Optional[PotentialSpec] = None) -> CommutatorPair:
    if tag not in IDENTITIES:
        raise ConfigError(f"unknown identity {tag!r}, expected one of {sorted(IDENTITIES)}")
    kind, order, part = IDENTITIES[tag]
    if conjugate.kind != kind:
        raise ConfigError(f"identity {tag} needs a {kind} conjugate, run uses {conjugate.kind}")
    A = build_conjugate(grid, conjugate)

    if part == "laplacian":
        T = build_operator(grid, "laplacian")
        analytic = analytic_commutator(grid, conjugate, order)
    elif part == "s1":
        T = s1_operator(grid, conjugate)
        analytic = s1_commutator(grid, conjugate)
    else:
        if potential is None or (potential.real.kind == "zero" and potential.imaginary is None):
            potential = PROBE_POTENTIAL
        H = assemble_hamiltonian(grid, potential)
        if part == "potential":
            T = H.v1
            analytic = analytic_commutator(grid, conjugate, order, laplacian=False, potential=potential)
        else:
            if get_grid(grid).dim != 1:
                raise NoClosedFormError("the [H, iA_F] decomposition is one-dimensional")
            T = H.full
            analytic = analytic_commutator(grid, conjugate, order, laplacian=True, potential=potential, part="full")

    return CommutatorPair(discrete_commutator(T, A, order), analytic, tag)


def applicable_identities(grid: GridSpec, conjugate: ConjugateSpec, potential: Optional[PotentialSpec] = None) -> List[str]:
    tags = []
    for tag, (kind, _, _) in IDENTITIES.items():
        if kind != conjugate.kind:
            continue
        try:
            identity_pair(tag, grid, conjugate, potential)
        except NoClosedFormError as e:
            logger.info(f"Skipping identity {tag}: {e}")
            continue
        tags.append(tag)
    return tags


def cross_validate(pair: CommutatorPair, states: Sequence[StateVector], workers: int = config.WORKERS) -> float:
    """max_f ||(D - A) f|| / max(||D f||, ||A f||, eps) over the states."""
    if not states:
        raise GridError("cross_validate needs at least one state")

    def deviation(state: StateVector) -> float:
        d = pair.discrete.apply(state)
        a = pair.analytic.apply(state)
        scale = max(np.linalg.norm(d), np.linalg.norm(a), np.finfo(float).tiny)
        return float(np.linalg.norm(d - a) / scale)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        deviations = list(pool.map(deviation, states))
    worst = max(deviations)
    logger.info(f"{pair.tag}: max relative deviation {worst:.3e} over {len(states)} states")
    return worst


def check_identity(tag: str, grid: GridSpec, conjugate: ConjugateSpec, potential: Optional[PotentialSpec] = None,
                   states: int = 8, seed: Optional[int] = None, tolerance: float = 1e-4) -> CommutatorCheck:
    pair = identity_pair(tag, grid, conjugate, potential)
    probe = interior_states(grid, states, seed)
    return CommutatorCheck(identity=tag, grid=grid, deviation=cross_validate(pair, probe), states=len(probe),
                           tolerance=tolerance, note=f"analytic: {pair.analytic.tag}")


# ---------------------------------------------------------------- regularity

def regularity_probe(T: LinearMap, A: LinearMap, kmax: int = 2, steps: int = config.PROBE_STEPS,
                     seed: Optional[int] = None) -> List[float]:
    """Power-iteration norms of ad^p (p = 1..kmax) with the fixed seed and step count."""
    if not 1 <= kmax <= 3:
        raise ConfigError(f"regularity_probe supports kmax in 1..3, got {kmax}")
    norms = []
    current = T
    for p in range(1, kmax + 1):
        current = discrete_commutator(current, A, 1)
        norm, _ = estimate_norm(current, steps=steps, seed=seed, rtol=0.0)
        norms.append(norm)
    logger.info(f"Regularity probe [{T.tag}] vs {A.tag}: {['%.3e' % x for x in norms]}")
    return norms


def regularity_refinement(build: Callable[[GridSpec], Tuple[LinearMap, LinearMap]], grid: GridSpec,
                          kmax: int = 2, seed: Optional[int] = None) -> RegularityTrend:
    """Probe on N and 2N points at fixed L. Growth is evidence against boundedness, not proof."""
    fine_grid = GridSpec.model_validate({**grid.model_dump(), "N": 2 * grid.N, "epsilon0": grid.eps0})
    coarse = regularity_probe(*build(grid), kmax=kmax, seed=seed)
    fine = regularity_probe(*build(fine_grid), kmax=kmax, seed=seed)
    growth = [f / c if c > 0 else float("inf") for c, f in zip(coarse, fine)]
    return RegularityTrend(coarse=coarse, fine=fine, growth=growth)
