import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from shared.config import config
from shared.models import ConjugateSpec, GridSpec, MourreCertificate, OscillatingProfile, PotentialSpec

from .commutators import discrete_commutator, s1_operator
from .conjugate import build_conjugate, f_derivatives, position_decay_bound
from .errors import AdmissibilityError, NoClosedFormError
from .grid_ops import (
    LinearMap,
    StateVector,
    bracket_q,
    build_operator,
    get_grid,
    hermitian_defect,
    interior_states,
    orthonormalize,
)
from .potentials import HamiltonianPair, PotentialModel, assemble_hamiltonian, work_points
from .utils import bracket

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

SKIP_BELOW = 1e-14


@dataclass
class ProbeEstimate:
    value: Optional[float]
    used: int
    skipped: int


def subspace_states(grid: GridSpec, size: int = config.SUBSPACE_SIZE, seed: Optional[int] = None) -> List[StateVector]:
    """Half Gaussians, half Gabor sums, masked, band-limited and orthonormalized."""
    return orthonormalize(interior_states(grid, size, seed, kind="mixed"))


def gram_matrix(op: LinearMap, basis: Sequence[StateVector], workers: int = config.WORKERS) -> np.ndarray:
    """G_ij = (e_i, op e_j) in the grid inner product, Hermitian part."""
    g = get_grid(op.grid)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        columns = list(pool.map(op.apply, [s.values for s in basis]))
    vectors = np.column_stack([s.values for s in basis])
    gram = g.weight * (vectors.conj().T @ np.column_stack(columns))
    return 0.5 * (gram + gram.conj().T)


def _min_eig(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


def _check_s(S: LinearMap):
    defect = hermitian_defect(S)
    if defect > 1e-10:
        raise AdmissibilityError(f"S must be Hermitian, defect {defect:.3e}")


def _check_c1(A: LinearMap, c1: float):
    spec = getattr(A, "spec", None)
    if c1 > 0 and (spec is None or spec.kind != "dilation"):
        raise AdmissibilityError("c1 > 0 needs the dilation generator: other conjugates do not reproduce Δ")
    if not 0 <= c1 < 2:
        raise AdmissibilityError(f"c1 must lie in [0, 2), got {c1:g}")


def verify_weak_mourre(H: HamiltonianPair, A: LinearMap, S: LinearMap, c1: float, subspace: Sequence[StateVector],
                       probes: int = 32, seed: Optional[int] = None, w_star: Optional[float] = None,
                       workers: int = config.WORKERS) -> MourreCertificate:
    """Check [Re H, iA] - c1 Re H >= S > 0 and the dissipativity condition as forms on `subspace`."""
    _check_s(S)
    _check_c1(A, c1)

    commutator = discrete_commutator(H.re, A)
    g_comm = gram_matrix(commutator, subspace, workers)
    g_s = gram_matrix(S, subspace, workers)
    g_re = gram_matrix(H.re, subspace, workers) if c1 > 0 else np.zeros_like(g_comm)

    gap = _min_eig(g_comm - c1 * g_re - g_s)
    injectivity = _min_eig(g_s)
    dissipativity = _min_eig(gram_matrix(H.im, subspace, workers))
    if c1 > 0:
        im_commutator = discrete_commutator(H.im, A)
        dissipativity = min(dissipativity, c1 * _min_eig(gram_matrix(im_commutator, subspace, workers)))

    scale = max(np.linalg.norm(g_comm, 2), np.linalg.norm(g_s, 2), c1 * np.linalg.norm(g_re, 2))
    tol_gap = config.TOL_GAP_FACTOR * scale

    relative = estimate_relative_bound(H, A, probes, seed)
    second_order = estimate_second_order_C(H, A, S, probes, seed)

    certificate = MourreCertificate(
        c1=c1,
        s_descriptor=S.tag,
        conjugate=A.tag,
        gap=gap,
        injectivity_margin=injectivity,
        second_order_constant=second_order.value,
        relative_bound_constant=relative.value,
        dissipativity_margin=dissipativity,
        tol_gap=tol_gap,
        subspace_dim=len(subspace),
        w_star=w_star,
        grid=H.grid,
    )
    logger.info(f"Mourre certificate {A.tag} / S={S.tag}: gap={gap:.3e} (tol {tol_gap:.1e}), "
                f"injectivity={injectivity:.3e}, verdict {certificate.verdict}")
    return certificate


def estimate_relative_bound(H: HamiltonianPair, A: LinearMap, probes: int = 32,
                            seed: Optional[int] = None) -> ProbeEstimate:
    """max |(f, [H, A] g)| / (||f|| ||(H + i) g||) over random interior pairs."""
    grid = H.grid
    g = get_grid(grid)
    states = interior_states(grid, 2 * probes, seed)
    op = H.full
    best, used, skipped = None, 0, 0
    for f, h in zip(states[:probes], states[probes:]):
        Hh = op.apply(h)
        denominator = f.norm * g.norm(Hh + 1j * h.values)
        if denominator < SKIP_BELOW:
            skipped += 1
            continue
        bracket_value = op.apply(A.apply(h)) - A.apply(Hh)
        ratio = abs(g.inner(f.values, bracket_value)) / denominator
        best = ratio if best is None else max(best, ratio)
        used += 1
    if skipped:
        logger.warning(f"estimate_relative_bound skipped {skipped} of {probes} pairs with vanishing denominators")
    return ProbeEstimate(best, used, skipped)


def estimate_second_order_C(H: HamiltonianPair, A: LinearMap, S: LinearMap, probes: int = 32,
                            seed: Optional[int] = None, workers: int = config.WORKERS) -> ProbeEstimate:
    """max |(f, [[H, iA], iA] f)| / (f, S f) over random interior states."""
    grid = H.grid
    g = get_grid(grid)
    second = discrete_commutator(H.full, A, order=2)
    states = interior_states(grid, probes, seed)

    def ratio(state: StateVector) -> Optional[float]:
        denominator = float(np.real(g.inner(state.values, S.apply(state))))
        if denominator < SKIP_BELOW:
            return None
        return abs(g.inner(state.values, second.apply(state))) / denominator

    with ThreadPoolExecutor(max_workers=workers) as pool:
        ratios = list(pool.map(ratio, states))
    kept = [r for r in ratios if r is not None]
    skipped = len(ratios) - len(kept)
    if skipped:
        logger.warning(f"estimate_second_order_C skipped {skipped} of {probes} probes with (f, Sf) < {SKIP_BELOW:g}")
    return ProbeEstimate(max(kept) if kept else None, len(kept), skipped)


# ---------------------------------------------------------------- S choices

def resolve_s_kind(kind: str, grid: GridSpec, conjugate: ConjugateSpec) -> str:
    if kind != "auto":
        return kind
    if conjugate.kind == "dilation":
        return "laplacian"
    if conjugate.kind == "momentum-decay":
        return "laplacian-lambda"
    if get_grid(grid).dim == 1 and grid.geometry == "tensor":
        return "f-kinetic"
    return "weighted-laplacian" if grid.n >= 3 else "laplacian"


def build_s(grid: GridSpec, kind: str, conjugate: ConjugateSpec, potential: Optional[PotentialSpec] = None,
            scale: Optional[float] = None, c1: float = 0.0) -> LinearMap:
    """The positive operator S of the commutator estimate for the chosen conjugate."""
    kind = resolve_s_kind(kind, grid, conjugate)
    g = get_grid(grid)
    coords = conjugate.active_coords

    if kind == "laplacian":
        factor = (2.0 - c1) if scale is None else scale
        if coords is None:
            base = build_operator(grid, "laplacian")
        else:
            base = build_operator(grid, "momentum", g.momentum_sq(coords), tag="Δ_K")
        return (factor * base).retag(f"{factor:g}{base.tag}", hermitian=True)

    if kind == "weighted-laplacian":
        n = grid.n if coords is None else len(coords)
        if n < 3:
            raise AdmissibilityError(f"the weighted Laplacian lower bound needs n >= 3 (Hardy), got {n}")
        mu = conjugate.mu
        factor = 2.0 * (1.0 - mu / position_decay_bound(n)) if scale is None else scale
        damp = bracket_q(grid, -mu / 2.0, coords)
        base = build_operator(grid, "laplacian")
        return (factor * (damp @ base @ damp)).retag(f"{factor:.6g}<q>^-{mu / 2:g}Δ<q>^-{mu / 2:g}", hermitian=True)

    if kind == "f-kinetic":
        if g.dim != 1:
            raise NoClosedFormError("S = 2pF'(q)p + W(q) is one-dimensional")
        mu = conjugate.mu
        x = g.coords[0]
        f = f_derivatives(mu, x)
        model = PotentialModel(potential or PotentialSpec(), grid.n)
        slope_term = model.x_derivative(work_points(grid), "real")
        if slope_term is None:
            raise NoClosedFormError(f"{model.tag}: W needs an analytic V1'")
        # -F V1' = -<x>^-mu x V1'
        W = -bracket(np.abs(x), -mu) * slope_term.reshape(g.work_shape) - 0.5 * f.F3
        if g.centrifugal:
            W = W + 2.0 * g.centrifugal * f.F / x**3
        factor = 1.0 if scale is None else scale
        return LinearMap.from_work(
            grid, lambda w: factor * (2.0 * g.deriv(f.F1 * g.deriv(w, 0), 0) + W * w),
            hermitian=True, tag=f"{factor:g}(2pF'p + W)",
        )

    if kind == "laplacian-lambda":
        factor = 2.0 if scale is None else scale
        return (factor * s1_operator(grid, conjugate)).retag(f"{factor:g}Δλ(p)", hermitian=True)

    raise AdmissibilityError(f"unknown S kind {kind!r}")


# ---------------------------------------------------------------- empirical "w small enough"

def mourre_gap(H: HamiltonianPair, A: LinearMap, S: LinearMap, subspace: Sequence[StateVector],
               workers: int = config.WORKERS) -> tuple:
    """(gap, tol_gap) of [Re H, iA] - S on the subspace."""
    g_comm = gram_matrix(discrete_commutator(H.re, A), subspace, workers)
    g_s = gram_matrix(S, subspace, workers)
    tol = config.TOL_GAP_FACTOR * max(np.linalg.norm(g_comm, 2), np.linalg.norm(g_s, 2))
    return _min_eig(g_comm - g_s), tol


def empirical_w_star(grid: GridSpec, template: OscillatingProfile, conjugate: ConjugateSpec,
                     ladder: Sequence[float], subspace: Optional[Sequence[StateVector]] = None,
                     seed: Optional[int] = None) -> Optional[float]:
    """Largest amplitude on the ascending ladder whose gap against S = Δλ(p) stays above -tol."""
    if conjugate.kind != "momentum-decay":
        raise AdmissibilityError("w* is estimated with a momentum-decay conjugate")
    A = build_conjugate(grid, conjugate)
    S = s1_operator(grid, conjugate)
    basis = list(subspace) if subspace is not None else subspace_states(grid, seed=seed)
    w_star = None
    for w in sorted(abs(x) for x in ladder):
        H = assemble_hamiltonian(grid, PotentialSpec(real=template.model_copy(update={"w": w})))
        gap, tol = mourre_gap(H, A, S, basis)
        logger.info(f"w={w:g}: gap {gap:.3e} (tol {tol:.1e})")
        if gap < -tol:
            break
        w_star = w
    return w_star
