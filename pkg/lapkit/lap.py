import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, aslinearoperator, cg, eigs, eigsh, gmres

from shared.config import config
from shared.models import (
    ConjugateSpec,
    EigenEntry,
    EigenScan,
    EigenSpec,
    GaussianProfile,
    GridSpec,
    LambdaTrend,
    NormSettings,
    PotentialSpec,
    SolverSettings,
    SweepPlan,
    SweepResult,
    SweepRow,
)
from shared.utils import make_rng, random_complex

from .conjugate import build_conjugate
from .errors import ConfigError, GridError, SolverError
from .grid_ops import DENSE_MAX, LinearMap, bracket_p, bracket_q, doubled_grid, estimate_norm, get_grid, identity_map, inverse_abs_q
from .mourre import build_s
from .potentials import HamiltonianPair, assemble_hamiltonian
from .utils import with_restarts

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

PSEUDO_INVERSE_CUTOFF = 1e-10


@dataclass
class SolveDiagnostics:
    iters: int = 0
    residual: float = 0.0
    restarts: int = 0
    valid: bool = True


class ShiftedResolvent:
    """Solves (H - λ + iη) x = b and its adjoint system on one grid.

    Small grids are LU-factorized once; larger ones run preconditioned CG on
    the normal equations under the restart decorator.
    """

    def __init__(self, H: HamiltonianPair, lam: float, eta: float, settings: SolverSettings,
                 dense_h: Optional[np.ndarray] = None):
        if eta <= 0:
            raise SolverError(f"η must be positive, got {eta:g}")
        self.H = H
        self.lam = lam
        self.eta = eta
        self.settings = settings
        self.shift = complex(-lam, eta)
        self.full = H.full
        self.diagnostics = SolveDiagnostics()
        size = H.grid.size
        method = settings.method
        if method == "auto":
            method = "direct" if size <= config.DENSE_LIMIT else "iterative"
        self.method = method

        if method == "direct":
            if dense_h is None:
                dense_h = self.full.dense()
            matrix = dense_h + self.shift * np.eye(size)
            self._lu = sla.lu_factor(matrix)
            self.k_norm = float(max(np.linalg.norm(matrix, 1), np.linalg.norm(matrix, np.inf)))
        else:
            self.k_norm = H.sup_bound + abs(lam) + eta
            g = get_grid(H.grid)
            symbol = 1.0 / (np.square(g.momentum_sq() - lam) + eta**2)
            self._preconditioner = LinearOperator(
                (size, size), matvec=lambda v: g.from_work(g.fourier(g.to_work(v), symbol)), dtype=np.complex128)

    def _k(self, v: np.ndarray) -> np.ndarray:
        return self.full.apply(v) + self.shift * v

    def _k_adjoint(self, v: np.ndarray) -> np.ndarray:
        return self.full.adjoint_apply(v) + np.conj(self.shift) * v

    def backward_error(self, x: np.ndarray, b: np.ndarray, adjoint: bool = False) -> float:
        """||Kx - b|| / (||K|| ||x|| + ||b||)."""
        residual = (self._k_adjoint(x) if adjoint else self._k(x)) - b
        scale = self.k_norm * np.linalg.norm(x) + np.linalg.norm(b)
        return float(np.linalg.norm(residual) / scale) if scale > 0 else 0.0

    def _iterative(self, b: np.ndarray, adjoint: bool = False, maxiter: int = config.SOLVER_MAXITER,
                   attempt: int = 0) -> Tuple[np.ndarray, int, int]:
        size = b.size
        if adjoint:
            normal = LinearOperator((size, size), matvec=lambda v: self._k(self._k_adjoint(v)), dtype=np.complex128)
            rhs = self._k(b)
        else:
            normal = LinearOperator((size, size), matvec=lambda v: self._k_adjoint(self._k(v)), dtype=np.complex128)
            rhs = self._k_adjoint(b)
        counter = [0]

        def count(_):
            counter[0] += 1

        y, info = cg(normal, rhs, rtol=self.settings.tol * 10.0 ** -(attempt + 1), maxiter=maxiter,
                     M=self._preconditioner, callback=count)
        x = self._k_adjoint(y) if adjoint else y
        if info != 0:
            raise SolverError(f"CG stopped after {counter[0]} iterations (info={info}) at λ={self.lam:g} η={self.eta:g}")
        error = self.backward_error(x, b, adjoint)
        if error > self.settings.tol:
            raise SolverError(f"residual {error:.2e} above tolerance at λ={self.lam:g} η={self.eta:g}")
        return x, counter[0], attempt

    def solve(self, b: np.ndarray, adjoint: bool = False) -> Optional[np.ndarray]:
        if self.method == "direct":
            x = sla.lu_solve(self._lu, b, trans=2 if adjoint else 0)
            error = self.backward_error(x, b, adjoint)
            self.diagnostics.residual = max(self.diagnostics.residual, error)
            if error > self.settings.tol:
                self.diagnostics.valid = False
            return x

        solve = with_restarts(restarts=self.settings.restarts, raise_on_failure=False)(self._iterative)
        result = solve(b, adjoint=adjoint, maxiter=self.settings.maxiter)
        if result is None:
            self.diagnostics.valid = False
            return np.zeros_like(b)
        x, iters, attempt = result
        self.diagnostics.iters += iters
        self.diagnostics.restarts = max(self.diagnostics.restarts, attempt)
        self.diagnostics.residual = max(self.diagnostics.residual, self.backward_error(x, b, adjoint))
        return x


def weighted_resolvent_norm(H: HamiltonianPair, lam: float, eta: float, Wl: LinearMap, Wr: LinearMap,
                            settings: SolverSettings = SolverSettings(), norm: NormSettings = NormSettings(),
                            dense_h: Optional[np.ndarray] = None) -> Tuple[Optional[float], SolveDiagnostics]:
    """||Wl (H - λ + iη)^-1 Wr|| as the top singular value of M = Wl R Wr.

    A row whose inner solves fail or exceed the residual tolerance comes back
    with norm None and `valid` False.
    """
    resolvent = ShiftedResolvent(H, lam, eta, settings, dense_h)
    size = H.grid.size

    def matvec(v):
        return Wl.apply(resolvent.solve(Wr.apply(v)))

    def rmatvec(v):
        return Wr.adjoint_apply(resolvent.solve(Wl.adjoint_apply(v), adjoint=True))

    operator = LinearOperator((size, size), matvec=matvec, rmatvec=rmatvec, dtype=np.complex128)
    M = LinearMap(H.grid, operator, tag=f"{Wl.tag} R({lam:g},{eta:g}) {Wr.tag}")
    value, steps = estimate_norm(M, steps=norm.steps, seed=norm.seed, rtol=norm.rtol, method=norm.method)
    diagnostics = resolvent.diagnostics
    if resolvent.method == "direct":
        diagnostics.iters = steps
    if not diagnostics.valid:
        logger.error(f"Row λ={lam:g} η={eta:g} invalid: residual {diagnostics.residual:.2e}")
        return None, diagnostics
    return value, diagnostics


# ---------------------------------------------------------------- weights

def _s_weight(grid: GridSpec, conjugate: ConjugateSpec, potential: Optional[PotentialSpec]) -> LinearMap:
    """G^-1/2 with G = S^+ + A S^+ A, so that ||G^-1/2 R G^-1/2|| bounds |(f, Rf)| / (||S^-1/2 f||^2 + ||S^-1/2 A f||^2)."""
    if grid.size > DENSE_MAX:
        raise GridError(f"S-weights need a dense eigendecomposition, grid size {grid.size} > {DENSE_MAX}")
    S = build_s(grid, "auto", conjugate, potential).dense()
    A = build_conjugate(grid, conjugate).dense()
    values, vectors = np.linalg.eigh(0.5 * (S + S.conj().T))
    keep = values > PSEUDO_INVERSE_CUTOFF * values.max()
    s_plus = (vectors[:, keep] / values[keep]) @ vectors[:, keep].conj().T
    G = s_plus + A @ s_plus @ A
    values, vectors = np.linalg.eigh(0.5 * (G + G.conj().T))
    keep = values > PSEUDO_INVERSE_CUTOFF * values.max()
    root = (vectors[:, keep] / np.sqrt(values[keep])) @ vectors[:, keep].conj().T
    return LinearMap(grid, aslinearoperator(root), hermitian=True, tag="(S^+ + AS^+A)^-1/2")


def sweep_weights(grid: GridSpec, plan: SweepPlan, conjugate: ConjugateSpec,
                  potential: Optional[PotentialSpec] = None) -> Tuple[LinearMap, LinearMap]:
    mu = conjugate.mu if plan.mu is None else plan.mu
    kind = plan.weight
    if kind == "identity":
        one = identity_map(grid)
        return one, one
    if kind == "dilation":
        w = inverse_abs_q(grid)
        return w, w
    if kind == "af":
        w = (bracket_q(grid, -mu / 2.0) @ inverse_abs_q(grid)).retag(f"<q>^-{mu / 2:g}|q|^-1", hermitian=True)
        return w, w
    if kind in ("au", "partial"):
        coords = None
        if kind == "partial":
            coords = conjugate.active_coords
            if coords is None:
                raise ConfigError("partial weights need conjugate.active_coords")
        left = (bracket_p(grid, -mu / 2.0, coords) @ inverse_abs_q(grid, coords)).retag(f"<p>^-{mu / 2:g}|q|^-1")
        right = (inverse_abs_q(grid, coords) @ bracket_p(grid, -mu / 2.0, coords)).retag(f"|q|^-1<p>^-{mu / 2:g}")
        return left, right
    w = _s_weight(grid, conjugate, potential)
    return w, w


# ---------------------------------------------------------------- sweeps

def lambda_trend(lam: float, rows: Sequence[SweepRow], threshold: float) -> LambdaTrend:
    """Decade-normalized growth of the norm between the two smallest η."""
    ordered = sorted(rows, key=lambda r: r.eta, reverse=True)
    norms = [r.norm for r in ordered if r.valid and r.norm is not None]
    sup_norm = max(norms) if norms else None
    if any(not r.valid for r in ordered) or len(ordered) < 2:
        return LambdaTrend(lam=lam, ratio=None, sup_norm=sup_norm, verdict="inconclusive")
    previous, last = ordered[-2], ordered[-1]
    decades = math.log10(previous.eta / last.eta)
    ratio = (last.norm / previous.norm) ** (1.0 / decades) if previous.norm > 0 else math.inf
    blow_up = ratio > threshold or (sup_norm is not None and sup_norm > config.BOUNDED_CEILING)
    return LambdaTrend(lam=lam, ratio=ratio, sup_norm=sup_norm, verdict="blow-up" if blow_up else "bounded")


def _row(H, lam, eta, Wl, Wr, plan: SweepPlan, dense_h, doubled) -> SweepRow:
    value, diagnostics = weighted_resolvent_norm(H, lam, eta, Wl, Wr, plan.solver, plan.norm, dense_h)
    row = SweepRow(lam=lam, eta=eta, norm=value, iters=diagnostics.iters, residual=diagnostics.residual,
                   restarts=diagnostics.restarts, valid=diagnostics.valid)
    if doubled is not None and row.valid:
        H2, Wl2, Wr2 = doubled
        row.l_doubled_norm, _ = weighted_resolvent_norm(H2, lam, eta, Wl2, Wr2, plan.solver, plan.norm)
    logger.info(f"λ={lam:g} η={eta:g}: norm={value} iters={row.iters} residual={row.residual:.1e}")
    return row


def sweep_lambdas(plan: SweepPlan, eigen: Optional[EigenScan] = None) -> List[float]:
    lambdas = list(plan.lambdas)
    if plan.include_eigenvalues and eigen is not None:
        for entry in eigen.entries:
            if entry.bound and all(abs(entry.real - lam) > 1e-12 for lam in lambdas):
                lambdas.append(entry.real)
    return sorted(lambdas)


async def run_sweep_async(H: HamiltonianPair, plan: SweepPlan, conjugate: ConjugateSpec = ConjugateSpec(),
                          eigen: Optional[EigenScan] = None,
                          rebuild: Optional[Callable[[GridSpec], HamiltonianPair]] = None,
                          workers: int = config.WORKERS) -> SweepResult:
    grid = H.grid
    Wl, Wr = sweep_weights(grid, plan, conjugate, H.model.spec)
    dense_h = None
    if plan.solver.method == "direct" or (plan.solver.method == "auto" and grid.size <= config.DENSE_LIMIT):
        dense_h = H.full.dense()

    doubled = None
    if plan.l_doubling:
        if rebuild is None:
            raise ConfigError("l_doubling needs a Hamiltonian rebuild callable")
        grid2 = doubled_grid(grid)
        H2 = rebuild(grid2)
        doubled = (H2, *sweep_weights(grid2, plan, conjugate, H2.model.spec))

    lambdas = sweep_lambdas(plan, eigen)
    keys = [(lam, eta) for lam in lambdas for eta in plan.etas]
    logger.info(f"Sweep over {len(lambdas)} λ x {len(plan.etas)} η with {plan.weight} weights on {workers} workers")

    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        tasks = [loop.run_in_executor(pool, _row, H, lam, eta, Wl, Wr, plan, dense_h, doubled) for lam, eta in keys]
        rows = await asyncio.gather(*tasks)

    by_lambda: Dict[float, List[SweepRow]] = {}
    for row in rows:
        by_lambda.setdefault(row.lam, []).append(row)
    trends = [lambda_trend(lam, by_lambda[lam], plan.threshold) for lam in lambdas]
    result = SweepResult(weight=f"{plan.weight}: {Wl.tag} | {Wr.tag}", threshold=plan.threshold,
                         rows=list(rows), trends=trends)
    if result.invalid_rows:
        logger.error(f"Sweep has invalid rows {result.invalid_rows}")
    logger.info(f"Sweep verdict: {result.verdict}, global sup {result.global_sup}")
    return result


def run_sweep(H: HamiltonianPair, plan: SweepPlan, conjugate: ConjugateSpec = ConjugateSpec(),
              eigen: Optional[EigenScan] = None,
              rebuild: Optional[Callable[[GridSpec], HamiltonianPair]] = None,
              workers: int = config.WORKERS) -> SweepResult:
    return asyncio.run(run_sweep_async(H, plan, conjugate, eigen, rebuild, workers))


def l_doubling_sensitivity(result: SweepResult) -> Optional[float]:
    """Largest relative change of a row norm when L doubles at fixed spacing."""
    changes = [abs(r.l_doubled_norm - r.norm) / r.norm for r in result.rows
               if r.valid and r.norm and r.l_doubled_norm is not None]
    return max(changes) if changes else None


# ---------------------------------------------------------------- eigenvalues

def _shift_inverse(H: HamiltonianPair, sigma: float, dense_h: Optional[np.ndarray]) -> LinearOperator:
    size = H.grid.size
    if dense_h is not None:
        lu = sla.lu_factor(dense_h - sigma * np.eye(size))
        return LinearOperator((size, size), matvec=lambda v: sla.lu_solve(lu, v), dtype=np.complex128)

    shifted = (H.full + (-sigma) * identity_map(H.grid)).as_operator()
    solver = cg if not H.dissipative else gmres

    def matvec(v):
        x, info = solver(shifted, v, rtol=config.SOLVER_TOL, maxiter=config.SOLVER_MAXITER)
        if info != 0:
            logger.warning(f"shift-invert inner solve stopped with info={info}")
        return x

    return LinearOperator((size, size), matvec=matvec, dtype=np.complex128)


def lowest_eigenvalues(H: HamiltonianPair, m: int, spec: EigenSpec = EigenSpec(),
                       seed: Optional[int] = None) -> EigenScan:
    """The m eigenvalues of smallest real part, by shift-invert ARPACK below min V1.

    For a dissipative H, ARPACK returns the eigenvalues nearest the shift in
    modulus, so the scan asks for up to 2m of them and keeps the m with the
    smallest real part.
    """
    if m > 20:
        raise ConfigError(f"at most 20 eigenvalues per scan, asked for {m}")
    grid = H.grid
    g = get_grid(grid)
    size = grid.size
    sigma = float(np.min(H.v1_values)) - 1.0
    dense_h = H.full.dense() if size <= config.DENSE_LIMIT else None
    op_inv = _shift_inverse(H, sigma, dense_h)
    v0 = random_complex(make_rng(seed, 3), size)
    v0 /= np.linalg.norm(v0)
    k = min(2 * m if H.dissipative else m, size - 2)

    converged, note = True, ""
    try:
        if H.dissipative:
            values, vectors = eigs(H.full.as_operator(), k=k, sigma=sigma, which="LM", OPinv=op_inv, v0=v0)
        else:
            values, vectors = eigsh(H.full.as_operator(), k=k, sigma=sigma, which="LM", OPinv=op_inv, v0=v0)
    except ArpackNoConvergence as e:
        values, vectors = e.eigenvalues, e.eigenvectors
        converged = False
        note = f"ARPACK converged {len(values)} of {k} eigenvalues"
        logger.warning(note)

    inside = g.compact_radius() <= grid.L / 2.0
    entries = []
    for j in np.argsort(np.real(values))[:m]:
        weights = np.abs(vectors[:, j]) ** 2
        fraction = float(weights[inside].sum() / weights.sum())
        value = complex(values[j])
        imag = 0.0 if not H.dissipative else value.imag
        entries.append(EigenEntry(real=value.real, imag=imag, interior_fraction=fraction,
                                  bound=fraction >= spec.bound_fraction))
    scan = EigenScan(requested=m, shift=sigma, converged=converged, entries=entries, note=note)
    logger.info(f"Eigenvalue scan: {[round(e.real, 8) for e in entries]} (bound: {sum(e.bound for e in entries)})")
    return scan


def simon_demo(n: int, amplitude: float, grid: Optional[GridSpec] = None) -> Tuple[float, float]:
    """(∫V, lowest eigenvalue) for V = amplitude exp(-|x|^2) in one or two dimensions."""
    if n not in (1, 2):
        raise ConfigError(f"the negative-eigenvalue dichotomy is stated for n = 1, 2, got {n}")
    if grid is None:
        grid = GridSpec(n=n, N=config.N_1D if n == 1 else config.N_3D)
    H = assemble_hamiltonian(grid, PotentialSpec(real=GaussianProfile(amplitude=amplitude, width=1.0)))
    integral = amplitude * math.pi ** (n / 2.0)
    lowest = lowest_eigenvalues(H, 1).entries[0].real
    logger.info(f"Weak-coupling demo n={n}: ∫V={integral:.6g}, lowest eigenvalue {lowest:.6g}")
    return integral, lowest
