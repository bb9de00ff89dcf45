import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from shared.config import config
from shared.models import HSDemoRecord, HSDemoSpec
from shared.utils import make_rng, random_complex

from .errors import AdmissibilityError, ConfigError, SolverError
from .utils import bracket, smoothstep7, smoothstep7_d1

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

DENSE_DIMENSION = 512
U_MAX = 20.0
CHUNK = 4096


# ---------------------------------------------------------------- symbols

@dataclass
class Symbol:
    """phi with closed-form derivatives; phi lies in the class S^rho."""
    name: str
    rho: float
    derivative: Callable[[int, np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.derivative(0, np.asarray(x, dtype=float))


def _bracket_power(a: float) -> Callable[[int, np.ndarray], np.ndarray]:
    """d^j/dx^j <x>^a = P_j(x) <x>^(a-2j), P_{j+1} = P_j'(1+x^2) + (a-2j) x P_j."""
    polys = [Polynomial([1.0])]
    one_plus_sq = Polynomial([1.0, 0.0, 1.0])
    x = Polynomial([0.0, 1.0])

    def derivative(j: int, values: np.ndarray) -> np.ndarray:
        while len(polys) <= j:
            m = len(polys) - 1
            polys.append(polys[m].deriv() * one_plus_sq + (a - 2 * m) * x * polys[m])
        return polys[j](values) * bracket(values, a - 2 * j)

    return derivative


def _tanh() -> Callable[[int, np.ndarray], np.ndarray]:
    """d/dx P(tanh x) = P'(t)(1 - t^2)."""
    polys = [Polynomial([0.0, 1.0])]
    one_minus_sq = Polynomial([1.0, 0.0, -1.0])

    def derivative(j: int, values: np.ndarray) -> np.ndarray:
        while len(polys) <= j:
            polys.append(polys[-1].deriv() * one_minus_sq)
        return polys[j](np.tanh(values))

    return derivative


def _linear(j: int, values: np.ndarray) -> np.ndarray:
    if j == 0:
        return np.asarray(values, dtype=float)
    return np.ones_like(values, dtype=float) if j == 1 else np.zeros_like(values, dtype=float)


SYMBOLS: Dict[str, Symbol] = {
    "inv-bracket": Symbol("inv-bracket", -1.0, _bracket_power(-1.0)),
    "inv-bracket-sq": Symbol("inv-bracket-sq", -2.0, _bracket_power(-2.0)),
    "tanh": Symbol("tanh", 0.0, _tanh()),
    "linear": Symbol("linear", 1.0, _linear),
}


def get_symbol(name: str) -> Symbol:
    if name not in SYMBOLS:
        raise ConfigError(f"unknown symbol {name!r}, expected one of {sorted(SYMBOLS)}")
    return SYMBOLS[name]


# ---------------------------------------------------------------- extension

def _plateau(t):
    """chi(t): 1 on |t| <= 1/2, 0 on |t| >= 1."""
    return 1.0 - smoothstep7(2.0 * np.abs(t) - 1.0)


def _plateau_d1(t):
    return -2.0 * np.sign(t) * smoothstep7_d1(2.0 * np.abs(t) - 1.0)


@dataclass
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray


@dataclass
class AlmostAnalyticExtension:
    """phi^C(x+iy) = sum_{j<=N} phi^(j)(x)(iy)^j/j! chi(y/(c2<x>))."""
    symbol: Symbol
    order: int = 10
    decay: int = 2
    c2: float = 1.0
    _quadratures: Dict[Tuple[int, int, float], Quadrature] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.decay > self.order:
            raise AdmissibilityError(f"∂̄ decay |y|^{self.decay} needs Taylor order >= {self.decay}, got {self.order}")

    @property
    def rho(self) -> float:
        return self.symbol.rho

    def _taylor(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        total = np.zeros(np.broadcast(x, y).shape, dtype=np.complex128)
        power = np.ones_like(total)
        for j in range(self.order + 1):
            total += self.symbol.derivative(j, x) * power / math.factorial(j)
            power = power * (1j * y)
        return total

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        x, y = z.real, z.imag
        return self._taylor(x, y) * _plateau(y / (self.c2 * bracket(x)))

    def dbar(self, z) -> np.ndarray:
        """(1/2)(∂_x + i∂_y) phi^C in closed form."""
        z = np.asarray(z, dtype=np.complex128)
        x, y = z.real, z.imag
        width = self.c2 * bracket(x)
        t = y / width
        chi = _plateau(t)
        chi1 = _plateau_d1(t)
        top = self.symbol.derivative(self.order + 1, x) * (1j * y) ** self.order / math.factorial(self.order)
        d_chi_dx = -chi1 * t * x / bracket(x, 2)
        d_chi_dy = chi1 / width
        return 0.5 * top * chi + self._taylor(x, y) * 0.5 * (d_chi_dx + 1j * d_chi_dy)

    def decay_ratio(self, z) -> np.ndarray:
        """|∂̄phi^C| / (<x>^(rho-1-l) |y|^l), bounded for a valid extension."""
        z = np.asarray(z, dtype=np.complex128)
        x, y = z.real, np.abs(z.imag)
        reference = bracket(x, self.rho - 1 - self.decay) * y**self.decay
        return np.abs(self.dbar(z)) / reference

    def quadrature(self, nx: int = 400, ny: int = 200, scale: float = 1.0) -> Quadrature:
        """Midpoint rule in x = scale sinh(u), u in [-U_MAX, U_MAX], and y = c2<x>t, 0 < |t| < 1."""
        key = (nx, ny, scale)
        if key not in self._quadratures:
            du = 2.0 * U_MAX / nx
            u = -U_MAX + (np.arange(nx) + 0.5) * du
            x = scale * np.sinh(u)
            dx = scale * np.cosh(u) * du
            t = (np.arange(ny) + 0.5) / ny
            t = np.concatenate([-t[::-1], t])
            width = self.c2 * bracket(x)
            nodes = x[:, None] + 1j * width[:, None] * t[None, :]
            weights = (dx * width)[:, None] * np.full(t.shape, 1.0 / ny)[None, :]
            self._quadratures[key] = Quadrature(nodes.reshape(-1), weights.reshape(-1))
        return self._quadratures[key]


def build_extension(phi, order: int = 10, decay: int = 2, c2: float = 1.0) -> AlmostAnalyticExtension:
    symbol = phi if isinstance(phi, Symbol) else get_symbol(phi)
    return AlmostAnalyticExtension(symbol, order=order, decay=decay, c2=c2)


# ---------------------------------------------------------------- dense matrices

def _eigh(B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    B = np.asarray(B, dtype=np.complex128)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ConfigError(f"B must be a square matrix, got shape {B.shape}")
    if B.shape[0] > DENSE_DIMENSION:
        raise ConfigError(f"dense functional calculus supports dimension <= {DENSE_DIMENSION}, got {B.shape[0]}")
    if np.linalg.norm(B - B.conj().T) > 1e-12 * max(np.linalg.norm(B), 1.0):
        raise AdmissibilityError("B must be Hermitian")
    return np.linalg.eigh(0.5 * (B + B.conj().T))


def spectral_function(derivative: Callable[[np.ndarray], np.ndarray], B: np.ndarray) -> np.ndarray:
    """f(B) by eigendecomposition."""
    values, vectors = _eigh(B)
    return (vectors * derivative(values)) @ vectors.conj().T


def _node_kernel(ext: AlmostAnalyticExtension, nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray]:
    quad = ext.quadrature(nx, ny)
    distance = float(np.min(np.abs(quad.nodes.imag)))  # lower bound on |z - b| for real b
    if distance < 1e-12:
        raise SolverError(f"quadrature node within {distance:.1e} of the spectrum")
    return quad.nodes, quad.weights * ext.dbar(quad.nodes)


def _chunked_sum(fn: Callable[[slice], np.ndarray], count: int, workers: int) -> np.ndarray:
    """Sum of fn over node chunks, reduced in chunk order."""
    slices = [slice(i, min(i + CHUNK, count)) for i in range(0, count, CHUNK)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, slices))
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total


def hs_apply(ext: AlmostAnalyticExtension, B: np.ndarray, nx: int = 400, ny: int = 200,
             workers: int = config.WORKERS) -> np.ndarray:
    """phi(B) = phi(0) - (1/π) ∫ ∂̄phi^C(z) [(z-B)^-1 - z^-1] dx dy, evaluated in the eigenbasis of B."""
    values, vectors = _eigh(B)
    nodes, kernel = _node_kernel(ext, nx, ny)

    def chunk(part: slice) -> np.ndarray:
        z = nodes[part][:, None]
        return np.sum(kernel[part][:, None] * values[None, :] / (z * (z - values[None, :])), axis=0)

    integral = _chunked_sum(chunk, nodes.size, workers)
    diagonal = ext.symbol(0.0) - integral / math.pi
    return (vectors * diagonal) @ vectors.conj().T


@dataclass
class Expansion:
    commutator: np.ndarray
    terms: List[np.ndarray]
    remainder: np.ndarray
    ad_k: np.ndarray

    @property
    def closure_error(self) -> float:
        scale = max(np.linalg.norm(self.commutator, 2), np.finfo(float).tiny)
        residual = self.commutator - sum(self.terms, np.zeros_like(self.commutator)) - self.remainder
        return float(np.linalg.norm(residual, 2) / scale)


def hs_commutator_expansion(ext: AlmostAnalyticExtension, B: np.ndarray, T: np.ndarray, k: int,
                            nx: int = 400, ny: int = 200, workers: int = config.WORKERS) -> Expansion:
    """[phi(B), T] = -sum_{j<k} (1/j!) phi^(j)(B) ad^j(T) + I_k with ad(T) = [T, B] and
    I_k = (1/π) ∫ ∂̄phi^C (z-B)^-k ad^k(T) (z-B)^-1 dx dy.
    """
    if not 1 <= k <= 3:
        raise ConfigError(f"expansion order k must be 1, 2 or 3, got {k}")
    if ext.rho >= k:
        raise AdmissibilityError(f"the expansion needs rho < k, got rho={ext.rho:g}, k={k}")
    values, vectors = _eigh(B)
    T = np.asarray(T, dtype=np.complex128)
    T_eig = vectors.conj().T @ T @ vectors
    gaps = values[None, :] - values[:, None]  # (b_col - b_row): entries of [X, D]

    def rotate(matrix: np.ndarray) -> np.ndarray:
        return vectors @ matrix @ vectors.conj().T

    phi = ext.symbol.derivative(0, values)
    commutator = rotate((phi[:, None] - phi[None, :]) * T_eig)
    terms = []
    for j in range(1, k):
        ad_j = T_eig * gaps**j
        terms.append(rotate(-ext.symbol.derivative(j, values)[:, None] * ad_j / math.factorial(j)))

    ad_k = T_eig * gaps**k
    nodes, kernel = _node_kernel(ext, nx, ny)

    def chunk(part: slice) -> np.ndarray:
        inverse = 1.0 / (nodes[part][:, None] - values[None, :])
        left = (kernel[part][:, None] * inverse**k).T
        return left @ inverse

    weights = _chunked_sum(chunk, nodes.size, workers) / math.pi
    remainder = rotate(weights * ad_k)
    expansion = Expansion(commutator, terms, remainder, rotate(ad_k))
    logger.info(f"HS expansion {ext.symbol.name} k={k} dim={len(values)}: closure {expansion.closure_error:.3e}")
    return expansion


def check_weight_exponents(rho: float, k: int, s: float, s_prime: float) -> List[str]:
    problems = []
    if not s_prime < 1:
        problems.append(f"s' < 1 fails (s'={s_prime:g})")
    if not s < k:
        problems.append(f"s < k fails (s={s:g}, k={k})")
    if not rho + s + s_prime < k:
        problems.append(f"rho + s + s' < k fails ({rho + s + s_prime:g} >= {k})")
    return problems


def rest_weighted_bound(remainder: np.ndarray, B: np.ndarray, s: float, s_prime: float,
                        rho: Optional[float] = None, k: Optional[int] = None, allow_inadmissible: bool = False) -> float:
    """||<B>^s I_k <B>^s'||."""
    if rho is not None and k is not None:
        problems = check_weight_exponents(rho, k, s, s_prime)
        if problems:
            if not allow_inadmissible:
                raise AdmissibilityError("; ".join(problems))
            logger.warning(f"Inadmissible weights allowed: {'; '.join(problems)}")
    left = spectral_function(lambda v: bracket(v, s), B)
    right = spectral_function(lambda v: bracket(v, s_prime), B)
    return float(np.linalg.norm(left @ remainder @ right, 2))


# ---------------------------------------------------------------- experiments

def random_hermitian(dimension: int, radius: float, seed: Optional[int] = None, stream: int = 0) -> np.ndarray:
    """Random Hermitian matrix rescaled to spectral radius `radius`."""
    rng = make_rng(seed, 5, dimension, stream)
    M = random_complex(rng, dimension * dimension).reshape(dimension, dimension)
    H = 0.5 * (M + M.conj().T)
    return H * (radius / np.max(np.abs(np.linalg.eigvalsh(H))))


def weighted_trend(ext: AlmostAnalyticExtension, k: int, s: float, s_prime: float, radii: Sequence[float],
                   dimension: int = 40, seed: Optional[int] = None, nx: int = 400, ny: int = 200,
                   allow_inadmissible: bool = False) -> List[float]:
    """||<B>^s I_k <B>^s'|| / ||ad^k T|| for B of growing spectral radius; stability is evidence, not proof."""
    trend = []
    for radius in radii:
        B = random_hermitian(dimension, radius, seed, 0)
        T = random_hermitian(dimension, 1.0, seed, 1)
        expansion = hs_commutator_expansion(ext, B, T, k, nx, ny)
        bound = rest_weighted_bound(expansion.remainder, B, s, s_prime, ext.rho, k, allow_inadmissible)
        trend.append(bound / max(np.linalg.norm(expansion.ad_k, 2), np.finfo(float).tiny))
    logger.info(f"Weighted remainder trend over radii {list(radii)}: {['%.3e' % v for v in trend]}")
    return trend


def quadrature_convergence(ext: AlmostAnalyticExtension, B: np.ndarray, coarse: Tuple[int, int] = (50, 25),
                           fine: Tuple[int, int] = (100, 50)) -> Tuple[float, float]:
    """Relative hs_apply errors against eigendecomposition at two resolutions."""
    exact = spectral_function(ext.symbol, B)
    scale = max(np.linalg.norm(exact, 2), np.finfo(float).tiny)
    errors = tuple(float(np.linalg.norm(hs_apply(ext, B, *res) - exact, 2) / scale) for res in (coarse, fine))
    logger.info(f"Quadrature {coarse} -> {fine}: error {errors[0]:.3e} -> {errors[1]:.3e}")
    return errors


def run_hs_demo(spec: HSDemoSpec) -> HSDemoRecord:
    ext = build_extension(spec.phi)
    problems = check_weight_exponents(ext.rho, spec.k, spec.s, spec.s_prime)
    admissible = not problems
    closure, apply_error = 0.0, 0.0
    for seed in spec.seeds:
        B = random_hermitian(spec.dimension, 3.0, seed, 0)
        T = random_hermitian(spec.dimension, 1.0, seed, 1)
        closure = max(closure, hs_commutator_expansion(ext, B, T, spec.k, spec.nx, spec.ny).closure_error)
        exact = spectral_function(ext.symbol, B)
        error = np.linalg.norm(hs_apply(ext, B, spec.nx, spec.ny) - exact, 2) / np.linalg.norm(exact, 2)
        apply_error = max(apply_error, float(error))

    trend: List[float] = []
    if admissible or spec.allow_inadmissible:
        trend = weighted_trend(ext, spec.k, spec.s, spec.s_prime, spec.radii, spec.dimension,
                               spec.seeds[0] if spec.seeds else None, spec.nx, spec.ny, spec.allow_inadmissible)
    else:
        logger.warning(f"Weighted trend skipped: {'; '.join(problems)}")
    return HSDemoRecord(phi=spec.phi, rho=ext.rho, k=spec.k, s=spec.s, s_prime=spec.s_prime, admissible=admissible,
                        closure_error=closure, hs_apply_error=apply_error, radii=list(spec.radii),
                        weighted_trend=trend)
