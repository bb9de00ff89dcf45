import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from shared.config import config
from shared.models import (
    DissipativeOscillatingProfile,
    GaussianProfile,
    GridSpec,
    OscillatingProfile,
    PotentialSpec,
    PowerProfile,
    WellProfile,
    ZeroProfile,
)

from .errors import AdmissibilityError, GridError
from .grid_ops import LinearMap, build_operator, get_grid
from .utils import bracket, smoothstep7, smoothstep7_d1, smoothstep7_d2

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)


class RadialProfile(NamedTuple):
    """v(r) with optional closed-form v'(r), v''(r); all vectorized over r >= 0."""
    value: Callable
    d1: Optional[Callable]
    d2: Optional[Callable]
    tag: str


def cutoff(r):
    """1 - kappa(r): 0 on r <= 1, 1 on r >= 2, order-7 smoothstep between."""
    return smoothstep7(np.asarray(r, dtype=float) - 1.0)


def _oscillating_product(amplitude: float, k: float, alpha: float, beta: float, offset: float):
    """amplitude * (1 - kappa(r)) * (sin(k r^alpha) + offset) * r^-beta with two derivatives."""

    def parts(r):
        r = np.asarray(r, dtype=float)
        rs = np.maximum(r, 1.0)  # the cutoff vanishes to third order at r = 1
        t = r - 1.0
        c, c1, c2 = smoothstep7(t), smoothstep7_d1(t), smoothstep7_d2(t)
        phase = k * rs**alpha
        phi = np.sin(phase) + offset
        phi1 = np.cos(phase) * k * alpha * rs ** (alpha - 1)
        phi2 = -np.sin(phase) * (k * alpha * rs ** (alpha - 1)) ** 2 + np.cos(phase) * k * alpha * (alpha - 1) * rs ** (alpha - 2)
        psi = rs**-beta
        psi1 = -beta * rs ** (-beta - 1)
        psi2 = beta * (beta + 1) * rs ** (-beta - 2)
        return (c, c1, c2), (phi, phi1, phi2), (psi, psi1, psi2)

    def value(r):
        (c, _, _), (phi, _, _), (psi, _, _) = parts(r)
        return amplitude * c * phi * psi

    def d1(r):
        (c, c1, _), (phi, phi1, _), (psi, psi1, _) = parts(r)
        return amplitude * (c1 * phi * psi + c * phi1 * psi + c * phi * psi1)

    def d2(r):
        (c, c1, c2), (phi, phi1, phi2), (psi, psi1, psi2) = parts(r)
        return amplitude * (
            c2 * phi * psi + c * phi2 * psi + c * phi * psi2
            + 2 * (c1 * phi1 * psi + c1 * phi * psi1 + c * phi1 * psi1)
        )

    return value, d1, d2


def radial_profile(spec) -> RadialProfile:
    if isinstance(spec, ZeroProfile):
        zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))
        return RadialProfile(zero, zero, zero, "0")

    if isinstance(spec, OscillatingProfile):
        value, d1, d2 = _oscillating_product(spec.w, spec.k, spec.alpha, spec.beta, 0.0)
        return RadialProfile(value, d1, d2, f"W(w={spec.w:g},k={spec.k:g},alpha={spec.alpha:g},beta={spec.beta:g})")

    if isinstance(spec, DissipativeOscillatingProfile):
        value, d1, d2 = _oscillating_product(spec.strength, spec.k, spec.gamma, spec.delta, 1.0)
        return RadialProfile(value, d1, d2, f"W2(s={spec.strength:g},gamma={spec.gamma:g},delta={spec.delta:g})")

    if isinstance(spec, PowerProfile):
        A, a = spec.amplitude, spec.exponent
        return RadialProfile(
            lambda r: A * bracket(r, -a),
            lambda r: -a * A * r * bracket(r, -a - 2),
            lambda r: -a * A * (bracket(r, -a - 2) - (a + 2) * np.square(r) * bracket(r, -a - 4)),
            f"{A:g}<x>^-{a:g}",
        )

    if isinstance(spec, GaussianProfile):
        A, s = spec.amplitude, spec.width
        gauss = lambda r: A * np.exp(-np.square(r) / s**2)
        return RadialProfile(
            gauss,
            lambda r: -2.0 * r / s**2 * gauss(r),
            lambda r: (4.0 * np.square(r) / s**4 - 2.0 / s**2) * gauss(r),
            f"{A:g}exp(-|x|^2/{s:g}^2)",
        )

    if isinstance(spec, WellProfile):
        D, R, e = spec.depth, spec.radius, spec.edge
        if e == 0:
            return RadialProfile(lambda r: np.where(np.asarray(r) <= R, -D, 0.0), None, None, f"-{D:g}·1(|x|<={R:g})")
        return RadialProfile(
            lambda r: -D * (1.0 - smoothstep7((np.asarray(r) - R) / e)),
            lambda r: D * smoothstep7_d1((np.asarray(r) - R) / e) / e,
            lambda r: D * smoothstep7_d2((np.asarray(r) - R) / e) / e**2,
            f"-{D:g}·well(R={R:g},edge={e:g})",
        )

    raise ValueError(f"Unsupported profile {spec!r}")


def _norms(points: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    return np.sqrt(np.sum(np.square(points[:, list(axes)]), axis=1))


def _safe_ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


class PotentialModel:
    """Point evaluation of V1 (real part) and V2 (imaginary part) on arrays of shape (m, n).

    The real part is a radial profile v(|x|) or, in tensor mode, a(|x|) b(|y|) with
    x the first `split` coordinates. The imaginary part is always radial.
    """

    def __init__(self, spec: PotentialSpec, n: int):
        self.spec = spec
        self.n = n
        if spec.split is not None and not 1 <= spec.split < n:
            raise AdmissibilityError(f"tensor split k={spec.split} must satisfy 1 <= k < n={n}")
        self.real = radial_profile(spec.real)
        self.cross = radial_profile(spec.cross) if spec.cross is not None else None
        self.imag = radial_profile(spec.imaginary) if spec.imaginary is not None else None
        self.split = spec.split
        self.tag = spec.tag or self._tag()

    def _tag(self) -> str:
        tag = self.real.tag
        if self.cross is not None:
            tag = f"{tag}⊗{self.cross.tag}"
        if self.imag is not None:
            tag = f"{tag} + i{self.imag.tag}"
        return tag

    @property
    def is_radial(self) -> bool:
        return self.split is None

    @property
    def has_imaginary(self) -> bool:
        return self.imag is not None and not isinstance(self.spec.imaginary, ZeroProfile)

    def _profile(self, part: str) -> Optional[RadialProfile]:
        if part == "real":
            return self.real
        if part == "imag":
            return self.imag
        raise ValueError(f"part must be 'real' or 'imag', got {part!r}")

    def _x_axes(self):
        return range(self.split)

    def _y_axes(self):
        return range(self.split, self.n)

    def value(self, points: np.ndarray, part: str = "real") -> np.ndarray:
        points = np.atleast_2d(points)
        profile = self._profile(part)
        if profile is None:
            return np.zeros(len(points))
        if part == "real" and self.split is not None:
            return profile.value(_norms(points, self._x_axes())) * self.cross.value(_norms(points, self._y_axes()))
        return profile.value(_norms(points, range(self.n)))

    def has_gradient(self, part: str = "real") -> bool:
        profile = self._profile(part)
        if profile is None:
            return True
        if part == "real" and self.split is not None and self.cross.d1 is None:
            return False
        return profile.d1 is not None

    def gradient(self, points: np.ndarray, part: str = "real") -> Optional[np.ndarray]:
        """(m, n) array of partial derivatives, or None without a closed-form derivative."""
        points = np.atleast_2d(points)
        profile = self._profile(part)
        if profile is None:
            return np.zeros_like(points, dtype=float)
        if not self.has_gradient(part):
            return None
        if part == "real" and self.split is not None:
            rho = _norms(points, self._x_axes())
            sigma = _norms(points, self._y_axes())
            a, a1 = profile.value(rho), profile.d1(rho)
            b, b1 = self.cross.value(sigma), self.cross.d1(sigma)
            grad = np.empty_like(points, dtype=float)
            grad[:, : self.split] = (_safe_ratio(a1, rho) * b)[:, None] * points[:, : self.split]
            grad[:, self.split:] = (a * _safe_ratio(b1, sigma))[:, None] * points[:, self.split:]
            return grad
        R = _norms(points, range(self.n))
        return _safe_ratio(profile.d1(R), R)[:, None] * points

    def x_derivative(self, points: np.ndarray, part: str = "real", coords: Optional[Sequence[int]] = None) -> Optional[np.ndarray]:
        """x_K . grad_K V, the first dilation commutator in the active coordinates (1-based)."""
        grad = self.gradient(points, part)
        if grad is None:
            return None
        axes = range(self.n) if coords is None else [j - 1 for j in coords]
        return np.sum(np.atleast_2d(points)[:, list(axes)] * grad[:, list(axes)], axis=1)

    def x_second(self, points: np.ndarray, part: str = "real", coords: Optional[Sequence[int]] = None) -> Optional[np.ndarray]:
        """(x_K . grad_K)^2 V in closed form; None when the structure does not allow one."""
        points = np.atleast_2d(points)
        profile = self._profile(part)
        if profile is None:
            return np.zeros(len(points))
        if profile.d1 is None or profile.d2 is None:
            return None
        if part == "real" and self.split is not None:
            if coords is None or list(coords) != list(range(1, self.split + 1)):
                return None
            rho = _norms(points, self._x_axes())
            return (rho * profile.d1(rho) + rho**2 * profile.d2(rho)) * self.cross.value(_norms(points, self._y_axes()))
        R = _norms(points, range(self.n))
        axes = range(self.n) if coords is None else [j - 1 for j in coords]
        s = np.sum(np.square(points[:, list(axes)]), axis=1)
        v1, v2 = profile.d1(R), profile.d2(R)
        return v2 * _safe_ratio(s**2, R**2) + v1 * (2.0 * _safe_ratio(s, R) - _safe_ratio(s**2, R**3))

    def radial_derivatives(self, r: np.ndarray, part: str = "real"):
        """(v, v', v'') of a radial part; raises when the part is not radial."""
        if part == "real" and self.split is not None:
            raise AdmissibilityError("tensor potentials have no single radial profile")
        profile = self._profile(part)
        if profile is None:
            zero = np.zeros_like(np.asarray(r, dtype=float))
            return zero, zero, zero
        d1 = profile.d1(r) if profile.d1 is not None else None
        d2 = profile.d2(r) if profile.d2 is not None else None
        return profile.value(r), d1, d2


# ---------------------------------------------------------------- grid sampling

def work_points(grid: GridSpec) -> np.ndarray:
    """Working-array nodes as points of R^n; the radial extension lies on the first axis."""
    g = get_grid(grid)
    full = [np.broadcast_to(c, g.work_shape).reshape(-1) for c in g.coords]
    if g.radial:
        zeros = [np.zeros(full[0].size)] * (grid.n - 1)
        return np.column_stack(full + zeros)
    return np.column_stack(full)


def sample_on_grid(grid: GridSpec, values_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    g = get_grid(grid)
    return np.asarray(values_fn(work_points(grid))).reshape(g.work_shape)


def spectral_x_derivative(grid: GridSpec, values: np.ndarray, coords: Optional[Sequence[int]] = None) -> np.ndarray:
    """x_K . grad V of sampled values by spectral differentiation; aliasing-prone."""
    g = get_grid(grid)
    logger.warning("Spectral differentiation of a sampled potential; oscillating potentials alias")
    axes = range(g.dim) if coords is None else [j - 1 for j in coords]
    total = np.zeros(g.work_shape, dtype=np.complex128)
    for j in axes:
        total += g.coords[j] * (1j * g.deriv(values.astype(np.complex128), j))
    return total.real


@dataclass
class HamiltonianPair:
    """H = Re H + i Im H with Re H = Δ + V1 and Im H = V2, as LinearMaps on one grid."""
    grid: GridSpec
    model: PotentialModel
    laplacian: LinearMap
    v1: LinearMap
    re: LinearMap
    im: LinearMap
    v1_values: np.ndarray
    v2_values: np.ndarray

    @property
    def dissipative(self) -> bool:
        return bool(np.any(self.v2_values != 0))

    @property
    def full(self) -> LinearMap:
        if not self.dissipative:
            return self.re
        return (self.re + 1j * self.im).retag(f"Δ + {self.model.tag}")

    @property
    def sup_bound(self) -> float:
        """Upper bound for ||H|| on the grid."""
        g = get_grid(self.grid)
        kinetic = float(np.max(g.momentum_sq()))
        if g.centrifugal:
            kinetic += abs(g.centrifugal) / (g.h / 2.0) ** 2
        return kinetic + float(np.max(np.abs(self.v1_values))) + float(np.max(np.abs(self.v2_values)))


def assemble_hamiltonian(grid: GridSpec, potential: PotentialSpec) -> HamiltonianPair:
    g = get_grid(grid)
    if g.radial and potential.split is not None:
        raise GridError("tensor potentials need a tensor grid")
    model = PotentialModel(potential, grid.n)
    v1 = sample_on_grid(grid, lambda x: model.value(x, "real"))
    v2 = sample_on_grid(grid, lambda x: model.value(x, "imag"))
    if np.any(v2 < 0):
        worst = float(v2.min())
        raise AdmissibilityError(f"V2 must be >= 0 (dissipative sign), sampled min {worst:.3e}")
    laplacian = build_operator(grid, "laplacian")
    v1_map = build_operator(grid, "position", v1, tag=f"V1={model.real.tag}")
    v2_map = build_operator(grid, "position", v2, tag="V2" if model.imag is None else f"V2={model.imag.tag}")
    re = (laplacian + v1_map).retag(f"Δ + {v1_map.tag}", hermitian=True)
    logger.info(f"Assembled H = Δ + {model.tag} on {grid.geometry} grid n={grid.n} N={grid.N} L={grid.L:g}")
    return HamiltonianPair(grid, model, laplacian, v1_map, re, v2_map, v1, v2)
