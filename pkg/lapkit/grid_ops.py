import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, eigsh

from shared.config import config
from shared.models import GridSpec, WeightSpec
from shared.utils import make_rng, random_complex

from .errors import GridError
from .utils import bracket, smoothstep7

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

BAND_FRACTION = 2.0 / 3.0  # top third of the dual lattice stays empty
DENSE_MAX = 4096

_warned_radial_multiplier = False


class Grid:
    """Runtime view of a GridSpec: node coordinates, the FFT dual lattice and the grid inner product.

    Operators act on a *working array*. On a tensor grid this is the grid itself.
    For the radial reduction it is the odd extension of u(r) to a 2N periodic grid
    covering (-L, L), so u(0) = 0 holds and spectral p stays exact; every radial
    operator must map odd arrays to odd arrays.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.n = spec.n
        self.N = spec.N
        self.h = spec.h
        self.radial = spec.geometry == "radial"
        if self.radial:
            self.axis = (np.arange(self.N) + 0.5) * self.h
            work_axis = (np.arange(2 * self.N) - self.N + 0.5) * self.h
            self.dim = 1
            self.weight = self.h
        else:
            self.axis = -spec.L + self.h * np.arange(self.N)
            work_axis = self.axis
            self.dim = self.n
            self.weight = self.h**self.n
        self.size = spec.size
        self.shape = spec.shape
        self.work_shape = (len(work_axis),) * self.dim
        self.coords = np.meshgrid(*([work_axis] * self.dim), indexing="ij", sparse=True)

        freq = 2.0 * np.pi * sfft.fftfreq(len(work_axis), d=self.h)
        odd = freq.copy()
        odd[len(work_axis) // 2] = 0.0  # Nyquist mode dropped for odd symbols
        self.freqs = np.meshgrid(*([freq] * self.dim), indexing="ij", sparse=True)
        self.odd_freqs = np.meshgrid(*([odd] * self.dim), indexing="ij", sparse=True)
        self.xi_max = np.pi / self.h
        # (n-1)(n-3)/4, the centrifugal constant of the s-wave reduction
        self.centrifugal = (self.n - 1) * (self.n - 3) / 4.0 if self.radial else 0.0

    # ------------------------------------------------------------ layouts

    def to_work(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if self.radial:
            return np.concatenate([-v[::-1], v])
        return v.reshape(self.work_shape)

    def even_work(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).reshape(-1)
        if self.radial:
            return np.concatenate([v[::-1], v])
        return v.reshape(self.work_shape)

    def from_work(self, w: np.ndarray) -> np.ndarray:
        if self.radial:
            return np.ascontiguousarray(w[self.N:])
        return w.reshape(-1)

    # ------------------------------------------------------------ geometry

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| on the working array (|r| for the radial extension)."""
        return np.sqrt(sum(np.square(c) for c in self.coords)) * np.ones(self.work_shape)

    def coord_subset(self, coords: Optional[Sequence[int]]) -> List[np.ndarray]:
        if coords is None:
            return list(self.coords)
        if self.radial:
            raise GridError("coordinate subsets need a tensor grid")
        if max(coords) > self.n or min(coords) < 1:
            raise GridError(f"coordinates {list(coords)} outside 1..{self.n}")
        return [self.coords[j - 1] for j in coords]

    def subset_radius(self, coords: Optional[Sequence[int]]) -> np.ndarray:
        return np.sqrt(sum(np.square(c) for c in self.coord_subset(coords))) * np.ones(self.work_shape)

    def compact_radius(self) -> np.ndarray:
        return self.from_work(self.radius.astype(np.complex128)).real

    def node_coordinates(self, work_index: Tuple[int, ...]) -> Tuple[float, ...]:
        return tuple(float(np.ravel(self.coords[j])[work_index[j]]) for j in range(self.dim))

    # ------------------------------------------------------------ spectral primitives

    def fourier(self, w: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return sfft.ifftn(symbol * sfft.fftn(w))

    def deriv(self, w: np.ndarray, j: int) -> np.ndarray:
        """p_j = -i d/dx_j (0-based working axis j)."""
        return self.fourier(w, self.odd_freqs[j])

    def momentum_sq(self, coords: Optional[Sequence[int]] = None) -> np.ndarray:
        if coords is None:
            axes = range(self.dim)
        else:
            self.coord_subset(coords)
            axes = [j - 1 for j in coords]
        return sum(np.square(self.freqs[j]) for j in axes) * np.ones(self.work_shape)

    # ------------------------------------------------------------ inner product

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return self.weight * np.vdot(f, g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.weight) * np.linalg.norm(f))

    # ------------------------------------------------------------ interior mask and band limit

    @cached_property
    def mask(self) -> np.ndarray:
        width = self.spec.mask_width
        idx = np.arange(self.N)
        if width == 0:
            return np.ones(self.size)
        if self.radial:
            return smoothstep7(((self.N - 1 - idx) - width) / width)
        distance = np.minimum(idx, self.N - 1 - idx)
        axis_mask = smoothstep7((distance - width) / width)
        total = np.ones(self.shape)
        for j in range(self.n):
            shape = [1] * self.n
            shape[j] = self.N
            total = total * axis_mask.reshape(shape)
        return total.reshape(-1)

    def band_limit(self, v: np.ndarray) -> np.ndarray:
        spectrum = sfft.fftn(self.to_work(v))
        keep = np.ones(self.work_shape, dtype=bool)
        for f in self.freqs:
            keep &= np.abs(f) <= BAND_FRACTION * self.xi_max
        return self.from_work(sfft.ifftn(np.where(keep, spectrum, 0.0)))


@lru_cache(maxsize=32)
def _grid_from_json(key: str) -> Grid:
    return Grid(GridSpec.model_validate_json(key))


def get_grid(spec: GridSpec) -> Grid:
    return _grid_from_json(spec.model_dump_json())


def doubled_grid(spec: GridSpec) -> GridSpec:
    """Same spacing on a domain of twice the half-width."""
    update = {"L": 2.0 * spec.L, "N": 2 * spec.N, "epsilon0": spec.eps0}
    if spec.boundary.mask_width is not None:
        update["boundary"] = {"mask_width": 2 * spec.boundary.mask_width}
    return GridSpec.model_validate({**spec.model_dump(), **update})


# ---------------------------------------------------------------- states

@dataclass(frozen=True, eq=False)
class StateVector:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if values.size != self.grid.size:
            raise GridError(f"State has {values.size} values, grid expects {self.grid.size}")
        object.__setattr__(self, "values", values)

    @cached_property
    def norm(self) -> float:
        return get_grid(self.grid).norm(self.values)

    def inner(self, other: "StateVector") -> complex:
        _check_same_grid(self.grid, other.grid)
        return get_grid(self.grid).inner(self.values, other.values)


def _check_same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridError(f"Grid mismatch: {a.model_dump()} vs {b.model_dump()}")


def _values(f: Union[StateVector, np.ndarray]) -> np.ndarray:
    if isinstance(f, StateVector):
        return f.values
    return np.asarray(f, dtype=np.complex128).reshape(-1)


def export_state(state: StateVector, path: str) -> None:
    """Little-endian element count, then interleaved (re, im) float64 pairs."""
    with open(path, "wb") as handle:
        handle.write(np.array([state.values.size], dtype="<u8").tobytes())
        handle.write(state.values.astype("<c16").tobytes())


def import_state(path: str, grid: GridSpec) -> StateVector:
    with open(path, "rb") as handle:
        data = handle.read()
    count = int(np.frombuffer(data, dtype="<u8", count=1)[0])
    if len(data) != 8 + 16 * count:
        raise GridError(f"{path}: header announces {count} values, payload holds {(len(data) - 8) / 16:g}")
    return StateVector(grid, np.frombuffer(data, dtype="<c16", count=count, offset=8).astype(np.complex128))


# ---------------------------------------------------------------- linear maps

class LinearMap:
    """A matrix-free operator on a grid: scipy LinearOperator plus a Hermitian flag and a provenance tag."""

    def __init__(self, grid: GridSpec, op: LinearOperator, hermitian: bool = False, tag: str = ""):
        self.grid = grid
        self.op = op
        self.hermitian = hermitian
        self.tag = tag

    @classmethod
    def from_work(cls, grid: GridSpec, fn: Callable, adjoint_fn: Optional[Callable] = None,
                  hermitian: bool = False, tag: str = "") -> "LinearMap":
        g = get_grid(grid)

        def matvec(v):
            return g.from_work(fn(g.to_work(v)))

        rmatvec = None
        if hermitian:
            rmatvec = matvec
        elif adjoint_fn is not None:
            def rmatvec(v):
                return g.from_work(adjoint_fn(g.to_work(v)))

        op = LinearOperator((g.size, g.size), matvec=matvec, rmatvec=rmatvec, dtype=np.complex128)
        return cls(grid, op, hermitian=hermitian, tag=tag)

    def apply(self, f: Union[StateVector, np.ndarray]) -> np.ndarray:
        return self.op.matvec(_values(f))

    def adjoint_apply(self, f: Union[StateVector, np.ndarray]) -> np.ndarray:
        return self.op.rmatvec(_values(f))

    def __call__(self, state: StateVector) -> StateVector:
        return StateVector(self.grid, self.apply(state))

    @property
    def H(self) -> "LinearMap":
        return LinearMap(self.grid, self.op.H, hermitian=self.hermitian, tag=f"({self.tag})†")

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        _check_same_grid(self.grid, other.grid)
        return LinearMap(self.grid, self.op @ other.op, tag=f"{self.tag}·{other.tag}")

    def __add__(self, other: "LinearMap") -> "LinearMap":
        _check_same_grid(self.grid, other.grid)
        return LinearMap(self.grid, self.op + other.op, hermitian=self.hermitian and other.hermitian,
                         tag=f"{self.tag} + {other.tag}")

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        _check_same_grid(self.grid, other.grid)
        return LinearMap(self.grid, self.op - other.op, hermitian=self.hermitian and other.hermitian,
                         tag=f"{self.tag} - {other.tag}")

    def __neg__(self) -> "LinearMap":
        return LinearMap(self.grid, -self.op, hermitian=self.hermitian, tag=f"-{self.tag}")

    def __rmul__(self, scalar) -> "LinearMap":
        if not np.isscalar(scalar):
            return NotImplemented
        real = np.imag(scalar) == 0
        return LinearMap(self.grid, scalar * self.op, hermitian=self.hermitian and bool(real),
                         tag=f"{scalar:g}·{self.tag}" if real else f"({scalar})·{self.tag}")

    __mul__ = __rmul__

    def retag(self, tag: str, hermitian: Optional[bool] = None) -> "LinearMap":
        return LinearMap(self.grid, self.op, self.hermitian if hermitian is None else hermitian, tag)

    def dense(self) -> np.ndarray:
        size = self.grid.size
        if size > DENSE_MAX:
            raise GridError(f"Refusing to assemble a dense {size}x{size} matrix for {self.tag}")
        return self.op.matmat(np.eye(size, dtype=np.complex128))

    def as_operator(self) -> LinearOperator:
        return self.op

    def __repr__(self):
        return f"LinearMap({self.tag!r}, hermitian={self.hermitian}, size={self.grid.size})"


def identity_map(grid: GridSpec) -> LinearMap:
    return LinearMap.from_work(grid, lambda w: w.copy(), hermitian=True, tag="1")


def _check_finite(g: Grid, values: np.ndarray, lattice: Sequence[np.ndarray], label: str):
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = [tuple(float(np.ravel(lattice[j])[i]) for j, i in enumerate(idx)) for idx in np.argwhere(bad)[:3]]
        raise GridError(f"Non-finite {label} symbol at node(s) {where} ({int(bad.sum())} in total)")


def _symbol_values(g: Grid, symbol, lattice: Sequence[np.ndarray], even_radial: bool) -> np.ndarray:
    if callable(symbol):
        args = [np.abs(c) for c in lattice] if (g.radial and even_radial) else list(lattice)
        values = symbol(args)
    else:
        values = g.even_work(np.asarray(symbol)) if np.size(symbol) == g.size else np.asarray(symbol)
    return np.asarray(values) * np.ones(g.work_shape)


def build_operator(grid: GridSpec, kind: str, symbol=None, tag: Optional[str] = None, odd: bool = False) -> LinearMap:
    """Laplacian, position multiplier f(q) or momentum multiplier g(p) as a LinearMap.

    Position symbols receive the working coordinate arrays (|r| for the radial
    reduction) and momentum symbols the dual-lattice arrays; either may also be
    given as an array of node values.
    """
    g = get_grid(grid)
    if kind == "laplacian":
        symbol_values = g.momentum_sq()
        if g.centrifugal:
            inverse_sq = g.centrifugal / np.square(g.radius)
            return LinearMap.from_work(grid, lambda w: g.fourier(w, symbol_values) + inverse_sq * w,
                                       hermitian=True, tag=tag or "Δ")
        return LinearMap.from_work(grid, lambda w: g.fourier(w, symbol_values), hermitian=True, tag=tag or "Δ")

    if kind == "position":
        values = _symbol_values(g, symbol, g.coords, even_radial=True)
        _check_finite(g, values, g.coords, "position")
        hermitian = bool(np.all(np.imag(values) == 0))
        conj = np.conj(values)
        return LinearMap.from_work(grid, lambda w: values * w, adjoint_fn=lambda w: conj * w,
                                   hermitian=hermitian, tag=tag or "f(q)")

    if kind == "momentum":
        global _warned_radial_multiplier
        if g.radial and g.n != 3 and not _warned_radial_multiplier:
            logger.warning(f"Momentum multipliers on the radial reduction are exact only for n=3 (n={g.n})")
            _warned_radial_multiplier = True
        lattice = g.odd_freqs if odd else g.freqs
        values = _symbol_values(g, symbol, lattice, even_radial=False)
        _check_finite(g, values, lattice, "momentum")
        hermitian = bool(np.all(np.imag(values) == 0))
        conj = np.conj(values)
        return LinearMap.from_work(grid, lambda w: g.fourier(w, values), adjoint_fn=lambda w: g.fourier(w, conj),
                                   hermitian=hermitian, tag=tag or "g(p)")

    raise GridError(f"Unknown operator kind {kind!r}")


def bracket_q(grid: GridSpec, power: float, coords: Optional[Sequence[int]] = None) -> LinearMap:
    g = get_grid(grid)
    values = bracket(g.subset_radius(coords), power)
    return build_operator(grid, "position", values, tag=f"<q>^{power:g}")


def bracket_p(grid: GridSpec, power: float, coords: Optional[Sequence[int]] = None) -> LinearMap:
    g = get_grid(grid)
    values = bracket(np.sqrt(g.momentum_sq(coords)), power)
    return build_operator(grid, "momentum", values, tag=f"<p>^{power:g}")


def inverse_abs_q(grid: GridSpec, coords: Optional[Sequence[int]] = None) -> LinearMap:
    """(|q|^2 + eps0^2)^(-1/2), the regularized |q|^-1."""
    g = get_grid(grid)
    values = 1.0 / np.sqrt(np.square(g.subset_radius(coords)) + grid.eps0**2)
    return build_operator(grid, "position", values, tag=f"|q|^-1[eps0={grid.eps0:g}]")


def weight_map(grid: GridSpec, w: WeightSpec) -> LinearMap:
    """<p>^t <q>^s (|q|+eps0)^-1, applied right to left."""
    factors = []
    if w.t != 0:
        factors.append(bracket_p(grid, w.t, w.coords))
    if w.s != 0:
        factors.append(bracket_q(grid, w.s, w.coords))
    if w.singular:
        factors.append(inverse_abs_q(grid, w.coords))
    if not factors:
        return identity_map(grid)
    result = factors[0]
    for factor in factors[1:]:
        result = result @ factor
    return result.retag(" ".join(f.tag for f in factors))


def weighted_norm(state: StateVector, w: WeightSpec) -> float:
    return get_grid(state.grid).norm(weight_map(state.grid, w).apply(state))


def hardy_check(state: StateVector) -> Tuple[float, float]:
    """((n-2)^2/4 ||q|^-1 f|^2, ||grad f||^2); the Hardy inequality says lhs <= rhs."""
    n = state.grid.n
    if n < 3:
        raise GridError(f"Hardy inequality holds only in dimension n >= 3, got n={n}")
    g = get_grid(state.grid)
    weighted = inverse_abs_q(state.grid).apply(state)
    lhs = (n - 2) ** 2 / 4.0 * g.norm(weighted) ** 2
    rhs = float(np.real(g.inner(state.values, build_operator(state.grid, "laplacian").apply(state))))
    return lhs, rhs


def multiplication_test(T: LinearMap, trials: int = 4, seed: Optional[int] = None) -> bool:
    """True iff T commutes with e^{ik.q} for random dual-lattice k."""
    g = get_grid(T.grid)
    if g.radial:
        raise GridError("multiplication_test needs a tensor grid (e^{ik.q} is not radial)")
    rng = make_rng(seed, 3)
    for _ in range(trials):
        modes = rng.integers(-g.N // 2, g.N // 2, size=g.n)
        phase = sum(2.0 * np.pi * m / (g.N * g.h) * c for m, c in zip(modes, g.coords))
        plane = np.exp(1j * phase).reshape(-1)
        f = random_complex(rng, g.size)
        Tf = T.apply(f)
        defect = np.linalg.norm(T.apply(plane * f) - plane * Tf)
        if defect > 1e-10 * (np.linalg.norm(f) + np.linalg.norm(Tf)):
            return False
    return True


def adjoint_defect(T: LinearMap, trials: int = 4, seed: Optional[int] = None) -> float:
    """max |(g, Tf) - (T†g, f)| / (|f| |g|) over random pairs."""
    rng = make_rng(seed, 4)
    worst = 0.0
    for _ in range(trials):
        f = random_complex(rng, T.grid.size)
        h = random_complex(rng, T.grid.size)
        gap = abs(np.vdot(h, T.apply(f)) - np.vdot(T.adjoint_apply(h), f))
        worst = max(worst, gap / (np.linalg.norm(f) * np.linalg.norm(h)))
    return float(worst)


def hermitian_defect(T: LinearMap, trials: int = 4, seed: Optional[int] = None) -> float:
    """max |(g, Tf) - (Tg, f)| / max(|Tf| |g|, |f| |Tg|) over random pairs; 0 for a Hermitian T."""
    rng = make_rng(seed, 5)
    worst = 0.0
    for _ in range(trials):
        f = random_complex(rng, T.grid.size)
        h = random_complex(rng, T.grid.size)
        Tf, Th = T.apply(f), T.apply(h)
        scale = max(np.linalg.norm(Tf) * np.linalg.norm(h), np.linalg.norm(f) * np.linalg.norm(Th), np.finfo(float).tiny)
        worst = max(worst, abs(np.vdot(h, Tf) - np.vdot(Th, f)) / scale)
    return float(worst)


def parseval_defect(state: StateVector) -> float:
    g = get_grid(state.grid)
    work = g.to_work(state.values)
    return abs(np.linalg.norm(sfft.fftn(work, norm="ortho")) - np.linalg.norm(work)) / max(np.linalg.norm(work), 1e-300)


# ---------------------------------------------------------------- probe states

def interior_states(grid: GridSpec, count: int, seed: Optional[int] = None, kind: str = "mixed") -> List[StateVector]:
    """Masked, band-limited Gaussians and Gabor sums away from the truncation boundary."""
    g = get_grid(grid)
    rng = make_rng(seed, 1, count)
    w_min = 6.5 * g.h
    w_max = max(grid.L / 17.5, 1.25 * w_min)
    compact = [g.from_work(np.asarray(c * np.ones(g.work_shape), dtype=np.complex128)).real for c in g.coords]
    states = []
    for i in range(count):
        family = kind
        if kind == "mixed":
            family = "gaussian" if i < (count + 1) // 2 else "gabor"
        atoms = 1 if family == "gaussian" else 2
        values = np.zeros(g.size, dtype=np.complex128)
        for _ in range(atoms):
            width = rng.uniform(w_min, w_max)
            coefficient = 1.0 if family == "gaussian" else complex(*rng.standard_normal(2))
            if g.radial:
                centre = rng.uniform(0.0, grid.L / 3.0)
                carrier = rng.uniform(-g.xi_max / 6.0, g.xi_max / 6.0) if family == "gabor" else 0.0
                r = compact[0]

                def atom(x):
                    return np.exp(-np.square(x - centre) / (2 * width**2) + 1j * carrier * x)

                values += coefficient * (atom(r) - atom(-r))
            else:
                centre = rng.uniform(-grid.L / 5.0, grid.L / 5.0, size=g.n)
                carrier = rng.uniform(-g.xi_max / 6.0, g.xi_max / 6.0, size=g.n) if family == "gabor" else np.zeros(g.n)
                exponent = sum(-np.square(x - c) / (2 * width**2) + 1j * k * x for x, c, k in zip(compact, centre, carrier))
                values += coefficient * np.exp(exponent)
        values = g.band_limit(values * g.mask)
        states.append(StateVector(grid, values))
    return states


def orthonormalize(states: Sequence[StateVector], cutoff: float = 1e-10) -> List[StateVector]:
    """QR in the grid inner product; numerically dependent states are dropped."""
    if not states:
        return []
    grid = states[0].grid
    g = get_grid(grid)
    matrix = np.column_stack([s.values for s in states])
    q, r = np.linalg.qr(matrix)
    diag = np.abs(np.diag(r))
    keep = diag > cutoff * diag.max()
    if not np.all(keep):
        logger.warning(f"Dropped {int((~keep).sum())} numerically dependent states during orthonormalization")
    return [StateVector(grid, q[:, j] / np.sqrt(g.weight)) for j in np.flatnonzero(keep)]


# ---------------------------------------------------------------- norm estimation

def estimate_norm(op: LinearMap, steps: int = config.NORM_STEPS, seed: Optional[int] = None,
                  rtol: float = config.NORM_RTOL, method: str = "power") -> Tuple[float, int]:
    """Largest singular value of `op` from its normal operator op†op.

    "power" runs at most `steps` power iterations and stops once the Rayleigh
    quotient changes by less than `rtol` (relative); "lanczos" uses ARPACK.
    """
    size = op.grid.size
    rng = make_rng(seed, 2)
    v = random_complex(rng, size)
    v /= np.linalg.norm(v)

    if method == "lanczos":
        gram = LinearOperator((size, size), matvec=lambda x: op.adjoint_apply(op.apply(x)), dtype=np.complex128)
        value = eigsh(gram, k=1, which="LM", v0=v, tol=0, return_eigenvectors=False)
        return float(np.sqrt(max(float(np.max(np.real(value))), 0.0))), 0

    sigma2 = 0.0
    previous = None
    step = 0
    for step in range(1, steps + 1):
        z = op.adjoint_apply(op.apply(v))
        sigma2 = float(np.real(np.vdot(v, z)))
        size_z = np.linalg.norm(z)
        if size_z == 0:
            return 0.0, step
        v = z / size_z
        if previous is not None and abs(sigma2 - previous) <= rtol * abs(sigma2):
            break
        previous = sigma2
    return float(np.sqrt(max(sigma2, 0.0))), step


def delta_compactness_probe(grid: GridSpec, V, radii: Sequence[float], steps: int = config.PROBE_STEPS,
                            seed: Optional[int] = None) -> List[float]:
    """||1_{|q|>R} V <p>^-2|| for each R; decay in R is heuristic evidence of Δ-compactness."""
    g = get_grid(grid)
    values = _symbol_values(g, V, g.coords, even_radial=True)
    resolvent = bracket_p(grid, -2.0)
    norms = []
    for R in radii:
        tail = build_operator(grid, "position", np.where(g.radius > R, values, 0.0), tag=f"1_(|q|>{R:g})V")
        norm, _ = estimate_norm(tail @ resolvent, steps=steps, seed=seed, rtol=0.0)
        norms.append(norm)
    logger.info(f"Δ-compactness probe on radii {list(radii)}: {['%.3e' % x for x in norms]}")
    return norms
