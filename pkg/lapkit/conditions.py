"""Hypothesis checkers: every "is bounded" or sign condition of a theorem becomes a sampled supremum or infimum."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from shared.config import config
from shared.models import (
    ConjugateSpec,
    GridSpec,
    HypothesisLine,
    OscillatingProfile,
    PotentialSpec,
    TheoremParams,
    TheoremVerdict,
    ZeroProfile,
)
from shared.utils import make_rng

from .commutators import discrete_commutator, s1_operator
from .conjugate import build_conjugate, f_derivatives, position_decay_bound
from .errors import AdmissibilityError, ConfigError, LapkitError, SamplingError
from .grid_ops import delta_compactness_probe
from .lap import lowest_eigenvalues
from .mourre import estimate_second_order_C, gram_matrix, subspace_states
from .potentials import PotentialModel, assemble_hamiltonian, radial_profile, sample_on_grid
from .utils import bracket

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

AGREEMENT = 0.05
R_MIN = 1e-3


class ShellSampler:
    """Log-spaced shells from R_MIN to r_max along a fixed set of directions."""

    def __init__(self, n: int, r_max: float = 1e3, shells: int = 40, directions: int = 8,
                 seed: Optional[int] = None, radial: bool = True):
        if shells < 40:
            raise SamplingError(f"need at least 40 shells per decade, got {shells}")
        self.n = n
        self.r_max = r_max
        self.shells = shells
        axes = list(np.eye(n))
        if radial:
            self.directions = axes[:1]
        else:
            rng = make_rng(seed, 4)
            random = rng.standard_normal((directions, n))
            random /= np.linalg.norm(random, axis=1, keepdims=True)
            self.directions = axes + list(random)

    def radii(self, refinement: int = 1) -> np.ndarray:
        decades = max(math.log10(self.r_max / R_MIN), 1.0)
        count = int(math.ceil(decades * self.shells * refinement)) + 1
        return np.logspace(math.log10(R_MIN), math.log10(self.r_max), count)

    def blocks(self, refinement: int = 1) -> List[np.ndarray]:
        """One (m, n) point block per direction."""
        r = self.radii(refinement)
        return [r[:, None] * d[None, :] for d in self.directions]


@dataclass
class SupResult:
    value: float
    converged: bool
    location: Tuple[float, ...]


def _extreme(fn: Callable[[np.ndarray], np.ndarray], sampler: ShellSampler, mode: str,
             refinement: int, workers: int) -> Tuple[float, Tuple[float, ...]]:
    def evaluate(points):
        values = np.asarray(fn(points), dtype=float)
        bad = ~np.isfinite(values)
        if np.any(bad):
            where = tuple(float(c) for c in points[np.flatnonzero(bad)[0]])
            raise SamplingError(f"non-finite sample at x={where}")
        i = int(np.argmin(values) if mode == "inf" else np.argmax(values))
        return values[i], tuple(float(c) for c in points[i])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        found = list(pool.map(evaluate, sampler.blocks(refinement)))
    pick = min if mode == "inf" else max
    return pick(found, key=lambda item: item[0])


def sample_extreme(fn: Callable[[np.ndarray], np.ndarray], sampler: ShellSampler, mode: str = "sup",
                   workers: int = config.WORKERS) -> SupResult:
    """Two passes, the second with twice the shells; converged when they agree within 5%."""
    first, _ = _extreme(fn, sampler, mode, 1, workers)
    second, location = _extreme(fn, sampler, mode, 2, workers)
    scale = max(abs(first), abs(second))
    converged = abs(second - first) <= AGREEMENT * scale or scale == 0
    value = min(first, second) if mode == "inf" else max(first, second)
    if not converged:
        logger.warning(f"Sampled {mode} did not settle: {first:.6g} vs {second:.6g} near x={location}")
    return SupResult(float(value), converged, location)


def sup_weighted(g: Callable[[np.ndarray], np.ndarray], weight: Callable[[np.ndarray], np.ndarray],
                 sampler: ShellSampler, workers: int = config.WORKERS) -> SupResult:
    """sup |g(x) weight(x)| over the sampler's shells."""
    return sample_extreme(lambda x: np.abs(np.asarray(g(x)) * np.asarray(weight(x))), sampler, "sup", workers)


# ---------------------------------------------------------------- hypothesis lines

def _status(margin: float, strict: bool, converged: bool, bound: float) -> str:
    ok = margin > 0 if strict else margin >= -1e-14
    if not converged and abs(margin) <= AGREEMENT * max(abs(bound), 1e-12):
        return "inconclusive"
    return "pass" if ok else "fail"


def upper_line(name: str, result: SupResult, bound: float, strict: bool = False, note: str = "") -> HypothesisLine:
    margin = bound - result.value
    return HypothesisLine(name=name, status=_status(margin, strict, result.converged, bound), margin=margin,
                          observed=result.value, bound=bound, note=note or f"at x={result.location}")


def lower_line(name: str, result: SupResult, bound: float, strict: bool = False, note: str = "") -> HypothesisLine:
    margin = result.value - bound
    return HypothesisLine(name=name, status=_status(margin, strict, result.converged, bound), margin=margin,
                          observed=result.value, bound=bound, note=note or f"at x={result.location}")


def arithmetic_line(name: str, observed: float, bound: float, strict: bool = False, upper: bool = False) -> HypothesisLine:
    margin = bound - observed if upper else observed - bound
    ok = margin > 0 if strict else margin >= 0
    return HypothesisLine(name=name, status="pass" if ok else "fail", margin=margin, observed=observed, bound=bound)


def missing_line(name: str, reason: str) -> HypothesisLine:
    return HypothesisLine(name=name, status="inconclusive", note=reason)


def _norm(points: np.ndarray, axes: Optional[Sequence[int]] = None) -> np.ndarray:
    cols = slice(None) if axes is None else list(axes)
    return np.sqrt(np.sum(np.square(np.atleast_2d(points)[:, cols]), axis=1))


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """|num| / den, with 0/0 = 0 and x/0 = float max."""
    num = np.abs(num)
    out = np.where(num > 1e-14, np.finfo(float).max, 0.0)
    return np.divide(num, den, out=out, where=den > 1e-300)


@dataclass
class CheckContext:
    model: PotentialModel
    n: int
    params: TheoremParams
    conjugate: ConjugateSpec
    sampler: ShellSampler
    grid: Optional[GridSpec] = None
    seed: Optional[int] = None
    w_star: Optional[float] = None

    @property
    def mu(self) -> float:
        return self.conjugate.mu if self.params.mu is None else self.params.mu

    @property
    def split(self) -> Optional[int]:
        return self.params.split if self.params.split is not None else self.model.split

    def sup(self, fn) -> SupResult:
        return sample_extreme(fn, self.sampler, "sup")

    def inf(self, fn) -> SupResult:
        return sample_extreme(fn, self.sampler, "inf")

    def parts(self) -> List[str]:
        return ["real", "imag"] if self.model.has_imaginary else ["real"]


def _label(part: str) -> str:
    return "V1" if part == "real" else "V2"


def _v2_sign_line(ctx: CheckContext) -> HypothesisLine:
    if not ctx.model.has_imaginary:
        return HypothesisLine(name="V2 >= 0", status="pass", margin=0.0, observed=0.0, bound=0.0, note="V2 = 0")
    return lower_line("V2 >= 0", ctx.inf(lambda x: ctx.model.value(x, "imag")), 0.0)


def _delta_probe_line(ctx: CheckContext, name: str, values_fn, kind: str) -> HypothesisLine:
    if ctx.grid is None:
        return HypothesisLine(name=name, status="heuristic", note=f"no grid to probe ||1(|q|>R) g <p>^-2|| (Δ-{kind})")
    values = sample_on_grid(ctx.grid, values_fn)
    radii = [ctx.grid.L / 8.0, ctx.grid.L / 4.0, ctx.grid.L / 2.0]
    norms = delta_compactness_probe(ctx.grid, values, radii, seed=ctx.seed)
    decays = all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))
    return HypothesisLine(name=name, status="heuristic", observed=norms[-1],
                          note=f"tail norms {['%.3e' % v for v in norms]} at R={radii}; {'decaying' if decays else 'not decaying'}")


def _compactness_line(ctx: CheckContext, part: str, kind: str = "compact") -> HypothesisLine:
    return _delta_probe_line(ctx, f"{_label(part)} Δ-{kind} (heuristic)", lambda x: ctx.model.value(x, part), kind)


def _gradient_line(ctx: CheckContext, part: str, coords=None) -> HypothesisLine:
    """∇V_k and q·∇V_k Δ-bounded, probed on |∇V_k| + |x·∇V_k| in the active coordinates."""
    sub = "" if coords is None else "_x"
    name = f"∇{sub}{_label(part)} and q{sub}·∇{sub}{_label(part)} Δ-bounded (heuristic)"
    if not ctx.model.has_gradient(part):
        return missing_line(name, f"no analytic gradient of {_label(part)}")
    axes = list(range(ctx.n)) if coords is None else [j - 1 for j in coords]

    def size(x):
        grad = ctx.model.gradient(x, part)[:, axes]
        return np.linalg.norm(grad, axis=1) + np.abs(ctx.model.x_derivative(x, part, coords))

    return _delta_probe_line(ctx, name, size, "bounded")


def _flow_gradient_line(ctx: CheckContext, part: str) -> HypothesisLine:
    """q<q>^-mu·∇V_k Δ-compact."""
    name = f"q<q>^-mu·∇{_label(part)} Δ-compact (heuristic)"
    if not ctx.model.has_gradient(part):
        return missing_line(name, f"no analytic gradient of {_label(part)}")
    mu = ctx.mu
    return _delta_probe_line(ctx, name, lambda x: ctx.model.x_derivative(x, part) * bracket(_norm(x), -mu), "compact")


def _bounded_line(ctx: CheckContext, name: str, fn) -> HypothesisLine:
    return upper_line(name, ctx.sup(fn), config.BOUNDED_CEILING)


def _x_derivative(ctx: CheckContext, part: str, coords=None):
    return lambda x: ctx.model.x_derivative(x, part, coords)


def _c1_lines(ctx: CheckContext) -> List[HypothesisLine]:
    c1 = ctx.params.c1
    lines = [arithmetic_line("c1 in [0, 2)", c1, 2.0, strict=True, upper=True)]
    if ctx.model.has_imaginary and c1 > 0:
        if not ctx.model.has_gradient("imag"):
            lines.append(missing_line("-c1 x·∇V2 >= 0", "no analytic gradient of V2"))
        else:
            lines.append(lower_line("-c1 x·∇V2 >= 0", ctx.inf(lambda x: -c1 * ctx.model.x_derivative(x, "imag")), 0.0))
    else:
        lines.append(HypothesisLine(name="-c1 x·∇V2 >= 0", status="pass", margin=0.0, observed=0.0, bound=0.0,
                                    note="c1 = 0 or V2 = 0"))
    return lines


def _virial_c_line(ctx: CheckContext, verdict: TheoremVerdict) -> HypothesisLine:
    """x·∇V1 + c1 V1 <= C |x|^-2 with C below the Hardy-derived cap."""
    n, c1 = ctx.n, ctx.params.c1
    cap = (2.0 - c1) * (n - 2) ** 2 / 4.0
    name = "x·∇V1 + c1 V1 <= C/|x|^2 with C < (2-c1)(n-2)^2/4"
    if not ctx.model.has_gradient("real"):
        return missing_line(name, "no analytic gradient of V1")
    found = ctx.sup(lambda x: (ctx.model.x_derivative(x, "real") + c1 * ctx.model.value(x, "real")) * _norm(x) ** 2)
    found.value = max(0.0, found.value)
    verdict.constants.update({"C": found.value, "C_cap": cap, "c1": c1})
    return upper_line(name, found, cap, strict=True)


def _second_order_bounded(ctx: CheckContext, part: str, name: str, weight=None, coords=None) -> HypothesisLine:
    if ctx.model.x_second(np.ones((1, ctx.n)), part, coords) is None:
        return missing_line(name, f"no closed-form (x·∇)^2 {_label(part)}")
    weight = weight or (lambda x: _norm(x) ** 2)
    return _bounded_line(ctx, name, lambda x: np.abs(ctx.model.x_second(x, part, coords)) * weight(x))


# ---------------------------------------------------------------- theorems

def check_mr(ctx: CheckContext) -> TheoremVerdict:
    """V(x, y) with repulsive x-part; x is the first k coordinates."""
    verdict = TheoremVerdict(theorem="MR")
    k = ctx.split or ctx.n
    coords = list(range(1, k + 1)) if k < ctx.n else None
    verdict.constants["k"] = float(k)
    verdict.lines.append(HypothesisLine(name="V real", status="fail" if ctx.model.has_imaginary else "pass"))
    if not ctx.model.has_gradient("real"):
        for name in ("x·∇_xV bounded", "-x·∇_xV >= 0", "|(x·∇_x)^2 V| <= C (-x·∇_xV)"):
            verdict.lines.append(missing_line(name, "no analytic gradient of V"))
        return verdict
    xd = _x_derivative(ctx, "real", coords)
    verdict.lines.append(_bounded_line(ctx, "x·∇_xV bounded", lambda x: np.abs(xd(x))))
    verdict.lines.append(lower_line("-x·∇_xV >= 0", ctx.inf(lambda x: -xd(x)), 0.0))
    name = "|(x·∇_x)^2 V| <= C (-x·∇_xV)"
    if ctx.model.x_second(np.ones((1, ctx.n)), "real", coords) is None:
        verdict.lines.append(missing_line(name, "no closed-form (x·∇_x)^2 V"))
    else:
        found = ctx.sup(lambda x: _ratio(ctx.model.x_second(x, "real", coords), np.maximum(-xd(x), 0.0)))
        verdict.constants["C"] = found.value
        verdict.lines.append(upper_line(name, found, config.BOUNDED_CEILING))
    verdict.notes.append("The conclusion space of this theorem is abstract; the dilation-weight sweep is the nearest concrete check.")
    return verdict


def check_bogo(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="BoGo")
    verdict.lines.append(arithmetic_line("n >= 3", ctx.n, 3))
    for part in ctx.parts():
        verdict.lines.append(_compactness_line(ctx, part, kind="bounded"))
    verdict.lines.append(_v2_sign_line(ctx))
    for part in ctx.parts():
        verdict.lines.append(_gradient_line(ctx, part))
        verdict.lines.append(_second_order_bounded(ctx, part, f"|x|^2 (x·∇)^2 {_label(part)} bounded"))
    if ctx.n >= 3:
        verdict.lines.append(_virial_c_line(ctx, verdict))
    verdict.lines.extend(_c1_lines(ctx))
    return verdict


def check_af2(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="AF2")
    verdict.lines.append(arithmetic_line("n >= 3", ctx.n, 3))
    verdict.lines.append(_v2_sign_line(ctx))
    for part in ctx.parts():
        verdict.lines.append(_compactness_line(ctx, part, kind="bounded"))
    for part in ctx.parts():
        verdict.lines.append(_gradient_line(ctx, part))
        name = f"|x·∇{_label(part)}| |x|^2 bounded"
        if not ctx.model.has_gradient(part):
            verdict.lines.append(missing_line(name, f"no analytic gradient of {_label(part)}"))
            continue
        xd = _x_derivative(ctx, part)
        verdict.lines.append(_bounded_line(ctx, name, lambda x, xd=xd: np.abs(xd(x)) * _norm(x) ** 2))
    if ctx.n >= 3:
        verdict.lines.append(_virial_c_line(ctx, verdict))
    verdict.lines.extend(_c1_lines(ctx))
    verdict.notes.append("Hardy-derived constant 2/(n-2) used in the second-order estimate.")
    return verdict


def check_af3(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="AF3")
    n, mu = ctx.n, ctx.mu
    verdict.lines.append(arithmetic_line("n >= 3", n, 3))
    if n < 3:
        return verdict
    mu_bound = position_decay_bound(n)
    verdict.lines.append(arithmetic_line("0 <= mu < (1+n/(n-2))^-2", mu, mu_bound, strict=True, upper=True))
    for part in ctx.parts():
        verdict.lines.append(_compactness_line(ctx, part))
    verdict.lines.append(_v2_sign_line(ctx))
    for part in ctx.parts():
        verdict.lines.append(_flow_gradient_line(ctx, part))

    bound = -(n - 2) ** 2 * (1.0 - mu / mu_bound) / 2.0
    verdict.constants.update({"mu": mu, "mu_bound": mu_bound, "C_bound": bound})
    name = "C = inf(-x·∇V1 |x|^2) > -(n-2)^2(1-mu(1+n/(n-2))^2)/2"
    if not ctx.model.has_gradient("real"):
        verdict.lines.append(missing_line(name, "no analytic gradient of V1"))
    else:
        found = ctx.inf(lambda x: -ctx.model.x_derivative(x, "real") * _norm(x) ** 2)
        verdict.constants["C"] = found.value
        verdict.lines.append(lower_line(name, found, bound, strict=True))

    for part in ctx.parts():
        name = f"|(F·∇)^2 {_label(part)}| |x|^2 <x>^mu bounded"
        if ctx.model.x_second(np.ones((1, n)), part) is None:
            verdict.lines.append(missing_line(name, f"no closed-form (x·∇)^2 {_label(part)}"))
            continue

        def flow_second(x, part=part):
            r = _norm(x)
            u = ctx.model.x_derivative(x, part)
            second = bracket(r, -2 * mu) * (ctx.model.x_second(x, part) - mu * r**2 * bracket(r, -2) * u)
            return np.abs(second) * r**2 * bracket(r, mu)

        verdict.lines.append(_bounded_line(ctx, name, flow_second))
    return verdict


def check_af1d(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="AF1D")
    mu = ctx.mu
    verdict.lines.append(arithmetic_line("n = 1", ctx.n, 1, upper=True))
    verdict.lines.append(arithmetic_line("0 <= mu <= 1", mu, 1.0, upper=True))
    if ctx.n != 1:
        return verdict
    _, d1, _ = ctx.model.radial_derivatives(np.ones(1), "real")
    if d1 is None or ctx.model.real.d2 is None:
        for name in ("W >= 0", "|2FW' + F'''F' + F''^2| <= C1 W", "|F^2 V2'' + FF'V2'| <= C2 W"):
            verdict.lines.append(missing_line(name, "no analytic V1', V1''"))
        return verdict

    def parts(x):
        r = x[:, 0]
        f = f_derivatives(mu, r)
        _, v1, v2 = ctx.model.radial_derivatives(r, "real")
        W = -f.F * v1 - 0.5 * f.F3
        W1 = -f.F1 * v1 - f.F * v2 - 0.5 * f.F4
        return f, W, W1

    verdict.lines.append(lower_line("W >= 0", ctx.inf(lambda x: parts(x)[1]), 0.0))

    def first_ratio(x):
        f, W, W1 = parts(x)
        return _ratio(2 * f.F * W1 + f.F3 * f.F1 + f.F2**2, np.maximum(W, 0.0))

    found = ctx.sup(first_ratio)
    verdict.constants["C1"] = found.value
    verdict.lines.append(upper_line("|2FW' + F'''F' + F''^2| <= C1 W", found, config.BOUNDED_CEILING))

    name = "|F^2 V2'' + FF'V2'| <= C2 W"
    if not ctx.model.has_imaginary:
        verdict.lines.append(HypothesisLine(name=name, status="pass", margin=None, note="V2 = 0"))
    elif ctx.model.imag.d1 is None or ctx.model.imag.d2 is None:
        verdict.lines.append(missing_line(name, "no analytic V2', V2''"))
    else:
        def second_ratio(x):
            f, W, _ = parts(x)
            _, u1, u2 = ctx.model.radial_derivatives(x[:, 0], "imag")
            return _ratio(f.F**2 * u2 + f.F * f.F1 * u1, np.maximum(W, 0.0))

        found = ctx.sup(second_ratio)
        verdict.constants["C2"] = found.value
        verdict.lines.append(upper_line(name, found, config.BOUNDED_CEILING))
    verdict.notes.append("W(0) = 3mu/2 for V1'(0) = 0; the third derivative of F is used in its derived closed form.")
    return verdict


def _momentum_conjugate(ctx: CheckContext) -> ConjugateSpec:
    if ctx.conjugate.kind == "momentum-decay":
        return ctx.conjugate
    return ConjugateSpec(kind="momentum-decay", mu=ctx.params.mu if ctx.params.mu is not None else 1.5)


def _operator_lines(ctx: CheckContext, verdict: TheoremVerdict) -> List[HypothesisLine]:
    """Virial constant C' < 2 and the second-order constant, both on the Mourre subspace."""
    virial = "(f, [V1, iA_u] f) >= -C' ||p λ^1/2(p) f||^2 with C' < 2"
    second = "second-order constant of [[H, iA_u], iA_u] against Δλ(p)"
    if ctx.grid is None:
        return [missing_line(virial, "needs a grid"), missing_line(second, "needs a grid")]
    try:
        conjugate = _momentum_conjugate(ctx)
        H = assemble_hamiltonian(ctx.grid, ctx.model.spec)
        A = build_conjugate(ctx.grid, conjugate)
        S = s1_operator(ctx.grid, conjugate)
        basis = subspace_states(ctx.grid, seed=ctx.seed)
        g_comm = gram_matrix(discrete_commutator(H.v1, A), basis)
        g_s = gram_matrix(S, basis)
        lowest = float(sla.eigh(g_comm, g_s, eigvals_only=True)[0])
        c_prime = max(0.0, -lowest)
        estimate = estimate_second_order_C(H, A, S, seed=ctx.seed)
    except LapkitError as e:
        logger.error(f"Operator-level AU lines failed: {e}")
        return [missing_line(virial, str(e)), missing_line(second, str(e))]

    verdict.constants["C_prime"] = c_prime
    lines = [arithmetic_line(virial, c_prime, 2.0, strict=True, upper=True)]
    lines[0].note = f"delegated: generalized eigenvalue on a {len(basis)}-state subspace"
    if estimate.value is None:
        lines.append(missing_line(second, "every probe skipped"))
    else:
        verdict.constants["second_order"] = estimate.value
        lines.append(HypothesisLine(name=second, status="empirical", observed=estimate.value,
                                    note="delegated: probe estimate"))
    return lines


def check_au(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="AU")
    verdict.lines.append(_v2_sign_line(ctx))
    for part in ctx.parts():
        verdict.lines.append(_bounded_line(ctx, f"<q>^3 {_label(part)} bounded",
                                           lambda x, part=part: np.abs(ctx.model.value(x, part)) * bracket(_norm(x), 3)))
    sq = ctx.sup(lambda x: np.abs(ctx.model.value(x, "real")) * _norm(x) ** 2)
    lin = ctx.sup(lambda x: np.abs(ctx.model.value(x, "real")) * _norm(x))
    verdict.constants.update({"sup_q2_V1": sq.value, "sup_q_V1": lin.value})
    note = "smallness has no explicit constant; see the virial line"
    if ctx.w_star is not None:
        note = f"empirical w* = {ctx.w_star:g}"
    verdict.lines.append(HypothesisLine(name="|q|^2 V1 and |q| V1 small", status="empirical",
                                        observed=max(sq.value, lin.value), note=note))
    verdict.lines.extend(_operator_lines(ctx, verdict))
    return verdict


def check_partial(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="PARTIAL")
    k = ctx.split
    if k is None:
        raise ConfigError("PARTIAL needs a split k (theorem_params.split or potential.split)")
    coords = list(range(1, k + 1))
    axes = list(range(k))
    verdict.constants["k"] = float(k)
    verdict.lines.append(arithmetic_line("k >= 3", k, 3))
    for part in ctx.parts():
        verdict.lines.append(_compactness_line(ctx, part, kind="bounded"))
    verdict.lines.append(_v2_sign_line(ctx))
    for part in ctx.parts():
        verdict.lines.append(_gradient_line(ctx, part, coords))
        verdict.lines.append(_second_order_bounded(ctx, part, f"|(x·∇_x)^2 {_label(part)}| |x|^2 bounded",
                                                   weight=lambda x: _norm(x, axes) ** 2, coords=coords))
    cap = (k - 2) ** 2 / 2.0
    name = "C' = sup x·∇_xV1 |x|^2 < (k-2)^2/2"
    if not ctx.model.has_gradient("real"):
        verdict.lines.append(missing_line(name, "no analytic gradient of V1"))
    else:
        found = ctx.sup(lambda x: ctx.model.x_derivative(x, "real", coords) * _norm(x, axes) ** 2)
        found.value = max(0.0, found.value)
        verdict.constants.update({"C_prime": found.value, "C_cap": cap})
        verdict.lines.append(upper_line(name, found, cap, strict=True))
    for part in ctx.parts():
        verdict.lines.append(_bounded_line(ctx, f"<q_x>^3 {_label(part)} bounded",
                                           lambda x, part=part: np.abs(ctx.model.value(x, part)) * bracket(_norm(x, axes), 3)))
    return verdict


def potential_integral(model: PotentialModel, n: int, r_max: float = 1e3) -> float:
    """∫ V1 over R^n for a radial V1."""
    if not model.is_radial:
        raise AdmissibilityError("the integral check needs a radial V1")
    sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    value, _ = integrate.quad(lambda r: float(model.real.value(np.array([r]))[0]) * r ** (n - 1), 0.0, r_max, limit=400, points=[1.0, 10.0])
    return sphere * value


def check_simon(ctx: CheckContext) -> TheoremVerdict:
    verdict = TheoremVerdict(theorem="SIMON")
    n = ctx.n
    verdict.lines.append(HypothesisLine(name="n in {1, 2}", status="pass" if n in (1, 2) else "fail",
                                        observed=float(n)))
    name = "∫V1 <= 0 iff a negative eigenvalue"
    if n not in (1, 2) or not ctx.model.is_radial:
        verdict.lines.append(missing_line(name, "needs a radial V1 in one or two dimensions"))
        return verdict
    integral = potential_integral(ctx.model, n, ctx.params.r_max)
    verdict.constants["integral"] = integral
    if isinstance(ctx.model.spec.real, ZeroProfile):
        verdict.lines.append(missing_line(name, "V = 0: the dichotomy is empty"))
        return verdict
    if ctx.grid is None:
        verdict.lines.append(missing_line(name, "needs a grid for the eigenvalue scan"))
        return verdict
    lowest = lowest_eigenvalues(assemble_hamiltonian(ctx.grid, ctx.model.spec), 1, seed=ctx.seed).entries[0].real
    verdict.constants["lowest_eigenvalue"] = lowest
    negative = lowest < -1e-10
    consistent = negative == (integral <= 0)
    verdict.lines.append(HypothesisLine(name=name, status="pass" if consistent else "fail", observed=lowest,
                                        bound=integral, note="weak-coupling statement; sign comparison only"))
    return verdict


# ---------------------------------------------------------------- oscillating potentials

def eval_oscillating(p: OscillatingProfile, x) -> Tuple[float, float]:
    """(W(x), x·∇W(x)) from the closed forms; (0, 0) at the origin."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if r == 0.0:
        return 0.0, 0.0
    profile = radial_profile(p)
    radius = np.array([r])
    return float(profile.value(radius)[0]), float(r * profile.d1(radius)[0])


def classify_oscillating(p: OscillatingProfile, n: int, w_star: Optional[float] = None) -> TheoremVerdict:
    """Branch pattern for W: BoGo, AF2 and AU branches from (alpha, beta) arithmetic."""
    if n < 3:
        raise AdmissibilityError(f"the oscillating-potential classification is stated for n >= 3, got {n}")
    a, b = p.alpha, p.beta
    verdict = TheoremVerdict(theorem="OSC", mode="any", constants={"alpha": a, "beta": b, "w": p.w})
    verdict.lines.extend([
        arithmetic_line("BoGo: beta >= 2", b, 2.0),
        arithmetic_line("BoGo: beta - 2 alpha >= 2", b - 2 * a, 2.0),
        arithmetic_line("AF2: beta >= 2", b, 2.0),
        arithmetic_line("AF2: beta - alpha >= 2", b - a, 2.0),
        arithmetic_line("AU: beta >= 3", b, 3.0),
    ])
    small = "AU: w small enough"
    if w_star is None:
        verdict.lines.append(missing_line(small, "estimate w* with the Mourre gap"))
    else:
        status = "empirical" if abs(p.w) <= w_star else "fail"
        verdict.lines.append(HypothesisLine(name=small, status=status, margin=w_star - abs(p.w),
                                            observed=abs(p.w), bound=w_star, note="empirical w*"))
        verdict.constants["w_star"] = w_star
    return verdict


def branches(verdict: TheoremVerdict) -> Dict[str, str]:
    """Combined status of each 'branch: ...' group."""
    groups: Dict[str, set] = {}
    for line in verdict.lines:
        groups.setdefault(line.name.split(":", 1)[0], set()).add(line.status)
    return {name: TheoremVerdict._combine(statuses) for name, statuses in groups.items()}


CHECKERS: Dict[str, Callable[[CheckContext], TheoremVerdict]] = {
    "MR": check_mr,
    "BoGo": check_bogo,
    "AF2": check_af2,
    "AF3": check_af3,
    "AF1D": check_af1d,
    "AU": check_au,
    "PARTIAL": check_partial,
    "SIMON": check_simon,
}


def check_theorem(theorem: str, potential: PotentialSpec, n: int, params: TheoremParams = TheoremParams(),
                  conjugate: ConjugateSpec = ConjugateSpec(), grid: Optional[GridSpec] = None,
                  seed: Optional[int] = None, w_star: Optional[float] = None) -> TheoremVerdict:
    """Every hypothesis line of `theorem` with its margin and the constants used."""
    model = PotentialModel(potential, n)
    if theorem == "OSC":
        if not isinstance(potential.real, OscillatingProfile):
            raise ConfigError("OSC classifies oscillating potentials only")
        return classify_oscillating(potential.real, n, w_star)
    if theorem not in CHECKERS:
        raise ConfigError(f"unknown theorem {theorem!r}")
    radial = model.is_radial and n > 1
    sampler = ShellSampler(n, params.r_max, params.shells, params.directions, seed, radial=radial or n == 1)
    ctx = CheckContext(model, n, params, conjugate, sampler, grid, seed, w_star)
    verdict = CHECKERS[theorem](ctx)
    logger.info(f"{theorem}: {verdict.verdict} ({sum(l.status == 'pass' for l in verdict.lines)}/{len(verdict.lines)} lines pass)")
    return verdict
