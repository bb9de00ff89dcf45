import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from shared.config import config


THEOREM_IDS = ("MR", "BoGo", "AF2", "AF3", "AF1D", "AU", "PARTIAL", "OSC", "SIMON")
CONJUGATE_KINDS = ("dilation", "position-decay", "momentum-decay")


# ---------------------------------------------------------------- grids

class BoundarySpec(BaseModel):
    mask_width: Optional[int] = Field(None, ge=0, description="Interior mask width in grid points (default N/8)")


class GridSpec(BaseModel):
    n: int = Field(..., ge=1, description="Space dimension")
    L: float = Field(config.HALF_WIDTH, gt=0, description="Half-width of the truncated domain")
    N: int = Field(config.N_1D, description="Points per axis (power of two, >= 16)")
    geometry: Literal["tensor", "radial"] = Field("tensor", description="Full tensor grid or s-wave radial reduction")
    boundary: BoundarySpec = Field(default_factory=BoundarySpec)
    epsilon0: Optional[float] = Field(None, gt=0, description="Regularization of |q|^-1 at the origin (default h/2)")

    @field_validator("N")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 16 or v & (v - 1):
            raise ValueError(f"N must be a power of two >= 16, got {v}")
        return v

    @model_validator(mode="after")
    def _radial_dimension(self):
        if self.geometry == "radial" and self.n < 2:
            raise ValueError("radial reduction needs n >= 2")
        return self

    @property
    def h(self) -> float:
        if self.geometry == "radial":
            return self.L / self.N
        return 2.0 * self.L / self.N

    @property
    def mask_width(self) -> int:
        if self.boundary.mask_width is not None:
            return self.boundary.mask_width
        return self.N // config.MASK_DIVISOR

    @property
    def eps0(self) -> float:
        return self.epsilon0 if self.epsilon0 is not None else self.h / 2.0

    @property
    def shape(self) -> tuple:
        if self.geometry == "radial":
            return (self.N,)
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return math.prod(self.shape)


class WeightSpec(BaseModel):
    s: float = Field(0.0, description="Position exponent of <q>^s")
    t: float = Field(0.0, description="Momentum exponent of <p>^t")
    singular: bool = Field(False, description="Include the (|q|^2+eps0^2)^(-1/2) factor")
    coords: Optional[List[int]] = Field(None, description="1-based coordinate subset for |q_x|, <p_x> weights")


# ---------------------------------------------------------------- conjugates

class ConjugateSpec(BaseModel):
    kind: Literal["dilation", "position-decay", "momentum-decay"] = "dilation"
    mu: float = Field(0.0, ge=0, description="Decay parameter")
    active_coords: Optional[List[int]] = Field(None, description="1-based active coordinate set K (partial-direction mode)")
    override: bool = Field(False, description="Build outside the admissible mu range (exploratory runs)")

    @field_validator("active_coords")
    @classmethod
    def _nonempty(cls, v):
        if v is not None:
            if not v:
                raise ValueError("active coordinate set must be nonempty")
            if len(set(v)) != len(v) or min(v) < 1:
                raise ValueError(f"active coordinates must be distinct and 1-based, got {v}")
        return sorted(v) if v is not None else v


# ---------------------------------------------------------------- potentials

class ZeroProfile(BaseModel):
    kind: Literal["zero"] = "zero"


class OscillatingProfile(BaseModel):
    kind: Literal["oscillating"] = "oscillating"
    w: float = Field(..., description="Amplitude")
    k: float = Field(1.0, description="Wavenumber")
    alpha: float = Field(..., gt=0, description="Oscillation exponent")
    beta: float = Field(..., gt=0, description="Decay exponent")


class DissipativeOscillatingProfile(BaseModel):
    kind: Literal["oscillating-dissipative"] = "oscillating-dissipative"
    strength: float = Field(1.0, ge=0)
    k: float = 1.0
    gamma: float = Field(..., gt=0)
    delta: float = Field(..., gt=0)


class PowerProfile(BaseModel):
    kind: Literal["power"] = "power"
    amplitude: float = 1.0
    exponent: float = Field(..., gt=0, description="a in amplitude*<x>^-a")


class GaussianProfile(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    amplitude: float = 1.0
    width: float = Field(1.0, gt=0, description="amplitude*exp(-|x|^2/width^2)")


class WellProfile(BaseModel):
    kind: Literal["well"] = "well"
    depth: float = Field(..., description="V = -depth inside the well")
    radius: float = Field(1.0, gt=0)
    edge: float = Field(0.0, ge=0, description="Smoothing width of the rim, 0 for a sharp indicator")


ProfileSpec = Annotated[
    Union[ZeroProfile, OscillatingProfile, DissipativeOscillatingProfile, PowerProfile, GaussianProfile, WellProfile],
    Field(discriminator="kind"),
]


class PotentialSpec(BaseModel):
    real: ProfileSpec = Field(default_factory=ZeroProfile, description="V1 radial profile")
    imaginary: Optional[ProfileSpec] = Field(None, description="V2 radial profile (must be >= 0)")
    split: Optional[int] = Field(None, ge=1, description="Tensor mode: x is the first `split` coordinates")
    cross: Optional[ProfileSpec] = Field(None, description="Tensor mode: bounded factor in |y|")
    tag: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _flat_shorthand(cls, data: Any):
        # {"kind": "oscillating", "w": ...} is shorthand for {"real": {...}}
        if isinstance(data, dict) and "kind" in data:
            data = dict(data)
            extras = {k: data.pop(k) for k in ("imaginary", "split", "cross", "tag") if k in data}
            return {"real": data, **extras}
        return data

    @model_validator(mode="after")
    def _tensor_fields(self):
        if (self.split is None) != (self.cross is None):
            raise ValueError("tensor potentials need both `split` and `cross`")
        return self


# ---------------------------------------------------------------- run config

class TheoremParams(BaseModel):
    mu: Optional[float] = Field(None, ge=0, description="Defaults to the conjugate mu")
    c1: float = Field(0.0, ge=0)
    split: Optional[int] = Field(None, ge=1, description="k in R^k x R^(n-k)")
    r_max: float = Field(1e3, gt=0)
    shells: int = Field(40, ge=40)
    directions: int = Field(8, ge=1)


class MourreSpec(BaseModel):
    s_kind: Literal["auto", "laplacian", "weighted-laplacian", "f-kinetic", "laplacian-lambda"] = "auto"
    scale: Optional[float] = Field(None, gt=0)
    c1: float = Field(0.0, ge=0)
    subspace_size: int = Field(config.SUBSPACE_SIZE, ge=1)
    probes: int = Field(32, ge=1)
    w_ladder: Optional[List[float]] = Field(None, description="Amplitudes tried for the empirical w*")


class CommutatorSpec(BaseModel):
    identities: Optional[List[str]] = Field(None, description="Identity tags, default every applicable one")
    states: int = Field(8, ge=1)


class EigenSpec(BaseModel):
    count: int = Field(6, ge=1, le=20)
    bound_fraction: float = Field(0.9, gt=0.5, le=1.0)


class SolverSettings(BaseModel):
    method: Literal["auto", "direct", "iterative"] = "auto"
    tol: float = Field(config.SOLVER_TOL, gt=0)
    maxiter: int = Field(config.SOLVER_MAXITER, ge=1)
    restarts: int = Field(config.SOLVER_RESTARTS, ge=1)


class NormSettings(BaseModel):
    method: Literal["power", "lanczos"] = "power"
    steps: int = Field(config.NORM_STEPS, ge=1)
    rtol: float = Field(config.NORM_RTOL, gt=0)
    seed: int = config.SEED


class SweepPlan(BaseModel):
    lambdas: List[float] = Field(..., min_length=1)
    etas: List[float] = Field(..., min_length=1)
    weight: Literal["identity", "dilation", "af", "au", "partial", "s-weights"] = "dilation"
    mu: Optional[float] = Field(None, ge=0, description="Weight exponent, defaults to the conjugate mu")
    solver: SolverSettings = Field(default_factory=SolverSettings)
    norm: NormSettings = Field(default_factory=NormSettings)
    threshold: float = Field(config.BLOWUP_THRESHOLD, gt=1)
    include_eigenvalues: bool = Field(False, description="Add bound-state energies from the eigenvalue scan")
    l_doubling: bool = Field(False, description="Recompute each row on a 2L grid")

    @field_validator("etas")
    @classmethod
    def _decreasing(cls, v: List[float]) -> List[float]:
        if any(e <= 0 for e in v) or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError(f"eta ladder must be positive and strictly decreasing, got {v}")
        return v


class HSDemoSpec(BaseModel):
    phi: Literal["inv-bracket", "inv-bracket-sq", "tanh"] = "inv-bracket"
    k: int = Field(2, ge=1, le=3)
    s: float = 1.5
    s_prime: float = 0.4
    dimension: int = Field(40, ge=1, le=512)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    radii: List[float] = Field(default_factory=lambda: [4.0, 8.0, 16.0])
    nx: int = Field(400, ge=8)
    ny: int = Field(200, ge=8)
    allow_inadmissible: bool = False


class RunConfig(BaseModel):
    grid: GridSpec
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    conjugate: ConjugateSpec = Field(default_factory=ConjugateSpec)
    theorems: List[str] = Field(default_factory=list)
    theorem_params: TheoremParams = Field(default_factory=TheoremParams)
    mourre: Optional[MourreSpec] = None
    commutators: Optional[CommutatorSpec] = None
    eigen: Optional[EigenSpec] = None
    sweep: Optional[SweepPlan] = None
    hs: Optional[HSDemoSpec] = None
    output_dir: str = config.OUTPUT_DIR
    seed: int = config.SEED

    @field_validator("theorems")
    @classmethod
    def _known_theorems(cls, v: List[str]) -> List[str]:
        unknown = [t for t in v if t not in THEOREM_IDS]
        if unknown:
            raise ValueError(f"unknown theorem ids {unknown}, expected a subset of {list(THEOREM_IDS)}")
        return v

    @model_validator(mode="after")
    def _compatible(self):
        if self.conjugate.active_coords and max(self.conjugate.active_coords) > self.grid.n:
            raise ValueError(f"active coordinates {self.conjugate.active_coords} exceed n={self.grid.n}")
        if self.conjugate.active_coords and self.grid.geometry == "radial":
            raise ValueError("partial-direction conjugates need a tensor grid")
        if self.potential.split is not None and self.grid.geometry == "radial":
            raise ValueError("tensor potentials need a tensor grid")
        if self.sweep is not None:
            weight = self.sweep.weight
            if weight == "au" and self.conjugate.kind != "momentum-decay":
                raise ValueError("AU weights require a momentum-decay conjugate")
            if weight == "af" and self.conjugate.kind != "position-decay":
                raise ValueError("AF weights require a position-decay conjugate")
            if weight == "partial" and not self.conjugate.active_coords:
                raise ValueError("partial weights require conjugate.active_coords")
            if weight == "s-weights" and self.mourre is None:
                raise ValueError("S-weights require a mourre section")
        return self


# ---------------------------------------------------------------- results

# "empirical" and "heuristic" lines never block a pass verdict
LineStatus = Literal["pass", "fail", "inconclusive", "empirical", "heuristic"]


class HypothesisLine(BaseModel):
    name: str = Field(..., description="Hypothesis line, as stated by the theorem")
    status: LineStatus
    margin: Optional[float] = Field(None, description="bound - observed sup, or observed inf - bound")
    observed: Optional[float] = None
    bound: Optional[float] = None
    note: str = ""


class TheoremVerdict(BaseModel):
    theorem: str
    lines: List[HypothesisLine] = Field(default_factory=list)
    constants: Dict[str, float] = Field(default_factory=dict)
    mode: Literal["all", "any"] = Field("all", description="'any': pass when one 'branch: ...' group passes")
    notes: List[str] = Field(default_factory=list)

    @staticmethod
    def _combine(statuses: set) -> str:
        if "fail" in statuses:
            return "fail"
        if "inconclusive" in statuses:
            return "inconclusive"
        return "pass"

    @computed_field
    @property
    def verdict(self) -> str:
        if self.mode == "all":
            return self._combine({line.status for line in self.lines})
        groups: Dict[str, set] = {}
        for line in self.lines:
            groups.setdefault(line.name.split(":", 1)[0], set()).add(line.status)
        outcomes = [self._combine(statuses) for statuses in groups.values()]
        if "pass" in outcomes:
            return "pass"
        if "inconclusive" in outcomes:
            return "inconclusive"
        return "fail"


class CommutatorCheck(BaseModel):
    identity: str
    grid: GridSpec
    deviation: Optional[float]
    states: int
    tolerance: float = 1e-4
    note: str = ""

    @computed_field
    @property
    def verdict(self) -> str:
        if self.deviation is None:
            return "inconclusive"
        return "pass" if self.deviation <= self.tolerance else "fail"


class MourreCertificate(BaseModel):
    c1: float = Field(..., ge=0)
    s_descriptor: str
    conjugate: str
    gap: float
    injectivity_margin: float
    second_order_constant: Optional[float]
    relative_bound_constant: Optional[float]
    dissipativity_margin: float
    tol_gap: float
    subspace_dim: int
    pseudo_inverse_cutoff: float = 1e-10
    w_star: Optional[float] = None
    grid: GridSpec

    @computed_field
    @property
    def reasons(self) -> List[str]:
        reasons = []
        if self.subspace_dim < 8:
            reasons.append(f"subspace dimension {self.subspace_dim} < 8")
        if self.gap < -self.tol_gap:
            reasons.append(f"gap {self.gap:.3e} below -{self.tol_gap:.3e}")
        if self.injectivity_margin <= 0:
            reasons.append(f"S not injective on the subspace (margin {self.injectivity_margin:.3e})")
        if self.dissipativity_margin < -self.tol_gap:
            reasons.append(f"dissipativity margin {self.dissipativity_margin:.3e} negative")
        if self.second_order_constant is None:
            reasons.append("second-order constant unavailable")
        if self.relative_bound_constant is None:
            reasons.append("relative-bound constant unavailable")
        return reasons

    @computed_field
    @property
    def verdict(self) -> str:
        if self.subspace_dim < 8 or self.second_order_constant is None or self.relative_bound_constant is None:
            return "inconclusive"
        ok = (
            self.gap >= -self.tol_gap
            and self.injectivity_margin > 0
            and self.dissipativity_margin >= -self.tol_gap
        )
        return "pass" if ok else "fail"


class SweepRow(BaseModel):
    lam: float
    eta: float
    norm: Optional[float]
    iters: int
    residual: Optional[float]
    restarts: int = 0
    valid: bool
    l_doubled_norm: Optional[float] = None


class LambdaTrend(BaseModel):
    lam: float
    ratio: Optional[float]
    sup_norm: Optional[float]
    verdict: Literal["bounded", "blow-up", "inconclusive"]


class SweepResult(BaseModel):
    weight: str
    threshold: float
    rows: List[SweepRow] = Field(default_factory=list)
    trends: List[LambdaTrend] = Field(default_factory=list)

    @computed_field
    @property
    def invalid_rows(self) -> List[int]:
        return [i for i, row in enumerate(self.rows) if not row.valid]

    @computed_field
    @property
    def global_sup(self) -> Optional[float]:
        norms = [row.norm for row in self.rows if row.valid and row.norm is not None]
        return max(norms) if norms else None

    @computed_field
    @property
    def verdict(self) -> str:
        if self.invalid_rows or any(t.verdict == "inconclusive" for t in self.trends):
            return "inconclusive"
        if any(t.verdict == "blow-up" for t in self.trends):
            return "blow-up"
        return "bounded"


class EigenEntry(BaseModel):
    real: float
    imag: float
    interior_fraction: float
    bound: bool


class EigenScan(BaseModel):
    requested: int
    shift: float
    converged: bool
    entries: List[EigenEntry] = Field(default_factory=list)
    note: str = ""


class HSDemoRecord(BaseModel):
    phi: str
    rho: float
    k: int
    s: float
    s_prime: float
    admissible: bool
    closure_error: float
    hs_apply_error: float
    radii: List[float]
    weighted_trend: List[float]


class EnvironmentInfo(BaseModel):
    version: str
    seed: int
    numpy_version: str
    scipy_version: str
    timings: Optional[Dict[str, float]] = None


class Report(BaseModel):
    config: RunConfig
    hypothesis_checks: List[TheoremVerdict] = Field(default_factory=list)
    commutator_checks: List[CommutatorCheck] = Field(default_factory=list)
    mourre_certificate: Optional[MourreCertificate] = None
    eigenvalues: Optional[EigenScan] = None
    lap_sweep: Optional[SweepResult] = None
    hs_demo: Optional[HSDemoRecord] = None
    environment: EnvironmentInfo
    errors: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
