# src/types/index.py

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError

EPS_POS = 1e-12


class BoundaryKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"


class Setting(str, Enum):
    PDE = "pde"
    FROZEN_X = "frozen_x"
    AVERAGED = "averaged"


class R0Status(str, Enum):
    POSITIVE = "positive"
    ZERO_CASE = "zero_case"
    BRACKET_FAILURE = "bracket_failure"


class SpectralMethod(str, Enum):
    POWER = "power"
    GELFAND = "gelfand"
    DENSE = "dense"


@dataclass(frozen=True)
class Domain:
    x_lo: float
    x_hi: float
    n_x: int

    def __post_init__(self):
        if not self.x_hi > self.x_lo:
            raise ConfigError(f"x_hi ({self.x_hi}) must exceed x_lo ({self.x_lo})", key="domain.x_hi")
        if self.n_x < 3:
            raise ConfigError(f"need at least 3 interior points, got {self.n_x}", key="domain.n_x")

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def h(self) -> float:
        return self.length / (self.n_x + 1)

    @property
    def n_nodes(self) -> int:
        return self.n_x + 2

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_nodes)


@dataclass(frozen=True)
class TimeGrid:
    period: float
    n_t: int

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period}", key="time.period")
        if self.n_t < 8:
            raise ConfigError(f"need at least 8 steps per period, got {self.n_t}", key="time.n_t")

    @property
    def dt(self) -> float:
        return self.period / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    kind: BoundaryKind
    # (n, 2, n_t): b_i at x_lo and x_hi over one period
    robin_b: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.kind is BoundaryKind.ROBIN) != (self.robin_b is not None):
            raise ConfigError("robin b must be given exactly when kind is robin", key="boundary.b")
        if self.robin_b is not None and not np.all(self.robin_b > 0):
            raise ConfigError("robin b must be strictly positive", key="boundary.b")


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Matrix-valued field sampled on the nodes (boundary included) over one period.

    samples has shape (n, m, n_x + 2, n_t); diffusion coefficients use m = 1.
    """

    samples: np.ndarray
    period: float

    def __post_init__(self):
        if self.samples.ndim != 4:
            raise ConfigError(f"field samples must be 4-d, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("field has non-finite samples")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.samples.shape

    def at_time(self, k: int) -> np.ndarray:
        return self.samples[..., k % self.samples.shape[-1]]

    def scaled(self, factor) -> "CoefficientField":
        return CoefficientField(self.samples * factor, self.period)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    kappa: np.ndarray
    a: CoefficientField

    def __post_init__(self):
        if np.any(self.kappa < 0):
            raise ConfigError("negative diffusion rate", key="diffusion.kappa")
        if not np.all(self.a.samples > 0):
            raise ConfigError("diffusion field a must be strictly positive", key="diffusion.a")

    @property
    def a_lo(self) -> float:
        return float(self.a.samples.min())

    @property
    def a_hi(self) -> float:
        return float(self.a.samples.max())


@dataclass(frozen=True, eq=False)
class ModelSpec:
    domain: Domain
    tgrid: TimeGrid
    diffusion: DiffusionSpec
    boundary: BoundarySpec
    M: Optional[CoefficientField] = None
    V: Optional[CoefficientField] = None
    F: Optional[CoefficientField] = None
    label: str = ""

    def __post_init__(self):
        combined = self.M is not None
        split = self.V is not None and self.F is not None
        if combined == split:
            raise ConfigError("reaction needs either M or both V and F", key="reaction.form")
        n = self.n
        expected = (n, n, self.domain.n_nodes, self.tgrid.n_t)
        for name in ("M", "V", "F"):
            fld = getattr(self, name)
            if fld is not None and fld.shape != expected:
                raise ConfigError(f"{name} has shape {fld.shape}, expected {expected}", key="reaction")
        if self.diffusion.kappa.shape != (n,):
            raise ConfigError(f"expected {n} diffusion rates, got {self.diffusion.kappa.shape}", key="diffusion.kappa")
        if self.diffusion.a.shape != (n, 1, self.domain.n_nodes, self.tgrid.n_t):
            raise ConfigError("diffusion field a has wrong shape", key="diffusion.a")
        if self.boundary.robin_b is not None and self.boundary.robin_b.shape != (n, 2, self.tgrid.n_t):
            raise ConfigError("robin b has wrong shape", key="boundary.b")

    @property
    def n(self) -> int:
        return (self.M if self.M is not None else self.V).n

    @property
    def is_split(self) -> bool:
        return self.M is None

    def generator(self, mu: Optional[float] = None) -> np.ndarray:
        """Reaction samples: M, or -V + F/mu (mu defaults to 1)."""
        if self.M is not None:
            return self.M.samples
        scale = 1.0 if mu is None else 1.0 / mu
        return -self.V.samples + scale * self.F.samples

    def with_kappa(self, kappa) -> "ModelSpec":
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (self.n,)).copy()
        return replace(self, diffusion=replace(self.diffusion, kappa=kappa))

    def with_boundary(self, boundary: BoundarySpec) -> "ModelSpec":
        return replace(self, boundary=boundary)

    def without_infection(self) -> "ModelSpec":
        if self.M is not None:
            return self
        zero = CoefficientField(np.zeros_like(self.F.samples), self.F.period)
        return replace(self, F=zero)


@dataclass
class Violation:
    assumption: str
    entry: Tuple[int, int]
    node: int
    time_index: int
    x: float
    t: float
    value: float

    def __str__(self):
        i, j = self.entry
        return (f"{self.assumption}: entry ({i},{j}) = {self.value:.6g} "
                f"at x={self.x:.6g} (node {self.node}), t={self.t:.6g} (step {self.time_index})")


@dataclass
class AssumptionReport:
    cooperative_ok: bool
    F_nonneg_ok: bool
    omega_Gamma_negative: bool
    omega_Gamma_max: Optional[float]
    omega_Gamma_argmax: Optional[int]
    omega_Gamma_tilde_negative: bool
    omega_Gamma_tilde: Optional[float]
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.cooperative_ok and self.F_nonneg_ok
                and self.omega_Gamma_negative and self.omega_Gamma_tilde_negative)


@dataclass(frozen=True, eq=False)
class BandedOperator:
    size: int
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    bc_kind: BoundaryKind
    time_index: int

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.upper * u[1:]
        out[1:] += self.lower * u[:-1]
        return out


@dataclass(eq=False)
class MonodromyMap:
    """Period map; the true map is exp(log_scale) * matrix."""

    matrix: np.ndarray
    period: float
    setting: Setting
    bc: Optional[BoundaryKind] = None
    x_index: Optional[int] = None
    mu: Optional[float] = None
    clamp_count: int = 0
    log_scale: float = 0.0
    max_substeps: int = 1
    # 2^p substeps used at each step
    refinements: Optional[np.ndarray] = None

    def dense(self) -> np.ndarray:
        return self.matrix * np.exp(self.log_scale)


@dataclass(eq=False)
class SpectralResult:
    radius: float
    vector: np.ndarray
    iterations: int
    method: SpectralMethod
    residual: float


@dataclass(eq=False)
class BlockDecomposition:
    permutation: np.ndarray
    blocks: List[List[int]]
    block_radii: List[float]

    @property
    def radius(self) -> float:
        return max(self.block_radii) if self.block_radii else 0.0


@dataclass
class BlockConsistencyReport:
    blocks: List[List[int]]
    block_omegas: List[float]
    zero_entries: List[Tuple[int, int]]
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(eq=False)
class PrincipalEigenvalue:
    lambda_star: float
    bc: Optional[BoundaryKind]
    kappa: np.ndarray
    # (n, n_x + 2, n_t), max-normalized
    eigenfunction: np.ndarray
    diagnostics: SpectralResult
    setting: Setting = Setting.PDE


@dataclass
class R0Options:
    mu_start: float = 1.0
    mu_min: float = 1e-8
    mu_max: float = 1e12
    tol_mu: float = 1e-6


@dataclass
class R0Result:
    value: float
    status: R0Status
    bracket: Tuple[float, float]
    omega_trace: List[Tuple[float, float]]
    setting: Setting
    bc: Optional[BoundaryKind]
    omega_at_value: float = 0.0


@dataclass(eq=False)
class PointwiseR0:
    max_value: float
    argmax: int
    x_argmax: float
    values: np.ndarray
    statuses: List[R0Status]


@dataclass
class SweepReport:
    what: str
    bc: BoundaryKind
    kappa_values: List[np.ndarray]
    values: List[float]
    statuses: List[str]
    omega_at_values: List[float]
    limit_small: float
    limit_large: float
    monotonicity_notes: List[str] = field(default_factory=list)
    eta_values: Optional[Tuple[float, float]] = None
    lower_bounds: Optional[List[float]] = None
    wall_ms: List[float] = field(default_factory=list)


@dataclass(eq=False)
class ReactionSpec:
    """Nonlinear reaction G(x, t, q) with its sub/supersolution certificates."""

    expressions: List[str]
    G: Callable
    jacobian: Callable
    v_lower: Callable
    v_lower_prime: Callable
    v_upper: np.ndarray
    h: float
    jacobian_offdiag_nonneg: Optional[bool] = None

    @property
    def n(self) -> int:
        return len(self.expressions)


@dataclass(frozen=True, eq=False)
class NonlinearModel:
    """Reaction-diffusion system with a nonlinear cooperative reaction G."""

    domain: Domain
    tgrid: TimeGrid
    diffusion: DiffusionSpec
    boundary: BoundarySpec
    reaction: ReactionSpec
    label: str = ""

    @property
    def n(self) -> int:
        return self.reaction.n

    def with_kappa(self, kappa) -> "NonlinearModel":
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (self.n,)).copy()
        return replace(self, diffusion=replace(self.diffusion, kappa=kappa))


@dataclass
class ReactionCheck:
    h1_ok: bool
    h3_ok: bool
    h4_ok: bool
    tau1: float
    tau2: float
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.h1_ok and self.h3_ok and self.h4_ok


@dataclass(eq=False)
class PeriodicSolution:
    # (n, n_nodes, n_t); n_nodes is 1 for the averaged ODE
    w: np.ndarray
    w_tilde: np.ndarray
    w_hat_norm: float
    residual: float
    kappa: np.ndarray
    setting: Setting
    periods: int
    bracket: Tuple[float, float] = (0.0, 0.0)
    two_sided_gap: Optional[float] = None


@dataclass
class LimitRow:
    kappa: np.ndarray
    gap_avg: float
    gap_hat: float
    residual: float
    periods: int


@dataclass
class LimitReport:
    direction: str
    rows: List[LimitRow]
    reference_norm: float
    notes: List[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ZikaParams:
    domain: Domain
    tgrid: TimeGrid
    expressions: Dict[str, str]
    # each (n_x + 2, n_t); H_u is constant in t
    H_u: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    kappa1: float
    kappa2: float


@dataclass
class ZikaLimits:
    small: float
    large: float
    small_argmax: int
    pointwise: PointwiseR0
    averaged: R0Result


@dataclass
class RunRequest:
    subcommand: str
    config_path: str
    output_dir: str
    overrides: List[str] = field(default_factory=list)
    seed: int = 0
    jobs: int = 1
    timings: bool = False
