"""
Pydantic schemas for fcreg

This module contains the typed configurations of every stage and the result
records that are written to disk or printed.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tabulate import tabulate

Design = Literal["exponential", "sparse"]
Metric = Literal["hs_error", "coverage", "projection_error", "long_run_error"]
Command = Literal["ingest-density", "estimate", "vr-test", "simulate", "shock"]
ShockKind = Literal["halves", "endpoints", "file"]
KScaling = Literal["total", "leading"]


class FitConfig(BaseModel):
    """Settings of the two-step slope estimator"""

    model_config = ConfigDict(frozen=True)

    kappa: int = Field(1, ge=0, description="Autocovariance lag")
    d_N: int = Field(..., ge=1, description="Dimension of the nonstationary subspace")
    a1: float = Field(0.4, gt=0, description="Scale of the K selection threshold a1 * T^-a2_exp")
    a2_exp: float = Field(0.2, gt=0, lt=0.5, description="Exponent of the K selection threshold")
    k_scaling: KScaling = Field(
        "total", description="Scaled eigenvalues relative to the stationary sum (total) or the largest one (leading)"
    )
    centered: bool = Field(True, description="Demean the series and estimate an intercept")
    K: Optional[int] = Field(None, ge=1, description="Manual K; the threshold rule is used when unset")

    @model_validator(mode="after")
    def validate_K(self):
        if self.K is not None and self.K <= self.d_N:
            raise ValueError(f"K must exceed d_N so the stationary part is nonempty (K={self.K}, d_N={self.d_N})")
        return self


class VRConfig(BaseModel):
    """Settings of the variance-ratio test for the nonstationarity dimension"""

    model_config = ConfigDict(frozen=True)

    ell: int = Field(5, ge=1, description="Number of leading covariance eigenfunctions retained")
    d_max: int = Field(5, ge=1, description="Largest dimension tested")
    level: float = Field(0.05, gt=0, lt=1, description="Significance level of each sequential test")
    centered: bool = Field(True, description="Build the statistic from demeaned data")
    null_draws: int = Field(100_000, ge=1000, description="Monte Carlo draws of the null functional")
    bm_steps: int = Field(1000, ge=100, description="Time steps of each simulated Brownian path")
    null_seed: int = Field(0, ge=0, description="Seed of the null simulation")

    @model_validator(mode="after")
    def validate_dimensions(self):
        if self.d_max > self.ell:
            raise ValueError(f"d_max ({self.d_max}) cannot exceed ell ({self.ell})")
        return self


class DgpConfig(BaseModel):
    """Simulation design for one table cell"""

    model_config = ConfigDict(frozen=True)

    d_N: int = Field(2, ge=1)
    m: int = Field(7, ge=0, description="Stationary directions with unit innovation scale")
    M: int = Field(20, ge=1, description="Last index of the geometric innovation schedule")
    design: Design = Field("exponential", description="Decay of the innovation schedule: rate 0.8 or 0.1")
    T: int = Field(200, ge=4)
    error_scale_pct: float = Field(0.0, ge=0, description="Measurement-error size as % of the target nuclear norm")
    J_trunc: int = Field(40, ge=1, description="Number of Fourier functions used for synthesis")
    grid_n: int = Field(201, ge=8)
    calib_reps: int = Field(800, ge=50)
    burn_in: int = Field(50, ge=0, description="Burn-in periods of the stationary coefficient processes")
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def validate_sizes(self):
        if self.M <= self.m:
            raise ValueError(f"M ({self.M}) must exceed m ({self.m})")
        if self.J_trunc < self.M + 5:
            raise ValueError(f"J_trunc ({self.J_trunc}) must be at least M + 5 = {self.M + 5}")
        if self.J_trunc <= self.d_N + self.m:
            raise ValueError("J_trunc must exceed d_N + m")
        if self.grid_n < 4 * self.J_trunc:
            raise ValueError(f"grid_n ({self.grid_n}) must be at least 4 * J_trunc = {4 * self.J_trunc}")
        return self


class TableSpec(BaseModel):
    """A grid of simulation cells: designs x scales x sample sizes x lags"""

    model_config = ConfigDict(frozen=True)

    d_N: int = Field(2, ge=1)
    designs: List[Design] = Field(default_factory=lambda: ["exponential", "sparse"])
    scales: List[float] = Field(default_factory=lambda: [0.0, 50.0, 100.0])
    T_values: List[int] = Field(default_factory=lambda: [100, 200, 400, 800])
    kappas: List[int] = Field(default_factory=lambda: [0, 1])
    metrics: List[Metric] = Field(default_factory=lambda: ["hs_error", "coverage"])
    reps: int = Field(500, ge=50)
    master_seed: int = Field(0, ge=0)
    m: int = 7
    M: int = 20
    J_trunc: int = 40
    grid_n: int = 201
    calib_reps: int = 800
    burn_in: int = 50
    level: float = Field(0.95, gt=0, lt=1, description="Confidence level for the coverage metric")
    a1: float = Field(0.4, gt=0)
    a2_exp: float = Field(0.2, gt=0, lt=0.5)
    k_scaling: KScaling = "leading"

    @field_validator("designs", "scales", "T_values", "kappas", "metrics")
    def validate_nonempty(cls, v):
        if not v:
            raise ValueError("Every table axis needs at least one value")
        return v

    @field_validator("scales")
    def validate_scales(cls, v):
        if any(s < 0 for s in v):
            raise ValueError("Error scales must be nonnegative percentages")
        return v

    @field_validator("kappas")
    def validate_kappas(cls, v):
        if any(k < 0 for k in v):
            raise ValueError("Lags must be nonnegative")
        return v

    def dgp_config(self, design: str, scale: float, T: int, seed: int = 0) -> DgpConfig:
        return DgpConfig(
            d_N=self.d_N, m=self.m, M=self.M, design=design, T=T, error_scale_pct=scale,
            J_trunc=self.J_trunc, grid_n=self.grid_n, calib_reps=self.calib_reps,
            burn_in=self.burn_in, seed=seed,
        )

    def fit_config(self, kappa: int) -> FitConfig:
        return FitConfig(
            kappa=kappa, d_N=self.d_N, a1=self.a1, a2_exp=self.a2_exp, k_scaling=self.k_scaling, centered=True,
        )


class RunConfig(BaseModel):
    """Flat configuration of one command-line run; every key is settable from YAML or --set"""

    model_config = ConfigDict(extra="forbid")

    command: Command
    output_dir: str = "outputs"
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    master_seed: int = Field(0, ge=0)
    n_jobs: Optional[int] = Field(None, description="joblib workers; FCREG_N_JOBS or 1 when unset")

    # ingest-density
    panel_path: Optional[str] = None
    support_mass: float = Field(0.99, gt=0, lt=1)
    grid_n: int = Field(201, ge=2)
    floor_eps: float = Field(1e-10, ge=0)

    # estimate
    x_path: Optional[str] = None
    y_path: Optional[str] = None
    kappa: int = Field(1, ge=0)
    d_N: Optional[int] = Field(None, ge=1, description="Estimated with the VR test on x when unset")
    a1: float = Field(0.4, gt=0)
    a2_exp: float = Field(0.2, gt=0, lt=0.5)
    k_scaling: KScaling = "total"
    K: Optional[int] = Field(None, ge=1)
    centered: bool = True
    band: bool = False
    level: float = Field(0.95, gt=0, lt=1)
    zeta_path: Optional[str] = None
    breakpoints: Optional[List[float]] = None

    # vr-test
    ell: int = Field(5, ge=1)
    d_max: int = Field(5, ge=1)
    vr_level: float = Field(0.05, gt=0, lt=1)
    null_draws: int = Field(100_000, ge=1000)
    bm_steps: int = Field(1000, ge=100)
    null_seed: int = Field(0, ge=0)

    # simulate
    sim_d_N: int = Field(2, ge=1)
    designs: List[Design] = Field(default_factory=lambda: ["exponential", "sparse"])
    scales: List[float] = Field(default_factory=lambda: [0.0, 50.0, 100.0])
    T_values: List[int] = Field(default_factory=lambda: [100, 200, 400, 800])
    kappas: List[int] = Field(default_factory=lambda: [0, 1])
    metrics: List[Metric] = Field(default_factory=lambda: ["hs_error", "coverage"])
    reps: int = Field(500, ge=50)
    m: int = 7
    M: int = 20
    J_trunc: int = 40
    sim_grid_n: int = 201
    calib_reps: int = Field(800, ge=50)
    burn_in: int = Field(50, ge=0)
    sim_k_scaling: KScaling = "leading"

    # shock
    fit_dir: Optional[str] = None
    densities_path: Optional[str] = Field(None, description="Response densities; the reference density comes from them")
    zeta_densities_path: Optional[str] = Field(None, description="Regressor densities defining the shock; densities_path when unset")
    reference_start: int = Field(0, ge=0)
    reference_stop: Optional[int] = None
    shock: ShockKind = "halves"
    break_index: Optional[int] = Field(None, ge=1)
    shock_width: int = Field(10, ge=1)
    q_list: List[float] = Field(default_factory=lambda: [0.0, 0.75, 1.5])

    @field_validator("q_list")
    def validate_q_list(cls, v):
        if not v or any(q < 0 for q in v):
            raise ValueError("q_list must be a nonempty list of nonnegative scales")
        return v

    @field_validator("breakpoints")
    def validate_breakpoints(cls, v):
        if v is not None and (len(v) < 2 or any(b >= c for b, c in zip(v, v[1:]))):
            raise ValueError("breakpoints must be at least two strictly increasing values")
        return v

    @model_validator(mode="after")
    def validate_command_inputs(self):
        required = {
            "ingest-density": ["panel_path"],
            "estimate": ["x_path", "y_path"],
            "vr-test": ["x_path"],
            "simulate": [],
            "shock": ["fit_dir", "densities_path"],
        }[self.command]
        for key in required:
            value = getattr(self, key)
            if value is None:
                raise ValueError(f"'{key}' is required for the {self.command} command")
            if not Path(value).exists():
                raise ValueError(f"'{key}' points to a missing path: {value}")
        for key in ("zeta_path", "zeta_densities_path"):
            value = getattr(self, key)
            if value is not None and not Path(value).exists():
                raise ValueError(f"'{key}' points to a missing path: {value}")
        if self.d_max > self.ell:
            raise ValueError(f"d_max ({self.d_max}) cannot exceed ell ({self.ell})")
        if self.K is not None and self.d_N is not None and self.K <= self.d_N:
            raise ValueError(f"K must exceed d_N (K={self.K}, d_N={self.d_N})")
        if self.command == "shock" and self.shock == "file" and self.zeta_path is None:
            raise ValueError("shock=file needs zeta_path")
        if self.command == "estimate" and self.band and self.zeta_path is None:
            raise ValueError("band=true needs zeta_path")
        return self

    def fit_config(self, d_N: int = None) -> FitConfig:
        return FitConfig(
            kappa=self.kappa, d_N=self.d_N if d_N is None else d_N,
            a1=self.a1, a2_exp=self.a2_exp, k_scaling=self.k_scaling, centered=self.centered, K=self.K,
        )

    def vr_config(self) -> VRConfig:
        return VRConfig(
            ell=self.ell, d_max=self.d_max, level=self.vr_level, centered=self.centered,
            null_draws=self.null_draws, bm_steps=self.bm_steps, null_seed=self.null_seed,
        )

    def table_spec(self) -> TableSpec:
        return TableSpec(
            d_N=self.sim_d_N, designs=self.designs, scales=self.scales, T_values=self.T_values,
            kappas=self.kappas, metrics=self.metrics, reps=self.reps, master_seed=self.master_seed,
            m=self.m, M=self.M, J_trunc=self.J_trunc, grid_n=self.sim_grid_n,
            calib_reps=self.calib_reps, burn_in=self.burn_in, level=self.level,
            a1=self.a1, a2_exp=self.a2_exp, k_scaling=self.sim_k_scaling,
        )


class InferenceReport(BaseModel):
    """Point estimate and confidence interval for one linear functional of a partial effect"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    point: float
    theta_hat: float = Field(..., ge=0)
    variance: float = Field(..., ge=0, description="theta_hat * <phi, C_u phi> / T")
    ci_low: float
    ci_high: float
    level: float = Field(..., gt=0, lt=1)
    interval: Optional[Tuple[float, float]] = Field(None, description="Averaging interval of a local band")
    zeta: Optional[Any] = Field(None, exclude=True)
    phi: Optional[Any] = Field(None, exclude=True)

    @model_validator(mode="after")
    def validate_order(self):
        if not self.ci_low <= self.point <= self.ci_high:
            raise ValueError(f"Interval [{self.ci_low}, {self.ci_high}] does not contain the point {self.point}")
        return self

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    def row(self) -> Dict[str, float]:
        lo, hi = self.interval if self.interval is not None else (float("nan"), float("nan"))
        return {
            "interval_low": lo, "interval_high": hi, "point": self.point,
            "ci_low": self.ci_low, "ci_high": self.ci_high,
            "theta_hat": self.theta_hat, "variance": self.variance, "level": self.level,
        }


class VRReport(BaseModel):
    """Sequential variance-ratio results for d0 = d_max, ..., 1"""

    d0: List[int]
    stats: List[float]
    p_values: List[float]
    d_hat: int = Field(..., ge=0)
    level: float
    quantile_table: Dict[int, Dict[float, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_d_hat(self):
        accepted = [d for d, p in zip(self.d0, self.p_values) if p > self.level]
        expected = max(accepted) if accepted else 0
        if self.d_hat != expected:
            raise ValueError(f"d_hat={self.d_hat} disagrees with the p-values (expected {expected})")
        return self

    def render(self) -> str:
        def percent(p: float) -> str:
            return "<0.1" if p < 0.001 else f"{100 * p:.1f}"

        rows = [
            ["statistic"] + [f"{s:.2f}" for s in self.stats],
            ["p-value (%)"] + [percent(p) for p in self.p_values],
        ]
        table = tabulate(rows, headers=["d0"] + [str(d) for d in self.d0], tablefmt="simple")
        return f"{table}\n\nestimated d_N = {self.d_hat} (level {self.level})"


class ShockRow(BaseModel):
    """Moments of the response density to a scaled shock"""

    q: float = Field(..., ge=0)
    mean: float
    variance: float = Field(..., ge=0)
