"""Pydantic schemas for configuration, results and serialized artifacts"""

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "1.0"

# Default constraint bounds and band edges
DEFAULT_GAMMAS = (0.05, 44.0, 0.03, 0.3)
DEFAULT_OMEGA_E = 12 * math.pi
DEFAULT_OMEGA_U = 12 * math.pi
DEFAULT_OMEGA_N = 40 * math.pi
DEFAULT_OMEGA_P = 12 * math.pi

DEFAULT_STIFFNESS_SEQUENCE = (0.71, 0.32, 0.51, 0.25, 0.56, 0.65, 0.91, 1.0)
DEFAULT_DESIGN_FRACTIONS = tuple(round(0.1 * k, 10) for k in range(1, 11))

CONSTRAINT_NAMES = ("error", "control", "disturbance", "noise", "passivity")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")


# Plant schemas
class SeaPlantParams(_Model):
    k_s: float = Field(1.0, gt=0, description="Physical spring stiffness (Nm/rad)")
    t_m: float = Field(0.01, gt=0, description="Motor velocity-loop time constant (s)")
    u_max: float = Field(44.0, gt=0, description="Motor velocity saturation (rad/s)")


class ErrorWeightSpec(_Model):
    """First-order low-pass W_e(s) = gain / (s/omega + 1)"""

    omega: Optional[float] = Field(None, gt=0)  # None: use the constraint band edge omega_e
    gain: float = Field(1.0, gt=0)


# Constraint schemas
class ConstraintSpec(_Model):
    gamma1: float = Field(DEFAULT_GAMMAS[0], gt=0)
    gamma2: float = Field(DEFAULT_GAMMAS[1], gt=0)
    gamma3: float = Field(DEFAULT_GAMMAS[2], gt=0)
    gamma4: float = Field(DEFAULT_GAMMAS[3], gt=0)
    omega_e: float = Field(DEFAULT_OMEGA_E, gt=0)
    omega_u: float = Field(DEFAULT_OMEGA_U, gt=0)
    omega_n: float = Field(DEFAULT_OMEGA_N, gt=0)
    omega_p: float = Field(DEFAULT_OMEGA_P, gt=0)
    points_per_decade: int = Field(200, ge=200)
    eps_pass: float = Field(1e-6, ge=0)

    @property
    def omega_max(self) -> float:
        return 1000.0 * self.omega_e


class ConstraintResult(_Model):
    name: str
    achieved: float
    bound: float
    band: tuple[float, float]
    margin: float
    passed: bool
    peak_frequency: Optional[float] = None
    detail: Optional[str] = None

    @property
    def normalized(self) -> float:
        return self.achieved / self.bound


class ConstraintReport(_Model):
    stable: bool
    spectral_abscissa: float
    results: list[ConstraintResult]
    passivity_full: Optional[ConstraintResult] = None
    overall: float

    def result(self, name: str) -> ConstraintResult:
        for item in self.results:
            if item.name == name:
                return item
        raise KeyError(name)

    @property
    def all_passed(self) -> bool:
        return self.stable and all(item.passed for item in self.results)

    def violations(self) -> list[str]:
        return [item.name for item in self.results if not item.passed]


# Controller schemas
class ControllerTemplate(_Model):
    n_inputs: int = Field(2, ge=1, description="l, number of controller inputs")
    den_order: int = Field(1, ge=0, description="n, denominator order")
    num_order: int = Field(1, ge=0, description="m, numerator order")
    shared_denominator: bool = False

    @model_validator(mode="after")
    def _proper(self):
        if self.num_order > self.den_order:
            raise ValueError("num_order must not exceed den_order (proper subcontrollers)")
        return self

    def gain_names(self) -> list[str]:
        names: list[str] = []
        if self.shared_denominator:
            names += [f"K_a{j}" for j in range(1, self.den_order + 1)]
        for i in range(1, self.n_inputs + 1):
            if not self.shared_denominator:
                names += [f"K_a{i}{j}" for j in range(1, self.den_order + 1)]
            names += [f"K_b{i}{k}" for k in range(self.num_order + 1)]
        return names

    @property
    def n_gains(self) -> int:
        return len(self.gain_names())


class ControllerGains(_Model):
    values: list[float]


class OptimizerTrace(_Model):
    evaluations: int
    iterations: int
    best_objective: float
    seed: int
    n_starts: int
    best_start: int
    warm_started: bool = False


class DesignPointResult(_Model):
    zd: float
    gains: ControllerGains
    report: ConstraintReport
    feasible: bool
    trace: OptimizerTrace
    smoothed: bool = False  # moved toward the polynomial fit after tuning


class GainSchedule(_Model):
    schema_version: str = SCHEMA_VERSION
    template: ControllerTemplate
    order: int = Field(..., ge=0)
    zd_min: float = Field(..., ge=0)
    zd_max: float = Field(..., gt=0)
    normalization: dict[str, float | str]
    gain_names: list[str]
    coefficients: list[list[float]]
    fit_residuals: list[float]
    flagged_gains: list[str] = []
    refined: bool = False
    design_points: list[DesignPointResult]
    seed: int
    constraints: ConstraintSpec
    plant: SeaPlantParams
    weight: ErrorWeightSpec

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.coefficients) != len(self.gain_names):
            raise ValueError("one coefficient array is required per gain")
        if any(len(row) != self.order + 1 for row in self.coefficients):
            raise ValueError("every gain needs order + 1 coefficients")
        if self.zd_min > self.zd_max:
            raise ValueError("zd_min must not exceed zd_max")
        return self


class ScheduleCheck(_Model):
    zd: float
    evaluated_zd: float
    clamped: bool
    gains: ControllerGains
    report: ConstraintReport


class VerificationSummary(_Model):
    checks: list[ScheduleCheck]
    violations: int
    unstable: int

    @property
    def count(self) -> int:
        return len(self.checks)


# Simulation schemas
class StiffnessSegment(_Model):
    start: float = Field(..., ge=0)
    zd: float = Field(..., ge=0)


class HumanMotion(_Model):
    kind: Literal["chirp", "sine", "samples"] = "chirp"
    f0: float = Field(0.0, ge=0, description="Chirp start frequency (Hz)")
    f1: float = Field(6.0, gt=0, description="Chirp end frequency (Hz)")
    frequency: float = Field(1.0, gt=0, description="Sine frequency (Hz)")
    amplitude: float = Field(0.5, ge=0, description="rad")
    sample_file: Optional[str] = None

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "chirp" and not self.f0 < self.f1:
            raise ValueError("chirp requires f0 < f1")
        if self.kind == "samples" and not self.sample_file:
            raise ValueError("sample motion requires sample_file")
        return self


class NoiseSpec(_Model):
    rms: float = Field(..., ge=0)
    bandwidth: float = Field(..., gt=0, description="Corner frequency (rad/s)")


class SimScenario(_Model):
    duration: float = Field(40.0, gt=0)
    dt: float = Field(1e-3, gt=0)
    sample_dt: Optional[float] = Field(None, gt=0, description="Recording and noise grid; an integer multiple of dt (None: dt)")
    segments: list[StiffnessSegment]
    motion: HumanMotion = HumanMotion()
    disturbance: NoiseSpec = NoiseSpec(rms=0.01, bandwidth=20 * math.pi)
    noise: NoiseSpec = NoiseSpec(rms=0.005, bandwidth=40 * math.pi)
    u_max: Optional[float] = Field(None, gt=0)  # None: plant saturation; inf disables
    seed: int = 0

    @field_validator("segments")
    @classmethod
    def _ordered(cls, segments: list[StiffnessSegment]) -> list[StiffnessSegment]:
        if not segments:
            raise ValueError("at least one stiffness segment is required")
        if segments[0].start != 0.0:
            raise ValueError("the first segment must start at t=0")
        starts = [segment.start for segment in segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segments must be strictly time-ordered")
        return segments

    @model_validator(mode="after")
    def _sampling(self):
        if self.sample_dt is not None and not math.isclose(self.substeps * self.dt, self.sample_dt, rel_tol=1e-9):
            raise ValueError(f"sample_dt={self.sample_dt} must be an integer multiple of dt={self.dt}")
        return self

    @property
    def substeps(self) -> int:
        """Integration steps per recorded sample"""
        return 1 if self.sample_dt is None else max(1, round(self.sample_dt / self.dt))

    @property
    def record_dt(self) -> float:
        return self.dt * self.substeps

    @classmethod
    def stepped(
        cls,
        k_s: float,
        duration: float = 40.0,
        fractions: tuple[float, ...] = DEFAULT_STIFFNESS_SEQUENCE,
        **kwargs,
    ) -> "SimScenario":
        """Evenly split stiffness sequence with a 0-6 Hz chirp"""
        span = duration / len(fractions)
        segments = [StiffnessSegment(start=k * span, zd=f * k_s) for k, f in enumerate(fractions)]
        return cls(duration=duration, segments=segments, **kwargs)


class PidGains(_Model):
    kp: float
    ki: float = Field(..., ge=0)
    kd: float
    tf: float = Field(..., gt=0, description="Derivative filter time constant (s)")


class PidBaseline(_Model):
    gains: PidGains
    zd_ref: float
    feasible: bool
    report: ConstraintReport
    trace: OptimizerTrace


# Report schemas
class Metrics(_Model):
    me: float = Field(..., ge=0, description="max |e| (Nm)")
    sse: float = Field(..., ge=0, description="sum of e^2 ((Nm)^2)")
    mco: float = Field(..., ge=0, description="max |controller output| (rad/s)")
    snr: float = Field(..., description="dB; NaN when undefined")


class EnergyCheck(_Model):
    min_energy: float
    final_energy: float
    tolerance: float
    passive: bool


# Run configuration schemas
class SynthesisSettings(_Model):
    design_fractions: list[float] = list(DEFAULT_DESIGN_FRACTIONS)
    zd_max_fraction: float = Field(1.0, gt=0)
    order: int = Field(5, ge=0)
    n_starts: int = Field(16, ge=1)
    max_evals: int = Field(2000, ge=10)
    xatol: float = Field(1e-4, gt=0)
    fatol: float = Field(1e-5, gt=0)
    warm_start: bool = True
    refine: bool = True
    refine_max_evals: int = Field(3000, ge=0)
    hf_gain_ref: Optional[float] = Field(44.0, gt=0)  # None: plain min-max objective
    smooth_passes: int = Field(2, ge=0)
    smooth_slack: float = Field(0.1, ge=0, le=1)  # share of the margin below 1 a point may give up
    smooth_max_evals: int = Field(1000, ge=10)


class VerifySettings(_Model):
    off_design_points: int = Field(50, ge=0)
    max_violations: int = Field(2, ge=0)


class ScenarioSettings(_Model):
    duration: float = Field(40.0, gt=0)
    dt: float = Field(1e-3, gt=0)
    sample_dt: float = Field(1e-3, gt=0)
    stiffness_fractions: list[float] = list(DEFAULT_STIFFNESS_SEQUENCE)
    motion: HumanMotion = HumanMotion()
    disturbance: NoiseSpec = NoiseSpec(rms=0.01, bandwidth=20 * math.pi)
    noise: NoiseSpec = NoiseSpec(rms=0.005, bandwidth=40 * math.pi)
    saturation: bool = True


class PidSettings(_Model):
    zd_ref_fraction: float = Field(0.5, gt=0)
    filter_time_constant: float = Field(5e-3, gt=0)
    n_starts: int = Field(8, ge=1)
    max_evals: int = Field(1500, ge=10)


class RunConfig(_Model):
    schema_version: str = SCHEMA_VERSION
    seed: int = Field(0, ge=0)
    plant: SeaPlantParams = SeaPlantParams()
    weight: ErrorWeightSpec = ErrorWeightSpec()
    constraints: ConstraintSpec = ConstraintSpec()
    template: ControllerTemplate = ControllerTemplate()
    synthesis: SynthesisSettings = SynthesisSettings()
    verify: VerifySettings = VerifySettings()
    scenario: ScenarioSettings = ScenarioSettings()
    pid: PidSettings = PidSettings()


class RunManifest(_Model):
    schema_version: str = SCHEMA_VERSION
    command: str
    seed: int
    config: RunConfig
    versions: dict[str, str]
    artifacts: list[str]
    exit_code: int = 0
