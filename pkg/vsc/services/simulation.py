"""
Fixed-step closed-loop simulation of the SEA with online stiffness switching.

Plant states are the motor angle theta and velocity v:

    theta' = v,    T_m v' = -v + sat(u) + d,    tau_h = K_s (theta - phi_h)

Controller subsystems are kept in controllable canonical form so their state
vectors persist when the coefficients change with the desired stiffness.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.signal
from scipy.integrate import cumulative_trapezoid

from vsc.errors import NumericBlowupError
from vsc.models.schemas import (
    ConstraintSpec,
    EnergyCheck,
    ErrorWeightSpec,
    GainSchedule,
    HumanMotion,
    NoiseSpec,
    OptimizerTrace,
    PidBaseline,
    PidGains,
    PidSettings,
    SeaPlantParams,
    SimScenario,
)
from vsc.services.constraints import ConstraintObjective, evaluate_all
from vsc.services.lti import RationalTF
from vsc.services.optimizer import multistart_minimize, to_gains, to_params
from vsc.services.plant import AugmentedPlantBuilder
from vsc.services.synthesis import (
    StructuredController,
    clamp_stiffness,
    close_loop,
    schedule_coefficients,
)

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e9
ENERGY_TOLERANCE = 1e-3
MAX_DT_RATIO = 0.2  # dt <= T_m / 5
TRACE_COLUMNS = ("t", "Zd", "phi_h", "tau_d", "tau_h", "e", "u_pre_sat", "u", "d", "n")


# =============================================================================
# HUMAN MOTION
# =============================================================================

@dataclass(frozen=True)
class Chirp:
    """Linear chirp amp * sin(2 pi (f0 t + (f1 - f0) t^2 / (2T)))"""

    f0: float
    f1: float
    duration: float
    amplitude: float

    def __call__(self, t):
        rate = (self.f1 - self.f0) / (2.0 * self.duration)
        return self.amplitude * np.sin(2.0 * np.pi * (self.f0 * t + rate * t * t))

    def instantaneous_frequency(self, t):
        """Hz"""
        return self.f0 + (self.f1 - self.f0) * np.asarray(t) / self.duration


@dataclass(frozen=True)
class Sine:
    frequency: float
    amplitude: float

    def __call__(self, t):
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)


@dataclass(frozen=True, eq=False)
class SampledMotion:
    """Recorded motion, linearly interpolated and rescaled to a peak amplitude"""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


def make_chirp(f0: float, f1: float, duration: float, amplitude: float) -> Chirp:
    """
    Linear chirp human motion.

    Args:
        f0: Start frequency (Hz), >= 0
        f1: End frequency (Hz), > f0
        duration: Sweep duration T (s)
        amplitude: Peak angle (rad)

    Returns:
        Callable phi_h(t) whose instantaneous frequency is f0 at t=0 and f1 at t=T
    """
    if not (0 <= f0 < f1):
        raise ValueError(f"chirp requires 0 <= f0 < f1, got f0={f0}, f1={f1}")
    if not duration > 0:
        raise ValueError(f"chirp duration must be positive, got {duration}")
    if amplitude < 0:
        raise ValueError(f"chirp amplitude must be >= 0, got {amplitude}")
    return Chirp(float(f0), float(f1), float(duration), float(amplitude))


def load_motion_samples(path: str | Path, amplitude: float) -> SampledMotion:
    """Two-column CSV (t, phi_h) with a header row"""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: expected at least two rows of (t, phi_h)")
    times, values = data[:, 0], data[:, 1]
    if np.any(np.diff(times) <= 0):
        raise ValueError(f"{path}: sample times must be strictly increasing")
    peak = np.max(np.abs(values))
    scaled = values * (amplitude / peak) if peak > 0 else values
    return SampledMotion(times, scaled)


def make_motion(motion: HumanMotion, duration: float):
    if motion.kind == "chirp":
        return make_chirp(motion.f0, motion.f1, duration, motion.amplitude)
    if motion.kind == "sine":
        return Sine(motion.frequency, motion.amplitude)
    return load_motion_samples(motion.sample_file, motion.amplitude)


def band_limited_noise(
    count: int,
    dt: float,
    spec: NoiseSpec,
    btype: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Seeded white noise through a first-order Butterworth filter, scaled to the target RMS"""
    if spec.rms == 0 or count == 0:
        return np.zeros(count)
    corner_hz = spec.bandwidth / (2.0 * math.pi)
    b, a = scipy.signal.butter(1, corner_hz, btype=btype, fs=1.0 / dt)
    filtered = scipy.signal.lfilter(b, a, rng.standard_normal(count))
    rms = float(np.sqrt(np.mean(filtered ** 2)))
    return filtered * (spec.rms / rms) if rms > 0 else filtered


# =============================================================================
# CONTROLLER LAWS
# =============================================================================

@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """Controllable canonical realization x' = A x + B y, u = C x + D y of one K_i"""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @classmethod
    def from_tf(cls, tf: RationalTF, order: int) -> "CanonicalForm":
        den = np.concatenate([np.zeros(order + 1 - tf.den.size), tf.den])
        if den[0] == 0:
            raise ValueError(f"subcontroller order dropped below {order}")
        num = np.concatenate([np.zeros(order + 1 - tf.num.size), tf.num])
        a = den[1:]
        A = np.zeros((order, order))
        if order:
            A[0, :] = -a
            A[1:, :-1] = np.eye(order - 1)
        B = np.zeros(order)
        if order:
            B[0] = 1.0
        C = num[1:] - num[0] * a
        return cls(A, B, C, float(num[0]))


class ControllerLaw:
    """Controller u = sum_i K_i(s) y_i, y = [tau_h_meas, e], possibly scheduled on Zd"""

    name = "controller"

    def forms(self, zd: float) -> tuple[CanonicalForm, ...]:
        raise NotImplementedError

    @property
    def orders(self) -> tuple[int, ...]:
        raise NotImplementedError


class FixedGainLaw(ControllerLaw):
    """Gains frozen for every stiffness"""

    def __init__(self, controller: StructuredController, name: str = "fixed"):
        self.controller = controller
        self.name = name
        self._orders = tuple(k.order for k in controller.subcontrollers)
        self._forms = tuple(
            CanonicalForm.from_tf(k, order) for k, order in zip(controller.subcontrollers, self._orders)
        )

    @property
    def orders(self) -> tuple[int, ...]:
        return self._orders

    def forms(self, zd: float) -> tuple[CanonicalForm, ...]:
        return self._forms


class ScheduledLaw(ControllerLaw):
    """Coefficients re-evaluated from the gain schedule at the current stiffness"""

    name = "scheduled"

    def __init__(self, schedule: GainSchedule):
        self.schedule = schedule
        self._coefficients = schedule_coefficients(schedule)
        self._cache: dict[float, tuple[CanonicalForm, ...]] = {}
        n = schedule.template.den_order
        self._orders = (n,) * schedule.template.n_inputs

    @property
    def orders(self) -> tuple[int, ...]:
        return self._orders

    def forms(self, zd: float) -> tuple[CanonicalForm, ...]:
        if zd not in self._cache:
            value, clamped = clamp_stiffness(self.schedule, zd)
            if clamped:
                logger.warning(f"Scheduled Zd={zd:.4g} clamped to {value:.4g}")
            gains = np.polynomial.polynomial.polyval(value / self.schedule.zd_max, self._coefficients)
            controller = StructuredController.from_gains(self.schedule.template, gains)
            self._cache[zd] = tuple(
                CanonicalForm.from_tf(k, order) for k, order in zip(controller.subcontrollers, self._orders)
            )
        return self._cache[zd]


# =============================================================================
# SIMULATION
# =============================================================================

@dataclass(eq=False)
class SimTrace:
    """Uniformly sampled simulation record"""

    t: np.ndarray
    Zd: np.ndarray
    phi_h: np.ndarray
    tau_d: np.ndarray
    tau_h: np.ndarray
    e: np.ndarray
    u_pre_sat: np.ndarray
    u: np.ndarray
    d: np.ndarray
    n: np.ndarray
    method: str = "controller"
    u_max: float = math.inf
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(getattr(self, name)) for name in TRACE_COLUMNS}
        if len(lengths) != 1:
            raise ValueError(f"trace columns differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def columns(self) -> np.ndarray:
        """Samples x TRACE_COLUMNS matrix"""
        return np.column_stack([getattr(self, name) for name in TRACE_COLUMNS])


def stiffness_profile(scenario: SimScenario, times: np.ndarray) -> np.ndarray:
    starts = np.array([segment.start for segment in scenario.segments])
    values = np.array([segment.zd for segment in scenario.segments])
    return values[np.searchsorted(starts, times, side="right") - 1]


def simulate_closed_loop(
    params: SeaPlantParams,
    law: ControllerLaw,
    scenario: SimScenario,
) -> SimTrace:
    """
    Simulate the SEA under a controller law with 4th-order Runge-Kutta steps.

    The trace, Zd, d and n live on the recording grid (scenario.record_dt);
    each recorded interval is integrated in scenario.substeps steps of dt
    with Zd, d and n held and phi_h evaluated at the stage times. The
    controller output is clipped to +/- u_max before it reaches the plant.

    Args:
        params: SEA parameters
        law: Scheduled, fixed-gain or PID controller
        scenario: Duration, step, stiffness segments, motion and noise

    Returns:
        SimTrace on the recording grid (including t=0 and t=duration)

    Raises:
        ValueError: dt too coarse for T_m, or stiffness outside the schedule range
        NumericBlowupError: some state exceeded 1e9 in magnitude
    """
    dt = scenario.dt
    if dt > MAX_DT_RATIO * params.t_m:
        raise ValueError(f"dt={dt} must not exceed T_m/5={MAX_DT_RATIO * params.t_m}")
    if isinstance(law, ScheduledLaw):
        too_stiff = [s.zd for s in scenario.segments if s.zd > law.schedule.zd_max]
        if too_stiff:
            raise ValueError(f"segment stiffness {too_stiff} outside schedule range [0, {law.schedule.zd_max}]")

    record_dt, substeps = scenario.record_dt, scenario.substeps
    steps = int(round(scenario.duration / record_dt))
    t = np.arange(steps + 1) * record_dt
    motion = make_motion(scenario.motion, scenario.duration)
    d_rng, n_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(scenario.seed).spawn(2))
    d = band_limited_noise(steps + 1, record_dt, scenario.disturbance, "lowpass", d_rng)
    n = band_limited_noise(steps + 1, record_dt, scenario.noise, "highpass", n_rng)
    zd = stiffness_profile(scenario, t)
    u_max = scenario.u_max if scenario.u_max is not None else params.u_max

    k_s, t_m = params.k_s, params.t_m
    orders = law.orders
    slices = np.cumsum((0,) + orders)
    n_ctrl = int(slices[-1])
    state = np.zeros(2 + n_ctrl)

    phi_col = np.empty(steps + 1)
    tau_h_col = np.empty(steps + 1)
    u_pre_col = np.empty(steps + 1)
    u_col = np.empty(steps + 1)

    def outputs(x: np.ndarray, time: float, stiffness: float, noise: float, forms):
        phi = float(motion(time))
        tau_h = k_s * (x[0] - phi)
        y = (tau_h + noise, -stiffness * phi - tau_h)
        u_pre = 0.0
        for i, form in enumerate(forms):
            xi = x[2 + slices[i]:2 + slices[i + 1]]
            u_pre += float(form.C @ xi) + form.D * y[i]
        return phi, tau_h, y, u_pre

    def derivative(x: np.ndarray, time: float, stiffness: float, dist: float, noise: float, forms):
        _, _, y, u_pre = outputs(x, time, stiffness, noise, forms)
        u = min(max(u_pre, -u_max), u_max)
        dx = np.empty_like(x)
        dx[0] = x[1]
        dx[1] = (-x[1] + u + dist) / t_m
        for i, form in enumerate(forms):
            xi = x[2 + slices[i]:2 + slices[i + 1]]
            dx[2 + slices[i]:2 + slices[i + 1]] = form.A @ xi + form.B * y[i]
        return dx

    for k in range(steps + 1):
        time = float(t[k])
        forms = law.forms(float(zd[k]))
        phi, tau_h, _, u_pre = outputs(state, time, zd[k], n[k], forms)
        phi_col[k], tau_h_col[k], u_pre_col[k] = phi, tau_h, u_pre
        u_col[k] = min(max(u_pre, -u_max), u_max)
        if k == steps:
            break

        args = (zd[k], d[k], n[k], forms)
        for j in range(substeps):
            start = time + j * dt
            k1 = derivative(state, start, *args)
            k2 = derivative(state + 0.5 * dt * k1, start + 0.5 * dt, *args)
            k3 = derivative(state + 0.5 * dt * k2, start + 0.5 * dt, *args)
            k4 = derivative(state + dt * k3, start + dt, *args)
            state = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > BLOWUP_LIMIT:
                logger.error(f"Simulation of '{law.name}' diverged at t={start + dt:.4f}s")
                raise NumericBlowupError(float(start + dt), state)

    tau_d = -zd * phi_col
    trace = SimTrace(
        t=t,
        Zd=zd,
        phi_h=phi_col,
        tau_d=tau_d,
        tau_h=tau_h_col,
        e=tau_d - tau_h_col,
        u_pre_sat=u_pre_col,
        u=u_col,
        d=d,
        n=n,
        method=law.name,
        u_max=u_max,
    )
    logger.info(f"Simulated '{law.name}': {len(trace)} samples over {scenario.duration:g}s")
    return trace


# =============================================================================
# ENERGY CHECK
# =============================================================================

def passivity_energy_check(trace: SimTrace) -> tuple[np.ndarray, EnergyCheck]:
    """
    Energy delivered to the interaction port, W(t) = integral of tau_h d(-phi_h).

    Returns:
        (W sampled on trace.t, EnergyCheck) where passive means
        min W >= -1e-3 * peak|tau_h * dphi_h/dt| * duration
    """
    if len(trace) < 2:
        energy = np.zeros(len(trace))
        return energy, EnergyCheck(min_energy=0.0, final_energy=0.0, tolerance=0.0, passive=True)
    energy = cumulative_trapezoid(trace.tau_h, -trace.phi_h, initial=0.0)
    velocity = np.gradient(trace.phi_h, trace.t)
    duration = float(trace.t[-1] - trace.t[0])
    tolerance = ENERGY_TOLERANCE * float(np.max(np.abs(trace.tau_h * velocity))) * duration
    min_energy = float(np.min(energy))
    check = EnergyCheck(
        min_energy=min_energy,
        final_energy=float(energy[-1]),
        tolerance=tolerance,
        passive=min_energy >= -tolerance,
    )
    if not check.passive:
        logger.warning(f"Energy check failed for '{trace.method}': min W={min_energy:.4g} < -{tolerance:.4g}")
    return energy, check


# =============================================================================
# PID BASELINE
# =============================================================================

PID_STARTS = ((100.0, 10.0, 0.0), (10.0, 1.0, 0.0), (1000.0, 100.0, 1.0))


def pid_transfer_function(gains: PidGains) -> RationalTF:
    """kp + ki/s + kd s/(tf s + 1) over a common denominator"""
    kp, ki, kd, tf = gains.kp, gains.ki, gains.kd, gains.tf
    return RationalTF([kp * tf + kd, kp + ki * tf, ki], [tf, 1.0, 0.0])


def pid_controller(gains: PidGains) -> StructuredController:
    """PID acting on the torque error only"""
    return StructuredController([RationalTF.static(0.0), pid_transfer_function(gains)])


def _pid_gains(params: np.ndarray, filter_time_constant: float) -> PidGains:
    kp, ki, kd = to_gains(params)
    return PidGains(kp=float(kp), ki=float(abs(ki)), kd=float(kd), tf=filter_time_constant)


def make_pid_baseline(
    params: SeaPlantParams,
    spec: ConstraintSpec,
    zd_ref: float,
    seed: int,
    settings: Optional[PidSettings] = None,
    weight: Optional[ErrorWeightSpec] = None,
    zd_max: Optional[float] = None,
) -> PidBaseline:
    """
    Tune a gain-fixed PID at one reference stiffness.

    Same min-max objective as the scheduled design, with the full-band
    passivity index added to the constraint set.

    Args:
        params: SEA parameters
        spec: Constraint bounds
        zd_ref: Reference stiffness in (0, zd_max]
        seed: Seed of the random restarts
        settings: Filter time constant and optimizer budget
        weight: Error weight (defaults to the first-order weight at omega_e)
        zd_max: Upper stiffness (default K_s)

    Returns:
        PidBaseline; infeasible results are flagged, not raised
    """
    settings = settings or PidSettings()
    zd_max = zd_max if zd_max is not None else params.k_s
    if not 0 < zd_ref <= zd_max:
        raise ValueError(f"reference stiffness must lie in (0, {zd_max}], got {zd_ref}")

    builder = AugmentedPlantBuilder(params, weight or ErrorWeightSpec(), spec.omega_e)
    plant = builder(zd_ref)
    objective = ConstraintObjective(plant.sys, spec, full_passivity=True)
    tf = settings.filter_time_constant

    def fn(x: np.ndarray) -> float:
        with np.errstate(over="ignore"):
            values = to_gains(x)
        if not np.all(np.isfinite(values)):
            return 1e6
        return objective(pid_controller(_pid_gains(x, tf)))

    starts = [to_params(s) for s in PID_STARTS]
    outcome = multistart_minimize(
        fn,
        starts[0],
        np.random.default_rng(seed),
        n_starts=settings.n_starts,
        max_evals=settings.max_evals,
        extra_starts=starts[1:],
    )
    gains = _pid_gains(outcome.x, tf)
    report = evaluate_all(close_loop(plant, pid_controller(gains)), spec, full_passivity=True)
    feasible = report.stable and report.overall <= 1.0 and bool(report.passivity_full and report.passivity_full.passed)
    if feasible:
        logger.info(f"PID baseline at Zd={zd_ref:.4g}: kp={gains.kp:.4g}, ki={gains.ki:.4g}, kd={gains.kd:.4g}")
    else:
        logger.warning(f"PID baseline at Zd={zd_ref:.4g} is infeasible: violations={report.violations()}")

    return PidBaseline(
        gains=gains,
        zd_ref=zd_ref,
        feasible=feasible,
        report=report,
        trace=OptimizerTrace(
            evaluations=outcome.evaluations,
            iterations=outcome.iterations,
            best_objective=outcome.fun,
            seed=seed,
            n_starts=settings.n_starts,
            best_start=outcome.best_start,
        ),
    )


def comparison_laws(schedule: GainSchedule, pid: PidGains) -> list[ControllerLaw]:
    return [ScheduledLaw(schedule), FixedGainLaw(pid_controller(pid), name="pid")]


def fixed_law_at(schedule: GainSchedule, zd: float) -> FixedGainLaw:
    """Scheduled gains frozen at one stiffness"""
    value, _ = clamp_stiffness(schedule, zd)
    gains = np.polynomial.polynomial.polyval(value / schedule.zd_max, schedule_coefficients(schedule))
    return FixedGainLaw(StructuredController.from_gains(schedule.template, gains), name=f"fixed@{value:.4g}")
