"""
Structured controller tuning and polynomial gain scheduling.

Design procedure: pick stiffness design points, tune the fixed-structure
two-input controller at each one against the constraint set, fit every gain
with a polynomial in the normalized stiffness Zd/Zd_max, and evaluate the
polynomials online for any desired stiffness.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg
from pydantic import ValidationError

from vsc.config import stage_seed
from vsc.errors import (
    InfeasibleDesignError,
    RankDeficiencyError,
    ScheduleFormatError,
    UnstableControllerError,
    VscError,
)
from vsc.models.schemas import (
    CONSTRAINT_NAMES,
    SCHEMA_VERSION,
    ConstraintReport,
    ConstraintSpec,
    ControllerGains,
    ControllerTemplate,
    DesignPointResult,
    GainSchedule,
    OptimizerTrace,
    ScheduleCheck,
    SynthesisSettings,
    VerificationSummary,
)
from vsc.services.constraints import (
    UNSTABLE_PENALTY,
    ConstraintObjective,
    evaluate_all,
    make_result,
)
from vsc.services.lti import (
    EPS_STAB,
    RationalTF,
    StateSpaceModel,
    connect,
    freqresp,
    summing_junction,
    tf_to_ss,
)
from vsc.services.optimizer import multistart_minimize, to_gains, to_params
from vsc.services.plant import (
    EXOGENOUS_INPUTS,
    MEASURED_OUTPUTS,
    PERFORMANCE_OUTPUTS,
    AugmentedPlant,
    AugmentedPlantBuilder,
)

logger = logging.getLogger(__name__)

PROPORTIONAL_STARTS = (10.0, 100.0, 1000.0)
RESIDUAL_FLAG_RATIO = 1e-3
REFINE_STEP_RATIO = 0.05
SMOOTH_PENALTY = 1e3


# =============================================================================
# CONTROLLER STRUCTURE
# =============================================================================

def instantiate_controller(
    template: ControllerTemplate,
    gains: Sequence[float],
    strict: bool = False,
) -> list[RationalTF]:
    """
    Build the subcontrollers K_i(s) from a flat gain vector.

    K_i(s) = (K_bi0 s^m + ... + K_bim) / (s^n + K_ai1 s^(n-1) + ... + K_ain)

    Args:
        template: Controller orders and denominator sharing
        gains: Gains in template.gain_names() order
        strict: Reject subcontrollers with a denominator root in the closed right half-plane

    Returns:
        One RationalTF per controller input
    """
    values = np.asarray(gains, dtype=float).ravel()
    if values.size != template.n_gains:
        raise ValueError(f"template expects {template.n_gains} gains, got {values.size}")

    n, m = template.den_order, template.num_order
    offset = 0
    shared = None
    if template.shared_denominator:
        shared = np.concatenate([[1.0], values[:n]])
        offset = n

    controllers = []
    for _ in range(template.n_inputs):
        if shared is None:
            den = np.concatenate([[1.0], values[offset:offset + n]])
            offset += n
        else:
            den = shared
        num = values[offset:offset + m + 1]
        offset += m + 1
        controllers.append(RationalTF(num, den))

    if strict:
        for i, k in enumerate(controllers, start=1):
            poles = k.poles()
            if poles.size and np.max(poles.real) >= -EPS_STAB:
                raise UnstableControllerError(f"K_{i} has denominator roots {poles.tolist()}")
    return controllers


class StructuredController:
    """Two-input controller u = sum_i K_i(s) y_i with y = [tau_h_meas, e]"""

    def __init__(self, subcontrollers: Sequence[RationalTF], input_labels: Sequence[str] = MEASURED_OUTPUTS):
        if len(subcontrollers) != len(input_labels):
            raise ValueError("one subcontroller is required per controller input")
        self.subcontrollers = list(subcontrollers)
        self.input_labels = tuple(input_labels)
        self._ss: Optional[StateSpaceModel] = None

    @classmethod
    def from_gains(
        cls,
        template: ControllerTemplate,
        gains: Sequence[float],
        strict: bool = False,
    ) -> "StructuredController":
        labels = MEASURED_OUTPUTS if template.n_inputs == 2 else tuple(f"y{i}" for i in range(template.n_inputs))
        return cls(instantiate_controller(template, gains, strict), labels)

    def state_space(self) -> StateSpaceModel:
        if self._ss is None:
            parts = [tf_to_ss(k) for k in self.subcontrollers]
            n = sum(part.n_states for part in parts)
            self._ss = StateSpaceModel(
                A=scipy.linalg.block_diag(*(part.A for part in parts)).reshape(n, n),
                B=scipy.linalg.block_diag(*(part.B for part in parts)).reshape(n, len(parts)),
                C=np.hstack([part.C for part in parts]).reshape(1, n),
                D=np.hstack([part.D for part in parts]).reshape(1, len(parts)),
                input_labels=self.input_labels,
                output_labels=("u",),
            )
        return self._ss

    def frequency_response(self, omegas: np.ndarray) -> np.ndarray:
        """Shape (len(omegas), 1, inputs)"""
        return np.stack([freqresp(k, omegas) for k in self.subcontrollers], axis=-1)[:, None, :]

    def denominator_abscissa(self) -> float:
        roots = [k.poles() for k in self.subcontrollers]
        roots = np.concatenate(roots) if roots else np.zeros(0)
        return float(np.max(roots.real)) if roots.size else -math.inf


def default_initial_gains(template: ControllerTemplate) -> np.ndarray:
    """Subcontroller poles at s = -1, zero numerators"""
    gains = []
    den = np.poly(-np.ones(template.den_order))[1:] if template.den_order else np.zeros(0)
    if template.shared_denominator:
        gains.extend(den)
    for _ in range(template.n_inputs):
        if not template.shared_denominator:
            gains.extend(den)
        gains.extend(np.zeros(template.num_order + 1))
    return np.asarray(gains, dtype=float)


def proportional_start(template: ControllerTemplate, k: float) -> np.ndarray:
    """Initial gains with DC gain k on the last (error) input and zero elsewhere"""
    gains = default_initial_gains(template)
    n, m = template.den_order, template.num_order
    den = np.poly(-np.ones(n)) if n else np.ones(1)
    num = k * den[-(m + 1):] if m == n else np.concatenate([np.zeros(m), [k * den[-1]]])
    gains[-(m + 1):] = num
    return gains


def close_loop(
    plant: AugmentedPlant,
    controller: Union[StructuredController, Sequence[RationalTF]],
) -> StateSpaceModel:
    """
    Close u = K_1 tau_h_meas + K_2 e around the augmented plant.

    Returns:
        System with inputs [phi_h, d, n] and outputs [e_w, u_out, tau_h, e, tau_h_meas]
    """
    subcontrollers = controller.subcontrollers if isinstance(controller, StructuredController) else list(controller)
    if len(subcontrollers) != 2:
        raise ValueError(f"the default wiring needs 2 subcontrollers, got {len(subcontrollers)}")
    blocks = [
        plant.sys,
        tf_to_ss(subcontrollers[0], MEASURED_OUTPUTS[0], "u_1"),
        tf_to_ss(subcontrollers[1], MEASURED_OUTPUTS[1], "u_2"),
        summing_junction(["u_1", "u_2"], "u"),
    ]
    return connect(
        blocks,
        external_inputs=EXOGENOUS_INPUTS,
        external_outputs=PERFORMANCE_OUTPUTS + MEASURED_OUTPUTS[:1],
    )


# =============================================================================
# DESIGN-POINT TUNING
# =============================================================================

class GainObjective:
    """Optimizer objective over asinh-scaled gains with subcontroller stability enforced"""

    def __init__(self, template: ControllerTemplate, objective: ConstraintObjective):
        self.template = template
        self.objective = objective

    def evaluate_gains(self, gains: np.ndarray) -> float:
        if not np.all(np.isfinite(gains)):
            return UNSTABLE_PENALTY + 1e6
        controller = StructuredController.from_gains(self.template, gains)
        abscissa = controller.denominator_abscissa()
        if abscissa >= -EPS_STAB:
            return UNSTABLE_PENALTY + min(abscissa, 1e6)
        return self.objective(controller)

    def __call__(self, params: np.ndarray) -> float:
        with np.errstate(over="ignore"):
            gains = to_gains(params)
        return self.evaluate_gains(gains)


def assess_gains(
    plant: AugmentedPlant,
    spec: ConstraintSpec,
    template: ControllerTemplate,
    gains: Sequence[float],
) -> tuple[ConstraintReport, bool]:
    """
    Constraint report of one gain vector on one plant.

    Returns:
        (report, feasible) where feasible requires stable subcontrollers, an
        internally stable closed loop and report.overall <= 1
    """
    controller = StructuredController.from_gains(template, gains)
    try:
        report = evaluate_all(close_loop(plant, controller), spec)
    except VscError as e:
        logger.warning(f"Closing the loop failed at Zd={plant.zd:.4g}: {e}")
        report = _failed_report(spec, str(e))
    feasible = (
        report.stable
        and report.overall <= 1.0
        and controller.denominator_abscissa() < -EPS_STAB
    )
    return report, feasible


def _failed_report(spec: ConstraintSpec, reason: str) -> ConstraintReport:
    results = [make_result(name, spec, math.inf, detail=reason) for name in CONSTRAINT_NAMES]
    return ConstraintReport(stable=False, spectral_abscissa=math.nan, results=results, overall=math.inf)


def tune_design_point(
    plant_builder: AugmentedPlantBuilder,
    zd: float,
    spec: ConstraintSpec,
    template: ControllerTemplate,
    init: Optional[ControllerGains] = None,
    seed: int = 0,
    settings: Optional[SynthesisSettings] = None,
) -> DesignPointResult:
    """
    Tune controller gains at one desired stiffness.

    Minimizes the worst normalized constraint value (closed-loop instability
    maps to 10 + spectral abscissa) with a seeded multi-start simplex search.
    Feasible candidates are ranked by their normalized direct feedthrough
    when settings.hf_gain_ref is set.
    An infeasible outcome is returned with feasible=False, never raised.

    Args:
        plant_builder: Zd -> AugmentedPlant factory
        zd: Desired stiffness (>= 0)
        spec: Constraint bounds
        template: Controller structure
        init: Warm-start gains (e.g. from the neighboring design point)
        seed: Seed of the random restarts
        settings: Optimizer budget and tolerances

    Returns:
        DesignPointResult with the report of exactly the returned gains
    """
    if not math.isfinite(zd) or zd < 0:
        raise ValueError(f"design stiffness must be finite and >= 0, got {zd!r}")
    settings = settings or SynthesisSettings()
    started = time.perf_counter()

    plant = plant_builder(zd)
    objective = GainObjective(template, ConstraintObjective(plant.sys, spec, hf_gain_ref=settings.hf_gain_ref))
    x0 = to_params(init.values if init is not None else default_initial_gains(template))
    extra = [to_params(proportional_start(template, k)) for k in PROPORTIONAL_STARTS]

    outcome = multistart_minimize(
        objective,
        x0,
        np.random.default_rng(seed),
        n_starts=settings.n_starts,
        max_evals=settings.max_evals,
        xatol=settings.xatol,
        fatol=settings.fatol,
        extra_starts=extra,
    )
    gains = to_gains(outcome.x)
    report, feasible = assess_gains(plant, spec, template, gains)

    elapsed = time.perf_counter() - started
    if feasible:
        logger.info(f"Design point Zd={zd:.4g}: feasible, overall={report.overall:.4f} ({elapsed:.1f}s)")
    else:
        logger.warning(
            f"Design point Zd={zd:.4g}: infeasible, overall={report.overall:.4f}, "
            f"violations={report.violations()}"
        )
    return DesignPointResult(
        zd=float(zd),
        gains=ControllerGains(values=gains.tolist()),
        report=report,
        feasible=feasible,
        trace=OptimizerTrace(
            evaluations=outcome.evaluations,
            iterations=outcome.iterations,
            best_objective=outcome.fun,
            seed=seed,
            n_starts=settings.n_starts,
            best_start=outcome.best_start,
            warm_started=init is not None,
        ),
    )


def _tune_job(args) -> DesignPointResult:
    builder, zd, spec, template, seed, settings = args
    return tune_design_point(builder, zd, spec, template, None, seed, settings)


# =============================================================================
# POLYNOMIAL SCHEDULE
# =============================================================================

def _check_abscissae(zds: np.ndarray, order: int) -> None:
    if np.unique(zds).size != zds.size:
        raise RankDeficiencyError(f"duplicate design stiffnesses in {zds.tolist()}")
    if zds.size < order + 1:
        raise RankDeficiencyError(f"order {order} needs at least {order + 1} points, got {zds.size}")


def fit_polynomial(zds, values, order: int, zd_max: float) -> np.ndarray:
    """
    Least-squares polynomial fit in the normalized variable x = Zd / zd_max.

    Args:
        zds: Design stiffnesses (distinct)
        values: Gain values, shape (points,) or (points, gains)
        order: Polynomial order p
        zd_max: Normalization scale (> 0)

    Returns:
        Coefficients g_0..g_p in increasing powers of x, shape (p+1,) or (p+1, gains)
    """
    zds = np.asarray(zds, dtype=float)
    values = np.asarray(values, dtype=float)
    if zd_max <= 0:
        raise ValueError("zd_max must be positive")
    if values.shape[0] != zds.size:
        raise ValueError("one value row is required per design stiffness")
    _check_abscissae(zds, order)

    coefficients, (_, rank, _, _) = np.polynomial.polynomial.polyfit(zds / zd_max, values, order, full=True)
    if rank < order + 1:
        raise RankDeficiencyError(f"fit matrix rank {rank} < {order + 1}")
    return coefficients


def _residuals(coefficients: np.ndarray, zds: np.ndarray, values: np.ndarray, zd_max: float) -> np.ndarray:
    fitted = np.polynomial.polynomial.polyval(zds / zd_max, coefficients).T
    return np.sqrt(np.mean((fitted - values) ** 2, axis=0))


def _flagged(names: list[str], residuals: np.ndarray, values: np.ndarray) -> list[str]:
    scale = np.max(np.abs(values), axis=0)
    flagged = [name for name, r, s in zip(names, residuals, scale) if r > RESIDUAL_FLAG_RATIO * s]
    if flagged:
        logger.warning(f"Fit residuals exceed {RESIDUAL_FLAG_RATIO:g} x max|gain| for {flagged}")
    return flagged


def schedule_coefficients(schedule: GainSchedule) -> np.ndarray:
    """Coefficient matrix shaped (p+1, gains)"""
    return np.asarray(schedule.coefficients, dtype=float).T


def clamp_stiffness(schedule: GainSchedule, zd: float) -> tuple[float, bool]:
    if math.isnan(zd):
        raise ValueError("desired stiffness is NaN")
    clamped = min(max(zd, schedule.zd_min), schedule.zd_max)
    return clamped, clamped != zd


def schedule_gains(schedule: GainSchedule, zd: float, coefficients: Optional[np.ndarray] = None) -> np.ndarray:
    """Polynomial gains at zd without clamping or logging"""
    c = schedule_coefficients(schedule) if coefficients is None else coefficients
    return np.asarray(np.polynomial.polynomial.polyval(zd / schedule.zd_max, c), dtype=float)


def eval_schedule(schedule: GainSchedule, zd: float, warn: bool = True) -> ControllerGains:
    """
    Scheduled gains for a desired stiffness.

    Stiffnesses outside [zd_min, zd_max] (the design-point span) are clamped.
    """
    value, clamped = clamp_stiffness(schedule, zd)
    if clamped and warn:
        logger.warning(f"Zd={zd:.4g} outside [{schedule.zd_min:.4g}, {schedule.zd_max:.4g}], clamped to {value:.4g}")
    return ControllerGains(values=schedule_gains(schedule, value).tolist())


def _smooth_point(
    result: DesignPointResult,
    fitted: np.ndarray,
    scale: np.ndarray,
    plant: AugmentedPlant,
    spec: ConstraintSpec,
    template: ControllerTemplate,
    settings: SynthesisSettings,
    seed: int,
) -> DesignPointResult:
    objective = GainObjective(template, ConstraintObjective(plant.sys, spec, hf_gain_ref=settings.hf_gain_ref))
    current = np.asarray(result.gains.values, dtype=float)
    reached = objective.evaluate_gains(current)
    target = reached + settings.smooth_slack * max(0.0, 1.0 - reached)

    def distance(params: np.ndarray) -> float:
        with np.errstate(over="ignore"):
            gains = to_gains(params)
        excess = max(0.0, objective.evaluate_gains(gains) - target)
        return SMOOTH_PENALTY * excess + float(np.sum(((gains - fitted) / scale) ** 2))

    outcome = multistart_minimize(
        distance,
        to_params(fitted),
        np.random.default_rng(seed),
        n_starts=2,
        max_evals=settings.smooth_max_evals,
        xatol=settings.xatol,
        fatol=1e-12,
        extra_starts=[to_params(current)],
    )
    gains = to_gains(outcome.x)
    if np.allclose(gains, current, rtol=1e-12, atol=0.0):
        return result
    report, feasible = assess_gains(plant, spec, template, gains)
    if not feasible:
        logger.debug(f"Smoothing at Zd={result.zd:.4g} left the feasible set; point kept")
        return result
    return result.model_copy(
        update={"gains": ControllerGains(values=gains.tolist()), "report": report, "smoothed": True}
    )


def smooth_design_points(
    results: list[DesignPointResult],
    coefficients: np.ndarray,
    plant_builder: AugmentedPlantBuilder,
    spec: ConstraintSpec,
    template: ControllerTemplate,
    order: int,
    zd_max: float,
    seed: int,
    settings: Optional[SynthesisSettings] = None,
) -> tuple[list[DesignPointResult], np.ndarray]:
    """
    Move tuned gains toward their polynomial fit and refit.

    Each point is re-tuned for the gains closest to its fitted value (distance
    scaled by max|gain| per gain) whose objective stays within smooth_slack of
    the point's margin below 1. Points that would turn infeasible keep their
    gains. Passes stop early once no gain is flagged.

    Returns:
        (results with updated gains and reports, refitted coefficients)
    """
    settings = settings or SynthesisSettings()
    zds = np.array([r.zd for r in results])
    names = template.gain_names()
    for k in range(settings.smooth_passes):
        values = np.array([r.gains.values for r in results])
        residuals = _residuals(coefficients, zds, values, zd_max)
        if not _flagged(names, residuals, values):
            break
        fitted = np.polynomial.polynomial.polyval(zds / zd_max, coefficients).T
        scale = np.maximum(np.max(np.abs(values), axis=0), 1e-12)
        results = [
            _smooth_point(
                result, fitted[i], scale, plant_builder(result.zd), spec, template, settings,
                stage_seed(seed, f"smooth-{k}-{i}"),
            )
            for i, result in enumerate(results)
        ]
        coefficients = fit_polynomial(zds, np.array([r.gains.values for r in results]), order, zd_max)
        moved = sum(r.smoothed for r in results)
        logger.info(f"Smoothing pass {k + 1}: {moved} of {len(results)} points on or nearer the fit")
    return results, coefficients


def _build_schedule(
    results: list[DesignPointResult],
    coefficients: np.ndarray,
    template: ControllerTemplate,
    order: int,
    zd_max: float,
    seed: int,
    spec: ConstraintSpec,
    plant_builder: AugmentedPlantBuilder,
    refined: bool = False,
) -> GainSchedule:
    zds = np.array([r.zd for r in results])
    values = np.array([r.gains.values for r in results])
    names = template.gain_names()
    residuals = _residuals(coefficients, zds, values, zd_max)
    return GainSchedule(
        schema_version=SCHEMA_VERSION,
        template=template,
        order=order,
        zd_min=float(zds.min()),
        zd_max=float(zd_max),
        normalization={"variable": "zd / zd_max", "scale": float(zd_max)},
        gain_names=names,
        coefficients=coefficients.T.tolist(),
        fit_residuals=residuals.tolist(),
        flagged_gains=_flagged(names, residuals, values),
        refined=refined,
        design_points=results,
        seed=seed,
        constraints=spec,
        plant=plant_builder.params,
        weight=plant_builder.weight,
    )


def synthesize_schedule(
    plant_builder: AugmentedPlantBuilder,
    spec: ConstraintSpec,
    template: ControllerTemplate,
    design_points: Sequence[float],
    order: int,
    seed: int,
    settings: Optional[SynthesisSettings] = None,
    zd_max: Optional[float] = None,
    workers: int = 1,
) -> tuple[GainSchedule, list[DesignPointResult]]:
    """
    Tune every design point and fit the polynomial gain schedule.

    Args:
        plant_builder: Zd -> AugmentedPlant factory
        spec: Constraint bounds
        template: Controller structure
        design_points: Distinct stiffnesses in [0, zd_max]
        order: Polynomial order p (needs >= p+1 points)
        seed: Top-level seed; each point gets a derived seed
        settings: Optimizer budget, warm start, fit smoothing and refinement switches
        zd_max: Upper end of the scheduling range (default: largest design point)
        workers: Process count for cold-started tuning

    Returns:
        (schedule, per-point results ordered by Zd)

    Raises:
        RankDeficiencyError: Duplicate or too few design points
        InfeasibleDesignError: Some design point is infeasible (carries all results)
    """
    settings = settings or SynthesisSettings()
    zds = np.sort(np.asarray(design_points, dtype=float))
    _check_abscissae(zds, order)
    if np.any(zds < 0) or not np.all(np.isfinite(zds)):
        raise ValueError("design stiffnesses must be finite and >= 0")
    zd_max = float(zd_max if zd_max is not None else zds.max())
    if zds.max() > zd_max:
        raise ValueError(f"design point {zds.max():.4g} exceeds zd_max {zd_max:.4g}")

    seeds = [stage_seed(seed, f"design-point-{k}") for k in range(zds.size)]
    logger.info(f"Tuning {zds.size} design points (order {order}, seed {seed}, warm_start={settings.warm_start})")

    results: list[DesignPointResult] = []
    if settings.warm_start or workers <= 1:
        previous: Optional[ControllerGains] = None
        for zd, point_seed in zip(zds, seeds):
            result = tune_design_point(plant_builder, float(zd), spec, template, previous, point_seed, settings)
            results.append(result)
            if settings.warm_start and result.feasible:
                previous = result.gains
    else:
        jobs = [(plant_builder, float(zd), spec, template, s, settings) for zd, s in zip(zds, seeds)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_tune_job, jobs))

    infeasible = [r.zd for r in results if not r.feasible]
    if infeasible:
        raise InfeasibleDesignError(
            f"{len(infeasible)} of {len(results)} design points infeasible: Zd={infeasible}",
            results,
        )

    values = np.array([r.gains.values for r in results])
    coefficients = fit_polynomial(zds, values, order, zd_max)
    if settings.smooth_passes:
        results, coefficients = smooth_design_points(
            results, coefficients, plant_builder, spec, template, order, zd_max, stage_seed(seed, "smooth"), settings
        )
    schedule = _build_schedule(results, coefficients, template, order, zd_max, seed, spec, plant_builder)
    if settings.refine:
        schedule = refine_schedule(
            schedule, plant_builder, spec, settings.refine_max_evals, stage_seed(seed, "refine"),
            hf_gain_ref=settings.hf_gain_ref,
        )
    logger.info(f"Schedule fitted: residuals={[round(r, 6) for r in schedule.fit_residuals]}")
    return schedule, results


def _check_points(schedule: GainSchedule) -> list[float]:
    zds = sorted(dp.zd for dp in schedule.design_points)
    midpoints = [(a + b) / 2 for a, b in zip(zds, zds[1:])]
    return sorted(zds + midpoints)


def refine_schedule(
    schedule: GainSchedule,
    plant_builder: AugmentedPlantBuilder,
    spec: ConstraintSpec,
    max_evals: int = 3000,
    seed: int = 0,
    hf_gain_ref: Optional[float] = None,
) -> GainSchedule:
    """
    Tune the polynomial coefficients directly when the least-squares fit
    violates the constraints at a design point or midpoint.

    The objective is the worst normalized constraint value over the check
    points. The polished coefficients are kept only if they improve it.
    """
    checks = _check_points(schedule)
    objectives = [
        GainObjective(schedule.template, ConstraintObjective(plant_builder(zd).sys, spec, hf_gain_ref=hf_gain_ref))
        for zd in checks
    ]
    shape = schedule_coefficients(schedule).shape

    def worst(flat: np.ndarray) -> float:
        c = flat.reshape(shape)
        return max(obj.evaluate_gains(schedule_gains(schedule, zd, c)) for obj, zd in zip(objectives, checks))

    start = schedule_coefficients(schedule).ravel()
    initial = worst(start)
    if initial <= 1.0 or max_evals == 0:
        logger.info(f"Schedule check points worst value {initial:.4f}; no refinement needed")
        return schedule

    logger.info(f"Refining schedule coefficients (worst check-point value {initial:.4f})")
    outcome = multistart_minimize(
        worst,
        start,
        np.random.default_rng(seed),
        n_starts=1,
        max_evals=max_evals,
        step=REFINE_STEP_RATIO * np.abs(start) + 1e-3,
    )
    if not outcome.fun < initial:
        logger.warning(f"Schedule refinement did not improve the worst value ({outcome.fun:.4f})")
        return schedule

    logger.info(f"Schedule refinement: worst check-point value {initial:.4f} -> {outcome.fun:.4f}")
    return _build_schedule(
        list(schedule.design_points),
        outcome.x.reshape(shape),
        schedule.template,
        schedule.order,
        schedule.zd_max,
        schedule.seed,
        spec,
        plant_builder,
        refined=True,
    )


# =============================================================================
# VERIFICATION
# =============================================================================

def off_design_sweep(schedule: GainSchedule, count: int) -> list[float]:
    """count evenly spaced stiffnesses strictly inside the design span"""
    if count <= 0:
        return []
    return np.linspace(schedule.zd_min, schedule.zd_max, count + 2)[1:-1].tolist()


def verify_schedule(
    schedule: GainSchedule,
    plant_builder: AugmentedPlantBuilder,
    spec: ConstraintSpec,
    sweep: Sequence[float],
) -> VerificationSummary:
    """
    Close the loop with scheduled gains at every sweep stiffness and evaluate
    all constraints. Violations are counted, never raised.
    """
    checks = []
    for zd in sweep:
        value, clamped = clamp_stiffness(schedule, float(zd))
        gains = eval_schedule(schedule, float(zd))
        report, _ = assess_gains(plant_builder(value), spec, schedule.template, gains.values)
        if not report.all_passed:
            logger.warning(f"Scheduled controller at Zd={zd:.4g}: violations={report.violations()}, stable={report.stable}")
        checks.append(ScheduleCheck(zd=float(zd), evaluated_zd=value, clamped=clamped, gains=gains, report=report))

    summary = VerificationSummary(
        checks=checks,
        violations=sum(1 for c in checks if not c.report.all_passed),
        unstable=sum(1 for c in checks if not c.report.stable),
    )
    logger.info(f"Verified {summary.count} stiffnesses: {summary.violations} with violations, {summary.unstable} unstable")
    return summary


# =============================================================================
# SCHEDULE FILES
# =============================================================================

def save_schedule(schedule: GainSchedule, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(schedule.model_dump_json(indent=2))
    return path


def load_schedule(path: Union[str, Path]) -> GainSchedule:
    """Read a schedule document; malformed or incompatible files raise ScheduleFormatError"""
    path = Path(path)
    try:
        schedule = GainSchedule.model_validate_json(path.read_text())
    except OSError as e:
        raise ScheduleFormatError(f"cannot read schedule {path}: {e}") from e
    except ValidationError as e:
        raise ScheduleFormatError(f"malformed schedule {path}: {e.error_count()} validation errors") from e
    if schedule.schema_version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise ScheduleFormatError(f"unsupported schedule schema_version {schedule.schema_version!r}")
    return schedule
