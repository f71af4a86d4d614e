"""
Frequency-band constraint evaluation.

Five closed-loop constraints are checked on a frequency grid, each against its
bound from ConstraintSpec:

    error        |T_{phi_h e_w}|        on [0, omega_e]      <= gamma1
    control      |T_{phi_h u}|          on [0, omega_u]      <= gamma2
    disturbance  |T_{d tau_h}|          on [0, omega_max]    <= gamma3
    noise        |T_{n tau_h}|          on [omega_n, omega_max] <= gamma4
    passivity    |(Z - jw)/(Z + jw)|    on (0, omega_p]      <= 1 + eps_pass

with Z = -T_{phi_h tau_h}. The full-band passivity variant uses (0, omega_max].
Report functions work on closed-loop StateSpaceModels; ConstraintObjective is
the vectorized version used inside the optimizer.
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Protocol

import numpy as np

from vsc.errors import OnAxisPoleError, VscError
from vsc.models.schemas import (
    CONSTRAINT_NAMES,
    ConstraintReport,
    ConstraintResult,
    ConstraintSpec,
)
from vsc.services.lti import (
    DC_FLOOR,
    FrequencyGrid,
    StateSpaceModel,
    band_peak,
    freqresp,
    is_stable,
    minimal_realization,
    refine_peak,
)

logger = logging.getLogger(__name__)

CHANNELS = {
    "error": ("phi_h", "e_w"),
    "control": ("phi_h", "u_out"),
    "disturbance": ("d", "tau_h"),
    "noise": ("n", "tau_h"),
    "passivity": ("phi_h", "tau_h"),
    "passivity_full": ("phi_h", "tau_h"),
}

UNSTABLE_PENALTY = 10.0
# Stand-in for omega = 0 where the open-loop plant has its integrator pole
DC_PROXY = 1e-6
# Reference direct-feedthrough gain of the feasible-region tie-break
HF_GAIN_REF = 44.0

PassivityBand = Literal["relaxed", "full"]


# =============================================================================
# BANDS AND BOUNDS
# =============================================================================

def constraint_band(name: str, spec: ConstraintSpec) -> tuple[float, float]:
    bands = {
        "error": (0.0, spec.omega_e),
        "control": (0.0, spec.omega_u),
        "disturbance": (0.0, spec.omega_max),
        "noise": (spec.omega_n, spec.omega_max),
        "passivity": (DC_FLOOR, spec.omega_p),
        "passivity_full": (DC_FLOOR, spec.omega_max),
    }
    return bands[name]


def constraint_bound(name: str, spec: ConstraintSpec) -> float:
    bounds = {
        "error": spec.gamma1,
        "control": spec.gamma2,
        "disturbance": spec.gamma3,
        "noise": spec.gamma4,
        "passivity": 1.0 + spec.eps_pass,
        "passivity_full": 1.0 + spec.eps_pass,
    }
    return bounds[name]


def constraint_grid(name: str, spec: ConstraintSpec) -> FrequencyGrid:
    lo, hi = constraint_band(name, spec)
    return FrequencyGrid.build(lo, hi, spec.points_per_decade)


def make_result(
    name: str,
    spec: ConstraintSpec,
    achieved: float,
    peak_frequency: float | None = None,
    detail: str | None = None,
) -> ConstraintResult:
    """Result record; NaN achieved values are treated as hard failures"""
    if math.isnan(achieved):
        achieved, detail = math.inf, detail or "undefined (NaN) norm"
    bound = constraint_bound(name, spec)
    margin = bound - achieved
    return ConstraintResult(
        name=name,
        achieved=achieved,
        bound=bound,
        band=constraint_band(name, spec),
        margin=margin,
        passed=margin >= 0,
        peak_frequency=peak_frequency,
        detail=detail,
    )


# =============================================================================
# PER-CONSTRAINT EVALUATION
# =============================================================================

def _stable_channel(closed: StateSpaceModel, name: str) -> tuple[StateSpaceModel | None, str | None]:
    source, sink = CHANNELS[name]
    channel = minimal_realization(closed.channel(source, sink))
    stable, abscissa = is_stable(channel)
    if not stable:
        return None, f"unstable closed loop (spectral abscissa {abscissa:.4g})"
    return channel, None


def _channel_norm(closed: StateSpaceModel, name: str, spec: ConstraintSpec) -> ConstraintResult:
    try:
        channel, reason = _stable_channel(closed, name)
        if channel is None:
            return make_result(name, spec, math.inf, detail=reason)
        value, omega = band_peak(channel, constraint_grid(name, spec), check_stability=False)
    except OnAxisPoleError as e:
        return make_result(name, spec, math.inf, e.omega, detail=str(e))
    return make_result(name, spec, value, omega)


def eval_error_constraint(closed: StateSpaceModel, spec: ConstraintSpec) -> ConstraintResult:
    """Weighted tracking error |T_{phi_h e_w}| over [0, omega_e] against gamma1"""
    return _channel_norm(closed, "error", spec)


def eval_control_constraint(closed: StateSpaceModel, spec: ConstraintSpec) -> ConstraintResult:
    """Control effort |T_{phi_h u}| over [0, omega_u] against gamma2"""
    return _channel_norm(closed, "control", spec)


def eval_disturbance_constraint(closed: StateSpaceModel, spec: ConstraintSpec) -> ConstraintResult:
    """Load disturbance rejection |T_{d tau_h}| over [0, omega_max] against gamma3"""
    return _channel_norm(closed, "disturbance", spec)


def eval_noise_constraint(closed: StateSpaceModel, spec: ConstraintSpec) -> ConstraintResult:
    """Sensor noise attenuation |T_{n tau_h}| over [omega_n, omega_max] against gamma4"""
    return _channel_norm(closed, "noise", spec)


def passivity_index(z_response: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """
    Pointwise |(Z(jw) - jw) / (Z(jw) + jw)|.

    Args:
        z_response: Interaction impedance Z(jw) sampled on omegas
        omegas: Angular frequencies (rad/s)

    Returns:
        Index per frequency; values <= 1 mean the impedance is passive there
    """
    w = np.asarray(omegas, dtype=float)
    jw = 1j * w
    z = np.asarray(z_response, dtype=complex)
    denominator = z + jw
    zero = np.flatnonzero(denominator == 0)
    if zero.size:
        raise OnAxisPoleError(float(w[zero[0]]))
    return np.abs(z - jw) / np.abs(denominator)


def eval_passivity_index(
    closed: StateSpaceModel,
    spec: ConstraintSpec,
    band: PassivityBand = "relaxed",
) -> ConstraintResult:
    """
    Passivity index of Z = -T_{phi_h tau_h}.

    The relaxed band is (0, omega_p]; the full band is (0, omega_max] and is
    never smaller than the relaxed index of the same system.
    """
    name = "passivity" if band == "relaxed" else "passivity_full"
    try:
        channel, reason = _stable_channel(closed, name)
        if channel is None:
            return make_result(name, spec, math.inf, detail=reason)
        tf = channel.to_tf()

        def index(w: np.ndarray) -> np.ndarray:
            return passivity_index(-freqresp(tf, w), w)

        grid = constraint_grid(name, spec)
        value, omega = refine_peak(index, grid.points, index(grid.points))
    except OnAxisPoleError as e:
        return make_result(name, spec, math.inf, e.omega, detail=f"Z(jw) = -jw at omega={e.omega:.6g}")

    if band == "full":
        relaxed = eval_passivity_index(closed, spec, "relaxed")
        if relaxed.achieved > value:
            value, omega = relaxed.achieved, relaxed.peak_frequency
    return make_result(name, spec, value, omega)


_EVALUATORS = {
    "error": eval_error_constraint,
    "control": eval_control_constraint,
    "disturbance": eval_disturbance_constraint,
    "noise": eval_noise_constraint,
    "passivity": eval_passivity_index,
}


def evaluate_all(
    closed: StateSpaceModel,
    spec: ConstraintSpec,
    full_passivity: bool = True,
) -> ConstraintReport:
    """
    Evaluate stability and all five constraints of a closed loop.

    Never raises for numerical failures: they are encoded as infinite,
    failing constraint values with a detail message.

    Args:
        closed: Closed loop with inputs phi_h, d, n and outputs e_w, u_out, tau_h
        spec: Bounds and band edges
        full_passivity: Also report the full-band passivity index

    Returns:
        ConstraintReport whose overall value is the worst normalized constraint
    """
    try:
        stable, abscissa = is_stable(closed)
    except VscError as e:
        logger.warning(f"Stability check failed: {e}")
        stable, abscissa = False, math.nan

    def guarded(name: str, fn) -> ConstraintResult:
        try:
            return fn()
        except (VscError, ValueError, np.linalg.LinAlgError) as e:
            logger.warning(f"Constraint '{name}' could not be evaluated: {e}")
            return make_result(name, spec, math.inf, detail=str(e))

    results = [guarded(name, lambda fn=_EVALUATORS[name]: fn(closed, spec)) for name in CONSTRAINT_NAMES]
    full = (
        guarded("passivity_full", lambda: eval_passivity_index(closed, spec, "full"))
        if full_passivity
        else None
    )
    overall = max(result.achieved / result.bound for result in results)
    if not stable:
        logger.debug(f"Closed loop is not internally stable (abscissa {abscissa:.4g})")
    return ConstraintReport(
        stable=stable,
        spectral_abscissa=abscissa,
        results=results,
        passivity_full=full,
        overall=overall,
    )


# =============================================================================
# FREQUENCY SWEEPS
# =============================================================================

@dataclass(frozen=True, eq=False)
class SweepCurve:
    """One plotted constraint curve on a common display grid"""

    name: str
    omegas: np.ndarray
    values: np.ndarray
    bound: float
    band: tuple[float, float]

    @property
    def in_band(self) -> np.ndarray:
        lo, hi = self.band
        return (self.omegas >= lo) & (self.omegas <= hi)


def constraint_sweep(
    closed: StateSpaceModel,
    spec: ConstraintSpec,
    points_per_decade: int = 50,
) -> list[SweepCurve]:
    """
    Constraint magnitudes (and the passivity index) over [DC_FLOOR, omega_max].

    Curves for channels with an unstable visible mode are filled with inf.
    """
    omegas = FrequencyGrid.build(DC_FLOOR, spec.omega_max, points_per_decade).points
    curves = []
    for name in CONSTRAINT_NAMES:
        channel, reason = _stable_channel(closed, name)
        if channel is None:
            logger.warning(f"Sweep of '{name}': {reason}")
            values = np.full(omegas.size, math.inf)
        else:
            response = channel.frequency_response(omegas)[:, 0, 0]
            values = passivity_index(-response, omegas) if name == "passivity" else np.abs(response)
        curves.append(
            SweepCurve(
                name=name,
                omegas=omegas,
                values=values,
                bound=constraint_bound(name, spec),
                band=constraint_band(name, spec),
            )
        )
    return curves


# =============================================================================
# OPTIMIZER OBJECTIVE
# =============================================================================

class LinearController(Protocol):
    """Two-input controller u = K(s) [tau_h_meas, e]"""

    def state_space(self) -> StateSpaceModel: ...

    def frequency_response(self, omegas: np.ndarray) -> np.ndarray: ...


class ConstraintObjective:
    """
    Worst normalized constraint value of a candidate controller on one plant.

    Open-loop plant responses are computed once on the merged constraint
    grids; each call closes the loop pointwise (scalar control input) and
    checks internal stability on the closed-loop state matrix. Grid maxima
    are not refined here; the report path refines.

    The passivity index tends to 1 at DC for every design, so it enters the
    value only when it exceeds its bound. With hf_gain_ref set, a feasible
    candidate is further ranked by g/(g + hf_gain_ref), g the norm of its
    direct feedthrough: feasible values stay below 1, infeasible ones above,
    and among feasible designs the one with smaller high-frequency gain wins.
    """

    def __init__(
        self,
        plant: StateSpaceModel,
        spec: ConstraintSpec,
        full_passivity: bool = False,
        hf_gain_ref: Optional[float] = None,
    ):
        if hf_gain_ref is not None and hf_gain_ref <= 0:
            raise ValueError("hf_gain_ref must be positive")
        self.spec = spec
        self.hf_gain_ref = hf_gain_ref
        self.names = CONSTRAINT_NAMES + (("passivity_full",) if full_passivity else ())
        grids = [constraint_grid(name, spec).points for name in self.names]
        merged, inverse = np.unique(np.concatenate(grids), return_inverse=True)
        self.omegas = np.where(merged == 0.0, DC_PROXY, merged)
        edges = np.cumsum([0] + [g.size for g in grids])
        self._index = [inverse[a:b] for a, b in zip(edges[:-1], edges[1:])]
        self.bounds = np.array([constraint_bound(name, spec) for name in self.names])
        self._passivity = np.array([name.startswith("passivity") for name in self.names])

        w_idx = [plant.input_index(label) for label in ("phi_h", "d", "n")]
        u_idx = plant.input_index("u")
        z_idx = [plant.output_index(label) for label in ("e_w", "u_out", "tau_h")]
        y_idx = [plant.output_index(label) for label in ("tau_h_meas", "e")]
        if np.any(plant.D[np.ix_(y_idx, [u_idx])]):
            raise ValueError("plant must be strictly proper from u to the measured outputs")

        response = plant.frequency_response(self.omegas)
        self._p_zw = response[:, z_idx][:, :, w_idx]
        self._p_zu = response[:, z_idx, u_idx]
        self._p_yw = response[:, y_idx][:, :, w_idx]
        self._p_yu = response[:, y_idx, u_idx]

        self._A = plant.A
        self._Bu = plant.B[:, [u_idx]]
        self._Cy = plant.C[y_idx, :]

    def closed_loop_abscissa(self, controller: LinearController) -> float:
        k = controller.state_space()
        A_cl = np.block(
            [
                [self._A + self._Bu @ k.D @ self._Cy, self._Bu @ k.C],
                [k.B @ self._Cy, k.A],
            ]
        )
        if A_cl.size == 0:
            return -math.inf
        eigenvalues = np.linalg.eigvals(A_cl)
        if not np.all(np.isfinite(eigenvalues)):
            return math.inf
        return float(np.max(eigenvalues.real))

    def normalized(self, controller: LinearController) -> np.ndarray:
        """Per-constraint achieved/bound on the grids (no stability check)"""
        k = controller.frequency_response(self.omegas)[:, 0, :]
        loop = 1.0 - np.sum(k * self._p_yu, axis=1)
        if np.any(loop == 0):
            return np.full(len(self.names), math.inf)
        to_u = np.einsum("ni,niw->nw", k, self._p_yw) / loop[:, None]
        closed = self._p_zw + self._p_zu[:, :, None] * to_u[:, None, :]

        curves = {
            "error": np.abs(closed[:, 0, 0]),
            "control": np.abs(closed[:, 1, 0]),
            "disturbance": np.abs(closed[:, 2, 1]),
            "noise": np.abs(closed[:, 2, 2]),
        }
        z = -closed[:, 2, 0]
        jw = 1j * self.omegas
        curves["passivity"] = curves["passivity_full"] = np.abs(z - jw) / np.abs(z + jw)

        peaks = np.array([np.max(curves[name][idx]) for name, idx in zip(self.names, self._index)])
        return peaks / self.bounds

    def __call__(self, controller: LinearController) -> float:
        abscissa = self.closed_loop_abscissa(controller)
        if not abscissa < -1e-9:
            return UNSTABLE_PENALTY + min(abscissa, 1e6)
        values = self.normalized(controller)
        counted = np.where(self._passivity & (values <= 1.0), 0.0, values)
        worst = float(np.max(counted))
        if not math.isfinite(worst):
            return UNSTABLE_PENALTY
        if worst > 1.0 or self.hf_gain_ref is None:
            return worst
        return max(worst, self.hf_gain(controller))

    def hf_gain(self, controller: LinearController) -> float:
        """Normalized direct-feedthrough gain g/(g + hf_gain_ref), in [0, 1)"""
        if self.hf_gain_ref is None:
            return 0.0
        g = float(np.linalg.norm(controller.state_space().D))
        return g / (g + self.hf_gain_ref)
