"""
Rational transfer-function and state-space algebra.

Evaluation, realization, interconnection, stability and band-restricted
H-infinity norms for the small continuous-time systems of the synthesis
pipeline. All types are immutable; every function is pure.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.signal
from scipy.optimize import minimize_scalar

from vsc.errors import (
    EigenvalueError,
    IllPosedInterconnectionError,
    ImproperTransferFunctionError,
    OnAxisPoleError,
    UnresolvedSignalError,
    UnstableSystemError,
)

logger = logging.getLogger(__name__)

EPS_STAB = 1e-9
DC_FLOOR = 1e-3
POINTS_PER_DECADE = 200
EDGE_FRACTION = 0.05
EDGE_POINTS = 21
INF_SPAN = 1e6
N_REFINEMENTS = 3
ILL_POSED_COND = 1e12

Source = Union[str, tuple[str, float]]


def _coefficients(values) -> np.ndarray:
    """Flatten to a float coefficient vector with exact leading zeros stripped"""
    arr = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    nonzero = np.flatnonzero(arr)
    if nonzero.size == 0:
        return np.zeros(1)
    return arr[nonzero[0]:].copy()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# =============================================================================
# TRANSFER FUNCTIONS
# =============================================================================

@dataclass(frozen=True, eq=False)
class RationalTF:
    """
    Proper rational transfer function num(s)/den(s).

    Coefficients are in descending powers of s. The denominator is normalized
    to a monic polynomial on construction.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = _coefficients(self.num)
        den = _coefficients(self.den)
        if not np.any(den):
            raise ValueError("denominator is identically zero")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("transfer function coefficients must be finite")
        if np.any(num) and num.size > den.size:
            raise ImproperTransferFunctionError(
                f"numerator degree {num.size - 1} exceeds denominator degree {den.size - 1}"
            )
        lead = den[0]
        object.__setattr__(self, "num", _frozen(num / lead))
        object.__setattr__(self, "den", _frozen(den / lead))

    @classmethod
    def static(cls, gain: float) -> "RationalTF":
        return cls([gain], [1.0])

    @property
    def order(self) -> int:
        return self.den.size - 1

    @property
    def is_static(self) -> bool:
        return self.order == 0

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def __neg__(self) -> "RationalTF":
        return RationalTF(-self.num, self.den)

    def __mul__(self, other: Union["RationalTF", float]) -> "RationalTF":
        if not isinstance(other, RationalTF):
            return RationalTF(self.num * float(other), self.den)
        return RationalTF(np.polymul(self.num, other.num), np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __add__(self, other: Union["RationalTF", float]) -> "RationalTF":
        if not isinstance(other, RationalTF):
            other = RationalTF.static(float(other))
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return RationalTF(num, np.polymul(self.den, other.den))

    __radd__ = __add__

    def __sub__(self, other: Union["RationalTF", float]) -> "RationalTF":
        return self + (-other)

    def __call__(self, omegas) -> np.ndarray:
        return freqresp(self, omegas)

    def __repr__(self) -> str:
        return f"RationalTF(num={self.num.tolist()}, den={self.den.tolist()})"


def freqresp(tf: RationalTF, omegas) -> np.ndarray:
    """Vectorized num(jw)/den(jw) over an array of angular frequencies"""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    s = 1j * w
    den = np.polyval(tf.den, s)
    on_axis = np.flatnonzero(den == 0)
    if on_axis.size:
        raise OnAxisPoleError(float(w[on_axis[0]]))
    return np.polyval(tf.num, s) / den


def tf_eval(tf: RationalTF, omega: float) -> complex:
    """
    Evaluate a transfer function on the imaginary axis.

    Args:
        tf: Transfer function
        omega: Angular frequency (rad/s), finite and non-negative

    Returns:
        Complex response num(jw)/den(jw)
    """
    if not math.isfinite(omega) or omega < 0:
        raise ValueError(f"omega must be finite and >= 0, got {omega!r}")
    return complex(freqresp(tf, omega)[0])


def tf_to_ss(tf: RationalTF, input_label: str = "u", output_label: str = "y") -> "StateSpaceModel":
    """
    Controllable-canonical realization of a proper transfer function.

    A static gain k realizes as an empty state matrix with D = [[k]].
    """
    if tf.num.size > tf.den.size:
        raise ImproperTransferFunctionError("cannot realize an improper transfer function")
    if tf.is_static:
        return StateSpaceModel(
            A=np.zeros((0, 0)),
            B=np.zeros((0, 1)),
            C=np.zeros((1, 0)),
            D=np.array([[tf.num[-1]]]),
            input_labels=(input_label,),
            output_labels=(output_label,),
        )
    A, B, C, D = scipy.signal.tf2ss(tf.num, tf.den)
    return StateSpaceModel(A, B, C, D, (input_label,), (output_label,))


# =============================================================================
# STATE SPACE
# =============================================================================

@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Continuous-time LTI system dx/dt = Ax + Bu, y = Cx + Du with named I/O"""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()

    def __post_init__(self):
        A, B, C, D = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.A, self.B, self.C, self.D))
        n = A.shape[0]
        p, m = D.shape
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape != (n, m):
            raise ValueError(f"B must be {(n, m)}, got {B.shape}")
        if C.shape != (p, n):
            raise ValueError(f"C must be {(p, n)}, got {C.shape}")
        inputs = tuple(self.input_labels) or tuple(f"u{i}" for i in range(m))
        outputs = tuple(self.output_labels) or tuple(f"y{i}" for i in range(p))
        if len(inputs) != m or len(outputs) != p:
            raise ValueError("label counts must match the D matrix dimensions")
        if len(set(inputs)) != m or len(set(outputs)) != p:
            raise ValueError("labels must be unique within each list")
        for name, value in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, _frozen(value.copy()))
        object.__setattr__(self, "input_labels", inputs)
        object.__setattr__(self, "output_labels", outputs)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def input_index(self, label: str) -> int:
        try:
            return self.input_labels.index(label)
        except ValueError:
            raise UnresolvedSignalError(f"unknown input {label!r}") from None

    def output_index(self, label: str) -> int:
        try:
            return self.output_labels.index(label)
        except ValueError:
            raise UnresolvedSignalError(f"unknown output {label!r}") from None

    def channel(self, input_label: str, output_label: str) -> "StateSpaceModel":
        """Single-input single-output restriction (keeps every state)"""
        i = self.input_index(input_label)
        o = self.output_index(output_label)
        return StateSpaceModel(
            self.A,
            self.B[:, [i]],
            self.C[[o], :],
            self.D[[o]][:, [i]],
            (input_label,),
            (output_label,),
        )

    def to_tf(self) -> RationalTF:
        """Transfer function of a single-channel system"""
        if self.n_inputs != 1 or self.n_outputs != 1:
            raise ValueError("to_tf requires a single-input single-output system")
        if self.n_states == 0:
            return RationalTF.static(self.D[0, 0])
        num, den = scipy.signal.ss2tf(self.A, self.B, self.C, self.D)
        return RationalTF(num[0], den)

    def frequency_response(self, omegas) -> np.ndarray:
        """C(jwI - A)^-1 B + D, shaped (len(omegas), outputs, inputs)"""
        w = np.atleast_1d(np.asarray(omegas, dtype=float))
        n = self.n_states
        if n == 0:
            return np.broadcast_to(self.D.astype(complex), (w.size,) + self.D.shape).copy()
        pencil = 1j * w[:, None, None] * np.eye(n) - self.A
        rhs = np.broadcast_to(self.B.astype(complex), (w.size,) + self.B.shape)
        try:
            x = np.linalg.solve(pencil, rhs)
        except np.linalg.LinAlgError as exc:
            worst = int(np.argmin(np.abs(np.linalg.det(pencil))))
            raise OnAxisPoleError(float(w[worst])) from exc
        return self.C @ x + self.D


def summing_junction(
    inputs: Union[Sequence[str], Mapping[str, float]],
    output: str,
) -> StateSpaceModel:
    """Static block y = sum(gain_i * u_i); a sequence means unit gains"""
    gains = dict(inputs) if isinstance(inputs, Mapping) else {name: 1.0 for name in inputs}
    labels = tuple(gains)
    return StateSpaceModel(
        A=np.zeros((0, 0)),
        B=np.zeros((0, len(labels))),
        C=np.zeros((1, 0)),
        D=np.array([[float(gains[name]) for name in labels]]),
        input_labels=labels,
        output_labels=(output,),
    )


def _parse_source(source: Source) -> tuple[str, float]:
    if isinstance(source, tuple):
        name, gain = source
        return name, float(gain)
    if source.startswith("-"):
        return source[1:], -1.0
    if source.startswith("+"):
        return source[1:], 1.0
    return source, 1.0


def connect(
    blocks: Sequence[StateSpaceModel],
    wiring: Optional[Mapping[str, Iterable[Source]]] = None,
    external_inputs: Sequence[str] = (),
    external_outputs: Sequence[str] = (),
) -> StateSpaceModel:
    """
    Interconnect named blocks into one LTI system.

    Every block input resolves, in order, through the wiring map (a list of
    signed sources summed into that input), then by name to a block output
    signal, then by name to an external input. Sources use "name", "-name" or
    (name, gain).

    Args:
        blocks: Blocks whose output labels are globally unique signal names
        wiring: Map from block input label to the sources summed into it
        external_inputs: Exogenous input names of the result
        external_outputs: Block output signals exposed by the result

    Returns:
        Interconnected system whose state is the concatenation of block states
    """
    if not blocks:
        raise ValueError("connect requires at least one block")
    wiring = dict(wiring or {})
    external_inputs = tuple(external_inputs)
    if len(set(external_inputs)) != len(external_inputs):
        raise ValueError("external inputs must be unique")

    signals: dict[str, int] = {}
    offset = 0
    for block in blocks:
        for j, label in enumerate(block.output_labels):
            if label in signals:
                raise ValueError(f"signal {label!r} is driven by more than one block")
            signals[label] = offset + j
        offset += block.n_outputs
    externals = {name: k for k, name in enumerate(external_inputs)}

    n_in = sum(block.n_inputs for block in blocks)
    n_out = offset
    K = np.zeros((n_in, n_out))
    E = np.zeros((n_in, len(external_inputs)))
    row = 0
    for block in blocks:
        for label in block.input_labels:
            for source in wiring.get(label, [label]):
                name, gain = _parse_source(source)
                if name in signals:
                    K[row, signals[name]] += gain
                elif name in externals:
                    E[row, externals[name]] += gain
                else:
                    raise UnresolvedSignalError(
                        f"input {label!r} is wired to {name!r}, which is neither a block "
                        f"output nor an external input"
                    )
            row += 1

    A = scipy.linalg.block_diag(*(block.A for block in blocks))
    B = scipy.linalg.block_diag(*(block.B for block in blocks))
    C = scipy.linalg.block_diag(*(block.C for block in blocks))
    D = scipy.linalg.block_diag(*(block.D for block in blocks))
    n = A.shape[0]
    B = B.reshape(n, n_in)
    C = C.reshape(n_out, n)

    loop = np.eye(n_in) - K @ D
    if np.linalg.cond(loop) > ILL_POSED_COND:
        raise IllPosedInterconnectionError("I - K D is singular: ill-posed algebraic loop")
    gain_x, gain_w = np.split(np.linalg.solve(loop, np.hstack([K @ C, E])), [n], axis=1)

    rows = []
    for name in external_outputs:
        if name not in signals:
            raise UnresolvedSignalError(f"external output {name!r} is not a block output")
        rows.append(signals[name])
    C_all = C + D @ gain_x
    D_all = D @ gain_w
    return StateSpaceModel(
        A=A + B @ gain_x,
        B=B @ gain_w,
        C=C_all[rows, :].reshape(len(rows), n),
        D=D_all[rows, :].reshape(len(rows), len(external_inputs)),
        input_labels=external_inputs,
        output_labels=tuple(external_outputs),
    )


def is_stable(sys: StateSpaceModel) -> tuple[bool, float]:
    """
    Strict stability test.

    Returns:
        (stable, spectral abscissa); stable iff every eigenvalue of A has real
        part below -EPS_STAB. A static system reports (True, -inf).
    """
    if sys.n_states == 0:
        return True, -math.inf
    try:
        eigenvalues = scipy.linalg.eigvals(sys.A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenvalueError(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenvalueError("eigenvalue iteration did not converge")
    abscissa = float(np.max(eigenvalues.real))
    return abscissa < -EPS_STAB, abscissa


# =============================================================================
# FREQUENCY GRIDS AND BAND NORMS
# =============================================================================

@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing evaluation frequencies inside a band [lo, hi]"""

    points: np.ndarray
    band: tuple[float, float]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        lo, hi = self.band
        if not (0 <= lo < hi):
            raise ValueError(f"invalid band {self.band!r}")
        if points.ndim != 1 or points.size < 2 or np.any(np.diff(points) <= 0):
            raise ValueError("grid points must be a strictly increasing 1-D array")
        if points[0] < lo or points[-1] > hi:
            raise ValueError("grid points must lie inside the band")
        object.__setattr__(self, "points", _frozen(points.copy()))
        object.__setattr__(self, "band", (float(lo), float(hi)))

    @classmethod
    def build(
        cls,
        lo: float,
        hi: float,
        points_per_decade: int = POINTS_PER_DECADE,
        dc_floor: float = DC_FLOOR,
    ) -> "FrequencyGrid":
        return _build_grid(float(lo), float(hi), int(points_per_decade), float(dc_floor))

    def __len__(self) -> int:
        return self.points.size


@lru_cache(maxsize=64)
def _build_grid(lo: float, hi: float, points_per_decade: int, dc_floor: float) -> FrequencyGrid:
    if not (0 <= lo < hi):
        raise ValueError(f"invalid band [{lo}, {hi}]")
    log_lo = lo if lo > 0 else min(dc_floor, hi / 10.0)
    log_hi = hi if math.isfinite(hi) else max(log_lo, 1.0) * INF_SPAN
    decades = math.log10(log_hi / log_lo)
    count = max(2, math.ceil(decades * points_per_decade) + 1)
    log_points = np.logspace(math.log10(log_lo), math.log10(log_hi), count)
    log_points[0], log_points[-1] = log_lo, log_hi
    pieces = [log_points]
    if lo == 0:
        pieces.append(np.zeros(1))
    for edge in (lo, hi):
        if 0 < edge < math.inf:
            pieces.append(np.linspace(edge * (1 - EDGE_FRACTION), edge * (1 + EDGE_FRACTION), EDGE_POINTS))
    merged = np.unique(np.concatenate(pieces))
    merged = merged[(merged >= lo) & (merged <= log_hi)]
    return FrequencyGrid(merged, (lo, hi))


def refine_peak(
    fn: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    values: np.ndarray,
    n_refine: int = N_REFINEMENTS,
) -> tuple[float, float]:
    """
    Grid maximum refined by golden-section search around the largest local maxima.

    Args:
        fn: Vectorized non-negative objective of frequency
        points: Grid frequencies
        values: fn(points)
        n_refine: Number of interior local maxima to refine

    Returns:
        (peak value, frequency of the peak)
    """
    best_index = int(np.argmax(values))
    best, best_w = float(values[best_index]), float(points[best_index])
    if points.size < 3:
        return best, best_w
    middle = values[1:-1]
    interior = np.flatnonzero((middle >= values[:-2]) & (middle >= values[2:])) + 1
    ranked = interior[np.argsort(values[interior])[::-1][:n_refine]]
    for i in ranked:
        a, b, c = float(points[i - 1]), float(points[i]), float(points[i + 1])
        try:
            result = minimize_scalar(
                lambda w: -float(fn(np.array([w]))[0]), bracket=(a, b, c), method="golden"
            )
        except (ValueError, RuntimeError):
            continue
        w = float(np.clip(result.x, a, c))
        value = float(fn(np.array([w]))[0])
        if value > best:
            best, best_w = value, w
    return best, best_w


def _as_siso_tf(sys: Union[RationalTF, StateSpaceModel]) -> RationalTF:
    if isinstance(sys, RationalTF):
        return sys
    return sys.to_tf()


def _require_stable(sys: Union[RationalTF, StateSpaceModel]) -> None:
    if isinstance(sys, RationalTF):
        poles = sys.poles()
        abscissa = float(np.max(poles.real)) if poles.size else -math.inf
        stable = abscissa < -EPS_STAB
    else:
        stable, abscissa = is_stable(sys)
    if not stable:
        raise UnstableSystemError(abscissa, "band norm is undefined for an unstable system")


def band_peak(
    sys: Union[RationalTF, StateSpaceModel],
    grid: FrequencyGrid,
    check_stability: bool = True,
) -> tuple[float, float]:
    """Band-restricted H-infinity norm and the frequency where it is attained"""
    if check_stability:
        _require_stable(sys)
    tf = _as_siso_tf(sys)
    if not np.any(tf.num):
        return 0.0, float(grid.points[0])

    def magnitude(w: np.ndarray) -> np.ndarray:
        return np.abs(freqresp(tf, w))

    return refine_peak(magnitude, grid.points, magnitude(grid.points))


def band_hinf(sys: Union[RationalTF, StateSpaceModel], grid: FrequencyGrid) -> float:
    """
    Band-restricted H-infinity norm.

    Args:
        sys: Stable single-channel system
        grid: Evaluation grid of the band

    Returns:
        max over the band of |T(jw)|, refined around the grid maxima
    """
    return band_peak(sys, grid)[0]


# =============================================================================
# MINIMAL CHANNELS
# =============================================================================

def _krylov_basis(A: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of span{b, Ab, A^2 b, ...} by Arnoldi iteration"""
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    threshold = tol * max(1.0, float(np.linalg.norm(A, 2)))
    basis: list[np.ndarray] = []
    v = np.asarray(b, dtype=float).ravel()
    for _ in range(n):
        for _ in range(2):
            for q in basis:
                v = v - (q @ v) * q
        norm = float(np.linalg.norm(v))
        if norm <= threshold:
            break
        basis.append(v / norm)
        v = A @ basis[-1]
    if not basis:
        return np.zeros((n, 0))
    return np.column_stack(basis)


def minimal_realization(sys: StateSpaceModel, tol: float = 1e-9) -> StateSpaceModel:
    """
    Remove uncontrollable and unobservable states of a single-channel system.

    Args:
        sys: Single-input single-output system
        tol: Relative rank tolerance of the Krylov staircase

    Returns:
        Equivalent channel that keeps only the modes visible from input to output
    """
    if sys.n_inputs != 1 or sys.n_outputs != 1:
        raise ValueError("minimal_realization requires a single-input single-output system")
    A, b, c = sys.A, sys.B[:, 0], sys.C[0, :]
    Q = _krylov_basis(A, b, tol)
    A_r, b_r, c_r = Q.T @ A @ Q, Q.T @ b, c @ Q
    P = _krylov_basis(A_r.T, c_r, tol)
    A_m, b_m, c_m = P.T @ A_r @ P, P.T @ b_r, c_r @ P
    r = A_m.shape[0]
    return StateSpaceModel(
        A_m.reshape(r, r),
        b_m.reshape(r, 1),
        c_m.reshape(1, r),
        sys.D,
        sys.input_labels,
        sys.output_labels,
    )
