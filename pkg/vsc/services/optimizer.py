"""Seeded multi-start Nelder-Mead search for small min-max gain problems"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

DEFAULT_N_STARTS = 16
DEFAULT_MAX_EVALS = 2000
SIMPLEX_STEP = 0.5
START_SPREAD = 1.5


@dataclass(frozen=True)
class SearchOutcome:
    x: np.ndarray
    fun: float
    evaluations: int
    iterations: int
    best_start: int


def to_params(gains) -> np.ndarray:
    """Gains to search coordinates; asinh keeps sign and compresses large magnitudes"""
    return np.arcsinh(np.asarray(gains, dtype=float))


def to_gains(params) -> np.ndarray:
    return np.sinh(np.asarray(params, dtype=float))


def multistart_minimize(
    fn: Callable[[np.ndarray], float],
    x0: np.ndarray,
    rng: np.random.Generator,
    n_starts: int = DEFAULT_N_STARTS,
    max_evals: int = DEFAULT_MAX_EVALS,
    xatol: float = 1e-4,
    fatol: float = 1e-5,
    step: float | np.ndarray = SIMPLEX_STEP,
    spread: float = START_SPREAD,
    extra_starts: Optional[list[np.ndarray]] = None,
) -> SearchOutcome:
    """
    Minimize fn from several starting points with a Nelder-Mead simplex each.

    The first start is x0, then any extra starts, then x0 perturbed by
    N(0, spread^2) draws from rng. Starting points and the simplex are fully
    determined by rng, so equal seeds give equal outcomes.

    Args:
        fn: Objective over search coordinates; must return a finite float
        x0: Initial point
        rng: Seeded generator for the random starts
        n_starts: Total number of starts
        max_evals: Function-evaluation budget per start
        xatol: Simplex size tolerance
        fatol: Objective spread tolerance
        step: Initial simplex edge length (scalar or per coordinate)
        spread: Standard deviation of random start perturbations
        extra_starts: Deterministic starts tried right after x0

    Returns:
        SearchOutcome of the best start (lowest objective, earliest on ties)
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    starts = [x0] + [np.asarray(s, dtype=float) for s in (extra_starts or [])]
    while len(starts) < n_starts:
        starts.append(x0 + rng.normal(0.0, spread, size=dim))
    starts = starts[:max(n_starts, 1)]
    steps = np.broadcast_to(np.asarray(step, dtype=float), (dim,))

    best: Optional[SearchOutcome] = None
    evaluations = iterations = 0
    for k, start in enumerate(starts):
        simplex = np.vstack([start, start + np.diag(steps)])
        result = minimize(
            fn,
            start,
            method="Nelder-Mead",
            options={
                "maxfev": max_evals,
                "xatol": xatol,
                "fatol": fatol,
                "initial_simplex": simplex,
            },
        )
        evaluations += int(result.nfev)
        iterations += int(result.nit)
        value = float(result.fun)
        if not math.isfinite(value):
            continue
        if best is None or value < best.fun:
            best = SearchOutcome(np.asarray(result.x, dtype=float), value, 0, 0, k)
        logger.debug(f"Start {k}: objective {value:.6g} after {result.nfev} evaluations")

    if best is None:
        logger.warning("No start produced a finite objective; returning the initial point")
        best = SearchOutcome(x0, math.inf, 0, 0, 0)
    return SearchOutcome(best.x, best.fun, evaluations, iterations, best.best_start)
