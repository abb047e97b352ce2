import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import MfoError
from src.types import LbfgsConfig

logger = logging.getLogger("optimizer.lbfgs")

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

CURVATURE_SKIP = 1e-10


class OptimizationError(MfoError):
    """Raised when an optimization cannot start"""
    code = "optimization"


class TerminationReason(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max-iter"
    LINE_SEARCH_FAILURE = "line-search-failure"
    STALLED = "stalled"


@dataclass
class TraceEntry:
    iteration: int
    objective: float
    gradient_norm: float


@dataclass
class OptimizationResult:
    x: np.ndarray
    objective: float
    gradient_norm: float
    termination: TerminationReason
    iterations: int
    evaluations: int
    trace: List[TraceEntry] = field(default_factory=list)
    delta: Optional[np.ndarray] = None
    robot: Optional[np.ndarray] = None
    human_states: Optional[np.ndarray] = None
    terms: Dict[str, float] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == TerminationReason.CONVERGED

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "iteration": [e.iteration for e in self.trace],
            "objective": [e.objective for e in self.trace],
            "gradient_norm": [e.gradient_norm for e in self.trace],
        })

    def trace_to_csv(self, path: Union[str, Path]) -> None:
        self.trace_frame().to_csv(path, index=False, float_format="%.17g")


@dataclass
class LineSearchResult:
    step: float
    value: float
    grad: np.ndarray
    evaluations: int
    success: bool


def _cubic_minimizer(x1: float, f1: float, g1: float, x2: float, f2: float, g2: float,
                     bounds: Optional[Tuple[float, float]] = None) -> float:
    """Minimum of the cubic through two points with their slopes, clamped to bounds"""
    lo, hi = bounds if bounds is not None else (min(x1, x2), max(x1, x2))
    if x1 == x2:
        return 0.5 * (lo + hi)
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    d2_square = d1 * d1 - g1 * g2
    if d2_square < 0.0:
        return 0.5 * (lo + hi)
    d2 = np.sqrt(d2_square)
    if x1 <= x2:
        denom = g2 - g1 + 2.0 * d2
        pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / denom) if denom != 0.0 else 0.5 * (x1 + x2)
    else:
        denom = g1 - g2 + 2.0 * d2
        pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / denom) if denom != 0.0 else 0.5 * (x1 + x2)
    if not np.isfinite(pos):
        return 0.5 * (lo + hi)
    return float(min(max(pos, lo), hi))


def strong_wolfe(fun: Objective, x: np.ndarray, value: float, grad: np.ndarray, direction: np.ndarray,
                 step: float, config: LbfgsConfig, tolerance_change: float = 1e-12) -> LineSearchResult:
    """Bracketing phase followed by cubic-interpolation zoom until both strong Wolfe conditions hold"""
    c1, c2, max_ls = config.c1, config.c2, config.max_line_search
    gtd = float(grad @ direction)
    d_norm = float(np.max(np.abs(direction)))

    def probe(alpha: float):
        f, g = fun(x + alpha * direction)
        return float(f), g, float(g @ direction)

    f_new, g_new, gtd_new = probe(step)
    evaluations = 1
    t_prev, f_prev, g_prev, gtd_prev = 0.0, value, grad, gtd
    done = False
    bracket = bracket_f = bracket_g = bracket_gtd = None
    ls_iter = 0
    while ls_iter < max_ls:
        if not np.isfinite(f_new) or f_new > value + c1 * step * gtd or (ls_iter > 1 and f_new >= f_prev):
            bracket, bracket_f = [t_prev, step], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break
        if abs(gtd_new) <= -c2 * gtd:
            bracket, bracket_f, bracket_g, bracket_gtd = [step], [f_new], [g_new], [gtd_new]
            done = True
            break
        if gtd_new >= 0.0:
            bracket, bracket_f = [t_prev, step], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break

        # extrapolate
        lower = step + 0.01 * (step - t_prev)
        upper = step * 10.0
        previous = step
        step = _cubic_minimizer(t_prev, f_prev, gtd_prev, step, f_new, gtd_new, bounds=(lower, upper))
        t_prev, f_prev, g_prev, gtd_prev = previous, f_new, g_new, gtd_new
        f_new, g_new, gtd_new = probe(step)
        evaluations += 1
        ls_iter += 1

    if bracket is None:
        bracket, bracket_f = [0.0, step], [value, f_new]
        bracket_g, bracket_gtd = [grad, g_new], [gtd, gtd_new]

    insufficient = False
    low, high = (0, 1) if len(bracket) == 1 or bracket_f[0] <= bracket_f[-1] else (1, 0)
    while not done and ls_iter < max_ls:
        if abs(bracket[1] - bracket[0]) * d_norm < tolerance_change:
            break
        step = _cubic_minimizer(bracket[0], bracket_f[0], bracket_gtd[0],
                                bracket[1], bracket_f[1], bracket_gtd[1])
        # keep trial points away from the bracket ends
        width = max(bracket) - min(bracket)
        eps = 0.1 * width
        if min(max(bracket) - step, step - min(bracket)) < eps:
            if insufficient or step >= max(bracket) or step <= min(bracket):
                step = max(bracket) - eps if abs(step - max(bracket)) < abs(step - min(bracket)) else min(bracket) + eps
                insufficient = False
            else:
                insufficient = True
        else:
            insufficient = False

        f_new, g_new, gtd_new = probe(step)
        evaluations += 1
        ls_iter += 1

        if not np.isfinite(f_new) or f_new > value + c1 * step * gtd or f_new >= bracket_f[low]:
            bracket[high], bracket_f[high], bracket_g[high], bracket_gtd[high] = step, f_new, g_new, gtd_new
            low, high = (0, 1) if bracket_f[0] <= bracket_f[1] else (1, 0)
        else:
            if abs(gtd_new) <= -c2 * gtd:
                done = True
            elif gtd_new * (bracket[high] - bracket[low]) >= 0.0:
                bracket[high], bracket_f[high] = bracket[low], bracket_f[low]
                bracket_g[high], bracket_gtd[high] = bracket_g[low], bracket_gtd[low]
            bracket[low], bracket_f[low], bracket_g[low], bracket_gtd[low] = step, f_new, g_new, gtd_new

    step, f_best, g_best = bracket[low], bracket_f[low], bracket_g[low]
    success = done or (step > 0.0 and np.isfinite(f_best) and f_best < value)
    return LineSearchResult(step=float(step), value=float(f_best), grad=g_best, evaluations=evaluations,
                            success=bool(success))


def two_loop_direction(grad: np.ndarray, s_hist, y_hist, rho_hist) -> np.ndarray:
    """-H grad from the stored curvature pairs"""
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(fun: Objective, x0: np.ndarray, config: Optional[LbfgsConfig] = None) -> OptimizationResult:
    """Limited-memory BFGS with a strong Wolfe line search.

    fun maps a flat vector to (value, gradient). Accepted iterates strictly
    decrease the objective; on line-search failure the best iterate so far is
    returned with the failure recorded as the termination reason.
    """
    config = config or LbfgsConfig()
    x = np.array(x0, dtype=float).ravel()
    value, grad = fun(x)
    value = float(value)
    grad = np.asarray(grad, dtype=float).ravel()
    evaluations = 1
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise OptimizationError("Objective or gradient is not finite at the starting point")

    grad_norm = float(np.linalg.norm(grad))
    trace = [TraceEntry(0, value, grad_norm)]
    s_hist = deque(maxlen=config.memory)
    y_hist = deque(maxlen=config.memory)
    rho_hist = deque(maxlen=config.memory)

    termination = TerminationReason.MAX_ITER
    iterations = 0
    if grad_norm <= config.gradient_tolerance:
        termination = TerminationReason.CONVERGED

    while termination == TerminationReason.MAX_ITER and iterations < config.max_iterations:
        direction = two_loop_direction(grad, s_hist, y_hist, rho_hist)
        gtd = float(grad @ direction)
        if not gtd < 0.0:
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            direction = -grad
            gtd = -grad_norm ** 2
        step = min(1.0, 1.0 / grad_norm) if not s_hist else 1.0

        ls = strong_wolfe(fun, x, value, grad, direction, step, config)
        evaluations += ls.evaluations
        if not ls.success:
            termination = TerminationReason.LINE_SEARCH_FAILURE
            break

        s = ls.step * direction
        new_grad = np.asarray(ls.grad, dtype=float).ravel()
        y = new_grad - grad
        ys = float(y @ s)
        if ys > CURVATURE_SKIP * np.linalg.norm(y) * np.linalg.norm(s):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / ys)

        previous = value
        x = x + s
        value, grad = ls.value, new_grad
        grad_norm = float(np.linalg.norm(grad))
        iterations += 1
        trace.append(TraceEntry(iterations, value, grad_norm))
        logger.debug(f"Iteration {iterations}: objective {value:.9g}, gradient norm {grad_norm:.3g}, step {ls.step:.3g}")

        if grad_norm <= config.gradient_tolerance:
            termination = TerminationReason.CONVERGED
        elif previous - value <= config.objective_tolerance * max(abs(previous), abs(value), 1.0):
            termination = TerminationReason.STALLED

    logger.info(f"L-BFGS stopped ({termination.value}) after {iterations} iterations, "
                f"objective {value:.6g}, gradient norm {grad_norm:.3g}")
    return OptimizationResult(x=x, objective=value, gradient_norm=grad_norm, termination=termination,
                              iterations=iterations, evaluations=evaluations, trace=trace)
