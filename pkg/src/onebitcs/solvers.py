"""Projected-descent reconstruction engines.

SCR and both BIHT baselines share one loop::

    x0 = phi.T y / ||phi.T y||
    repeat:  b = x - tau * grad         (SCR: analytic gradient,
                                         BIHT: minus the descent direction)
             u = top_k(b, K)            or  soft_threshold(b, tau * lam)
             x = u / ||u||

Default step sizes scale as ``1/M`` because every direction is ``phi.T`` applied
to an M-vector.  The SCR default also divides out the ``a p / 2`` prefactor of
the gradient, so changing ``a`` reshapes the per-row weights without changing
the step's overall magnitude.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, InvalidParameterError, ShapeError
from .objectives import (
    OneSided,
    SoftParams,
    biht_descent_direction,
    biht_objective,
    scr_gradient,
    scr_objective,
)

DEFAULT_MAX_ITERS = 200
DEFAULT_STALL_TOLERANCE = 1e-7


class Algorithm(str, enum.Enum):
    SCR = "scr"
    BIHT_L1 = "biht-l1"
    BIHT_L2 = "biht-l2"


@dataclass(frozen=True)
class HardK:
    k: int


@dataclass(frozen=True)
class SoftLambda:
    lam: float


@dataclass(frozen=True)
class SolverConfig:
    algorithm: Algorithm
    sparsity: HardK | SoftLambda
    soft: SoftParams | None = None
    step_size: float | None = None  # None -> default_step_size()
    max_iters: int = DEFAULT_MAX_ITERS
    stall_tolerance: float = DEFAULT_STALL_TOLERANCE

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.algorithm is Algorithm.SCR and self.soft is None:
            raise InvalidParameterError("SCR needs SoftParams (a, p)")
        if not isinstance(self.sparsity, (HardK, SoftLambda)):
            raise InvalidParameterError("sparsity must be HardK(k) or SoftLambda(lam)")
        if isinstance(self.sparsity, HardK) and int(self.sparsity.k) < 1:
            raise InvalidParameterError(f"K must be >= 1, got {self.sparsity.k}")
        if isinstance(self.sparsity, SoftLambda) and not float(self.sparsity.lam) >= 0:
            raise InvalidParameterError(f"lambda must be >= 0, got {self.sparsity.lam}")
        if self.step_size is not None and not float(self.step_size) > 0:
            raise InvalidParameterError(f"step size must be > 0, got {self.step_size}")
        if int(self.max_iters) < 1:
            raise InvalidParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not float(self.stall_tolerance) >= 0:
            raise InvalidParameterError("stall tolerance must be >= 0")

    def step_for(self, m: int) -> float:
        return float(self.step_size) if self.step_size is not None else default_step_size(self, m)


def default_step_size(config: SolverConfig, m: int) -> float:
    """Step used when ``config.step_size`` is None.

    BIHT-l2 uses ``1/M``; BIHT-l1 ``2/M``; SCR ``2 / (a p M)``.
    """
    if config.algorithm is Algorithm.BIHT_L2:
        return 1.0 / m
    if config.algorithm is Algorithm.BIHT_L1:
        return 2.0 / m
    return 2.0 / (config.soft.a * config.soft.p * m)


@dataclass
class ReconResult:
    estimate: np.ndarray
    last_iterate: np.ndarray
    iterations_run: int
    objective_trace: np.ndarray = field(repr=False)
    converged_by_stall: bool
    best_iteration: int


def _check_dims(phi, y):
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or y.shape != (phi.shape[0],):
        raise ShapeError(f"phi {phi.shape} does not match measurements {y.shape}")
    return phi, y


def init_estimate(phi, y) -> np.ndarray:
    """Back-projection ``phi.T y`` scaled to unit norm."""
    phi, y = _check_dims(phi, y)
    x0 = phi.T @ y
    norm = np.linalg.norm(x0)
    if norm == 0.0:
        raise DegenerateError("phi.T @ y is the zero vector; cannot initialise")
    return x0 / norm


def top_k(v, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude entries; ties go to the lowest index."""
    v = np.asarray(v, dtype=float)
    k = int(k)
    if not 1 <= k <= v.shape[0]:
        raise InvalidParameterError(f"k must satisfy 1 <= k <= {v.shape[0]}, got {k}")
    # stable sort keeps index order among equal magnitudes
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def soft_threshold(v, theta: float) -> np.ndarray:
    theta = float(theta)
    if not theta >= 0:
        raise InvalidParameterError(f"threshold must be >= 0, got {theta}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def objective_value(x, phi, y, config: SolverConfig) -> float:
    """The objective each algorithm descends, used for traces and best-iterate."""
    if config.algorithm is Algorithm.SCR:
        value = scr_objective(x, phi, y, config.soft).value
    else:
        flavor = OneSided.L1 if config.algorithm is Algorithm.BIHT_L1 else OneSided.L2
        value = biht_objective(x, phi, y, flavor).value
    if isinstance(config.sparsity, SoftLambda):
        value += config.sparsity.lam * float(np.abs(x).sum())
    return value


def _gradient(x, phi, y, config: SolverConfig) -> np.ndarray:
    if config.algorithm is Algorithm.SCR:
        return scr_gradient(x, phi, y, config.soft)
    flavor = OneSided.L1 if config.algorithm is Algorithm.BIHT_L1 else OneSided.L2
    return -biht_descent_direction(x, phi, y, flavor)


def reconstruct(y, phi, config: SolverConfig) -> ReconResult:
    """Run the projected-descent loop and return the best iterate.

    "Best" means lowest objective among iterates 1..L (the dense
    initialisation is never returned).  ``last_iterate`` is the raw final
    iterate.  ``objective_trace[0]`` is the objective at the initialisation and
    ``objective_trace[l]`` the objective after iteration ``l``.
    """
    phi, y = _check_dims(phi, y)
    m, n = phi.shape
    if isinstance(config.sparsity, HardK) and config.sparsity.k > n:
        raise InvalidParameterError(f"K={config.sparsity.k} exceeds signal length {n}")
    tau = config.step_for(m)

    x = init_estimate(phi, y)
    trace = [objective_value(x, phi, y, config)]
    best_x, best_val, best_iter = None, np.inf, 0
    stalled = False
    it = 0
    for it in range(1, int(config.max_iters) + 1):
        b = x - tau * _gradient(x, phi, y, config)
        if isinstance(config.sparsity, HardK):
            u = top_k(b, config.sparsity.k)
        else:
            u = soft_threshold(b, tau * config.sparsity.lam)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            raise DegenerateError(
                f"thresholding produced the zero vector at iteration {it}",
                last_estimate=x if best_x is None else best_x,
            )
        x_new = u / norm
        value = objective_value(x_new, phi, y, config)
        trace.append(value)
        if value < best_val:
            best_x, best_val, best_iter = x_new, value, it
        step = np.linalg.norm(x_new - x)
        x = x_new
        if step <= config.stall_tolerance:
            stalled = True
            break

    return ReconResult(
        estimate=best_x,
        last_iterate=x,
        iterations_run=it,
        objective_trace=np.asarray(trace),
        converged_by_stall=stalled,
        best_iteration=best_iter,
    )
