"""Consistency kernels and objectives for 1-bit recovery.

The soft sign ``F_a(t) = (e^{at} - 1) / (e^{at} + 1)`` is evaluated as
``tanh(a t / 2)`` and its complement ``G_a(t) = 1 - F_a(t) = 2 / (e^{at} + 1)``
as ``2 * expit(-a t)``; neither form exponentiates ``a t`` directly, so both
saturate cleanly instead of overflowing.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, InvalidParameterError, ShapeError


class OneSided(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class SoftParams:
    """Steepness ``a`` of the soft sign and integer order ``p`` of the penalty."""

    a: float
    p: int

    def __post_init__(self):
        a = float(self.a)
        if not (np.isfinite(a) and a > 0):
            raise InvalidParameterError(f"steepness a must be finite and > 0, got {self.a}")
        p = self.p
        if isinstance(p, bool) or not float(p).is_integer() or p < 1:
            raise InvalidParameterError(f"order p must be a positive integer, got {self.p}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", int(p))


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    per_term: np.ndarray | None = None


def _finite(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("consistency kernels need finite arguments")
    return t


def _positive(a) -> float:
    a = float(a)
    if not (np.isfinite(a) and a > 0):
        raise InvalidParameterError(f"steepness a must be finite and > 0, got {a}")
    return a


def _scalar_or_array(out, t):
    return float(out) if np.ndim(t) == 0 else out


def soft_sign(t, a: float):
    """Smooth stand-in for ``sign``: values in (-1, 1), odd in ``t``."""
    a = _positive(a)
    t_arr = _finite(t)
    return _scalar_or_array(np.tanh(0.5 * a * t_arr), t)


def soft_inconsistency(t, a: float):
    """``G_a(t) = 1 - F_a(t)``, strictly decreasing from 2 to 0."""
    a = _positive(a)
    t_arr = _finite(t)
    return _scalar_or_array(2.0 * expit(-a * t_arr), t)


def one_sided(t, flavor: OneSided | str):
    """Zero on ``t >= 0``; ``-t`` (L1) or ``t**2`` (L2) on the negative half-line."""
    flavor = OneSided(flavor)
    t_arr = _finite(t)
    neg = np.minimum(t_arr, 0.0)
    out = -neg if flavor is OneSided.L1 else neg * neg
    # -0.0 from the L1 branch would print oddly in traces
    out = out + 0.0
    return _scalar_or_array(out, t)


def _margins(x, phi, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or x.shape != (phi.shape[1],) or y.shape != (phi.shape[0],):
        raise ShapeError(
            f"shape mismatch: phi {phi.shape}, x {x.shape}, y {y.shape}"
        )
    return y * (phi @ x)


def scr_objective(x, phi, y, params: SoftParams) -> ObjectiveValue:
    """Soft-consistency objective ``sum_i G_a(y_i phi_i x) ** p``."""
    g = soft_inconsistency(_margins(x, phi, y), params.a)
    per_term = g ** params.p
    return ObjectiveValue(value=float(per_term.sum()), per_term=per_term)


def scr_gradient(x, phi, y, params: SoftParams) -> np.ndarray:
    """Analytic gradient of :func:`scr_objective` with respect to ``x``.

    Uses ``G_a'(t) = -(a/2) G_a(t) (2 - G_a(t))``, giving
    ``-(a p / 2) * phi.T @ (y * g**p * (2 - g))``.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    margins = _margins(x, phi, y)
    g = soft_inconsistency(margins, params.a)
    # 2 - g == G_a(-t); evaluated directly it keeps precision where g ~ 2
    weights = y * g ** params.p * soft_inconsistency(-margins, params.a)
    return -0.5 * params.a * params.p * (phi.T @ weights)


def biht_objective(x, phi, y, flavor: OneSided | str) -> ObjectiveValue:
    per_term = np.asarray(one_sided(_margins(x, phi, y), flavor))
    return ObjectiveValue(value=float(per_term.sum()), per_term=per_term)


def biht_descent_direction(x, phi, y, flavor: OneSided | str) -> np.ndarray:
    """Negative (sub)gradient step of the one-sided objective.

    L1: ``phi.T @ (y - sign(phi x)) / 2``.  L2: ``-phi.T @ (y * min(y * phi x, 0))``,
    i.e. half the negative gradient of ``sum min(y_i phi_i x, 0)**2``; the
    factor 2 lives in the step size.
    """
    flavor = OneSided(flavor)
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    margins = _margins(x, phi, y)
    if flavor is OneSided.L1:
        signs = np.where(phi @ np.asarray(x, dtype=float) >= 0, 1.0, -1.0)
        return 0.5 * (phi.T @ (y - signs))
    return -(phi.T @ (y * np.minimum(margins, 0.0)))
