"""Recovery-quality metrics.  1-bit data fixes direction only, so amplitude
metrics (MSE, SNR) are deliberately absent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, ShapeError
from .signal_model import quantize


@dataclass(frozen=True)
class TrialMetrics:
    angular_error: float
    hamming_error: float
    support_precision: float
    support_recall: float


def angular_error(estimate, truth) -> float:
    """``arccos(<u, v>) / pi`` for the unit-normalised arguments, in [0, 1].

    Evaluated as ``2 atan2(|u - v|, |u + v|)``, which equals the arccos form
    but stays accurate near 0 and pi where arccos loses half the digits.
    """
    u = np.asarray(estimate, dtype=float)
    v = np.asarray(truth, dtype=float)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateError("angular error is undefined for a zero vector")
    u, v = u / nu, v / nv
    angle = 2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v))
    return float(min(1.0, max(0.0, angle / np.pi)))


def hamming_error(estimate, phi, y) -> float:
    """Fraction of rows where ``sign(phi @ estimate)`` (sign(0)=+1) disagrees with ``y``."""
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(estimate, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or x.shape != (phi.shape[1],) or y.shape != (phi.shape[0],):
        raise ShapeError(f"shape mismatch: phi {phi.shape}, x {x.shape}, y {y.shape}")
    return float(np.count_nonzero(quantize(phi @ x) != y) / y.shape[0])


def support_metrics(estimate, truth) -> tuple[float, float]:
    """(precision, recall) of the estimate's nonzero set against the truth's.

    An empty estimate support gives precision 0; an empty truth support gives
    recall 1 (nothing to miss).
    """
    est = np.flatnonzero(np.asarray(estimate, dtype=float))
    tru = np.flatnonzero(np.asarray(truth, dtype=float))
    if np.asarray(estimate).shape != np.asarray(truth).shape:
        raise ShapeError("estimate and truth differ in length")
    hits = np.intersect1d(est, tru).size
    precision = hits / est.size if est.size else 0.0
    recall = hits / tru.size if tru.size else 1.0
    return float(precision), float(recall)


def trial_metrics(estimate, truth, phi, y) -> TrialMetrics:
    precision, recall = support_metrics(estimate, truth)
    return TrialMetrics(
        angular_error=angular_error(estimate, truth),
        hamming_error=hamming_error(estimate, phi, y),
        support_precision=precision,
        support_recall=recall,
    )
