"""Synthetic 1-bit CS problem instances.

Every generator is a pure function of its parameters and a 64-bit seed.  The
seed feeds numpy's ``PCG64`` bit generator; per-trial seeds are derived from
structured keys through ``numpy.random.SeedSequence`` (see :func:`derive_seed`)
so that independent streams never overlap and results are platform-stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, ShapeError

_SEED_MASK = (1 << 64) - 1


def _rng(seed: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed <= _SEED_MASK:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def _float_key(value: float) -> int:
    # exact IEEE-754 bit pattern, so 0.5 and 0.5000000001 never collide
    return int(np.float64(value).view(np.uint64))


def derive_seed(*keys: int | float) -> int:
    """Mix integer / float keys into one 64-bit seed.

    Floats are keyed by their bit pattern.  The mapping is a pure function of
    the key tuple and independent of call order or process.
    """
    entropy = []
    for key in keys:
        if isinstance(key, (float, np.floating)):
            entropy.append(_float_key(key))
        else:
            key = int(key)
            if key < 0:
                raise InvalidParameterError(f"seed keys must be non-negative, got {key}")
            entropy.append(key)
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def quantize(v) -> np.ndarray:
    """1-bit quantiser with ``sign(0) = +1``; output is float64 in {-1, +1}."""
    v = np.asarray(v, dtype=float)
    return np.where(v >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.support.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def gen_sparse_signal(n: int, k: int, seed: int) -> SparseSignal:
    """Draw a length-``n`` signal with exactly ``k`` standard-normal nonzeros.

    The support is uniform over ``k``-subsets of ``range(n)`` and is returned
    sorted.
    """
    n, k = int(n), int(k)
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 1 <= k <= n:
        raise InvalidParameterError(f"sparsity k must satisfy 1 <= k <= n={n}, got {k}")
    rng = _rng(seed)
    support = np.sort(rng.choice(n, size=k, replace=False))
    amplitudes = rng.standard_normal(k)
    # a Gaussian draw of exactly 0.0 would silently reduce the sparsity
    while np.any(amplitudes == 0.0):
        zero = amplitudes == 0.0
        amplitudes[zero] = rng.standard_normal(int(zero.sum()))
    values = np.zeros(n)
    values[support] = amplitudes
    return SparseSignal(values=values, support=support)


def gen_sensing_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """``m x n`` matrix with i.i.d. N(0, 1) entries."""
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise InvalidParameterError(f"sensing matrix needs m, n >= 1, got ({m}, {n})")
    return _rng(seed).standard_normal((m, n))


def measure(phi, x, sigma2: float, seed: int) -> np.ndarray:
    """Return ``sign(phi @ x + noise)`` with noise ~ N(0, sigma2) per row.

    ``sigma2`` is absolute; ``x`` is not normalised first.
    """
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(x, dtype=float)
    sigma2 = float(sigma2)
    if not (sigma2 >= 0 and np.isfinite(sigma2)):
        raise InvalidParameterError(f"noise variance must be finite and >= 0, got {sigma2}")
    if phi.ndim != 2 or x.ndim != 1 or phi.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot measure signal of shape {x.shape} with matrix {phi.shape}")
    clean = phi @ x
    if sigma2 > 0:
        clean = clean + np.sqrt(sigma2) * _rng(seed).standard_normal(phi.shape[0])
    return quantize(clean)


@dataclass(frozen=True)
class Instance:
    """One replayable trial: ground truth, sensing matrix and the bits."""

    n: int
    k: int
    m: int
    sigma2: float
    seed: int
    phi: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def save(self, path) -> None:
        """Write an ``.npz`` container (layout documented in the README)."""
        with open(path, "wb") as fh:
            np.savez(
                fh,
                dims=np.array([self.n, self.k, self.m], dtype=np.int64),
                sigma2=np.array(self.sigma2, dtype=np.float64),
                seed=np.array(self.seed, dtype=np.uint64),
                phi=np.ascontiguousarray(self.phi, dtype=np.float64),
                x=np.asarray(self.x, dtype=np.float64),
                y=np.asarray(self.y, dtype=np.float64),
            )

    @classmethod
    def load(cls, path) -> "Instance":
        with np.load(Path(path), allow_pickle=False) as data:
            n, k, m = (int(v) for v in data["dims"])
            inst = cls(
                n=n, k=k, m=m,
                sigma2=float(data["sigma2"]),
                seed=int(data["seed"]),
                phi=data["phi"].copy(),
                x=data["x"].copy(),
                y=data["y"].copy(),
            )
        if inst.phi.shape != (m, n) or inst.x.shape != (n,) or inst.y.shape != (m,):
            raise ShapeError(f"instance file {path} has inconsistent array shapes")
        return inst


def make_instance(n: int, k: int, m: int, sigma2: float, seed: int) -> Instance:
    """Generate (x, phi, y) from one seed via three independent child streams."""
    signal_seed, matrix_seed, noise_seed = (
        int(s.generate_state(1, dtype=np.uint64)[0])
        for s in np.random.SeedSequence(int(seed)).spawn(3)
    )
    x = gen_sparse_signal(n, k, signal_seed)
    phi = gen_sensing_matrix(m, n, matrix_seed)
    y = measure(phi, x.values, sigma2, noise_seed)
    return Instance(n=int(n), k=int(k), m=int(m), sigma2=float(sigma2), seed=int(seed),
                    phi=phi, x=x.values, y=y)
