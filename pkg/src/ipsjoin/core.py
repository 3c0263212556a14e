"""Vector domains, combinators and shared numeric helpers.

Vectors are plain numpy arrays marked read-only. Binary and sign vectors are
stored as ``int8``; real vectors as ``float64``. Every combinator returns a new
array and never touches its inputs, so vectors can be shared freely between
threads.

Most combinators also accept 2-D arrays, in which case they act row-wise. The
embeddings rely on this to build whole datasets at once.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

SEED_MASK = (1 << 64) - 1


class DimensionMismatch(ValueError):
    pass


class DomainError(ValueError):
    pass


class Domain(str, enum.Enum):
    BINARY = "binary"
    SIGN = "sign"
    REAL = "real"

    @property
    def is_integral(self) -> bool:
        return self is not Domain.REAL


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def vector(entries, domain: Domain | str = Domain.REAL) -> np.ndarray:
    """Validate ``entries`` against ``domain`` and return a read-only array.

    Raises:
        DomainError: if an entry lies outside the domain, or a real entry is
            not finite.
    """
    domain = Domain(domain)
    if domain is Domain.REAL:
        a = np.array(entries, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise DomainError("real vectors must have finite entries")
        return _freeze(a)
    raw = np.asarray(entries)
    allowed = (0, 1) if domain is Domain.BINARY else (-1, 1)
    if raw.size and not np.all(np.isin(raw, allowed)):
        raise DomainError(f"{domain.value} vectors take entries in {set(allowed)}")
    return _freeze(raw.astype(np.int8))


def binary(entries) -> np.ndarray:
    return vector(entries, Domain.BINARY)


def sign(entries) -> np.ndarray:
    return vector(entries, Domain.SIGN)


def real(entries) -> np.ndarray:
    return vector(entries, Domain.REAL)


def infer_domain(x: np.ndarray) -> Domain:
    """Smallest domain containing every entry of ``x``."""
    x = np.asarray(x)
    if x.dtype.kind in "iub":
        if np.all((x == 0) | (x == 1)):
            return Domain.BINARY
        if np.all((x == -1) | (x == 1)):
            return Domain.SIGN
    return Domain.REAL


def inner_product(x, y):
    """Inner product of two vectors.

    Returns an exact Python ``int`` when both operands are integer arrays and a
    ``float`` otherwise. Integer accumulation happens in int64, which is exact
    for any dimension below 2**62 with entries in {-1, 0, 1}.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"cannot take inner product of shapes {x.shape} and {y.shape}")
    if x.dtype.kind in "iub" and y.dtype.kind in "iub":
        return int(np.dot(x.astype(np.int64), y.astype(np.int64)))
    return float(np.dot(x.astype(np.float64), y.astype(np.float64)))


def concat(*parts) -> np.ndarray:
    """Concatenate vectors (the last axis for batches)."""
    arrays = [np.asarray(p) for p in parts]
    if not arrays:
        return _freeze(np.zeros(0))
    return _freeze(np.concatenate(arrays, axis=-1))


def repeat(x, n: int) -> np.ndarray:
    """``x`` concatenated with itself ``n`` times."""
    if n < 0:
        raise ValueError("repeat count must be nonnegative")
    x = np.asarray(x)
    reps = (1,) * (x.ndim - 1) + (n,)
    return _freeze(np.tile(x, reps))


def tensor(x, y) -> np.ndarray:
    """Row-major vectorised outer product; the index of ``x`` varies slowest.

    For 2-D inputs the product is taken row by row, so both batches must have
    the same number of rows.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim == 1 and y.ndim == 1:
        return _freeze(np.multiply.outer(x, y).reshape(-1))
    if x.ndim == 2 and y.ndim == 2 and x.shape[0] == y.shape[0]:
        out = x[:, :, None] * y[:, None, :]
        return _freeze(out.reshape(x.shape[0], -1))
    raise DimensionMismatch(f"cannot tensor shapes {x.shape} and {y.shape}")


def chebyshev(q: int, x):
    """Degree-``q`` Chebyshev polynomial of the first kind, by recurrence.

    Works for any ``x`` supporting ``+``, ``-`` and ``*`` (floats, ints,
    ``fractions.Fraction``, numpy arrays), so exact arithmetic is available by
    passing an exact type.
    """
    if q < 0:
        raise ValueError("Chebyshev degree must be nonnegative")
    prev, cur = x * 0 + 1, x
    if q == 0:
        return prev
    for _ in range(q - 1):
        prev, cur = cur, 2 * x * cur - prev
    return cur


class JoinMode(str, enum.Enum):
    SIGNED = "signed"
    UNSIGNED = "unsigned"


@dataclass(frozen=True)
class JoinSpec:
    """Threshold ``s``, approximation ``c`` and sign convention of a join."""

    s: float
    c: float
    mode: JoinMode = JoinMode.SIGNED

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"threshold s must be positive, got {self.s}")
        if not 0 < self.c < 1:
            raise ValueError(f"approximation c must lie in (0, 1), got {self.c}")
        object.__setattr__(self, "mode", JoinMode(self.mode))

    @property
    def cs(self) -> float:
        return self.c * self.s

    def score(self, values):
        return values if self.mode is JoinMode.SIGNED else abs(values)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream named by ``(seed, *keys)``.

    Streams with different keys are statistically independent, and a stream's
    output does not depend on which other streams were drawn before it.
    """
    words = [int(seed) & SEED_MASK] + [int(k) & SEED_MASK for k in keys]
    return np.random.default_rng(words)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """``[fn(i) for i in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(n: int, size: int) -> list[tuple[int, int]]:
    """Half-open ``(start, stop)`` ranges covering ``range(n)`` in blocks."""
    size = max(1, int(size))
    return [(i, min(n, i + size)) for i in range(0, n, size)]


def unit_ball(n: int, d: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """``n`` points uniform in the ``d``-ball of the given radius."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / d)
    return g * (radius * r)[:, None]


def log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


def as_matrix(rows: Sequence, dtype=None) -> np.ndarray:
    a = np.asarray(rows, dtype=dtype)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D dataset, got shape {a.shape}")
    return a
