"""LSH for inner products: sphere lifts, hyperplane hashing and rho values.

Two reductions move inner-product search onto the unit sphere, where random
hyperplane (SimHash) LSH applies:

* the asymmetric lift sends data from the unit ball and queries from the ball
  of radius ``U`` to unit vectors whose inner product is ``p.q / U``;
* the symmetric lift pads every fixed-point vector ``x`` with
  ``sqrt(1 - |x|^2) v_x``, where ``{v_u}`` is an incoherent family built from
  Reed-Solomon codewords, so distinct inputs keep their inner product up to
  the family's coherence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from . import core

NORM_TOL = 1e-12


class NormViolation(ValueError):
    pass


def _rows(x) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    return core.as_matrix(a), single


def _pad_norm(sq: np.ndarray, bound: float, what: str) -> np.ndarray:
    bad = np.flatnonzero(sq > bound * (1 + NORM_TOL))
    if bad.size:
        i = int(bad[0])
        raise NormViolation(f"{what} vector {i} has norm {math.sqrt(sq[i]):.17g} > {bound:.17g}")
    return np.sqrt(np.clip(1.0 - sq / bound, 0.0, None))


def lift_data(p, U: float = 1.0) -> np.ndarray:
    """``(p, sqrt(1 - |p|^2), 0)`` for data in the unit ball."""
    if U < 1:
        raise ValueError("query radius U must be at least 1")
    P, single = _rows(p)
    pad = _pad_norm(np.einsum("ij,ij->i", P, P), 1.0, "data")
    out = np.concatenate([P, pad[:, None], np.zeros((P.shape[0], 1))], axis=1)
    return out[0] if single else out


def lift_query(q, U: float = 1.0) -> np.ndarray:
    """``(q/U, 0, sqrt(1 - |q|^2/U^2))`` for queries in the ball of radius ``U``."""
    if U < 1:
        raise ValueError("query radius U must be at least 1")
    Q, single = _rows(q)
    pad = np.sqrt(np.clip(1.0 - _sq_over(Q, U), 0.0, None))
    out = np.concatenate([Q / U, np.zeros((Q.shape[0], 1)), pad[:, None]], axis=1)
    return out[0] if single else out


def _sq_over(Q: np.ndarray, U: float) -> np.ndarray:
    sq = np.einsum("ij,ij->i", Q, Q)
    _pad_norm(sq, U * U, "query")
    return sq / (U * U)


@dataclass(frozen=True)
class AsymmetricLift:
    U: float = 1.0

    def __post_init__(self):
        if self.U < 1:
            raise ValueError("query radius U must be at least 1")

    def data(self, p):
        return lift_data(p, self.U)

    def query(self, q):
        return lift_query(q, self.U)


# -- rho calculators --------------------------------------------------------


@dataclass(frozen=True)
class RhoValue:
    rho: float
    r: float
    c_prime: float


def rho_datadep(s_over_U: float, c: float) -> RhoValue:
    """Query exponent of signed MIPS through the asymmetric lift.

    Returns ``rho = (1 - s/U) / (1 + (1 - 2c) s/U)`` together with the sphere
    distance threshold ``r = sqrt(2(1 - s/U))`` and approximation
    ``c' = sqrt((1 - cs/U) / (1 - s/U))``, which satisfy
    ``rho = 1 / (2c'^2 - 1)``.
    """
    x = float(s_over_U)
    if not 0 < c <= 1:
        raise ValueError(f"approximation c must lie in (0, 1], got {c}")
    if x <= 0:
        raise ValueError(f"s/U must be positive, got {x}")
    if x >= 1:
        return RhoValue(0.0, 0.0, math.inf)
    denom = 1 + (1 - 2 * c) * x
    if denom <= 0:
        raise ValueError(f"degenerate rho denominator 1 + (1-2c)s/U = {denom}")
    return RhoValue((1 - x) / denom, math.sqrt(2 * (1 - x)), math.sqrt((1 - c * x) / (1 - x)))


def rho_simple(s: float, c: float) -> float:
    """Exponent of hyperplane LSH applied at similarity thresholds ``s`` and ``cs``."""
    for v in (s, c * s):
        if not -1 < v < 1:
            raise ValueError(f"similarity {v} outside (-1, 1)")
    if c == 1:
        return 1.0
    p1 = 1 - math.acos(s) / math.pi
    p2 = 1 - math.acos(c * s) / math.pi
    return math.log(p1) / math.log(p2)


def hyperplane_collision_probability(cos_angle: float) -> float:
    return 1 - math.acos(max(-1.0, min(1.0, cos_angle))) / math.pi


# -- hashing ----------------------------------------------------------------


class HashFamily(Protocol):
    """Interface used by :func:`estimate_collision` and the gap audit.

    ``hash_data``/``hash_query`` map a batch of vectors to integer codes, one
    row per requested hash function index.
    """

    seed: int

    def hash_data(self, X: np.ndarray, fn_indices: np.ndarray) -> np.ndarray: ...

    def hash_query(self, Y: np.ndarray, fn_indices: np.ndarray) -> np.ndarray: ...

    @property
    def code_bits(self) -> int: ...


_BLOCK_ENTRIES = 1 << 21


@lru_cache(maxsize=64)
def _plane_block(seed: int, dim: int, k: int, block: int) -> np.ndarray:
    size = _block_size(dim, k)
    g = core.derive_rng(seed, 0x48505, dim, k, block).standard_normal((size, k, dim))
    g.setflags(write=False)
    return g


def _block_size(dim: int, k: int) -> int:
    return max(1, min(256, _BLOCK_ENTRIES // (k * dim)))


@dataclass(frozen=True)
class HyperplaneFamily:
    """SimHash: ``k`` seeded Gaussian hyperplanes per hash function.

    Hyperplanes for function ``i`` depend only on ``(seed, dim, k, i)``; they
    are drawn in fixed-size blocks so any subset of functions can be
    regenerated independently of the others.
    """

    dim: int
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.k > 62:
            raise ValueError("k must lie in [1, 62]")

    @property
    def code_bits(self) -> int:
        return self.k

    def planes(self, fn_indices) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(fn_indices, dtype=np.int64))
        size = _block_size(self.dim, self.k)
        out = np.empty((idx.size, self.k, self.dim))
        blocks = idx // size
        for b in np.unique(blocks):
            sel = blocks == b
            out[sel] = _plane_block(self.seed, self.dim, self.k, int(b))[idx[sel] % size]
        return out

    def codes(self, X, fn_indices) -> np.ndarray:
        X, _ = _rows(X)
        if X.shape[1] != self.dim:
            raise core.DimensionMismatch(f"family has dimension {self.dim}, got {X.shape[1]}")
        G = self.planes(fn_indices)  # (F, k, dim)
        bits = np.einsum("fkd,nd->fnk", G, X) >= 0
        weights = (1 << np.arange(self.k, dtype=np.int64))
        return bits.astype(np.int64) @ weights

    def hash(self, x, fn_index: int = 0) -> int:
        return int(self.codes(x, [fn_index])[0, 0])

    hash_data = codes
    hash_query = codes


@dataclass(frozen=True)
class LiftedHyperplaneFamily:
    """Asymmetric family: hyperplane hashing after the asymmetric lift."""

    dim: int
    U: float = 1.0
    k: int = 1
    seed: int = 0

    @property
    def code_bits(self) -> int:
        return self.k

    @property
    def _inner(self) -> HyperplaneFamily:
        return HyperplaneFamily(self.dim + 2, self.k, self.seed)

    def hash_data(self, X, fn_indices):
        return self._inner.codes(lift_data(X, self.U), fn_indices)

    def hash_query(self, Y, fn_indices):
        return self._inner.codes(lift_query(Y, self.U), fn_indices)


def _one_hot(codes: np.ndarray, bits: int) -> np.ndarray:
    F, n = codes.shape
    width = 1 << bits
    out = np.zeros((n, F * width), dtype=np.float32)
    cols = codes + (np.arange(F)[:, None] * width)
    out[np.arange(n)[None, :].repeat(F, 0), cols] = 1.0
    return out


def collision_counts(family, X, Y, trials: int, threads: int = 1, first_index: int = 0) -> np.ndarray:
    """Number of functions ``i`` in ``[first, first + trials)`` with
    ``h_p(X[a]) == h_q(Y[b])``, as an ``(len(Y), len(X))`` int array."""
    X, _ = _rows(X)
    Y, _ = _rows(Y)
    bits = family.code_bits
    step = max(1, min(4096, (1 << 22) // ((X.shape[0] + Y.shape[0]) * (1 << bits))))

    def block(r: tuple[int, int]) -> np.ndarray:
        idx = np.arange(first_index + r[0], first_index + r[1])
        cd = family.hash_data(X, idx)
        cq = family.hash_query(Y, idx)
        # one-hot over (function, code) so a single matmul counts collisions;
        # per-block counts stay far below 2**24, exact in float32
        return (_one_hot(cq, bits) @ _one_hot(cd, bits).T).astype(np.int64)

    parts = core.parallel_map(block, core.chunk_ranges(trials, step), threads)
    return np.sum(parts, axis=0) if parts else np.zeros((Y.shape[0], X.shape[0]), np.int64)


def estimate_collision(family, x, y, trials: int, seed: int | None = None, threads: int = 1) -> tuple[float, float]:
    """Empirical ``Pr[h_p(x) = h_q(y)]`` over ``trials`` hash functions.

    Returns the frequency and its binomial standard error.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if seed is not None:
        family = replace(family, seed=seed)
    hits = int(collision_counts(family, [x], [y], trials, threads)[0, 0])
    p = hits / trials
    return p, math.sqrt(p * (1 - p) / trials)


# -- incoherent vectors -----------------------------------------------------


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    n = max(2, n)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class IncoherentFamily:
    """Unit vectors ``v_u`` in dimension ``q^2``, one per polynomial of degree
    below ``t`` over the prime field ``F_q``; distinct vectors have inner
    product at most ``(t - 1) / q``."""

    q: int
    t: int

    @property
    def dim(self) -> int:
        return self.q * self.q

    @property
    def size(self) -> int:
        return self.q**self.t

    @property
    def epsilon(self) -> Fraction:
        return Fraction(self.t - 1, self.q)


def build_incoherent(N: int, epsilon: float, prime_limit: int = 2**16) -> IncoherentFamily:
    """Smallest-dimension Reed-Solomon family with at least ``N`` vectors and
    coherence at most ``epsilon``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if N < 1:
        raise ValueError("need at least one vector")
    eps = Fraction(epsilon).limit_denominator(1 << 40) if isinstance(epsilon, float) else Fraction(epsilon)
    best = None
    t = 1
    while True:
        floor_q = math.ceil((t - 1) / eps) if t > 1 else 2
        if best is not None and floor_q > best.q or floor_q > prime_limit:
            break
        q = next_prime(max(floor_q, _int_root_ceil(N, t)))
        if q <= prime_limit and Fraction(t - 1, q) <= eps and q**t >= N:
            if best is None or q < best.q:
                best = IncoherentFamily(q, t)
        t += 1
    if best is None:
        raise ValueError(f"no Reed-Solomon family for N={N}, epsilon={epsilon} with q <= {prime_limit}")
    return best


def _int_root_ceil(N: int, t: int) -> int:
    r = max(1, int(round(N ** (1.0 / t))))
    while r**t < N:
        r += 1
    while r > 1 and (r - 1) ** t >= N:
        r -= 1
    return r


def incoherent_support(fam: IncoherentFamily, u: int) -> np.ndarray:
    """Positions ``a*q + P_u(a)`` of the nonzero entries of ``v_u``."""
    if not 0 <= u < fam.size:
        raise ValueError(f"index {u} outside the family of {fam.size} vectors")
    coeffs = []
    for _ in range(fam.t):
        u, digit = divmod(u, fam.q)
        coeffs.append(digit)
    a = np.arange(fam.q, dtype=np.int64)
    value = np.zeros(fam.q, dtype=np.int64)
    for coef in reversed(coeffs):
        value = (value * a + coef) % fam.q
    return a * fam.q + value


def incoherent_vector(fam: IncoherentFamily, u: int) -> np.ndarray:
    v = np.zeros(fam.dim)
    v[incoherent_support(fam, u)] = 1.0 / math.sqrt(fam.q)
    return v


def incoherent_product(fam: IncoherentFamily, u: int, w: int) -> Fraction:
    """Exact ``v_u . v_w`` as a fraction."""
    shared = np.intersect1d(incoherent_support(fam, u), incoherent_support(fam, w)).size
    return Fraction(int(shared), fam.q)


# -- symmetric lift ---------------------------------------------------------


@dataclass(frozen=True)
class FixedPointCodec:
    """``k``-bit two's-complement fixed point with scale ``2^-(k-1)``.

    A ``d``-dimensional vector maps to the ``dk``-bit index formed by
    concatenating its coordinates, first coordinate most significant.
    """

    k: int
    d: int

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise ValueError("codec needs k >= 1 and d >= 1")

    @property
    def scale(self) -> int:
        return 1 << (self.k - 1)

    @property
    def index_space(self) -> int:
        return 1 << (self.k * self.d)

    def quantize(self, x) -> np.ndarray:
        """Round to the nearest representable vector (clamped to range)."""
        x = np.asarray(x, dtype=np.float64)
        lo, hi = -self.scale, self.scale - 1
        return np.clip(np.round(x * self.scale), lo, hi) / self.scale

    def encode(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise core.DimensionMismatch(f"codec expects dimension {self.d}, got {x.shape}")
        scaled = x * self.scale
        ints = np.round(scaled)
        if not np.all(ints == scaled) or ints.min() < -self.scale or ints.max() > self.scale - 1:
            raise ValueError(f"vector {x.tolist()} is not representable with {self.k}-bit coordinates")
        u = 0
        mask = (1 << self.k) - 1
        for v in ints.astype(np.int64):
            u = (u << self.k) | (int(v) & mask)
        return u


def symmetric_lift(x, codec: FixedPointCodec, fam: IncoherentFamily) -> np.ndarray:
    """``(x, sqrt(1 - |x|^2) v_x)``: the same map for data and queries."""
    x = np.asarray(x, dtype=np.float64)
    u = codec.encode(x)
    if u >= fam.size:
        raise ValueError(f"codec index {u} exceeds the {fam.size} vectors of the incoherent family")
    pad = _pad_norm(np.array([x @ x]), 1.0, "input")[0]
    return np.concatenate([x, pad * incoherent_vector(fam, u)])


@dataclass(frozen=True)
class SymmetricLiftHyperplaneFamily:
    """Symmetric family: the same hyperplane hash after the symmetric lift."""

    codec: FixedPointCodec
    fam: IncoherentFamily
    k: int = 1
    seed: int = 0

    @property
    def code_bits(self) -> int:
        return self.k

    def _lift(self, X):
        X, _ = _rows(X)
        return np.stack([symmetric_lift(x, self.codec, self.fam) for x in X])

    def hash_data(self, X, fn_indices):
        return HyperplaneFamily(self.codec.d + self.fam.dim, self.k, self.seed).codes(self._lift(X), fn_indices)

    hash_query = hash_data


# -- minimal bucketed index, usable as a join strategy ----------------------


def lsh_join(
    P, Q, *, s: float, cs: float, signed: bool, tables: int = 16, k: int = 4, seed: int = 0
) -> list[tuple[int, int]]:
    """Approximate (cs, s) join through the asymmetric lift and SimHash buckets.

    Both sets are rescaled into unit balls, lifted, and hashed into ``tables``
    tables of ``k`` bits. Each query checks its bucket mates exactly and keeps
    its best candidate if it reaches ``cs``. Unsigned joins also probe ``-q``.
    """
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        return []
    mp = max(float(np.linalg.norm(P, axis=1).max()), 1e-300)
    mq = max(float(np.linalg.norm(Q, axis=1).max()), 1e-300)
    fam = HyperplaneFamily(P.shape[1] + 2, k, seed)
    fns = np.arange(tables)
    data_codes = fam.codes(lift_data(P / mp), fns)  # (tables, n_p)
    buckets = []
    for t in range(tables):
        table: dict[int, list[int]] = {}
        for i, code in enumerate(data_codes[t]):
            table.setdefault(int(code), []).append(i)
        buckets.append(table)

    probes = [Q / mq] if signed else [Q / mq, -Q / mq]
    cand: list[set[int]] = [set() for _ in range(Q.shape[0])]
    for probe in probes:
        qc = fam.codes(lift_query(probe), fns)
        for t in range(tables):
            for j, code in enumerate(qc[t]):
                cand[j].update(buckets[t].get(int(code), ()))

    out = []
    for j, members in enumerate(cand):
        if not members:
            continue
        idx = np.fromiter(sorted(members), dtype=np.int64)
        scores = P[idx] @ Q[j]
        if not signed:
            scores = np.abs(scores)
        best = int(np.argmax(scores))
        if scores[best] >= cs:
            out.append((int(idx[best]), j))
    return out
