"""Orthogonal Vectors: brute-force oracle, chunk splitting and the
embed-then-join reduction."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from . import core, embeddings
from .embeddings import GapEmbeddingProfile

Pair = tuple[int, int]


@dataclass
class OvpInstance:
    """Binary data set ``P`` and query set ``Q`` of a shared dimension."""

    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        self.P = core.as_matrix(self.P).astype(np.int8)
        self.Q = core.as_matrix(self.Q).astype(np.int8)
        if self.P.shape[1] != self.Q.shape[1]:
            raise core.DimensionMismatch(
                f"P has dimension {self.P.shape[1]} but Q has {self.Q.shape[1]}"
            )
        for name, a in (("P", self.P), ("Q", self.Q)):
            if a.size and not np.all((a == 0) | (a == 1)):
                raise core.DomainError(f"{name} must contain {{0,1}} vectors")

    @property
    def d(self) -> int:
        return self.P.shape[1]


def random_instance(
    n_p: int, n_q: int, d: int, rng: np.random.Generator, *, density: float = 0.5, planted: bool = False
) -> OvpInstance:
    """Uniform random instance, optionally with one planted orthogonal pair."""
    P = (rng.random((n_p, d)) < density).astype(np.int8)
    Q = (rng.random((n_q, d)) < density).astype(np.int8)
    if planted and n_p and n_q:
        i, j = int(rng.integers(n_p)), int(rng.integers(n_q))
        Q[j] &= 1 - P[i]
    return OvpInstance(P, Q)


def _products(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # float64 BLAS is exact here: entries are small integers and d < 2**53.
    return (P.astype(np.float64) @ Q.astype(np.float64).T).astype(np.int64)


def ovp_bruteforce(inst: OvpInstance, threads: int = 1) -> Optional[Pair]:
    """Lexicographically smallest ``(i, j)`` with ``P[i] . Q[j] = 0``, or None."""
    n_q = inst.Q.shape[0]
    if inst.P.shape[0] == 0 or n_q == 0:
        return None

    def scan(rng_: tuple[int, int]):
        lo, hi = rng_
        zero = _products(inst.P, inst.Q[lo:hi]) == 0
        rows = np.flatnonzero(zero.any(axis=1))
        if rows.size == 0:
            return None
        i = int(rows[0])
        return i, lo + int(np.flatnonzero(zero[i])[0])

    hits = [h for h in core.parallel_map(scan, core.chunk_ranges(n_q, 256), threads) if h]
    return min(hits) if hits else None


def split_chunks(P: Sequence, chunk: int) -> list:
    """Consecutive pieces of ``P`` of length ``chunk`` (the last may be shorter)."""
    if chunk < 1:
        raise ValueError("chunk size must be at least 1")
    return [P[i : i + chunk] for i in range(0, len(P), chunk)]


class Joiner(Protocol):
    def __call__(self, P: np.ndarray, Q: np.ndarray, *, s: float, cs: float, signed: bool) -> list[Pair]:
        ...


def brute_force_join(P: np.ndarray, Q: np.ndarray, *, s: float, cs: float, signed: bool, threads: int = 1) -> list[Pair]:
    """Exact threshold join: for each query, its best data vector if that reaches ``s``.

    ``cs`` is accepted for interface compatibility; an exact join never needs
    the slack.
    """
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape[0] == 0:
        return []

    def block(rng_: tuple[int, int]) -> list[Pair]:
        lo, hi = rng_
        scores = P @ Q[lo:hi].T
        if not signed:
            scores = np.abs(scores)
        best = scores.argmax(axis=0)
        top = scores[best, np.arange(hi - lo)]
        return [(int(best[j]), lo + j) for j in np.flatnonzero(top >= s)]

    parts = core.parallel_map(block, core.chunk_ranges(Q.shape[0], 128), threads)
    return [pair for part in parts for pair in part]


def max_embedded_score(FP: np.ndarray, GQ: np.ndarray, signed: bool) -> float:
    scores = np.asarray(FP, np.float64) @ np.asarray(GQ, np.float64).T
    return float((scores if signed else np.abs(scores)).max())


@dataclass
class ReductionReport:
    profile: GapEmbeddingProfile
    join_found: bool
    oracle_found: bool
    witness: Optional[Pair]
    oracle_witness: Optional[Pair]
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return self.join_found == self.oracle_found

    def to_dict(self, with_timings: bool = False) -> dict:
        out = {
            "profile": self.profile.to_dict(),
            "join_found": self.join_found,
            "oracle_found": self.oracle_found,
            "agree": self.agree,
            "witness": list(self.witness) if self.witness else None,
            "oracle_witness": list(self.oracle_witness) if self.oracle_witness else None,
        }
        if with_timings:
            out["timings"] = dict(self.timings)
        return out


def embed_rows(family: int, side: str, X: np.ndarray, param, *, budget=None, strict=True, threads: int = 1):
    """Embed a dataset in row blocks; identical to embedding it in one call."""
    blocks = core.parallel_map(
        lambda r: embeddings.embed(family, side, X[r[0] : r[1]], param, budget=budget, strict=strict),
        core.chunk_ranges(X.shape[0], 64),
        threads,
    )
    if not blocks:
        width = embeddings.embed(family, side, np.zeros((1, X.shape[1]), np.int8), param, budget=budget, strict=strict).shape[1]
        return np.zeros((0, width), np.int8)
    return np.concatenate(blocks, axis=0)


def reduce_and_join(
    inst: OvpInstance,
    family: int,
    param: int | None = None,
    joiner: Callable[..., list[Pair]] = brute_force_join,
    *,
    budget: int | None = None,
    strict: bool = True,
    threads: int = 1,
) -> ReductionReport:
    """Decide an OVP instance through a gap embedding and a (cs, s) join.

    ``P`` goes through the data map and ``Q`` through the query map. The joiner
    runs with the embedding's thresholds, and every pair it returns is checked
    in the embedded space: a pair scoring above ``cs`` must come from an
    orthogonal input pair because of the gap. The brute-force answer is
    computed alongside so the report records whether the two agree.
    """
    prof = embeddings.profile(family, inst.d, param, strict=strict)
    timings = {}

    t0 = time.perf_counter()
    FP = embed_rows(family, "data", inst.P, param, budget=budget, strict=strict, threads=threads)
    GQ = embed_rows(family, "query", inst.Q, param, budget=budget, strict=strict, threads=threads)
    timings["embed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pairs = joiner(FP, GQ, s=prof.s, cs=prof.cs, signed=prof.signed)
    timings["join"] = time.perf_counter() - t0

    confirmed = []
    for i, j in pairs:
        value = core.inner_product(FP[i], GQ[j])
        if (value if prof.signed else abs(value)) > prof.cs:
            confirmed.append((int(i), int(j)))

    t0 = time.perf_counter()
    oracle = ovp_bruteforce(inst, threads=threads)
    timings["oracle"] = time.perf_counter() - t0

    return ReductionReport(
        profile=prof,
        join_found=bool(confirmed),
        oracle_found=oracle is not None,
        witness=min(confirmed) if confirmed else None,
        oracle_witness=oracle,
        timings=timings,
    )
