"""Linear sketches for unsigned c-MIPS.

A :class:`SketchMatrix` maps ``x in R^n`` to ``m`` buckets after scaling each
coordinate by ``alpha * E_i^{-1/kappa}`` with ``E_i`` unit exponentials. By
max-stability, ``max_i |x_i| E_i^{-1/kappa}`` has the law of
``||x||_kappa E^{-1/kappa}``, so the largest bucket tracks the ``kappa``-norm.

Applied to the data matrix ``A`` (one data vector per row), ``||Pi A q||_inf``
estimates ``||A q||_kappa`` and hence ``max_p |p . q|`` within a factor
``n^{1/kappa}``. A :class:`MipsIndex` keeps such sketches for every node of a
binary prefix tree over data indices and recovers a good index bit by bit.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import core

DEFAULT_ROW_CONSTANT = 8.0
DEFAULT_COPIES = 9
DEFAULT_GAMMA = 2.0**-40
CALIBRATED_C = 0.8
MAGIC = b"IPSK1"


def calibration_scale(kappa: float, c: float = CALIBRATED_C) -> float:
    """Scale ``alpha`` that puts the median of ``alpha E^{-1/kappa}`` at
    ``sqrt(1 - c^2)``, the geometric centre of the bracket ``[1-c, 1+c]``.

    The median of a unit exponential is ``ln 2``.
    """
    if not 0 < c < 1:
        raise ValueError("calibration constant must lie in (0, 1)")
    return math.sqrt(1 - c * c) * math.log(2) ** (1 / kappa)


def bracket_probability(kappa: float, c: float = CALIBRATED_C) -> float:
    """Probability that a single scaled maximum lands in ``(1 +- c) ||x||_kappa``
    when buckets do not collide."""
    a = calibration_scale(kappa, c)
    return math.exp(-((a / (1 + c)) ** kappa)) - math.exp(-((a / (1 - c)) ** kappa))


def sketch_rows(n: int, kappa: float, row_constant: float = DEFAULT_ROW_CONSTANT) -> int:
    return max(1, math.ceil(row_constant * n ** (1 - 2 / kappa) * math.log(n + 1)))


@dataclass(frozen=True)
class SketchMatrix:
    """Scaling stage followed by signed bucketing: ``(Pi x)_b = sum_{h(i)=b} sign_i scale_i x_i``."""

    kappa: float
    n: int
    m: int
    seed: int
    scales: np.ndarray
    buckets: np.ndarray
    signs: np.ndarray
    injective: bool = False

    def apply(self, x) -> np.ndarray:
        """Sketch a vector of length ``n`` or a matrix with ``n`` rows."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise core.DimensionMismatch(f"sketch expects {self.n} rows, got {x.shape[0]}")
        weights = self.signs * self.scales
        if x.ndim == 1:
            return np.bincount(self.buckets, weights=weights * x, minlength=self.m)
        scaled = weights.reshape((-1,) + (1,) * (x.ndim - 1)) * x
        out = np.zeros((self.m,) + x.shape[1:])
        if self.m == self.n and self.injective:
            out[self.buckets] = scaled
        else:
            np.add.at(out, self.buckets, scaled)
        return out

    def estimate_norm(self, x) -> float:
        return float(np.abs(self.apply(x)).max(initial=0.0))


def sample_sketch(
    n: int,
    kappa: float,
    seed: int,
    row_constant: float = DEFAULT_ROW_CONSTANT,
    *,
    rows: int | None = None,
    keys: tuple[int, ...] = (),
    rng: np.random.Generator | None = None,
) -> SketchMatrix:
    """Draw a sketch with ``ceil(C n^{1-2/kappa} ln(n+1))`` rows.

    ``rows`` overrides the row count. When it is at least ``n`` the
    coordinates are spread over distinct buckets, so the sketch is an exact
    signed, scaled permutation with ``m = n``. ``keys`` name an independent
    stream under the same seed; an explicit ``rng`` takes precedence.
    """
    if kappa < 2:
        raise ValueError("kappa must be at least 2")
    if n < 1:
        raise ValueError("n must be at least 1")
    m = sketch_rows(n, kappa, row_constant) if rows is None else int(rows)
    rng = core.derive_rng(seed, *keys) if rng is None else rng
    E = rng.exponential(size=n)
    scales = calibration_scale(kappa) * E ** (-1 / kappa)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    injective = rows is not None and m >= n
    if injective:
        m = n
        buckets = rng.permutation(n)
    else:
        buckets = rng.integers(0, m, size=n)
    return SketchMatrix(kappa, n, m, seed, scales, buckets, signs, injective)


# -- prefix-tree index ------------------------------------------------------


class UnknownNode(KeyError):
    pass


Node = tuple[int, int]  # (depth, prefix)


@dataclass
class MipsIndex:
    """Sketched data for every nonempty node of the prefix tree.

    Node ``(depth, prefix)`` holds the data indices whose top ``depth`` bits
    (out of ``levels``) equal ``prefix``. ``sketches[node]`` has shape
    ``(copies, rows, d)``.
    """

    n: int
    d: int
    kappa: float
    copies: int
    row_constant: float
    gamma: float
    seed: int
    levels: int
    sketches: dict[Node, np.ndarray] = field(default_factory=dict)

    @property
    def root_rows(self) -> int:
        return self.sketches[(0, 0)].shape[1]

    def total_rows(self) -> int:
        return sum(a.shape[0] * a.shape[1] for a in self.sketches.values())

    def members(self, node: Node) -> range:
        depth, prefix = node
        shift = self.levels - depth
        return range(prefix << shift, min(self.n, (prefix + 1) << shift))


def tree_levels(n: int) -> int:
    return max(0, math.ceil(math.log2(n))) if n > 1 else 0


def node_rows(size: int, kappa: float, row_constant: float) -> int:
    return min(sketch_rows(size, kappa, row_constant), size)


def build_index(
    P,
    kappa: float = 4.0,
    seed: int = 0,
    *,
    copies: int = DEFAULT_COPIES,
    row_constant: float = DEFAULT_ROW_CONSTANT,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
) -> MipsIndex:
    """Sketch every prefix-tree node of the data matrix ``P``.

    A node with ``k`` members gets ``min(ceil(C k^{1-2/kappa} ln(k+1)), k)``
    rows per copy; each copy uses an independent sketch.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("the data matrix needs at least one row")
    if copies < 1:
        raise ValueError("copies must be at least 1")
    n, d = P.shape
    index = MipsIndex(n, d, kappa, copies, row_constant, gamma, seed, tree_levels(n))
    nodes = [
        (depth, prefix)
        for depth in range(index.levels + 1)
        for prefix in range(1 << depth)
        if len(index.members((depth, prefix)))
    ]

    def sketch_node(node: Node) -> np.ndarray:
        idx = index.members(node)
        block = P[idx.start : idx.stop]
        rows = node_rows(len(idx), kappa, row_constant)
        rng = core.derive_rng(seed, *node)
        return np.stack([
            sample_sketch(len(idx), kappa, seed, rows=rows, rng=rng).apply(block) for _ in range(copies)
        ])

    for node, data in zip(nodes, core.parallel_map(sketch_node, nodes, threads)):
        index.sketches[node] = data
    return index


def estimate_max(index: MipsIndex, node: Node, q) -> float:
    """Median over copies of ``||A_s q||_inf`` at ``node``."""
    try:
        A = index.sketches[tuple(node)]
    except KeyError:
        raise UnknownNode(f"node {node} is not in the index") from None
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.d,):
        raise core.DimensionMismatch(f"query has shape {q.shape}, index dimension is {index.d}")
    return float(np.median(np.abs(A @ q).max(axis=1)))


def recover(index: MipsIndex, q, *, path: list | None = None) -> int:
    """Walk down the tree, always entering the child with the larger estimate.

    Ties and missing siblings resolve to the 0-child. If ``path`` is given,
    the visited nodes are appended to it.
    """
    prefix = 0
    for depth in range(index.levels):
        left, right = (depth + 1, 2 * prefix), (depth + 1, 2 * prefix + 1)
        if right not in index.sketches:
            prefix = left[1]
        elif estimate_max(index, left, q) >= estimate_max(index, right, q):
            prefix = left[1]
        else:
            prefix = right[1]
        if path is not None:
            path.append((depth + 1, prefix))
    return prefix


@dataclass(frozen=True)
class CmipsResult:
    index: Optional[int]
    queries: int

    @property
    def below_gamma(self) -> bool:
        return self.index is None


def cmips_schedule_length(s: float, c: float, gamma: float) -> int:
    """Number of scaled queries ``q / c^i`` for ``0 <= i <= ceil(log_{1/c}(s/gamma))``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    top = math.ceil(core.log_base(s / gamma, 1 / c) - 1e-12) if s > gamma else 0
    return top + 1


def cmips_from_threshold_search(
    search: Callable[[np.ndarray], Optional[int]],
    q,
    gamma: float = DEFAULT_GAMMA,
    *,
    s: float,
    c: float,
) -> CmipsResult:
    """Answer c-MIPS with an unsigned ``(cs, s)`` search oracle.

    The query is scaled up by ``1/c`` per round until the oracle reports a
    hit. The result records the hit (or None when every product is below
    ``gamma``) and how many oracle calls were made.
    """
    q = np.asarray(q, dtype=np.float64)
    total = cmips_schedule_length(s, c, gamma)
    for i in range(total):
        hit = search(q / c**i)
        if hit is not None:
            return CmipsResult(int(hit), i + 1)
    return CmipsResult(None, total)


def unsigned_join_via_sketch(
    P,
    Q,
    kappa: float = 4.0,
    seed: int = 0,
    *,
    copies: int = DEFAULT_COPIES,
    row_constant: float = DEFAULT_ROW_CONSTANT,
    threads: int = 1,
) -> list[tuple[int, int]]:
    """``(recover(q_j), j)`` for every query row of ``Q``."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape[0] == 0:
        return []
    P = np.asarray(P, dtype=np.float64)
    if P.shape[1] != Q.shape[1]:
        raise core.DimensionMismatch(f"P has dimension {P.shape[1]} but Q has {Q.shape[1]}")
    index = build_index(P, kappa, seed, copies=copies, row_constant=row_constant, threads=threads)
    found = core.parallel_map(lambda j: recover(index, Q[j]), range(Q.shape[0]), threads)
    return [(i, j) for j, i in enumerate(found)]


def sketch_joiner(kappa: float = 4.0, seed: int = 0, **kwargs):
    """Adapter with the join signature used by the OVP reduction."""

    def join(P, Q, *, s, cs, signed):
        return unsigned_join_via_sketch(P, Q, kappa, seed, **kwargs)

    return join


# -- index files ------------------------------------------------------------

_HEADER = struct.Struct("<5sIIdIddQII")
_NODE = struct.Struct("<IQI")


def dump_index(index: MipsIndex) -> bytes:
    """Binary container: magic, header, then one row block per node."""
    out = io.BytesIO()
    out.write(_HEADER.pack(
        MAGIC, index.n, index.d, index.kappa, index.copies, index.row_constant,
        index.gamma, index.seed & core.SEED_MASK, index.levels, len(index.sketches),
    ))
    for (depth, prefix) in sorted(index.sketches):
        data = index.sketches[(depth, prefix)]
        out.write(_NODE.pack(depth, prefix, data.shape[1]))
        out.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return out.getvalue()


def parse_index(blob: bytes) -> MipsIndex:
    if blob[:5] != MAGIC:
        raise ValueError("not a sketch index file (bad magic)")
    magic, n, d, kappa, copies, rc, gamma, seed, levels, count = _HEADER.unpack_from(blob, 0)
    index = MipsIndex(n, d, kappa, copies, rc, gamma, seed, levels)
    pos = _HEADER.size
    for _ in range(count):
        depth, prefix, rows = _NODE.unpack_from(blob, pos)
        pos += _NODE.size
        size = copies * rows * d
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(copies, rows, d)
        pos += size * 8
        index.sketches[(depth, prefix)] = data.astype(np.float64)
    if pos != len(blob):
        raise ValueError("trailing bytes in sketch index file")
    return index


def save_index(index: MipsIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_index(index))


def load_index(path) -> MipsIndex:
    with open(path, "rb") as fh:
        return parse_index(fh.read())
