"""Gap embeddings from {0,1}^d that separate orthogonal from non-orthogonal pairs.

Three families are provided. Each is a pair of maps, one for data vectors and
one for queries, such that the embedded inner product is large exactly when the
binary inputs are orthogonal:

* family 1, signed, into {-1,1}: product ``4 - 4 x.y``;
* family 2, unsigned, into {-1,1}: product ``(2d)^q T_q((2d+2-4 x.y) / 2d)``
  where ``T_q`` is the Chebyshev polynomial of the first kind;
* family 3, unsigned, into {0,1}: product counts the chunks of coordinates on
  which ``x`` and ``y`` share no 1.

All maps accept a single vector or a 2-D batch (one vector per row) and return
``int8`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import core
from .core import Domain

DEFAULT_BUDGET = 2**30

# Per-coordinate tables shared by families 1 and 2, indexed by the input bit.
_DATA_TABLE = np.array([[1, -1, -1], [1, 1, 1]], dtype=np.int8)
_QUERY_TABLE = np.array([[1, 1, -1], [-1, -1, -1]], dtype=np.int8)


class EmbeddingTooLarge(ValueError):
    """The embedded dimension would exceed the configured memory budget."""

    def __init__(self, dim: int, budget: int):
        super().__init__(
            f"embedded dimension {dim} exceeds the memory budget of {budget} entries per vector"
        )
        self.dim = dim
        self.budget = budget


def _binary_batch(x) -> tuple[np.ndarray, bool]:
    a = np.asarray(x)
    single = a.ndim == 1
    a = core.as_matrix(a)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise core.DomainError("gap embeddings take {0,1} input vectors")
    return a.astype(np.int8), single


def _finish(out: np.ndarray, single: bool) -> np.ndarray:
    out = out[0] if single else out
    out.setflags(write=False)
    return out


def _check_budget(dim: int, budget: int | None) -> None:
    budget = DEFAULT_BUDGET if budget is None else budget
    if dim > budget:
        raise EmbeddingTooLarge(dim, budget)


# -- family 1 ---------------------------------------------------------------


def _check_family1(d: int) -> None:
    if d < 4:
        raise ValueError(f"family 1 needs d >= 4 (padding of length d-4), got d={d}")


def embed1_data(x) -> np.ndarray:
    """Signed data map of family 1, output dimension ``4d - 4``."""
    a, single = _binary_batch(x)
    n, d = a.shape
    _check_family1(d)
    body = _DATA_TABLE[a].reshape(n, 3 * d)
    return _finish(np.concatenate([body, np.ones((n, d - 4), np.int8)], axis=1), single)


def embed1_query(y) -> np.ndarray:
    """Signed query map of family 1, output dimension ``4d - 4``."""
    a, single = _binary_batch(y)
    n, d = a.shape
    _check_family1(d)
    body = _QUERY_TABLE[a].reshape(n, 3 * d)
    return _finish(np.concatenate([body, -np.ones((n, d - 4), np.int8)], axis=1), single)


# -- family 2 ---------------------------------------------------------------


def embed2_dimension(d: int, q: int) -> int:
    """Output dimension of family 2 from its recurrence (no vectors built)."""
    base = 4 * d + 2
    prev, cur = 1, base
    if q == 0:
        return 1
    for _ in range(q - 1):
        prev, cur = cur, 2 * base * cur + (2 * d) ** 2 * prev
    return cur


def embed2_value(d: int, q: int, overlap: int) -> int:
    """Exact embedded inner product of family 2 for inputs with ``x.y = overlap``."""
    u = 2 * d + 2 - 4 * overlap
    value = (2 * d) ** q * core.chebyshev(q, Fraction(u, 2 * d))
    assert value.denominator == 1
    return int(value)


def _check_family2(d: int, q: int, strict: bool) -> None:
    if q < 1:
        raise ValueError(f"Chebyshev order must be >= 1, got q={q}")
    if strict and d < 8:
        raise ValueError(f"family 2 needs d >= 8 for its (9d)^q dimension bound, got d={d}")
    if d < 1:
        raise ValueError("family 2 needs d >= 1")


def _embed2(x, q: int, table: np.ndarray, negate_tail: bool, budget, strict: bool):
    a, single = _binary_batch(x)
    n, d = a.shape
    _check_family2(d, q, strict)
    _check_budget(embed2_dimension(d, q), budget)

    base = np.concatenate([table[a].reshape(n, 3 * d), np.ones((n, d + 2), np.int8)], axis=1)
    pad = (2 * d) ** 2
    older, prev = np.ones((n, 1), np.int8), base
    for _ in range(q - 1):
        head = core.tensor(base, prev)
        tail = -older if negate_tail else older
        cur = np.concatenate([head, head, np.tile(tail, (1, pad))], axis=1)
        older, prev = prev, cur
    return _finish(np.array(prev, copy=True), single)


def embed2_data(x, q: int, *, budget: int | None = None, strict: bool = True) -> np.ndarray:
    """Unsigned Chebyshev data map of family 2.

    Args:
        x: binary vector or batch.
        q: Chebyshev order, at least 1.
        budget: maximum number of entries per embedded vector.
        strict: require ``d >= 8``, where the ``(9d)^q`` dimension bound holds.
            Small dimensions are still valid embeddings and are handy in tests.
    """
    return _embed2(x, q, _DATA_TABLE, False, budget, strict)


def embed2_query(y, q: int, *, budget: int | None = None, strict: bool = True) -> np.ndarray:
    """Unsigned Chebyshev query map of family 2; see :func:`embed2_data`."""
    return _embed2(y, q, _QUERY_TABLE, True, budget, strict)


# -- family 3 ---------------------------------------------------------------


def embed3_chunks(d: int, k: int) -> list[tuple[int, int]]:
    """Contiguous index ranges of the ``k`` chunks.

    Chunks have ``ceil(d/k)`` coordinates and only the last one is shorter.
    When that layout would leave fewer than ``k`` nonempty chunks (e.g.
    d=10, k=6) the trailing chunks are instead one shorter each.
    """
    if not 1 <= k <= d:
        raise ValueError(f"chunk count must satisfy 1 <= k <= d, got k={k}, d={d}")
    size = math.ceil(d / k)
    if (k - 1) * size < d:
        starts = [i * size for i in range(k)]
        return [(s, min(d, s + size)) for s in starts]
    long_chunks = d % k or k
    bounds, start = [], 0
    for i in range(k):
        stop = start + (size if i < long_chunks else size - 1)
        bounds.append((start, stop))
        start = stop
    return bounds


def embed3_dimension(d: int, k: int) -> int:
    return sum(2 ** (stop - start) for start, stop in embed3_chunks(d, k))


def _embed3(x, k: int, query: bool, budget):
    a, single = _binary_batch(x)
    n, d = a.shape
    chunks = embed3_chunks(d, k)
    _check_budget(sum(2 ** (b - s) for s, b in chunks), budget)
    ones = np.ones(n, np.int8)
    blocks = []
    for start, stop in chunks:
        block = ones[:, None]
        for j in range(start, stop):
            col = a[:, j]
            # 1 - x_j y_j = (1 - x_j, 1) . (y_j, 1 - y_j)
            pair = np.stack([col, 1 - col] if query else [1 - col, ones], axis=1)
            block = core.tensor(block, pair)
        blocks.append(block)
    return _finish(np.concatenate(blocks, axis=1), single)


def embed3_data(x, k: int, *, budget: int | None = None) -> np.ndarray:
    """Unsigned {0,1} data map of family 3 with ``k`` chunks."""
    return _embed3(x, k, False, budget)


def embed3_query(y, k: int, *, budget: int | None = None) -> np.ndarray:
    """Unsigned {0,1} query map of family 3 with ``k`` chunks."""
    return _embed3(y, k, True, budget)


# -- dispatch and profiles --------------------------------------------------


def embed(family: int, side: str, x, param: int | None = None, *, budget=None, strict=True):
    """Apply the data (``side="data"``) or query map of a family."""
    if side not in ("data", "query"):
        raise ValueError(f"side must be 'data' or 'query', got {side!r}")
    data = side == "data"
    if family == 1:
        return embed1_data(x) if data else embed1_query(x)
    if family == 2:
        fn = embed2_data if data else embed2_query
        return fn(x, _require(param, "q"), budget=budget, strict=strict)
    if family == 3:
        fn = embed3_data if data else embed3_query
        return fn(x, _require(param, "k"), budget=budget)
    raise ValueError(f"unknown embedding family {family}")


def _require(param, name):
    if param is None:
        raise ValueError(f"this family needs the parameter {name}")
    return int(param)


def _log_ratio(s: float, cs: float, d2: float) -> float:
    if cs <= 0:
        return 0.0
    return math.log(s / d2) / math.log(cs / d2)


@dataclass(frozen=True)
class GapEmbeddingProfile:
    """Dimensions and gap values of one embedding instance.

    ``d2``, ``cs`` and ``s`` describe the construction exactly. Family 2 also
    carries the rounder values ``d2_nominal = (9d)^q`` and
    ``s_nominal = (2d)^q e^{q/sqrt(d)} / 2`` used in asymptotic statements;
    for the other families the nominal values coincide with the exact ones
    (``k 2^{d/k}`` for family 3, which may be fractional when k does not
    divide d).
    """

    family: int
    param: int | None
    d1: int
    d2: int
    cs: int
    s: int
    domain: Domain
    signed: bool
    d2_nominal: float
    s_nominal: float

    def __post_init__(self):
        if not self.cs < self.s:
            raise ValueError("a gap embedding needs cs < s")
        if self.d2 < 1:
            raise ValueError("embedded dimension must be positive")

    @property
    def c(self) -> float:
        return self.cs / self.s

    @property
    def ratio(self) -> float:
        """``log(s/d2) / log(cs/d2)`` with exact values; 0 when ``cs = 0``."""
        return _log_ratio(self.s, self.cs, self.d2)

    @property
    def ratio_nominal(self) -> float:
        return _log_ratio(self.s_nominal, self.cs, self.d2_nominal)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["domain"] = self.domain.value
        out.update(c=self.c, ratio=self.ratio, ratio_nominal=self.ratio_nominal)
        return out


def profile(family: int, d: int, param: int | None = None, *, strict: bool = True) -> GapEmbeddingProfile:
    """Profile of family 1 (no parameter), 2 (``param=q``) or 3 (``param=k``)."""
    if family == 1:
        _check_family1(d)
        return GapEmbeddingProfile(1, None, d, 4 * d - 4, 0, 4, Domain.SIGN, True, 4 * d - 4, 4)
    if family == 2:
        q = _require(param, "q")
        _check_family2(d, q, strict)
        cs = (2 * d) ** q
        return GapEmbeddingProfile(
            2, q, d, embed2_dimension(d, q), cs, embed2_value(d, q, 0), Domain.SIGN, False,
            float(9 * d) ** q, cs * math.exp(q / math.sqrt(d)) / 2,
        )
    if family == 3:
        k = _require(param, "k")
        if not 1 <= k <= d:
            raise ValueError(f"chunk count must satisfy 1 <= k <= d, got k={k}, d={d}")
        return GapEmbeddingProfile(
            3, k, d, embed3_dimension(d, k), k - 1, k, Domain.BINARY, False, k * 2.0 ** (d / k), k,
        )
    raise ValueError(f"unknown embedding family {family}")


def chebyshev_ratio_formula(d: int, q: int) -> float:
    """Closed form of ``ratio_nominal`` for family 2."""
    l92 = math.log(9 / 2)
    return 1 - 1 / (l92 * math.sqrt(d)) + math.log(2) / (q * l92)


def chunked_ratio_formula(d: int, k: int) -> float:
    """Closed form of ``ratio`` for family 3 (exact when k divides d)."""
    if k == 1:
        return 0.0
    t = k * math.log2(1 + 1 / (k - 1))
    return 1 - t / (d + t)
