"""Staircase query/data sequences that bound the gap of inner-product LSH.

A staircase of length ``n`` pairs queries ``q_0..q_{n-1}`` with data
``p_0..p_{n-1}`` so that ``q_i . p_j >= s`` when ``j >= i`` and
``q_i . p_j <= cs`` otherwise, with data in the unit ball and queries in the
ball of radius ``U``. Any asymmetric LSH separating ``s`` from ``cs`` then has
``P1 - P2 <= 1 / (8 log2 n)``; :func:`gap_audit` checks a concrete family
against that bound by simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import core, lsh

REL_TOL = 1e-12


@dataclass
class HardSequence:
    Q: np.ndarray
    P: np.ndarray
    s: float
    c: float
    U: float
    case: str
    signed_only: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def d(self) -> int:
        return self.Q.shape[1]


def _check_common(s: float, c: float, U: float) -> None:
    if not s > 0:
        raise ValueError("s must be positive")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if U < 1:
        raise ValueError("U must be at least 1")


def _length_1d(s: float, c: float, U: float) -> int:
    # floor(log_{1/c}(U/s)) + 1, nudged so exact powers are not lost to rounding
    return int(math.floor(core.log_base(U / s, 1 / c) + 1e-9)) + 1


def seq_case1_1d(s: float, c: float, U: float) -> HardSequence:
    """One-dimensional geometric staircase ``q_i = U c^i``, ``p_j = s / (U c^j)``."""
    _check_common(s, c, U)
    if s > c * U * (1 + REL_TOL):
        raise ValueError(f"case 1 needs s <= cU, got s={s}, cU={c * U}")
    n = _length_1d(s, c, U)
    i = np.arange(n)
    Q = (U * c**i)[:, None]
    P = (s / (U * c**i))[:, None]
    return HardSequence(Q, P, s, c, U, "1a")


def seq_case1_blocked(s: float, c: float, U: float, d: int) -> HardSequence:
    """``d/2`` translated copies of the 1-D staircase on orthogonal coordinates.

    Block ``k`` places the geometric sequence on coordinate ``2k``. Its queries
    carry ``2s`` on every odd coordinate ``2t+1`` with ``t >= k`` and its data
    carry ``1/2`` on coordinate ``2k-1``, so data of a later block score
    exactly ``s`` against queries of an earlier block and 0 the other way
    round. Pairs whose query or data vector falls outside its ball are
    dropped.
    """
    _check_common(s, c, U)
    if d < 2 or d % 2:
        raise ValueError("case 1b needs an even dimension d >= 2")
    if s > min(c * U, U / (2 * math.sqrt(d))) * (1 + REL_TOL):
        raise ValueError("case 1b needs s <= min(cU, U/(2 sqrt(d)))")
    half = d // 2
    m = _length_1d(s, c, U)
    Qs, Ps, lengths = [], [], []
    for k in range(half):
        i = np.arange(m)
        q = np.zeros((m, d))
        p = np.zeros((m, d))
        q[:, 2 * k] = U * c**i
        q[:, [2 * t + 1 for t in range(k, half)]] = 2 * s
        p[:, 2 * k] = s / (U * c**i)
        if k > 0:
            p[:, 2 * k - 1] = 0.5
        keep = (np.linalg.norm(q, axis=1) <= U * (1 + REL_TOL)) & (np.linalg.norm(p, axis=1) <= 1 + REL_TOL)
        Qs.append(q[keep])
        Ps.append(p[keep])
        lengths.append(int(keep.sum()))
    return HardSequence(
        np.concatenate(Qs), np.concatenate(Ps), s, c, U, "1b", meta={"block_lengths": lengths}
    )


def case2_min_block_length(s: float, c: float, U: float) -> int:
    return int(math.floor(0.5 * math.sqrt(U / (s * (1 - c)))))


def seq_case2(s: float, c: float, U: float, d: int, max_block: int = 1_000_000) -> HardSequence:
    """Linear staircase ``p_j . q_i = s + s(1-c)(j-i)`` on ``d/2`` planes.

    Only valid for signed inner products: pairs far below the diagonal have
    large negative products.
    """
    _check_common(s, c, U)
    if d < 2 or d % 2:
        raise ValueError("case 2 needs an even dimension d >= 2")
    if s > U / (2 * d) * (1 + REL_TOL):
        raise ValueError("case 2 needs s <= U/(2d)")
    half = d // 2
    a = math.sqrt(s * U)
    b = math.sqrt(s * U * (1 - c))
    e = math.sqrt(s / U)
    f = math.sqrt(s * (1 - c) / U)
    Qs, Ps, lengths = [], [], []
    for k in range(half):
        # maximal prefix with both norms inside their balls
        extra = (half - 1 - k) * s * U
        m = 0
        while m < max_block:
            qn = (a * (1 - (1 - c) * m)) ** 2 + b * b + extra
            pn = e * e + (m * f) ** 2
            if qn > U * U * (1 + REL_TOL) or pn > 1 + REL_TOL:
                break
            m += 1
        i = np.arange(m)
        q = np.zeros((m, d))
        p = np.zeros((m, d))
        q[:, 2 * k] = a * (1 - (1 - c) * i)
        q[:, 2 * k + 1] = b
        q[:, [2 * t for t in range(k + 1, half)]] = a
        p[:, 2 * k] = e
        p[:, 2 * k + 1] = i * f
        Qs.append(q)
        Ps.append(p)
        lengths.append(m)
    return HardSequence(
        np.concatenate(Qs), np.concatenate(Ps), s, c, U, "2", signed_only=True,
        meta={"block_lengths": lengths, "min_block_length": case2_min_block_length(s, c, U)},
    )


def _prefix_slot(bits: int, length: int) -> int:
    """Heap-style slot of a bit prefix: prefixes of length ``L`` use slots
    ``2^L - 1 .. 2^{L+1} - 2``."""
    return (1 << length) - 1 + bits


def seq_case3(s: float, U: float, c: float) -> HardSequence:
    """Binary-tree staircase over a nearly orthogonal family ``z``.

    With ``L = floor(sqrt(U / 8s))`` bits, query ``i`` sums
    ``sqrt(2sU) z[prefix(i, l) + 1]`` over the zero bits ``l`` of ``i`` and data
    ``j`` sums ``sqrt(2s/U) z[prefix(j, l) + 1]`` over its one bits. Query ``i``
    and data ``j`` share a ``z`` exactly when ``j > i``, so query ``i`` is paired
    with data ``i + 1`` and the staircase has ``2^L - 1`` pairs. The ``z``
    family is an exact-unit-norm Reed-Solomon family of coherence at most
    ``c / (2 L^2)``.
    """
    _check_common(s, c, U)
    if s > U / 8 * (1 + REL_TOL):
        raise ValueError("case 3 needs s <= U/8")
    L = int(math.floor(math.sqrt(U / (8 * s)) + 1e-9))
    n = 1 << L
    eps = c / (2 * L * L)
    fam = lsh.build_incoherent(2 * n - 1, eps)
    Z = np.stack([lsh.incoherent_vector(fam, u) for u in range(2 * n - 1)])

    def build(idx: int, bit_value: int, weight: float) -> np.ndarray:
        v = np.zeros(fam.dim)
        for level in range(L):
            bit = (idx >> (L - 1 - level)) & 1
            if bit == bit_value:
                prefix = ((idx >> (L - level)) << 1) | 1
                v += Z[_prefix_slot(prefix, level + 1)]
        return weight * v

    Q = np.stack([build(i, 0, math.sqrt(2 * s * U)) for i in range(n - 1)])
    P = np.stack([build(j, 1, math.sqrt(2 * s / U)) for j in range(1, n)])
    return HardSequence(
        Q, P, s, c, U, "3",
        meta={"bits": L, "n_tree": n, "epsilon": eps, "rs_q": fam.q, "rs_t": fam.t,
              "coherence": float(fam.epsilon)},
    )


def generate(case: str, s: float, c: float, U: float, d: int | None = None) -> HardSequence:
    if case == "1a":
        return seq_case1_1d(s, c, U)
    if case == "1b":
        return seq_case1_blocked(s, c, U, d if d is not None else 2)
    if case == "2":
        return seq_case2(s, c, U, d if d is not None else 2)
    if case == "3":
        return seq_case3(s, U, c)
    raise ValueError(f"unknown case {case!r}")


# -- verification -----------------------------------------------------------


@dataclass
class VerificationReport:
    case: str
    n: int
    mode: str
    passed: bool
    staircase_ok: bool
    norms_ok: bool
    upper_margin: float
    lower_margin: float
    max_data_norm: float
    max_query_norm: float
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def verify_sequence(seq: HardSequence, mode: str | None = None, threads: int = 1) -> VerificationReport:
    """Check every product against the staircase and every norm against its ball.

    ``mode`` defaults to ``"signed"`` for signed-only sequences and
    ``"unsigned"`` otherwise; unsigned mode compares absolute values.
    ``upper_margin`` is the smallest ``value - s`` over pairs with ``j >= i``
    and ``lower_margin`` the smallest ``cs - value`` over the others.
    """
    mode = mode or ("signed" if seq.signed_only else "unsigned")
    n = seq.n
    s, cs = seq.s, seq.c * seq.s
    tol = REL_TOL * s

    def rows(r: tuple[int, int]):
        lo, hi = r
        vals = seq.Q[lo:hi] @ seq.P.T
        if mode == "unsigned":
            vals = np.abs(vals)
        i = np.arange(lo, hi)[:, None]
        j = np.arange(n)[None, :]
        upper = j >= i
        up = np.where(upper, vals - s, np.inf)
        low = np.where(~upper, cs - vals, np.inf)
        bad = np.argwhere((up < -tol) | (low < -tol))
        return up.min(initial=np.inf), low.min(initial=np.inf), [(lo + int(a), int(b)) for a, b in bad[:5]]

    parts = core.parallel_map(rows, core.chunk_ranges(n, 256), threads)
    upper_margin = min((p[0] for p in parts), default=math.inf)
    lower_margin = min((p[1] for p in parts), default=math.inf)
    violations = sorted(v for p in parts for v in p[2])[:10]

    pn = float(np.linalg.norm(seq.P, axis=1).max()) if n else 0.0
    qn = float(np.linalg.norm(seq.Q, axis=1).max()) if n else 0.0
    norms_ok = pn <= 1 + REL_TOL and qn <= seq.U * (1 + REL_TOL)
    staircase_ok = not violations
    return VerificationReport(
        seq.case, n, mode, staircase_ok and norms_ok, staircase_ok, norms_ok,
        float(upper_margin), float(lower_margin), pn, qn, [list(v) for v in violations],
    )


# -- gap audit --------------------------------------------------------------


def gap_bound(n: int) -> float:
    return 1 / (8 * math.log2(n))


@dataclass
class GapAudit:
    n: int
    trials: int
    bound: float
    p1_min_hat: float
    p1_stderr: float
    p2_max_hat: float
    p2_stderr: float

    @property
    def gap(self) -> float:
        return self.p1_min_hat - self.p2_max_hat

    @property
    def slack(self) -> float:
        return 3 * math.hypot(self.p1_stderr, self.p2_stderr)

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound + self.slack

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out.update(gap=self.gap, slack=self.slack, passed=self.passed)
        return out


def gap_audit(seq: HardSequence, family, trials: int, seed: int = 0, threads: int = 1) -> GapAudit:
    """Estimate the worst ``P1`` and ``P2`` of ``family`` over the staircase.

    ``family`` follows the :class:`ipsjoin.lsh.HashFamily` interface; data go
    through ``hash_data`` and queries through ``hash_query``.
    """
    if seq.n < 2:
        raise ValueError("the gap bound needs a staircase of length at least 2")
    family = replace(family, seed=seed)
    counts = lsh.collision_counts(family, seq.P, seq.Q, trials, threads)  # [i, j]
    p = counts / trials
    upper = np.triu(np.ones((seq.n, seq.n), dtype=bool))
    up = np.where(upper, p, np.inf)
    low = np.where(~upper, p, -np.inf)
    p1 = float(up.min())
    p2 = float(low.max())

    def se(x: float) -> float:
        return math.sqrt(x * (1 - x) / trials)

    return GapAudit(seq.n, trials, gap_bound(seq.n), p1, se(p1), p2, se(p2))
