"""Reference implementations used as test oracles.

They share no code with the package: plain loops, closed forms and exact
rational arithmetic, slow but easy to check by eye.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product


def chebyshev_closed(q: int, x) -> Fraction:
    """``T_q(x) = sum_k C(q, 2k) (x^2 - 1)^k x^(q - 2k)``."""
    x = Fraction(x)
    return sum(math.comb(q, 2 * k) * (x * x - 1) ** k * x ** (q - 2 * k) for k in range(q // 2 + 1))


def dot(x, y):
    assert len(x) == len(y)
    return sum(int(a) * int(b) for a, b in zip(x, y))


def all_binary(d: int) -> list[tuple[int, ...]]:
    return list(product((0, 1), repeat=d))


def ovp_loops(P, Q):
    for i, p in enumerate(P):
        for j, q in enumerate(Q):
            if dot(p, q) == 0:
                return i, j
    return None


def embed2_closed(d: int, q: int, overlap: int) -> int:
    value = Fraction(2 * d) ** q * chebyshev_closed(q, Fraction(2 * d + 2 - 4 * overlap, 2 * d))
    assert value.denominator == 1
    return int(value)


def dimension_recurrence(d: int, q: int) -> int:
    dims = [1, 4 * d + 2]
    while len(dims) <= q:
        dims.append(2 * (4 * d + 2) * dims[-1] + (2 * d) ** 2 * dims[-2])
    return dims[q]


def chunk_count_closed(x, y, k: int) -> int:
    """Chunks on which x and y share no 1."""
    return sum(all(x[j] * y[j] == 0 for j in range(a, b)) for a, b in chunk_bounds(len(x), k))


def poly_eval_mod(coeffs, a: int, q: int) -> int:
    return sum(c * pow(a, e, q) for e, c in enumerate(coeffs)) % q


def rs_digits(u: int, q: int, t: int) -> list[int]:
    return [(u // q**e) % q for e in range(t)]


def rs_product(u: int, w: int, q: int, t: int) -> Fraction:
    """Number of agreeing evaluations of the two polynomials, over q."""
    cu, cw = rs_digits(u, q, t), rs_digits(w, q, t)
    agree = sum(poly_eval_mod(cu, a, q) == poly_eval_mod(cw, a, q) for a in range(q))
    return Fraction(agree, q)


def is_prime_trial(n: int) -> bool:
    return n >= 2 and all(n % p for p in range(2, int(n**0.5) + 1))


def chunk_bounds(d: int, k: int) -> list[tuple[int, int]]:
    size = math.ceil(d / k)
    bounds = [(i * size, min(d, (i + 1) * size)) for i in range(k)]
    if bounds[-1][0] < d:
        return bounds
    base, extra = divmod(d, k)
    out, start = [], 0
    for i in range(k):
        stop = start + base + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out
