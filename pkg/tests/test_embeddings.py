import math
import time
from itertools import product

import numpy as np
import pytest

from ipsjoin import core, embeddings as E
from oracles import all_binary, chunk_count_closed, dimension_recurrence, embed2_closed


def ip(a, b):
    return core.inner_product(a, b)


def test_family1_examples():
    assert ip(E.embed1_data([0, 0, 0, 0]), E.embed1_query([1, 0, 1, 0])) == 4
    assert ip(E.embed1_data([1, 1, 0, 0]), E.embed1_query([1, 0, 0, 0])) == 0
    assert ip(E.embed1_data([1, 1, 1, 1]), E.embed1_query([1, 1, 1, 1])) == -12
    assert E.embed1_data([0] * 7).shape == (24,)


def test_family1_rejects_small_d():
    with pytest.raises(ValueError):
        E.embed1_data([0, 1, 0])


def test_family2_examples():
    x = [0, 0, 0, 0]
    assert ip(E.embed2_data(x, 1, strict=False), E.embed2_query(x, 1, strict=False)) == 10
    assert ip(E.embed2_data(x, 2, strict=False), E.embed2_query(x, 2, strict=False)) == 136
    assert E.embed2_dimension(4, 2) == 712
    assert E.embed2_data(x, 2, strict=False).shape == (712,)


def test_family2_strict_requires_d8():
    with pytest.raises(ValueError):
        E.embed2_data([0] * 7, 1)
    assert E.embed2_data([0] * 8, 1).shape == (34,)


def test_family2_budget_error_names_budget():
    with pytest.raises(E.EmbeddingTooLarge, match="1000"):
        E.embed2_data([0] * 8, 3, budget=1000)


@pytest.mark.parametrize("d", [4, 5, 6])
@pytest.mark.parametrize("q", [1, 2, 3])
def test_family2_exhaustive_small(d, q):
    X = np.array(all_binary(d), np.int8)
    F = E.embed2_data(X, q, strict=False).astype(np.int64)
    G = E.embed2_query(X, q, strict=False).astype(np.int64)
    assert F.shape[1] == dimension_recurrence(d, q)
    assert set(np.unique(F)) <= {-1, 1} and set(np.unique(G)) <= {-1, 1}
    got = F @ G.T
    overlap = X.astype(np.int64) @ X.T.astype(np.int64)
    expected = np.vectorize(lambda t: embed2_closed(d, q, int(t)), otypes=[object])(overlap)
    assert np.array_equal(got, expected.astype(np.int64))


def test_family2_value_matches_closed_form():
    for d in range(4, 12):
        for q in range(1, 6):
            for t in range(d + 1):
                assert E.embed2_value(d, q, t) == embed2_closed(d, q, t)


def test_family2_gap():
    for d in range(4, 12):
        for q in range(1, 5):
            cs = (2 * d) ** q
            assert E.embed2_value(d, q, 0) > cs
            assert all(abs(E.embed2_value(d, q, t)) <= cs for t in range(1, d + 1))


def test_family2_dimension_bound():
    for d in range(8, 65):
        for q in range(1, 7):
            assert E.embed2_dimension(d, q) <= (9 * d) ** q


@pytest.mark.slow
def test_family2_cost_is_linear_in_dimension():
    d = 8
    x = (np.random.default_rng(0).random((512, d)) < 0.5).astype(np.int8)
    batch = {2: 512, 3: 512, 4: 8}

    def per_entry(q):
        best = math.inf
        for _ in range(3):
            t = time.perf_counter()
            E.embed2_data(x[: batch[q]], q)
            best = min(best, time.perf_counter() - t)
        return best / (batch[q] * E.embed2_dimension(d, q))

    costs = [per_entry(q) for q in (2, 3, 4)]
    for a, b in zip(costs, costs[1:]):
        assert 0.5 <= b / a <= 2, costs


def test_family3_examples():
    assert ip(E.embed3_data([0, 0, 0, 0], 2), E.embed3_query([1, 1, 0, 1], 2)) == 2
    assert ip(E.embed3_data([1, 0, 0, 0], 2), E.embed3_query([1, 0, 0, 0], 2)) == 1
    assert E.embed3_dimension(4, 2) == 8


def test_family3_chunks():
    assert E.embed3_chunks(10, 4) == [(0, 3), (3, 6), (6, 9), (9, 10)]
    chunks = E.embed3_chunks(10, 6)
    assert len(chunks) == 6 and all(b > a for a, b in chunks) and chunks[-1][1] == 10
    with pytest.raises(ValueError):
        E.embed3_chunks(4, 5)


@pytest.mark.parametrize("d,k", [(d, k) for d in (4, 5, 6, 7) for k in range(1, d + 1)])
def test_family3_exhaustive_small(d, k):
    X = np.array(all_binary(d), np.int8)
    F = E.embed3_data(X, k).astype(np.int64)
    G = E.embed3_query(X, k).astype(np.int64)
    assert set(np.unique(F)) <= {0, 1} and set(np.unique(G)) <= {0, 1}
    assert F.shape[1] <= k * 2 ** math.ceil(d / k)
    got = F @ G.T
    for i, x in enumerate(all_binary(d)):
        for j, y in enumerate(all_binary(d)):
            assert got[i, j] == chunk_count_closed(x, y, k)


def test_single_and_batch_agree():
    X = (np.random.default_rng(2).random((5, 8)) < 0.5).astype(np.int8)
    for fam, param in ((1, None), (2, 2), (3, 3)):
        B = E.embed(fam, "data", X, param)
        for i in range(5):
            assert np.array_equal(B[i], E.embed(fam, "data", X[i], param))


def test_embed_rejects_non_binary():
    with pytest.raises(core.DomainError):
        E.embed1_data([0, 1, 2, 0])


def test_profile_examples():
    p1 = E.profile(1, 10)
    assert (p1.d1, p1.d2, p1.cs, p1.s) == (10, 36, 0, 4)
    p3 = E.profile(3, 16, 4)
    assert (p3.d1, p3.d2, p3.cs, p3.s) == (16, 64, 3, 4) and p3.c == 0.75
    assert p3.ratio == pytest.approx(E.chunked_ratio_formula(16, 4), abs=1e-12)


def test_profile_family2_ratio():
    p = E.profile(2, 16, 4)
    assert (p.cs, p.d2) == (32**4, E.embed2_dimension(16, 4))
    assert p.ratio == pytest.approx(math.log(p.s / p.d2) / math.log(p.cs / p.d2), abs=1e-12)
    # nominal values: log((2d)^q e^{q/sqrt d} / 2 / (9d)^q) / log((2d/9d)^q)
    l29 = math.log(2 / 9)
    manual = (4 * l29 + 1 - math.log(2)) / (4 * l29)
    assert p.ratio_nominal == pytest.approx(manual, abs=1e-9)
    assert p.ratio_nominal == pytest.approx(E.chebyshev_ratio_formula(16, 4), abs=1e-9)


def test_profile_invalid_parameters():
    for args in ((1, 3, None), (2, 10, None), (2, 10, 0), (3, 5, 6), (4, 5, 1)):
        with pytest.raises(ValueError):
            E.profile(*args)
