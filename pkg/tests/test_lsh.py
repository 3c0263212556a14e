import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from ipsjoin import core, lsh
from oracles import is_prime_trial, rs_product


def test_lift_examples():
    assert lsh.lift_data([1, 0]) @ lsh.lift_query([1, 0]) == pytest.approx(1.0)
    assert lsh.lift_data([0.6, 0]) @ lsh.lift_query([0, 0.8]) == pytest.approx(0.0, abs=1e-15)
    assert lsh.lift_data([0.5, 0.5], 2) @ lsh.lift_query([1, 0], 2) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("U", [1.0, 2.0, 10.0])
def test_lift_preserves_scaled_products(U):
    rng = np.random.default_rng(int(U))
    P = core.unit_ball(2000, 6, rng)
    Q = core.unit_ball(2000, 6, rng, radius=U)
    LP, LQ = lsh.lift_data(P, U), lsh.lift_query(Q, U)
    assert np.max(np.abs(np.einsum("ij,ij->i", LP, LQ) - np.einsum("ij,ij->i", P, Q) / U)) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(LP, axis=1) - 1)) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(LQ, axis=1) - 1)) <= 1e-9


def test_lift_norm_violation_names_vector():
    with pytest.raises(lsh.NormViolation, match="data vector 1"):
        lsh.lift_data([[0.1, 0.0], [1.0, 1.0]])
    with pytest.raises(lsh.NormViolation, match="query vector 0"):
        lsh.lift_query([[3.0, 0.0]], U=2)
    with pytest.raises(ValueError):
        lsh.AsymmetricLift(0.5)


def test_rho_datadep_examples():
    r = lsh.rho_datadep(0.5, 0.5)
    assert abs(r.rho - 0.5) <= 1e-12
    assert r.r == pytest.approx(1.0)
    assert 1 / (2 * r.c_prime**2 - 1) == pytest.approx(r.rho, abs=1e-12)
    for x in (0.1, 0.4, 0.9):
        assert lsh.rho_datadep(x, 1.0).rho == pytest.approx(1.0)
    assert lsh.rho_datadep(1 - 1e-9, 0.5).rho < 1e-8
    assert lsh.rho_datadep(1.0, 0.5).rho == 0.0


def test_rho_datadep_identity_on_grid():
    for x in np.linspace(0.05, 0.95, 19):
        for c in np.linspace(0.05, 0.95, 19):
            r = lsh.rho_datadep(x, c)
            assert 1 / (2 * r.c_prime**2 - 1) == pytest.approx(r.rho, rel=1e-9)


def test_rho_simple_examples():
    assert lsh.rho_simple(0.9, 0.9) > lsh.rho_datadep(0.9, 0.9).rho
    assert lsh.rho_simple(0.5, 1.0) == 1.0
    assert 0 < lsh.rho_simple(0.5, 0.5) < 1
    with pytest.raises(ValueError):
        lsh.rho_simple(1.2, 0.5)


def test_rho_datadep_below_simple_on_grid():
    grid = np.linspace(0.05, 0.95, 50)
    for s in grid:
        for c in grid:
            assert lsh.rho_datadep(s, c).rho < lsh.rho_simple(s, c)


def test_hyperplane_antisymmetry_and_determinism():
    fam = lsh.HyperplaneFamily(5, k=8, seed=3)
    x = np.random.default_rng(0).standard_normal(5)
    x /= np.linalg.norm(x)
    for i in range(20):
        assert fam.hash(x, i) ^ fam.hash(-x, i) == 255
        assert fam.hash(x, i) == lsh.HyperplaneFamily(5, k=8, seed=3).hash(x, i)


def test_hyperplane_functions_independent_of_batch():
    fam = lsh.HyperplaneFamily(4, k=3, seed=1)
    X = np.random.default_rng(1).standard_normal((3, 4))
    full = fam.codes(X, np.arange(600))
    part = fam.codes(X, [599, 7, 300])
    assert np.array_equal(part, full[[599, 7, 300]])


def test_estimate_collision_examples():
    fam = lsh.HyperplaneFamily(3, seed=2)
    x = np.array([1.0, 0, 0])
    p, se = lsh.estimate_collision(fam, x, x, 1000)
    assert (p, se) == (1.0, 0.0)
    p, se = lsh.estimate_collision(fam, x, -x, 1000)
    assert p == 0.0
    y = np.array([0, 1.0, 0])
    p, se = lsh.estimate_collision(fam, x, y, 100_000, seed=5)
    assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / 100_000)


def test_estimate_collision_thread_invariant():
    fam = lsh.HyperplaneFamily(3, seed=9)
    x, y = np.array([1.0, 0, 0]), np.array([0.6, 0.8, 0])
    assert lsh.estimate_collision(fam, x, y, 20_000, threads=1) == lsh.estimate_collision(fam, x, y, 20_000, threads=8)


def test_collision_counts_match_direct_hashing():
    fam = lsh.LiftedHyperplaneFamily(3, U=2.0, k=2, seed=4)
    rng = np.random.default_rng(3)
    X = core.unit_ball(4, 3, rng)
    Y = core.unit_ball(5, 3, rng, radius=2.0)
    counts = lsh.collision_counts(fam, X, Y, 300)
    cd = fam.hash_data(X, np.arange(300))
    cq = fam.hash_query(Y, np.arange(300))
    direct = (cq[:, :, None] == cd[:, None, :]).sum(axis=0)
    assert np.array_equal(counts, direct)


def test_primes():
    assert [n for n in range(60) if lsh.is_prime(n)] == [n for n in range(60) if is_prime_trial(n)]
    assert lsh.next_prime(90) == 97


def test_build_incoherent_example():
    fam = lsh.build_incoherent(9, Fraction(1, 3))
    assert (fam.q, fam.t, fam.dim) == (3, 2, 9)
    values = {lsh.incoherent_product(fam, u, w) for u, w in combinations(range(9), 2)}
    assert values <= {Fraction(0), Fraction(1, 3)}
    for u in range(9):
        assert np.linalg.norm(lsh.incoherent_vector(fam, u)) == pytest.approx(1.0, abs=1e-15)
        assert lsh.incoherent_product(fam, u, u) == 1


@pytest.mark.parametrize("q", [2, 3, 5, 7])
@pytest.mark.parametrize("t", [1, 2, 3])
def test_incoherent_coherence_exhaustive(q, t):
    fam = lsh.IncoherentFamily(q, t)
    n = min(fam.size, 60)
    for u, w in combinations(range(n), 2):
        got = lsh.incoherent_product(fam, u, w)
        assert got == rs_product(u, w, q, t)
        assert got.denominator in (1, q) and got <= Fraction(t - 1, q)


@pytest.mark.parametrize("N,eps", [(9, 1 / 3), (100, 0.1), (1000, 0.05), (31, 0.5 / 32), (5000, 0.3)])
def test_build_incoherent_meets_request(N, eps):
    fam = lsh.build_incoherent(N, eps)
    assert lsh.is_prime(fam.q) and fam.size >= N and float(fam.epsilon) <= eps + 1e-15


def test_build_incoherent_infeasible():
    with pytest.raises(ValueError):
        lsh.build_incoherent(10**6, 1e-6, prime_limit=1000)


def test_codec():
    codec = lsh.FixedPointCodec(3, 1)
    assert [codec.encode([v]) for v in (-1.0, -0.75, 0.0, 0.75)] == [4, 5, 0, 3]
    with pytest.raises(ValueError):
        codec.encode([0.3])
    assert codec.quantize([0.3, 2.0, -5.0]).tolist() == [0.25, 0.75, -1.0]


def test_symmetric_lift_examples():
    codec = lsh.FixedPointCodec(2, 2)
    fam = lsh.build_incoherent(codec.index_space, 0.5)
    x = np.array([0.5, -0.5])
    y = np.array([0.0, 0.5])
    fx, fy = lsh.symmetric_lift(x, codec, fam), lsh.symmetric_lift(y, codec, fam)
    assert fx.shape == (2 + fam.dim,)
    assert np.linalg.norm(fx) == pytest.approx(1.0)
    assert fx @ fx == pytest.approx(1.0)
    assert abs(fx @ fy - x @ y) <= float(fam.epsilon) + 1e-12
    unit = np.array([1.0, 0.0])
    with pytest.raises(ValueError):
        lsh.symmetric_lift(unit, codec, fam)  # 1.0 is not a 2-bit value
    codec3 = lsh.FixedPointCodec(3, 1)
    fam3 = lsh.build_incoherent(8, 0.5)
    assert np.all(lsh.symmetric_lift(np.array([-1.0]), codec3, fam3)[1:] == 0)


def test_symmetric_family_collisions_on_identical_inputs():
    codec = lsh.FixedPointCodec(3, 1)
    fam = lsh.SymmetricLiftHyperplaneFamily(codec, lsh.build_incoherent(8, 0.5), k=2, seed=1)
    x = np.array([0.25])
    assert lsh.estimate_collision(fam, x, x, 500) == (1.0, 0.0)


def test_lsh_join_finds_identical_pairs():
    rng = np.random.default_rng(8)
    P = core.unit_ball(60, 8, rng)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    pairs = lsh.lsh_join(P, P[:10], s=0.99, cs=0.9, signed=True, tables=8, k=4, seed=1)
    assert {(i, j) for i, j in pairs} == {(j, j) for j in range(10)}
    assert lsh.lsh_join(P, P[:0], s=1, cs=0.5, signed=False) == []
