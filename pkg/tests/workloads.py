"""Instance generators shared by the sketch tests and the acceptance suite."""

import numpy as np

from ipsjoin import core


def planted_instance(seed: int, n: int = 64, d: int = 32, kappa: float = 4.0):
    """One data vector with |p.q| = 1; all others have |p.q| <= n^(-2/kappa)."""
    rng = core.derive_rng(seed, 77)
    q = rng.standard_normal(d)
    q /= np.linalg.norm(q)
    cap = n ** (-2 / kappa)
    a = rng.uniform(-cap, cap, n)
    R = rng.standard_normal((n, d))
    R -= np.outer(R @ q, q)
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    r = np.sqrt(1 - a**2) * rng.random(n)
    P = a[:, None] * q + r[:, None] * R
    j = int(rng.integers(n))
    P[j] = q
    return P, q, j
