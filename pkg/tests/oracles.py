"""Brute-force reference solutions used by the test suite."""

import itertools

import numpy as np


def lasso_active_set(D: np.ndarray, x: np.ndarray, lam: float, tol: float = 1e-9) -> np.ndarray:
    """
    Solve min ||x - D a||^2 + lam ||a||_1 for one column by enumerating
    supports and sign patterns, returning the first candidate that satisfies
    the full subgradient optimality conditions.
    """
    m, d = D.shape
    for size in range(0, min(m, d) + 1):
        for support in itertools.combinations(range(d), size):
            S = list(support)
            for signs in itertools.product((-1.0, 1.0), repeat=size):
                a = np.zeros(d)
                if size:
                    DS = D[:, S]
                    gram = DS.T @ DS
                    if np.linalg.cond(gram) > 1e12:
                        continue
                    aS = np.linalg.solve(gram, DS.T @ x - lam / 2 * np.array(signs))
                    if np.any(np.sign(aS) != np.array(signs)):
                        continue
                    a[S] = aS
                g = 2.0 * D.T @ (D @ a - x)
                off = np.ones(d, dtype=bool)
                off[S] = False
                if np.all(np.abs(g[off]) <= lam + tol):
                    return a
    raise AssertionError("no optimal support found")
