"""Independent reference computations shared by the unit and acceptance tests."""
import itertools

import numpy as np


def lasso_kkt_solve(X, y, lam):
    """Lasso minimizer of 0.5||y - Xb||^2 + lam ||b||_1 by enumerating sign patterns.

    For full-column-rank X the minimizer is unique, so the first sign pattern whose
    KKT conditions hold is the solution.
    """
    p = X.shape[1]
    G, c = X.T @ X, X.T @ y
    for signs in itertools.product((0, -1, 1), repeat=p):
        s = np.array(signs, dtype=float)
        A = np.flatnonzero(s)
        b = np.zeros(p)
        if A.size:
            b[A] = np.linalg.solve(G[np.ix_(A, A)], c[A] - lam * s[A])
            if np.any(np.sign(b[A]) != s[A]):
                continue
        if np.all(np.abs(X.T @ (y - X @ b)) <= lam * (1 + 1e-9)):
            return b
    raise AssertionError("no sign pattern satisfies the KKT conditions")


def coef_at(path, lam):
    """Linear interpolation of the piecewise-linear path at penalty ``lam``."""
    lams = path.lambdas
    if lam >= lams[0]:
        return np.zeros(path.coef_path.shape[1])
    k = np.searchsorted(-lams, -lam)
    lo, hi = lams[k - 1], lams[k]
    t = (lo - lam) / (lo - hi)
    return (1 - t) * path.coef_path[k - 1] + t * path.coef_path[k]
