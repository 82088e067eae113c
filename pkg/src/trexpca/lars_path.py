"""Forward selection paths: LARS with the lasso modification and early termination.

The solver works in Gram form, so an elastic-net problem is handled either through
an explicitly augmented lasso problem (:func:`augment_elastic_net`) or implicitly
by passing ``ridge_weight > 0``; both trace the same path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PathProblem",
    "SelectionPath",
    "CandidateSet",
    "DegenerateDirectionError",
    "standardize_columns",
    "augment_elastic_net",
    "lars_lasso_path",
    "terminated_path",
]

# relative tolerance for breakpoint detection
_TOL = 1e-12


class DegenerateDirectionError(np.linalg.LinAlgError):
    """The active Gram matrix became singular, so no equiangular direction exists."""

    def __init__(self, step, active, message=None):
        self.step = step
        self.active = list(active)
        super().__init__(
            message
            or f"rank-deficient active set at step {step} (active columns {self.active})"
        )


@dataclass(frozen=True)
class PathProblem:
    """A (possibly elastic-net) regression problem for the path solver.

    ``coef_scale`` maps coefficients of this problem back to the problem it was
    derived from; it is 1 unless the problem came out of :func:`augment_elastic_net`.
    """

    predictors: np.ndarray
    response: np.ndarray
    dummy_flags: np.ndarray | None = None
    ridge_weight: float = 0.0
    coef_scale: float = 1.0

    def __post_init__(self):
        X = np.asarray(self.predictors, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim != 2:
            raise ValueError("predictors must be a 2-d array")
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"response length {y.shape} does not match {X.shape[0]} predictor rows"
            )
        flags = (
            np.zeros(X.shape[1], dtype=bool)
            if self.dummy_flags is None
            else np.asarray(self.dummy_flags, dtype=bool)
        )
        if flags.shape != (X.shape[1],):
            raise ValueError("dummy_flags length must equal the number of columns")
        if self.ridge_weight < 0:
            raise ValueError("ridge_weight must be nonnegative")
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "dummy_flags", flags)

    @property
    def n_columns(self):
        return self.predictors.shape[1]


@dataclass
class SelectionPath:
    """Result of :func:`lars_lasso_path`.

    ``lambdas[k]`` is the common absolute correlation at breakpoint ``k`` and
    ``coef_path[k]`` the coefficients there; between breakpoints the lasso solution
    is linear in lambda.
    """

    entry_order: list
    dummies_seen: list
    coefficients: np.ndarray
    lambdas: np.ndarray
    coef_path: np.ndarray
    active_at_breakpoints: list = field(default_factory=list)
    exhausted: bool = False

    @property
    def n_steps(self):
        return len(self.lambdas) - 1


@dataclass
class CandidateSet:
    """Entry order of one terminated random experiment.

    The candidate set at ``T`` is the set of original (non-dummy) variables that
    entered the path before the ``T``-th dummy did, so sets for every
    ``T <= max_dummies`` come from one path.
    """

    entry_order: np.ndarray
    dummy_positions: np.ndarray
    n_original: int
    max_dummies: int
    truncated: bool = False

    def candidates(self, T):
        if T < 1:
            raise ValueError("T must be at least 1")
        if T > self.max_dummies:
            raise ValueError(f"path was terminated after {self.max_dummies} dummies, T={T}")
        if T <= len(self.dummy_positions):
            prefix = self.entry_order[: self.dummy_positions[T - 1]]
        else:
            prefix = self.entry_order
        return np.sort(prefix[prefix < self.n_original])

    @property
    def originals(self):
        """Original variables active when the path stopped."""
        return self.candidates(self.max_dummies)

    def membership(self, T_values):
        """Boolean matrix ``(len(T_values), n_original)`` of candidate membership."""
        out = np.zeros((len(T_values), self.n_original), dtype=bool)
        for i, T in enumerate(T_values):
            out[i, self.candidates(T)] = True
        return out


def standardize_columns(X):
    """Center columns and scale them to unit l2 norm; constant columns become zero."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    Xs = Xc / scale
    Xs[:, norms == 0] = 0.0
    return Xs


def augment_elastic_net(problem):
    """Rewrite an elastic-net problem as an equivalent lasso problem.

    Uses ``X* = (1 + l2)^(-1/2) [X; sqrt(l2) I]`` and ``y* = [y; 0]``. The lasso path
    of the result, multiplied by ``coef_scale = (1 + l2)^(-1/2)``, is the (naive)
    elastic-net path of ``problem``.
    """
    lam2 = problem.ridge_weight
    if lam2 <= 0:
        raise ValueError("augmentation needs ridge_weight > 0; use the problem directly")
    X = problem.predictors
    if X.size == 0:
        raise ValueError("predictors must be nonempty")
    n, p = X.shape
    scale = 1.0 / np.sqrt(1.0 + lam2)
    X_aug = scale * np.vstack([X, np.sqrt(lam2) * np.eye(p)])
    y_aug = np.concatenate([problem.response, np.zeros(p)])
    return PathProblem(
        predictors=X_aug,
        response=y_aug,
        dummy_flags=problem.dummy_flags.copy(),
        ridge_weight=0.0,
        coef_scale=problem.coef_scale * scale,
    )


class _GramColumns:
    """Lazily computed Gram columns of the (implicitly augmented) problem."""

    def __init__(self, X, lam2):
        self.X = X
        self.lam2 = lam2
        self.shrink = 1.0 / (1.0 + lam2)
        self._cols = {}

    def column(self, j):
        col = self._cols.get(j)
        if col is None:
            col = self.X.T @ self.X[:, j]
            if self.lam2:
                col[j] += self.lam2
            col *= self.shrink
            self._cols[j] = col
        return col

    def block(self, active):
        return np.column_stack([self.column(j) for j in active])


def _lars(problem, max_active=None, max_dummies=None, record_path=True):
    X, y = problem.predictors, problem.response
    P = X.shape[1]
    lam2 = problem.ridge_weight
    out_scale = problem.coef_scale / np.sqrt(1.0 + lam2)
    flags = problem.dummy_flags
    gram = _GramColumns(X, lam2)
    corr = (X.T @ y) / np.sqrt(1.0 + lam2)

    beta = np.zeros(P)
    active = []
    is_active = np.zeros(P, dtype=bool)
    entered = np.zeros(P, dtype=bool)
    entry_order, dummies_seen = [], []
    n_dummies = 0

    lam = float(np.max(np.abs(corr))) if P else 0.0
    lambdas = [lam]
    coef_path = [beta.copy()] if record_path else []
    active_sets = [[]]
    tol = _TOL * max(lam, 1.0)
    exhausted = False

    def add(j):
        nonlocal n_dummies
        active.append(j)
        is_active[j] = True
        if not entered[j]:
            entered[j] = True
            entry_order.append(j)
            if flags[j]:
                n_dummies += 1
            dummies_seen.append(n_dummies)

    def done():
        if max_active is not None and len(active) >= max_active:
            return True
        if max_dummies is not None and n_dummies >= max_dummies:
            return True
        return False

    if lam <= tol:
        exhausted = True
    else:
        # ties on entry go to the lowest column index
        add(int(np.argmax(np.abs(corr))))
        active_sets[0] = list(active)

    step = 0
    just_dropped = -1
    while not exhausted and not done():
        step += 1
        idx = np.array(active)
        signs = np.sign(corr[idx])
        G_A = gram.block(active)
        G_AA = G_A[idx]
        try:
            chol = np.linalg.cholesky(G_AA)
        except np.linalg.LinAlgError:
            raise DegenerateDirectionError(step, active) from None
        diag = np.diag(chol)
        if diag.min() ** 2 <= 1e-12 * np.max(np.diag(G_AA)):
            raise DegenerateDirectionError(step, active)
        w = np.linalg.solve(chol.T, np.linalg.solve(chol, signs))
        a = G_A @ w

        # next entry: |c_j - g a_j| reaches lam - g
        gamma_join, j_join = np.inf, -1
        inactive = ~is_active
        if inactive.any():
            cand = np.flatnonzero(inactive)
            c, aj = corr[cand], a[cand]
            # variables already tied with the active set (up to rounding) join at once
            gap1 = np.where(lam - c > tol, lam - c, 0.0)
            gap2 = np.where(lam + c > tol, lam + c, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = np.where(1.0 - aj > _TOL, gap1 / (1.0 - aj), np.inf)
                g2 = np.where(1.0 + aj > _TOL, gap2 / (1.0 + aj), np.inf)
            # a variable that just left is still tied; only a later crossing counts
            back = cand == just_dropped
            g1[back & (g1 <= tol)] = np.inf
            g2[back & (g2 <= tol)] = np.inf
            g = np.minimum(g1, g2)
            k = int(np.argmin(g))
            gamma_join, j_join = float(g[k]), int(cand[k])

        # lasso modification: an active coefficient crossing zero leaves the set
        with np.errstate(divide="ignore", invalid="ignore"):
            gd = -beta[idx] / w
        gd = np.where(gd > tol, gd, np.inf)
        k_drop = int(np.argmin(gd))
        gamma_drop = float(gd[k_drop])

        terminal = gamma_join >= lam * (1.0 - _TOL) and gamma_drop >= lam * (1.0 - _TOL)
        gamma = lam if terminal else min(gamma_join, gamma_drop)

        beta[idx] += gamma * w
        corr -= gamma * a
        lam = lam - gamma
        just_dropped = -1

        if terminal:
            lam = 0.0
            exhausted = True
        elif gamma_drop < gamma_join:
            j = active.pop(k_drop)
            is_active[j] = False
            beta[j] = 0.0
            just_dropped = j
        else:
            add(j_join)

        lambdas.append(lam)
        if record_path:
            coef_path.append(beta.copy())
        active_sets.append(list(active))

    return SelectionPath(
        entry_order=entry_order,
        dummies_seen=dummies_seen,
        coefficients=beta * out_scale,
        lambdas=np.array(lambdas),
        coef_path=np.array(coef_path) * out_scale if record_path else np.empty((0, P)),
        active_at_breakpoints=active_sets,
        exhausted=exhausted,
    )


def lars_lasso_path(problem, max_active=None):
    """Trace the lasso path of ``problem`` with LARS.

    Columns are used as given (they should be centered). With ``ridge_weight > 0``
    the elastic-net path is traced through the augmented Gram matrix. Returned
    coefficients are on the scale of the original problem.

    Parameters
    ----------
    problem : PathProblem
    max_active : int, optional
        Stop as soon as this many variables are active.

    Raises
    ------
    DegenerateDirectionError
        If the active Gram matrix is singular.
    """
    if max_active is not None and not 0 <= max_active <= problem.n_columns:
        raise ValueError("max_active must lie in [0, number of columns]")
    return _lars(problem, max_active=max_active)


def terminated_path(problem, T):
    """Run LARS until the ``T``-th dummy variable enters (T-LARS).

    If the path is exhausted before ``T`` dummies enter, the candidate set of the
    full path is returned with ``truncated=True``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if problem.dummy_flags.sum() < T:
        raise ValueError(f"problem has {problem.dummy_flags.sum()} dummies, T={T}")
    path = _lars(problem, max_dummies=T, record_path=False)
    order = np.asarray(path.entry_order, dtype=int)
    n_original = int((~problem.dummy_flags).sum())
    if problem.dummy_flags[:n_original].any():
        raise ValueError("dummy columns must come after all original columns")
    dummy_positions = np.flatnonzero(problem.dummy_flags[order]) if order.size else np.array([], int)
    return CandidateSet(
        entry_order=order,
        dummy_positions=dummy_positions[:T],
        n_original=n_original,
        max_dummies=T,
        truncated=len(dummy_positions) < T,
    )
