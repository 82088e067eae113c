"""Ordinary PCA, T-Rex PCA, T-Rex thresholded PCA and the two oracle benchmarks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lars_path import PathProblem, augment_elastic_net, lars_lasso_path, standardize_columns
from .trex import SelectedSupport, TrexConfig, calibrate

__all__ = [
    "DataMatrix",
    "SvdFactors",
    "SparsePcaModel",
    "ZeroNormError",
    "METHODS",
    "center_columns",
    "fix_signs",
    "svd_factors",
    "ordinary_pcs",
    "ordinary_pca",
    "ridge_loading",
    "threshold_loading",
    "trex_pca",
    "trex_thresholded_pca",
    "thresholded_from_supports",
    "oracle_thresholded_pca",
    "oracle_spca",
]

logger = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-6
METHODS = ("ordinary", "trex", "trex_thresholded", "oracle_thresholded", "oracle_spca")


class ZeroNormError(ValueError):
    """A loading vector would have zero norm and cannot be normalized."""


@dataclass
class DataMatrix:
    """Column-centered observations plus the means that were removed."""

    values: np.ndarray
    column_means: np.ndarray

    @classmethod
    def from_raw(cls, X):
        X = np.asarray(X, dtype=float)
        means = X.mean(axis=0)
        return cls(X - means, means)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def center_columns(X):
    return DataMatrix.from_raw(X).values


def _check_centered(X):
    sd = X.std(axis=0)
    mean = np.abs(X.mean(axis=0))
    bad = mean > 1e-8 * np.maximum(sd, 1.0)
    if bad.any():
        raise ValueError(f"columns {np.flatnonzero(bad).tolist()[:5]} are not centered")


def fix_signs(V):
    """Flip columns so that each column's largest-magnitude entry is positive."""
    V = np.array(V, dtype=float, copy=True)
    if V.ndim == 1:
        return fix_signs(V[:, None])[:, 0]
    for m in range(V.shape[1]):
        col = V[:, m]
        if np.any(col):
            k = int(np.argmax(np.abs(col)))
            if col[k] < 0:
                V[:, m] = -col
    return V


@dataclass
class SvdFactors:
    u: np.ndarray
    d: np.ndarray
    v: np.ndarray


def svd_factors(X):
    """Thin SVD with the sign convention of :func:`fix_signs` applied to ``v``."""
    U, d, Vt = np.linalg.svd(np.asarray(X, dtype=float), full_matrices=False)
    V = Vt.T
    peak = np.argmax(np.abs(V), axis=0)
    flip = np.sign(V[peak, np.arange(V.shape[1])])
    flip[flip == 0] = 1.0
    return SvdFactors(U * flip, d, V * flip)


def ordinary_pcs(X, M):
    """Leading ``M`` principal components ``Z_M = X V_M = U_M diag(d_M)``."""
    X = np.asarray(X, dtype=float)
    _check_centered(X)
    n, p = X.shape
    if not 1 <= M <= min(n, p):
        raise ValueError(f"M must lie in [1, {min(n, p)}]")
    f = svd_factors(X)
    return f, f.u[:, :M] * f.d[:M]


@dataclass
class SparsePcaModel:
    """Loadings ``(p, M)``, PCs ``(n, M)`` and the per-component supports."""

    loadings: np.ndarray
    pcs: np.ndarray
    supports: list
    method: str
    ridge_weight: float = DEFAULT_RIDGE
    flags: dict = field(default_factory=dict)

    @property
    def n_components(self):
        return self.loadings.shape[1]

    def support_sets(self):
        return [np.asarray(s.active, dtype=int) for s in self.supports]


def _full_support(p):
    return SelectedSupport(
        active=np.arange(p), v_star=float("nan"), t_star=0, l_star=0, estimated_fdp=float("nan")
    )


def _fixed_support(idx, source=None):
    idx = np.sort(np.asarray(idx, dtype=int))
    if source is None:
        return SelectedSupport(
            active=idx, v_star=float("nan"), t_star=0, l_star=0, estimated_fdp=float("nan")
        )
    return SelectedSupport(
        active=idx,
        v_star=source.v_star,
        t_star=source.t_star,
        l_star=source.l_star,
        estimated_fdp=source.estimated_fdp,
        target_fdr=source.target_fdr,
        phi=source.phi,
        feasible=source.feasible,
        diagnostic=source.diagnostic,
    )


def ordinary_pca(X, M):
    """Ordinary PCA packaged as a :class:`SparsePcaModel` with full supports."""
    f, Z = ordinary_pcs(X, M)
    p = f.v.shape[0]
    return SparsePcaModel(
        loadings=f.v[:, :M].copy(),
        pcs=Z,
        supports=[_full_support(p) for _ in range(M)],
        method="ordinary",
        ridge_weight=0.0,
    )


def ridge_loading(X, support, z, ridge_weight=DEFAULT_RIDGE):
    """Unit-norm loading from ridge regression of ``z`` on the supported columns.

    Solves ``min ||z - X_A b||^2 + ridge_weight ||b||^2`` in closed form and returns
    ``b / ||b||`` embedded in a length-p vector that vanishes off the support.
    """
    X = np.asarray(X, dtype=float)
    idx = np.asarray(getattr(support, "active", support), dtype=int)
    if idx.size == 0:
        raise ValueError("support is empty")
    if ridge_weight <= 0:
        raise ValueError("ridge_weight must be positive")
    XA = X[:, idx]
    beta = np.linalg.solve(XA.T @ XA + ridge_weight * np.eye(idx.size), XA.T @ np.asarray(z, float))
    norm = np.linalg.norm(beta)
    if norm == 0:
        raise ZeroNormError("response is orthogonal to the supported columns")
    v = np.zeros(X.shape[1])
    v[idx] = beta / norm
    return v


def threshold_loading(v, s):
    """Keep the ``s`` largest-magnitude entries of ``v`` and rescale to unit norm."""
    v = np.asarray(v, dtype=float)
    p = v.size
    if not 1 <= s <= p:
        raise ValueError(f"s must lie in [1, {p}]")
    # stable sort: equal magnitudes keep the lower index
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out = np.zeros(p)
    out[keep] = v[keep]
    norm = np.linalg.norm(out)
    if norm == 0:
        raise ZeroNormError("all retained loadings are zero")
    return out / norm


def _model_from_loadings(X, V, supports, method, ridge_weight, flags=None):
    pcs = np.zeros((X.shape[0], V.shape[1]))
    for m, s in enumerate(supports):
        idx = np.asarray(s.active, dtype=int)
        if idx.size:
            pcs[:, m] = X[:, idx] @ V[idx, m]
    return SparsePcaModel(V, pcs, supports, method, ridge_weight, flags or {})


def trex_pca(X, M, cfg=None, ridge_weight=DEFAULT_RIDGE):
    """T-Rex PCA: FDR-controlled sparse loadings, one T-Rex run per component.

    Each ordinary PC ``z_m`` serves as the response of a T-Rex selector run on the
    standardized data with fresh dummies (random substream keyed by ``m``). The
    loading is the normalized ridge fit of ``z_m`` on the selected columns.

    Components whose support comes out empty get a zero loading and a zero PC;
    their indices are listed in ``model.flags["zero_norm"]``.
    """
    cfg = cfg or TrexConfig()
    X = np.asarray(X, dtype=float)
    f, Z = ordinary_pcs(X, M)
    Xs = standardize_columns(X)
    p = X.shape[1]
    V = np.zeros((p, M))
    supports, zero = [], []
    for m in range(M):
        sup = calibrate(Xs, Z[:, m], cfg, stream_key=(m,))
        if len(sup.active):
            try:
                V[:, m] = fix_signs(ridge_loading(X, sup, Z[:, m], ridge_weight))
            except ZeroNormError:
                sup = _fixed_support([], sup)
                zero.append(m)
        else:
            zero.append(m)
        supports.append(sup)
    return _model_from_loadings(X, V, supports, "trex", ridge_weight, {"zero_norm": zero})


def thresholded_from_supports(X, sizes, method="trex_thresholded", sources=None):
    """Threshold the ordinary loadings to the given support sizes."""
    X = np.asarray(X, dtype=float)
    M = len(sizes)
    f, _ = ordinary_pcs(X, M)
    p = X.shape[1]
    V = np.zeros((p, M))
    supports, zero = [], []
    for m, s in enumerate(sizes):
        src = sources[m] if sources is not None else None
        if s == 0:
            supports.append(_fixed_support([], src))
            zero.append(m)
            continue
        V[:, m] = fix_signs(threshold_loading(f.v[:, m], int(s)))
        supports.append(_fixed_support(np.flatnonzero(V[:, m]), src))
    return _model_from_loadings(X, V, supports, method, 0.0, {"zero_norm": zero})


def trex_thresholded_pca(X, M, cfg=None, trex_model=None):
    """Threshold the ordinary loadings to the T-Rex support sizes.

    A previously fitted ``trex_model`` on the same data can be passed to reuse its
    supports.
    """
    model = trex_model if trex_model is not None else trex_pca(X, M, cfg)
    sizes = [len(s.active) for s in model.supports]
    return thresholded_from_supports(X, sizes, sources=model.supports)


def oracle_thresholded_pca(X, M, p1):
    """Threshold each ordinary loading to its ``p1`` largest entries (oracle sparsity)."""
    return thresholded_from_supports(X, [p1] * M, method="oracle_thresholded")


def oracle_spca(X, M, p1, ridge_weight=DEFAULT_RIDGE):
    """Elastic-net sparse PCA with the penalty chosen so that ``p1`` loadings are active.

    The support of component ``m`` is the active set at the first point of the
    elastic-net path of ``z_m`` on the standardized data with exactly ``p1``
    variables; the loading is the ridge fit on that support. Components whose
    path never reaches ``p1`` variables use the largest active set instead and are
    listed in ``model.flags["short_path"]``.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if not 1 <= p1 <= p:
        raise ValueError(f"p1 must lie in [1, {p}]")
    f, Z = ordinary_pcs(X, M)
    Xs = standardize_columns(X)
    V = np.zeros((p, M))
    supports, short = [], []
    for m in range(M):
        problem = PathProblem(Xs, Z[:, m], ridge_weight=ridge_weight)
        path = lars_lasso_path(augment_elastic_net(problem), max_active=p1)
        sizes = [len(a) for a in path.active_at_breakpoints]
        hits = [k for k, s in enumerate(sizes) if s == p1]
        if hits:
            active = path.active_at_breakpoints[hits[0]]
        else:
            active = max(path.active_at_breakpoints, key=len)
            short.append(m)
        sup = _fixed_support(active)
        V[:, m] = fix_signs(ridge_loading(X, sup, Z[:, m], ridge_weight))
        supports.append(sup)
    return _model_from_loadings(X, V, supports, "oracle_spca", ridge_weight, {"short_path": short})
