"""Selection accuracy (FDP/TPP) and explained-variance accounting for sparse PCA."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfusionReport",
    "EvReport",
    "confusion",
    "ev_decomposition",
    "adjusted_ev",
    "pev_adjusted",
    "cumulative_pev",
]


@dataclass
class ConfusionReport:
    fdp: float
    tpp: float
    n_selected: int
    n_true: int
    fdp_reps: list = field(default_factory=list)
    tpp_reps: list = field(default_factory=list)

    @classmethod
    def average(cls, reports):
        """Pool per-replication reports; ``fdp``/``tpp`` become the empirical FDR/TPR."""
        reports = list(reports)
        fdps = [r.fdp for r in reports]
        tpps = [r.tpp for r in reports]
        return cls(
            fdp=float(np.mean(fdps)),
            tpp=float(np.mean(tpps)),
            n_selected=int(sum(r.n_selected for r in reports)),
            n_true=int(sum(r.n_true for r in reports)),
            fdp_reps=fdps,
            tpp_reps=tpps,
        )


def confusion(selected, truth):
    """False discovery and true positive proportions of one selection."""
    sel = {int(j) for j in selected}
    true = {int(j) for j in truth}
    fdp = len(sel - true) / max(1, len(sel))
    tpp = len(sel & true) / max(1, len(true))
    return ConfusionReport(fdp=fdp, tpp=tpp, n_selected=len(sel), n_true=len(true))


@dataclass
class EvReport:
    """Trace split of the explained variance into signal, mixed and null parts.

    ``pev`` is ``total_ev / (signal_ev + mixed_ev)``; when that denominator is not
    positive ``pev_defined`` is False and ``pev`` is ``inf`` (or ``nan`` if nothing
    is explained at all).
    """

    signal_ev: float
    mixed_ev: float
    null_ev: float
    total_ev: float
    pev: float
    pev_defined: bool = True
    adjusted_ev_cumulative: np.ndarray | None = None


def _pev(numerator, denominator):
    if denominator > 0:
        return numerator / denominator, True
    return (np.inf if numerator > 0 else np.nan), False


def ev_decomposition(X, loadings, truth_mask):
    X = np.asarray(X, dtype=float)
    V = np.asarray(loadings, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    mask = np.asarray(truth_mask, dtype=bool).reshape(V.shape)
    Z_on = X @ np.where(mask, V, 0.0)
    Z_off = X @ np.where(mask, 0.0, V)
    signal = float(np.sum(Z_on * Z_on))
    mixed = 2.0 * float(np.sum(Z_on * Z_off))
    null = float(np.sum(Z_off * Z_off))
    total = signal + mixed + null
    pev, ok = _pev(total, signal + mixed)
    return EvReport(signal, mixed, null, total, pev, ok)


def adjusted_ev(pcs):
    """Cumulative adjusted EV: running sums of squared diagonal entries of R in Z = QR."""
    Z = np.asarray(pcs, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[1] < 1:
        raise ValueError("need at least one component")
    R = np.linalg.qr(Z, mode="r")
    r = np.zeros(Z.shape[1])
    k = min(R.shape)
    r[:k] = np.diag(R)[:k] ** 2
    # exact collinearity leaves roundoff on the diagonal
    scale = np.sum(Z * Z, axis=0)
    r[r <= 1e-24 * np.maximum(scale, 1e-300)] = 0.0
    return np.cumsum(r)


def pev_adjusted(X, loadings, truth_mask):
    """PEV with the adjusted EV of all components in the numerator."""
    return cumulative_pev(X, loadings, truth_mask)[-1]


def cumulative_pev(X, loadings, truth_mask):
    """PEV of the first m components for m = 1..M (adjusted numerator, trace denominator)."""
    X = np.asarray(X, dtype=float)
    V = np.asarray(loadings, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    mask = np.asarray(truth_mask, dtype=bool).reshape(V.shape)
    Z = X @ V
    Z_on = X @ np.where(mask, V, 0.0)
    Z_off = Z - Z_on
    num = adjusted_ev(Z)
    denom = np.cumsum(np.sum(Z_on * Z_on, axis=0) + 2.0 * np.sum(Z_on * Z_off, axis=0))
    return np.array([_pev(a, b)[0] for a, b in zip(num, denom)])
