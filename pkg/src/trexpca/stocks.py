"""Stock-return factor analysis: returns, common-factor removal and clustered correlations."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform

__all__ = [
    "PriceTable",
    "read_prices",
    "read_weights",
    "filter_by_weight",
    "restrict_window",
    "compute_returns",
    "remove_leading_pcs",
    "correlation_matrix",
    "complete_linkage_order",
    "linkage_tree",
    "off_block_mean_abs",
    "make_two_block_prices",
    "block_labels",
    "DEFAULT_WINDOW",
]

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = ("2022-10-01", "2022-12-31")


@dataclass
class PriceTable:
    dates: pd.DatetimeIndex
    tickers: list
    close: np.ndarray
    weights: dict | None = None

    def __post_init__(self):
        self.close = np.asarray(self.close, dtype=float)
        if self.close.shape != (len(self.dates), len(self.tickers)):
            raise ValueError("close must have shape (days, tickers)")
        if len(self.dates) > 1 and not self.dates.is_monotonic_increasing:
            raise ValueError("dates must be increasing")
        if not self.dates.is_unique:
            raise ValueError("dates must be unique")

    def frame(self):
        return pd.DataFrame(self.close, index=self.dates, columns=self.tickers)


def read_prices(path):
    """Read a wide CSV ``date,TICKER1,...``; days with any missing close are dropped."""
    df = pd.read_csv(path)
    if df.columns[0].lower() != "date":
        raise ValueError(f"{path}: first column must be 'date'")
    dates = pd.to_datetime(df.iloc[:, 0], format="ISO8601")
    values = df.iloc[:, 1:].apply(pd.to_numeric, errors="coerce")
    bad = values.isna() & df.iloc[:, 1:].notna()
    if bad.to_numpy().any():
        r, c = np.argwhere(bad.to_numpy())[0]
        raise ValueError(f"{path}: non-numeric close at row {r + 2}, column {values.columns[c]!r}")
    values.index = pd.DatetimeIndex(dates)
    values = values.sort_index()
    missing = values.isna().any(axis=1)
    if missing.any():
        logger.info("dropping %d day(s) with missing closes", int(missing.sum()))
        values = values[~missing]
    return PriceTable(values.index, [str(c) for c in values.columns], values.to_numpy())


def read_weights(path):
    """Read ``ticker,weight`` (weights as fractions, 0.006 = 0.6%)."""
    df = pd.read_csv(path)
    if list(df.columns[:2]) != ["ticker", "weight"]:
        raise ValueError(f"{path}: expected header 'ticker,weight'")
    return {str(t): float(w) for t, w in zip(df["ticker"], df["weight"])}


def filter_by_weight(prices, min_weight, weights=None):
    """Keep tickers whose index weight is strictly above ``min_weight``."""
    weights = weights if weights is not None else prices.weights
    if weights is None:
        raise ValueError("no index weights available")
    keep = [i for i, t in enumerate(prices.tickers) if weights.get(t, 0.0) > min_weight]
    return PriceTable(
        prices.dates,
        [prices.tickers[i] for i in keep],
        prices.close[:, keep],
        {prices.tickers[i]: weights[prices.tickers[i]] for i in keep},
    )


def restrict_window(prices, start=DEFAULT_WINDOW[0], end=DEFAULT_WINDOW[1]):
    mask = (prices.dates >= pd.Timestamp(start)) & (prices.dates <= pd.Timestamp(end))
    return PriceTable(prices.dates[mask], list(prices.tickers), prices.close[mask], prices.weights)


def compute_returns(prices):
    """Simple daily returns ``(p_i - p_{i-1}) / p_{i-1}``.

    Days with a nonpositive close in any ticker are removed first (logged).
    """
    close = prices.close if isinstance(prices, PriceTable) else np.asarray(prices, dtype=float)
    bad = np.any(close <= 0, axis=1)
    if bad.any():
        logger.warning("rejecting %d day(s) with nonpositive prices: rows %s",
                       int(bad.sum()), np.flatnonzero(bad).tolist())
        close = close[~bad]
    if close.shape[0] < 2:
        raise ValueError("need at least two days of prices")
    return np.diff(close, axis=0) / close[:-1]


def remove_leading_pcs(X, model, r):
    """Subtract the rank-one terms ``z_m v_m^T`` of the first ``r`` components from X.

    ``z_m = X v_m`` is recomputed from ``X``, which equals ``model.pcs`` when X is the
    data the model was fitted on; the map is therefore linear in X.
    """
    X = np.asarray(X, dtype=float)
    if r > model.n_components:
        raise ValueError(f"model has only {model.n_components} components, r={r}")
    out = X.copy()
    for m in range(r):
        v = model.loadings[:, m]
        if not np.any(v):
            logger.warning("component %d has a zero loading; skipped", m + 1)
            continue
        out -= np.outer(X @ v, v)
    return out


def correlation_matrix(X):
    """Pearson correlations; rows/columns of zero-variance variables are NaN (diagonal 1)."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    sd = np.sqrt(np.sum(Xc * Xc, axis=0))
    dead = sd <= 1e-14 * max(1.0, float(sd.max(initial=0.0)))
    if dead.any():
        logger.warning("zero-variance columns %s; correlations undefined", np.flatnonzero(dead).tolist())
    scale = np.where(dead, 1.0, sd)
    Y = Xc / scale
    C = Y.T @ Y
    C = 0.5 * (C + C.T)
    C[dead, :] = np.nan
    C[:, dead] = np.nan
    np.fill_diagonal(C, 1.0)
    return np.clip(C, -1.0, 1.0)


def linkage_tree(corr):
    """Complete-linkage merge table (scipy format) on the distance ``1 - corr``.

    Undefined correlations count as 0, i.e. distance 1.
    """
    C = np.asarray(corr, dtype=float)
    D = 1.0 - np.nan_to_num(C, nan=0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    D = np.clip(D, 0.0, None)
    return linkage(squareform(D, checks=False), method="complete")


def complete_linkage_order(corr):
    """Leaf order of complete-linkage clustering on the distance ``1 - corr``."""
    p = np.asarray(corr).shape[0]
    if p <= 1:
        return np.arange(p)
    return leaves_list(linkage_tree(corr))


def off_block_mean_abs(corr, labels):
    """Mean absolute correlation between variables with different block labels."""
    labels = np.asarray(labels)
    mask = labels[:, None] != labels[None, :]
    return float(np.nanmean(np.abs(np.asarray(corr)[mask])))


def make_two_block_prices(days=64, per_block=4, n_free=12, seed=2, start="2022-10-03"):
    """Synthetic prices: a market factor, two sector blocks and market-only stocks.

    Tickers ``A*`` and ``B*`` share a sector factor each, ``M*`` load on the market
    only. Index weights decrease with the ticker position.
    """
    rng = np.random.default_rng(seed)
    p = 2 * per_block + n_free
    market = rng.normal(0.0, 0.015, days)
    sectors = rng.normal(0.0, 0.012, (days, 2))
    beta = rng.uniform(0.8, 1.2, p)
    rets = market[:, None] * beta + rng.normal(0.0, 0.006, (days, p))
    rets[:, :per_block] += sectors[:, [0]]
    rets[:, per_block : 2 * per_block] += sectors[:, [1]]
    close = 100.0 * np.cumprod(1.0 + np.vstack([np.zeros(p), rets]), axis=0)
    dates = pd.bdate_range(start, periods=days + 1)
    tickers = (
        [f"A{i}" for i in range(per_block)]
        + [f"B{i}" for i in range(per_block)]
        + [f"M{i}" for i in range(n_free)]
    )
    weights = dict(zip(tickers, np.round(np.linspace(0.03, 0.002, p), 6)))
    return PriceTable(dates, tickers, close, weights)


def block_labels(tickers):
    """Block label per ticker: ``A*``/``B*`` share a label, every other ticker is its own."""
    labels, free = [], 2
    for t in tickers:
        if t.startswith("A"):
            labels.append(0)
        elif t.startswith("B"):
            labels.append(1)
        else:
            labels.append(free)
            free += 1
    return np.array(labels)


def write_prices(prices, path):
    df = prices.frame()
    df.index.name = "date"
    df.index = df.index.strftime("%Y-%m-%d")
    df.to_csv(path, float_format="%.6f")


def write_weights(weights, path):
    pd.DataFrame({"ticker": list(weights), "weight": list(weights.values())}).to_csv(
        Path(path), index=False, float_format="%.6f"
    )
