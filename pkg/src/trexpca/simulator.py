"""Sparse factor-model data and the Monte Carlo harness used to benchmark the methods."""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from . import pca
from .metrics import confusion, cumulative_pev, ev_decomposition
from .trex import TrexConfig, substream

__all__ = [
    "FactorModelConfig",
    "GroundTruth",
    "noise_sd_for_snr",
    "realized_snr_db",
    "generate",
    "fit_methods",
    "replicate",
    "run_grid",
    "summarize",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FactorModelConfig:
    n: int = 50
    p: int = 100
    factor_sds: tuple = (5.0, 3.0, 1.0)
    active_per_factor: int = 5
    active_pool: int = 30
    loading_value: float = 0.9
    snr_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "factor_sds", tuple(float(s) for s in self.factor_sds))
        if not 1 <= self.active_per_factor <= self.active_pool <= self.p:
            raise ValueError("need 1 <= active_per_factor <= active_pool <= p")
        if any(s <= 0 for s in self.factor_sds):
            raise ValueError("factor standard deviations must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def M(self):
        return len(self.factor_sds)


@dataclass
class GroundTruth:
    """A simulated data set; ``X`` is the column-centered ``Z V^T + E``."""

    X: np.ndarray
    factors: np.ndarray
    loadings: np.ndarray
    noise: np.ndarray
    noise_sd: float
    config: FactorModelConfig

    @property
    def uncentered(self):
        return self.factors @ self.loadings.T + self.noise

    @property
    def truth_mask(self):
        return self.loadings != 0

    @property
    def true_support(self):
        return [np.flatnonzero(self.loadings[:, m]) for m in range(self.loadings.shape[1])]

    def mask_for(self, M):
        """Truth mask padded with all-null columns beyond the number of factors."""
        mask = np.zeros((self.loadings.shape[0], M), dtype=bool)
        k = min(M, self.loadings.shape[1])
        mask[:, :k] = self.truth_mask[:, :k]
        return mask

    def support_for(self, m):
        if m < self.loadings.shape[1]:
            return np.flatnonzero(self.loadings[:, m])
        return np.array([], dtype=int)


def noise_sd_for_snr(Z, V, snr_db):
    """Noise standard deviation giving ``snr_db`` relative to the sample variance of vec(Z V^T)."""
    signal_var = float(np.var(np.asarray(Z) @ np.asarray(V).T, ddof=1))
    if signal_var <= 0:
        raise ValueError("signal Z V^T is constant; SNR is undefined")
    return float(np.sqrt(signal_var / 10.0 ** (snr_db / 10.0)))


def realized_snr_db(signal, noise):
    return float(10.0 * np.log10(np.var(signal, ddof=1) / np.var(noise, ddof=1)))


def generate(config, rng=None):
    """Draw one data set from the sparse M-factor model."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n, p, M = config.n, config.p, config.M
    Z = rng.standard_normal((n, M)) * np.asarray(config.factor_sds)
    V = np.zeros((p, M))
    for m in range(M):
        idx = rng.choice(config.active_pool, size=config.active_per_factor, replace=False)
        V[idx, m] = config.loading_value
    sd = noise_sd_for_snr(Z, V, config.snr_db)
    E = rng.standard_normal((n, p)) * sd
    X = Z @ V.T + E
    return GroundTruth(X - X.mean(axis=0), Z, V, E, sd, config)


def fit_methods(X, M, methods, cfg, p1=None):
    """Fit each requested method; T-Rex thresholded PCA reuses the T-Rex supports."""
    models = {}
    trex_model = None
    for method in methods:
        if method == "ordinary":
            models[method] = pca.ordinary_pca(X, M)
        elif method in ("trex", "trex_thresholded"):
            if trex_model is None:
                trex_model = pca.trex_pca(X, M, cfg)
            models[method] = (
                trex_model
                if method == "trex"
                else pca.trex_thresholded_pca(X, M, trex_model=trex_model)
            )
        elif method == "oracle_thresholded":
            models[method] = pca.oracle_thresholded_pca(X, M, p1)
        elif method == "oracle_spca":
            models[method] = pca.oracle_spca(X, M, p1)
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {pca.METHODS}")
    return models


# grid variables understood by ``replicate``
GRID_KEYS = ("snr_db", "p1", "alpha", "n_components")


@dataclass(frozen=True)
class Cell:
    """One grid point of a Monte Carlo study."""

    snr_db: float = 0.0
    p1: int = 5
    alpha: float = 0.1
    n_components: int = 1

    def label(self):
        return asdict(self)


@dataclass(frozen=True)
class Study:
    """Everything except the grid point and replication index."""

    methods: tuple = ("trex", "trex_thresholded", "oracle_thresholded", "oracle_spca", "ordinary")
    model: FactorModelConfig = field(default_factory=FactorModelConfig)
    num_experiments: int = 20
    seed: int = 0


def replicate(study, cell, rep):
    """Run one replication of one cell; returns a list of tidy row dicts.

    Data and T-Rex dummies are drawn from substreams keyed by the replication
    index only, so every cell sees the same underlying draws (common random
    numbers) and the result does not depend on scheduling.
    """
    cfg_model = replace(study.model, snr_db=cell.snr_db, active_per_factor=cell.p1)
    truth = generate(cfg_model, substream(study.seed, 0, rep))
    trex_cfg = TrexConfig(
        target_fdr=cell.alpha,
        num_experiments=study.num_experiments,
        seed=int(np.random.SeedSequence(study.seed, spawn_key=(1, rep)).generate_state(1)[0]),
    )
    M = cell.n_components
    rows = []
    base = {"rep": rep, **cell.label()}
    for method in study.methods:
        try:
            model = fit_methods(truth.X, M, [method], trex_cfg, p1=cell.p1)[method]
        except Exception as exc:  # recorded per cell, never fatal
            logger.warning("rep %d, %s failed: %s", rep, method, exc)
            rows.append({**base, "method": method, "pc": 0, "failed": True, "error": str(exc)})
            continue
        mask = truth.mask_for(M)
        cum = cumulative_pev(truth.X, model.loadings, mask)
        for m in range(M):
            conf = confusion(model.supports[m].active, truth.support_for(m))
            ev = ev_decomposition(truth.X, model.loadings[:, [m]], mask[:, [m]])
            rows.append(
                {
                    **base,
                    "method": method,
                    "pc": m + 1,
                    "failed": False,
                    "fdp": conf.fdp,
                    "tpp": conf.tpp,
                    "n_selected": conf.n_selected,
                    "signal_ev": ev.signal_ev,
                    "mixed_ev": ev.mixed_ev,
                    "null_ev": ev.null_ev,
                    "cum_pev": cum[m],
                }
            )
    return rows


def _run_chunk(args):
    study, cell, reps = args
    out = []
    for rep in reps:
        out.extend(replicate(study, cell, rep))
    return out


def run_grid(study, cells, replications, threads=1, raw=False):
    """Monte Carlo over ``cells`` x ``replications``.

    Returns the aggregated tidy table (see :func:`summarize`), or the per-replication
    rows when ``raw`` is True. Results are identical for any ``threads``.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    cells = list(cells)
    jobs = [(study, cell, range(replications)) for cell in cells]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            chunks = list(ex.map(_run_chunk, jobs))
    else:
        chunks = [_run_chunk(job) for job in jobs]
    rows = list(itertools.chain.from_iterable(chunks))
    table = pd.DataFrame(rows)
    return table if raw else summarize(table)


_METRICS = ("fdp", "tpp", "n_selected", "signal_ev", "mixed_ev", "null_ev", "cum_pev")
_RENAME = {"fdp": "fdr", "tpp": "tpr"}


def summarize(raw):
    """Per (method, pc, cell) means and standard errors of the per-replication rows."""
    keys = ["method", "pc", *GRID_KEYS]
    if raw.empty:
        return pd.DataFrame(columns=keys + ["replications", "failures"])
    ok = raw[~raw["failed"]]
    failures = raw[raw["failed"]].groupby(["method", *GRID_KEYS]).size()
    out = []
    for key, grp in ok.groupby(keys, sort=True):
        row = dict(zip(keys, key))
        row["replications"] = len(grp)
        for col in _METRICS:
            vals = grp[col].to_numpy(dtype=float)
            name = _RENAME.get(col, col)
            finite = vals[np.isfinite(vals)]
            row[name] = float(finite.mean()) if finite.size else np.nan
            row[f"{name}_se"] = float(finite.std(ddof=1) / np.sqrt(finite.size)) if finite.size > 1 else 0.0
        row["failures"] = int(failures.get((key[0], *key[2:]), 0))
        out.append(row)
    return pd.DataFrame(out)
