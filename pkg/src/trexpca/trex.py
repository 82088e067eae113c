"""Terminating-Random-Experiments (T-Rex) variable selection.

K random experiments append standard-normal dummy predictors to the data and run
T-LARS until T dummies have entered. Original variables are then voted on by their
relative occurrence across experiments, and ``(T, L, v)`` are calibrated so that a
conservative estimate of the false discovery proportion stays below the target.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lars_path import DegenerateDirectionError, PathProblem, standardize_columns, terminated_path

__all__ = [
    "TrexConfig",
    "OccurrenceProfile",
    "SelectedSupport",
    "ExperimentError",
    "substream",
    "generate_dummies",
    "run_experiments",
    "relative_occurrences",
    "select",
    "estimate_fdp",
    "voting_grid",
    "calibrate",
]

logger = logging.getLogger(__name__)

# slack when comparing an estimated FDP against the target
_FDP_EPS = 1e-12


class ExperimentError(RuntimeError):
    """A random experiment failed; carries the experiment index."""

    def __init__(self, experiment, cause):
        self.experiment = experiment
        super().__init__(f"random experiment {experiment}: {cause}")


@dataclass(frozen=True)
class TrexConfig:
    """Settings of the T-Rex selector.

    ``dummy_block`` (L) defaults to the number of original variables and
    ``max_dummy_terminations`` (T_max) to ``min(ceil(L / 2), 20)``. When no
    nonempty selection meets the target, L is doubled up to
    ``max_dummy_factor * p``. ``path_ridge_weight`` is the elastic-net ridge
    weight of the T-LARS paths (columns have unit norm, so it is relative to a
    unit Gram diagonal).
    """

    target_fdr: float = 0.1
    num_experiments: int = 20
    dummy_block: int | None = None
    max_dummy_terminations: int | None = None
    seed: int = 0
    path_ridge_weight: float = 10.0
    max_dummy_factor: int = 8

    def __post_init__(self):
        if not 0.0 <= self.target_fdr <= 1.0:
            raise ValueError("target_fdr must lie in [0, 1]")
        if self.num_experiments < 1:
            raise ValueError("num_experiments must be at least 1")
        if self.dummy_block is not None and self.dummy_block < 1:
            raise ValueError("dummy_block must be at least 1")
        if self.max_dummy_terminations is not None:
            if self.max_dummy_terminations < 1:
                raise ValueError("max_dummy_terminations must be at least 1")
            if self.dummy_block is not None and self.max_dummy_terminations > self.dummy_block:
                raise ValueError("max_dummy_terminations cannot exceed dummy_block")
        if self.path_ridge_weight < 0:
            raise ValueError("path_ridge_weight must be nonnegative")
        if self.max_dummy_factor < 1:
            raise ValueError("max_dummy_factor must be at least 1")

    def t_max(self, L):
        if self.max_dummy_terminations is not None:
            return min(self.max_dummy_terminations, L)
        return min(math.ceil(L / 2), 20)


@dataclass
class OccurrenceProfile:
    """Relative occurrences ``phi[j]`` of the original variables at one (T, L)."""

    phi: np.ndarray
    T: int
    L: int
    K: int


@dataclass
class SelectedSupport:
    """Calibrated T-Rex selection and the triple ``(v*, T*, L*)`` that produced it."""

    active: np.ndarray
    v_star: float
    t_star: int
    l_star: int
    estimated_fdp: float
    target_fdr: float = float("nan")
    phi: np.ndarray | None = None
    feasible: bool = True
    diagnostic: str = ""
    truncated_experiments: int = 0
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.active)

    def to_dict(self):
        return {
            "active": [int(j) for j in self.active],
            "v_star": float(self.v_star),
            "t_star": int(self.t_star),
            "l_star": int(self.l_star),
            "estimated_fdp": float(self.estimated_fdp),
            "target_fdr": float(self.target_fdr),
            "feasible": bool(self.feasible),
            "diagnostic": self.diagnostic,
        }


def substream(seed, *key):
    """Independent generator for ``key`` derived from ``seed`` (counter-based spawning)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def generate_dummies(num_rows, num_dummies, stream):
    """Draw an ``(num_rows, num_dummies)`` matrix of i.i.d. standard normal dummies.

    ``stream`` is a :class:`numpy.random.Generator` or anything ``default_rng`` accepts.
    """
    if num_rows < 1 or num_dummies < 1:
        raise ValueError("num_rows and num_dummies must be positive")
    rng = stream if isinstance(stream, np.random.Generator) else np.random.default_rng(stream)
    # drawn column by column so a wider draw from the same stream extends a narrower one
    return rng.standard_normal((num_dummies, num_rows)).T


class _DummyPool:
    """Per-experiment dummy matrices that grow by doubling, reproducibly."""

    def __init__(self, n, L0, seed, key):
        self.n, self.L0, self.seed, self.key = n, L0, seed, tuple(key)
        self._blocks = {}

    def matrix(self, k, L):
        blocks, size, r = [], 0, 0
        while size < L:
            width = self.L0 if r == 0 else self.L0 * 2 ** (r - 1)
            width = min(width, L - size)
            block = self._blocks.get((k, r))
            if block is None or block.shape[1] < width:
                block = generate_dummies(self.n, width, substream(self.seed, *self.key, k, r))
                self._blocks[(k, r)] = block
            blocks.append(block[:, :width])
            size += width
            r += 1
        return np.hstack(blocks)


def run_experiments(X, y, cfg, L=None, T_max=None, stream_key=(), _pool=None):
    """Run the K terminated random experiments.

    Parameters
    ----------
    X : ndarray (n, p)
        Original predictors; columns are standardized here.
    y : ndarray (n,)
        Response; centered here.
    cfg : TrexConfig
    L : int, optional
        Number of dummies per experiment (default ``cfg.dummy_block`` or p).
    T_max : int, optional
        Number of dummy entries after which each path stops.
    stream_key : tuple of int
        Prefix of the random substream keys, e.g. the principal component index.

    Returns
    -------
    list of CandidateSet, one per experiment.
    """
    X = standardize_columns(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("response length must equal the number of rows of X")
    y = y - y.mean()
    L = L or cfg.dummy_block or p
    T_max = T_max or cfg.t_max(L)
    if T_max > L:
        raise ValueError("T_max cannot exceed the number of dummies")
    pool = _pool or _DummyPool(n, cfg.dummy_block or p, cfg.seed, stream_key)
    flags = np.r_[np.zeros(p, dtype=bool), np.ones(L, dtype=bool)]
    out = []
    for k in range(cfg.num_experiments):
        D = standardize_columns(pool.matrix(k, L))
        problem = PathProblem(np.hstack([X, D]), y, flags, ridge_weight=cfg.path_ridge_weight)
        try:
            out.append(terminated_path(problem, T_max))
        except DegenerateDirectionError as exc:
            raise ExperimentError(k, exc) from exc
    return out


def relative_occurrences(experiments, T, L=None):
    """Fraction of experiments whose candidate set at ``T`` contains each variable."""
    if not experiments:
        raise ValueError("need at least one experiment")
    p = experiments[0].n_original
    counts = np.zeros(p)
    for cs in experiments:
        counts[cs.candidates(T)] += 1
    K = len(experiments)
    return OccurrenceProfile(phi=counts / K, T=T, L=L if L is not None else -1, K=K)


def select(phi, v):
    """Indices with relative occurrence strictly above ``v``."""
    phi = phi.phi if isinstance(phi, OccurrenceProfile) else np.asarray(phi)
    return np.flatnonzero(phi > v)


def expected_false_positives(T, L, p):
    """Expected number of pure-noise variables entering before the T-th of L dummies."""
    return T * p / (L - T + 1)


def estimate_fdp(profile, v, T, L, p):
    """Conservative FDP estimate of the selection ``{j : phi_j > v}``.

    Two sources of false selections are added up: ``T p / (L - T + 1)`` variables
    that behave like dummies, and for every selected variable the share of
    experiments that did not pick it, ``1 - phi'_j``, where ``phi'`` discounts
    the occurrence rate a dummy-like variable reaches by chance. The sum is
    divided by ``max(1, |selection|)`` and clipped to [0, 1]; an empty selection
    has FDP 0.
    """
    if not 0.5 <= v < 1.0:
        raise ValueError("v must lie in [0.5, 1)")
    phi = profile.phi if isinstance(profile, OccurrenceProfile) else np.asarray(profile, dtype=float)
    chosen = phi[phi > v]
    if chosen.size == 0:
        return 0.0
    chance = T / (L - T + 1)
    if chance < 1.0:
        deflated = np.clip((chosen - chance) / (1.0 - chance), 0.0, 1.0)
    else:
        deflated = np.zeros_like(chosen)
    false_count = expected_false_positives(T, L, p) + float(np.sum(1.0 - deflated))
    return float(min(1.0, false_count / chosen.size))


def voting_grid(K):
    """Descending thresholds: multiples of 0.05 and of 1/K inside [0.5, 1)."""
    coarse = np.round(np.arange(0.5, 1.0 - 1e-9, 0.05), 10)
    fine = np.arange(0, K + 1) / K
    fine = fine[(fine >= 0.5) & (fine < 1.0)]
    return np.unique(np.r_[coarse, fine])[::-1]


def calibrate(X, y, cfg, stream_key=()):
    """Calibrate ``(T*, L*, v*)`` and return the selected support.

    For each number of dummies L (starting at ``cfg.dummy_block`` or p and doubling
    while no nonempty selection meets the target), T is searched upward and v
    downward; the largest selection with estimated FDP at most ``cfg.target_fdr``
    wins, with ties going to the smaller T and the larger v.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    alpha = cfg.target_fdr
    L0 = cfg.dummy_block or p
    L_cap = max(L0, cfg.max_dummy_factor * p)
    grid = voting_grid(cfg.num_experiments)
    pool = _DummyPool(n, L0, cfg.seed, stream_key)
    Xs = standardize_columns(X)

    L = L0
    last_L = L0
    while L <= L_cap:
        last_L = L
        T_hi = cfg.t_max(L)
        # T beyond this cannot meet the target even if all p variables were selected
        T_run = max(
            (T for T in range(1, T_hi + 1) if expected_false_positives(T, L, p) / p <= alpha + _FDP_EPS),
            default=0,
        )
        if T_run:
            experiments = run_experiments(Xs, y, cfg, L=L, T_max=T_run, stream_key=stream_key, _pool=pool)
            best = None
            for T in range(1, T_run + 1):
                profile = relative_occurrences(experiments, T, L)
                for v in grid:
                    est = estimate_fdp(profile, v, T, L, p)
                    n_sel = len(select(profile, v))
                    if n_sel and est <= alpha + _FDP_EPS and (best is None or n_sel > best[0]):
                        best = (n_sel, T, float(v), est, profile)
            if best is not None:
                n_sel, T, v, est, profile = best
                return SelectedSupport(
                    active=select(profile, v),
                    v_star=v,
                    t_star=T,
                    l_star=L,
                    estimated_fdp=est,
                    target_fdr=alpha,
                    phi=profile.phi,
                    truncated_experiments=sum(cs.truncated for cs in experiments),
                )
        L *= 2

    logger.debug("no feasible T-Rex calibration up to L=%d (alpha=%g)", last_L, alpha)
    return SelectedSupport(
        active=np.array([], dtype=int),
        v_star=float(grid[0]),
        t_star=1,
        l_star=last_L,
        estimated_fdp=0.0,
        target_fdr=alpha,
        feasible=False,
        diagnostic=f"no nonempty selection met target FDR {alpha:g} with up to {last_L} dummies",
    )
