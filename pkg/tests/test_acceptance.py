"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte Carlo criteria share two studies that are computed once per session:
the SNR sweep (p1 = 5, PC 1) and the explained-variance study (p1 = 10, 0 dB).
Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import hashlib
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from trexpca import cli, pca, stocks
from trexpca.lars_path import PathProblem, augment_elastic_net, lars_lasso_path, standardize_columns
from trexpca.metrics import ev_decomposition
from trexpca.simulator import Cell, Study, run_grid

sys.path.insert(0, str(Path(__file__).parent))
from oracles import coef_at, lasso_kkt_solve  # noqa: E402

SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0)
SWEEP_REPS = 100
PEV_REPS = 50
ALPHAS = (0.05, 0.1, 0.2, 0.3)
THREADS = int(os.environ.get("TREXPCA_THREADS", os.cpu_count() or 1))
DATA = Path(stocks.__file__).parent / "data"

RESULTS = []


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    writer = request.config.pluginmanager.getplugin("terminalreporter")
    if writer is not None and RESULTS:
        writer.write_line("")
        writer.write_line("acceptance summary")
        for line in RESULTS:
            writer.write_line(line)


@pytest.fixture(scope="module")
def snr_sweep():
    study = Study(methods=("trex", "trex_thresholded", "oracle_thresholded", "oracle_spca"), seed=2024)
    cells = [Cell(snr_db=s, p1=5, alpha=0.1, n_components=1) for s in SNR_GRID]
    table = run_grid(study, cells, SWEEP_REPS, threads=THREADS)
    return table[table["pc"] == 1].set_index(["method", "snr_db"])


@pytest.fixture(scope="module")
def pev_study():
    study = Study(methods=("trex",), seed=7)
    cells = [Cell(snr_db=0.0, p1=10, alpha=a, n_components=3) for a in ALPHAS]
    trex = run_grid(study, cells, PEV_REPS, threads=THREADS)
    ordinary = run_grid(
        Study(methods=("ordinary",), seed=7), [Cell(snr_db=0.0, p1=10, n_components=25)], PEV_REPS, threads=THREADS
    )
    return trex, ordinary


def binomial_se(rate, reps):
    return np.sqrt(rate * (1 - rate) / reps)


def test_criterion_1_fdr_control(snr_sweep):
    bound = 0.10 + 2 * binomial_se(0.10, SWEEP_REPS)
    worst = {
        m: max(snr_sweep.loc[(m, s), "fdr"] for s in SNR_GRID) for m in ("trex", "trex_thresholded")
    }
    ok = all(v <= bound for v in worst.values())
    detail = ", ".join(f"{m} max FDR {v:.3f}" for m, v in worst.items())
    assert report(1, ok, f"{detail} (bound {bound:.3f})")


def test_criterion_2_tpr(snr_sweep):
    high = [s for s in SNR_GRID if s >= 0]
    tpr = {m: min(snr_sweep.loc[(m, s), "tpr"] for s in high) for m in ("trex", "trex_thresholded")}
    oracle_tpr = min(snr_sweep.loc[("oracle_thresholded", s), "tpr"] for s in high)
    oracle_fdr = max(snr_sweep.loc[("oracle_thresholded", s), "fdr"] for s in high)
    ok = all(v >= 0.95 for v in tpr.values()) and oracle_tpr >= 0.99 and oracle_fdr <= 0.02
    detail = ", ".join(f"{m} min TPR {v:.3f}" for m, v in tpr.items())
    assert report(2, ok, f"{detail}; oracle thresholded TPR {oracle_tpr:.3f}, FDR {oracle_fdr:.3f}")


def test_criterion_3_oracle_spca_dominated(snr_sweep):
    low = [s for s in SNR_GRID if s <= 0]
    below = all(snr_sweep.loc[("oracle_spca", s), "tpr"] < snr_sweep.loc[("trex", s), "tpr"] for s in low)
    spca, trex = snr_sweep.loc[("oracle_spca", -5.0)], snr_sweep.loc[("trex", -5.0)]
    separated = spca["tpr"] + 2 * spca["tpr_se"] < trex["tpr"] - 2 * trex["tpr_se"]
    pairs = "; ".join(
        f"{s:+.0f} dB: {snr_sweep.loc[('oracle_spca', s), 'tpr']:.3f} vs {snr_sweep.loc[('trex', s), 'tpr']:.3f}"
        for s in low
    )
    detail = (
        f"oracle SPCA vs T-Rex TPR {pairs}; at -5 dB "
        f"[{spca['tpr'] - 2 * spca['tpr_se']:.3f}, {spca['tpr'] + 2 * spca['tpr_se']:.3f}] vs "
        f"[{trex['tpr'] - 2 * trex['tpr_se']:.3f}, {trex['tpr'] + 2 * trex['tpr_se']:.3f}]"
    )
    assert report(3, bool(below and separated), detail)


def test_criterion_4_pev(pev_study):
    trex, ordinary = pev_study
    half = 25  # min(n, p) / 2
    ord_pev = float(ordinary.loc[ordinary["pc"] == half, "cum_pev"].iloc[0])
    row = trex[(trex["alpha"] == 0.1) & (trex["pc"] == 3)].iloc[0]
    ok = ord_pev > 1.0 and 0.9 <= row["cum_pev"] <= 1.02
    detail = (
        f"ordinary cumulative PEV at {half} PCs {ord_pev:.3f}; "
        f"T-Rex cumulative PEV at 3 PCs {row['cum_pev']:.3f} +/- {row['cum_pev_se']:.3f} (target [0.9, 1.02])"
    )
    assert report(4, ok, detail)


def test_criterion_5_target_fdr_insensitivity(pev_study):
    trex, _ = pev_study
    at3 = trex[trex["pc"] == 3].set_index("alpha")["cum_pev"]
    spread = float(at3.max() - at3.min())
    values = ", ".join(f"{a:g}: {at3[a]:.3f}" for a in ALPHAS)
    assert report(5, spread <= 0.05, f"cumulative PEV at 3 PCs by alpha ({values}); range {spread:.4f}")


def test_criterion_6_oracle_equivalences():
    errors = {}

    # (a) LARS path vs exhaustive lasso on a penalty grid
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = standardize_columns(rng.standard_normal((8, 5)))
        y = X @ rng.standard_normal(5) + rng.standard_normal(8)
        y -= y.mean()
        path = lars_lasso_path(PathProblem(X, y))
        for lam in np.linspace(0.999, 1e-3, 20) * path.lambdas[0]:
            worst = max(worst, np.max(np.abs(coef_at(path, lam) - lasso_kkt_solve(X, y, lam))))
    errors["a"] = (worst, 1e-6)

    # (b) augmented elastic net at the end of the path vs closed-form ridge
    rng = np.random.default_rng(100)
    X = standardize_columns(rng.standard_normal((15, 6)))
    y = rng.standard_normal(15)
    y -= y.mean()
    worst = 0.0
    for lam2 in (1e-6, 1e-2, 1.0, 10.0):
        ridge = np.linalg.solve(X.T @ X + lam2 * np.eye(6), X.T @ y)
        coef = lars_lasso_path(augment_elastic_net(PathProblem(X, y, ridge_weight=lam2))).coefficients
        worst = max(worst, np.max(np.abs(coef - ridge)) / np.max(np.abs(ridge)))
    errors["b"] = (worst, 1e-6)

    # (c) ridge loading on the full support with a vanishing ridge weight vs SVD loading
    X = pca.center_columns(rng.standard_normal((20, 6)))
    f, Z = pca.ordinary_pcs(X, 1)
    v = pca.ridge_loading(X, np.arange(6), Z[:, 0], ridge_weight=1e-12)
    errors["c"] = (min(np.max(np.abs(v - f.v[:, 0])), np.max(np.abs(v + f.v[:, 0]))), 1e-6)

    # (d) signal + mixed + null explained variance equals the total trace
    worst = 0.0
    for seed in range(100):
        r = np.random.default_rng(1000 + seed)
        X = pca.center_columns(r.standard_normal((10, 6)))
        V = r.standard_normal((6, 3))
        rep = ev_decomposition(X, V, r.random((6, 3)) < 0.5)
        total = np.trace((X @ V).T @ (X @ V))
        worst = max(worst, abs(rep.signal_ev + rep.mixed_ev + rep.null_ev - total) / total)
    errors["d"] = (worst, 1e-8)

    # (e) PC removal by subtraction vs column-deleted reconstruction
    X = pca.center_columns(rng.standard_normal((30, 8)))
    full = pca.ordinary_pca(X, 8)
    worst = max(
        np.max(np.abs(stocks.remove_leading_pcs(X, full, r) - full.pcs[:, r:] @ full.loadings[:, r:].T))
        for r in range(0, 8)
    )
    errors["e"] = (worst, 1e-10)

    ok = all(err <= tol for err, tol in errors.values())
    detail = ", ".join(f"({k}) {err:.1e} <= {tol:.0e}" for k, (err, tol) in errors.items())
    assert report(6, ok, detail)


def contiguous(order, members):
    pos = sorted(int(np.flatnonzero(order == j)[0]) for j in members)
    return pos[-1] - pos[0] == len(members) - 1


def test_criterion_7_stock_pipeline():
    prices = stocks.read_prices(DATA / "two_block_prices.csv")
    prices = stocks.restrict_window(prices)
    X = pca.center_columns(stocks.compute_returns(prices))
    labels = stocks.block_labels(prices.tickers)
    before = stocks.correlation_matrix(X)
    after = stocks.correlation_matrix(stocks.remove_leading_pcs(X, pca.ordinary_pca(X, 1), 1))
    m0, m1 = stocks.off_block_mean_abs(before, labels), stocks.off_block_mean_abs(after, labels)
    reduction = 1 - m1 / m0
    blocks = [np.flatnonzero(labels == b) for b in (0, 1)]
    grouped = {
        name: all(contiguous(stocks.complete_linkage_order(C), b) for b in blocks)
        for name, C in (("before", before), ("after", after))
    }
    ok = reduction >= 0.5 and all(grouped.values())
    detail = (
        f"off-block mean |corr| {m0:.3f} -> {m1:.3f} ({100 * reduction:.0f}% reduction); "
        f"blocks contiguous before removal: {grouped['before']}, after: {grouped['after']}"
    )
    assert report(7, ok, detail)


def _digests(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir()) if p.is_file()}


def test_criterion_8_cli_determinism(tmp_path):
    from trexpca.simulator import FactorModelConfig, generate

    X = generate(FactorModelConfig(seed=3)).X
    data = tmp_path / "factor.csv"
    pd.DataFrame(X, columns=[f"x{j}" for j in range(X.shape[1])]).to_csv(data, index=False)
    commands = {
        "simulate": [
            "simulate", "--preset", "fig2", "--replications", "2", "--threads", "1",
            "--set", "snr_db=[0, 10]", "--seed", "5",
        ],
        "pca": ["pca", str(data), "-M", "2", "--method", "trex", "--seed", "5"],
        "pca_thresholded": ["pca", str(data), "-M", "2", "--method", "trex_thresholded", "--seed", "5"],
        "stocks": [
            "stocks", str(DATA / "two_block_prices.csv"), "--weights", str(DATA / "two_block_weights.csv"),
            "--min-weight", "0.005", "-r", "2", "--methods", "ordinary,trex", "--svg", "--seed", "5",
        ],
    }
    mismatched, failed = [], []
    for name, args in commands.items():
        runs = []
        for k in range(2):
            out = tmp_path / f"{name}_{k}"
            if cli.main([*args, "--out-dir", str(out)]) != 0:
                failed.append(name)
            runs.append(_digests(out))
        if runs[0] != runs[1] or not runs[0]:
            mismatched.append(name)
    results = tmp_path / "simulate_0" / "results.csv"
    plots = []
    for k in range(2):
        out = tmp_path / f"plot_{k}"
        if cli.main(["plot", str(results), "--preset", "fig2", "--out-dir", str(out)]) != 0:
            failed.append("plot")
        plots.append(_digests(out))
    if plots[0] != plots[1]:
        mismatched.append("plot")
    ok = not mismatched and not failed
    checked = sum(len(_digests(tmp_path / f"{n}_0")) for n in [*commands, "plot"])
    detail = f"{checked} output files from {len(commands) + 1} runs compared byte for byte"
    if mismatched or failed:
        detail += f"; differing: {mismatched}, failed: {failed}"
    assert report(8, ok, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
