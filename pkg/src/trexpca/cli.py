"""Command-line front end: ``simulate``, ``pca``, ``stocks`` and ``plot``.

Every command writes its outputs plus a ``manifest.json`` into ``--out-dir``.
Defaults of the common flags can be set through environment variables
``TREXPCA_SEED``, ``TREXPCA_THREADS``, ``TREXPCA_OUT_DIR`` and ``TREXPCA_CONFIG``.
Failures exit nonzero with a single ``error: ...`` line on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__, pca, stocks
from .simulator import GRID_KEYS, Cell, FactorModelConfig, Study, run_grid
from .trex import TrexConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "TREXPCA_"
MANIFEST = "manifest.json"

# configuration keys accepted by ``simulate`` and their defaults
SIM_DEFAULTS = {
    "methods": list(pca.METHODS),
    "replications": 200,
    "num_experiments": 20,
    "n": 50,
    "p": 100,
    "factor_sds": [5.0, 3.0, 1.0],
    "active_pool": 30,
    "loading_value": 0.9,
    "grid": None,
    "sweeps": None,
}

PRESETS = {
    "fig2": {
        "grid": {"snr_db": [-10, -5, 0, 5, 10], "p1": [5], "alpha": [0.1], "n_components": [1]},
    },
    "fig3": {
        "methods": ["ordinary", "trex", "trex_thresholded", "oracle_thresholded", "oracle_spca"],
        "sweeps": [
            {"snr_db": [0], "p1": [10], "alpha": [0.1], "n_components": [10]},
            {"snr_db": [-10, -5, 0, 5, 10], "p1": [10], "alpha": [0.1], "n_components": [3]},
            {"snr_db": [0], "p1": [1, 5, 10, 15, 20, 25, 30], "alpha": [0.1], "n_components": [3]},
            {"snr_db": [0], "p1": [10], "alpha": [0.05, 0.1, 0.2, 0.3], "n_components": [3]},
        ],
    },
}


class UsageError(Exception):
    """Bad command-line usage; exits with status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name, default=None, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"{ENV_PREFIX}{name}={raw!r} is not a valid {cast.__name__}") from None


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_manifest(out_dir, subcommand, config, seed, inputs, outputs):
    """Record what produced the outputs; no timestamps, so re-runs are byte-identical."""
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": sorted(str(Path(o).name) for o in outputs),
    }
    _dump_json(manifest, Path(out_dir) / MANIFEST)
    return manifest


def _write_csv(df, path, index=False):
    df.to_csv(path, index=index, float_format="%.12g", lineterminator="\n")


def _load_config(path):
    if path is None:
        return {}
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping of keys to values")
    return data


def _parse_overrides(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"override {pair!r} must look like key=value")
        key, value = pair.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out


def resolve_sim_config(preset=None, config=None, overrides=None):
    """Merge defaults, preset, config file and overrides; reject unknown keys."""
    resolved = dict(SIM_DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; accepted: {', '.join(PRESETS)}")
        resolved.update(PRESETS[preset])
    for layer in (config or {}, overrides or {}):
        for key, value in layer.items():
            if key in GRID_KEYS:
                # a bare grid key replaces that axis of every sweep
                resolved.setdefault("_axes", {})[key] = value if isinstance(value, list) else [value]
            elif key in SIM_DEFAULTS:
                resolved[key] = value
            else:
                accepted = sorted([*SIM_DEFAULTS, *GRID_KEYS])
                raise ValueError(f"invalid config key {key!r}; accepted keys: {', '.join(accepted)}")
    axes = resolved.pop("_axes", {})
    sweeps = resolved["sweeps"] or [resolved["grid"] or {}]
    merged = []
    for sweep in sweeps:
        bad = set(sweep) - set(GRID_KEYS)
        if bad:
            raise ValueError(f"invalid grid key {sorted(bad)[0]!r}; accepted: {', '.join(GRID_KEYS)}")
        merged.append({**sweep, **axes})
    resolved["sweeps"] = merged
    resolved["grid"] = None
    unknown = set(resolved["methods"]) - set(pca.METHODS)
    if unknown:
        raise ValueError(f"invalid method {sorted(unknown)[0]!r}; accepted: {', '.join(pca.METHODS)}")
    return resolved


def cells_from_config(resolved):
    """Grid cells of all sweeps, deduplicated in first-seen order."""
    defaults = Cell()
    cells = []
    for sweep in resolved["sweeps"]:
        axes = [sweep.get(k, [getattr(defaults, k)]) for k in GRID_KEYS]
        for values in itertools.product(*axes):
            cell = Cell(
                snr_db=float(values[0]),
                p1=int(values[1]),
                alpha=float(values[2]),
                n_components=int(values[3]),
            )
            if cell not in cells:
                cells.append(cell)
    return cells


def cmd_simulate(args):
    resolved = resolve_sim_config(args.preset, _load_config(args.config), _parse_overrides(args.set))
    if args.replications is not None:
        resolved["replications"] = args.replications
    reps = resolved["replications"]
    if not isinstance(reps, int) or reps < 1:
        raise UsageError(f"replications must be a positive integer, got {reps!r}")
    model = FactorModelConfig(
        n=int(resolved["n"]),
        p=int(resolved["p"]),
        factor_sds=tuple(resolved["factor_sds"]),
        active_pool=int(resolved["active_pool"]),
        loading_value=float(resolved["loading_value"]),
        active_per_factor=1,
    )
    study = Study(
        methods=tuple(resolved["methods"]),
        model=model,
        num_experiments=int(resolved["num_experiments"]),
        seed=args.seed,
    )
    cells = cells_from_config(resolved)
    for cell in cells:
        replace(model, active_per_factor=cell.p1)  # validates p1 against the pool
    table = run_grid(study, cells, reps, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    _write_csv(table, path)
    inputs = [args.config] if args.config else []
    write_manifest(out, "simulate", {"preset": args.preset, **resolved}, args.seed, inputs, [path])
    return [path]


def read_matrix_csv(path):
    """Numeric CSV with a header row of variable names; reports the first bad cell."""
    df = pd.read_csv(path)
    values = df.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().to_numpy()
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"{path}: non-numeric or missing value at row {r + 2}, column {df.columns[c]!r}")
    return [str(c) for c in df.columns], values.to_numpy(dtype=float)


def fit_model(X, M, method, alpha, K, seed):
    n, p = X.shape
    if not 1 <= M <= min(n, p):
        raise ValueError(f"number of components {M} exceeds min(n, p) = {min(n, p)}")
    cfg = TrexConfig(target_fdr=alpha, num_experiments=K, seed=seed)
    if method == "ordinary":
        return pca.ordinary_pca(X, M)
    if method == "trex":
        return pca.trex_pca(X, M, cfg)
    if method == "trex_thresholded":
        return pca.trex_thresholded_pca(X, M, cfg)
    raise UsageError(f"unknown method {method!r}; accepted: ordinary, trex, trex_thresholded")


def _support_record(m, sup, names):
    rec = sup.to_dict()
    rec["component"] = m + 1
    rec["variables"] = [names[j] for j in rec["active"]]
    return rec


def cmd_pca(args):
    names, raw = read_matrix_csv(args.input)
    X = pca.center_columns(raw)
    model = fit_model(X, args.components, args.method, args.alpha, args.experiments, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = [f"PC{m + 1}" for m in range(model.n_components)]
    paths = [out / "loadings.csv", out / "pcs.csv", out / "supports.json"]
    loadings = pd.DataFrame(model.loadings, columns=cols)
    loadings.insert(0, "variable", names)
    _write_csv(loadings, paths[0])
    _write_csv(pd.DataFrame(model.pcs, columns=cols), paths[1])
    supports = {
        "method": model.method,
        "components": [_support_record(m, s, names) for m, s in enumerate(model.supports)],
    }
    _dump_json(supports, paths[2])
    config = {
        "input": str(args.input),
        "components": args.components,
        "method": args.method,
        "alpha": args.alpha,
        "experiments": args.experiments,
    }
    write_manifest(out, "pca", config, args.seed, [args.input], paths)
    return paths


def _ordered_frame(corr, tickers, order):
    names = [tickers[i] for i in order]
    return pd.DataFrame(corr[np.ix_(order, order)], index=names, columns=names)


def _heatmap(frames, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "trexpca"
    fig, axes = plt.subplots(1, len(frames), figsize=(4.2 * len(frames), 4), squeeze=False)
    for ax, (title, df) in zip(axes[0], frames):
        ax.imshow(df.to_numpy(), vmin=-1, vmax=1, cmap="RdBu_r", interpolation="nearest")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_stocks(args):
    prices = stocks.read_prices(args.prices)
    inputs = [args.prices]
    weights = None
    if args.weights:
        weights = stocks.read_weights(args.weights)
        inputs.append(args.weights)
    if args.min_weight is not None:
        if weights is None:
            raise ValueError("--min-weight requires a weights file (--weights)")
        prices = stocks.filter_by_weight(prices, args.min_weight, weights)
        if not prices.tickers:
            raise ValueError(f"no ticker has index weight above {args.min_weight:g}")
    prices = stocks.restrict_window(prices, args.start, args.end)
    if len(prices.dates) < 3:
        raise ValueError(
            f"window {args.start}..{args.end} has {len(prices.dates)} trading day(s); need at least 3"
        )
    X = pca.center_columns(stocks.compute_returns(prices))
    tickers = prices.tickers
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    matrices = [("none", stocks.correlation_matrix(X))]
    if args.remove > 0:
        for method in args.methods:
            model = fit_model(X, args.remove, method, args.alpha, args.experiments, args.seed)
            resid = stocks.remove_leading_pcs(X, model, args.remove)
            matrices.append((method, stocks.correlation_matrix(resid)))

    paths, orders, frames = [], {}, []
    for label, corr in matrices:
        order = stocks.complete_linkage_order(corr)
        df = _ordered_frame(corr, tickers, order)
        path = out / f"corr_{label}.csv"
        _write_csv(df, path, index=True)
        paths.append(path)
        orders[label] = [tickers[i] for i in order]
        frames.append(("No removed PC" if label == "none" else f"{label}: {args.remove} PC removed", df))
    order_path = out / "leaf_order.json"
    _dump_json(orders, order_path)
    paths.append(order_path)
    if args.svg:
        svg = out / "correlations.svg"
        _heatmap(frames, svg)
        paths.append(svg)
    config = {
        "prices": str(args.prices),
        "weights": str(args.weights) if args.weights else None,
        "min_weight": args.min_weight,
        "remove": args.remove,
        "methods": list(args.methods),
        "alpha": args.alpha,
        "experiments": args.experiments,
        "window": [args.start, args.end],
    }
    write_manifest(out, "stocks", config, args.seed, inputs, paths)
    return paths


PLOT_PRESETS = ("fig2", "fig3")


def _panel(ax, table, x, y, title):
    ax.set_title(title)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if table.empty or x not in table or y not in table:
        return
    for method, grp in table.groupby("method", sort=True):
        grp = grp.sort_values(x)
        ax.errorbar(grp[x], grp[y], yerr=grp.get(f"{y}_se"), marker="o", capsize=2, label=method)
    ax.legend(fontsize="small")


def _sweep_rows(table, key):
    """Final-component rows of cells where ``key`` varies and the other grid keys are at their mode."""
    if table.empty or table[key].nunique() < 2:
        return table.iloc[0:0]
    final = table[table["pc"] == table["n_components"]]
    for other in GRID_KEYS:
        if other != key and other in final:
            final = final[final[other] == final[other].mode().iloc[0]]
    return final


def render_plot(table, preset, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "trexpca"
    if preset == "fig2":
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        pc1 = table[table["pc"] == 1] if not table.empty else table
        _panel(axes[0], pc1, "snr_db", "fdr", "FDR of PC 1")
        _panel(axes[1], pc1, "snr_db", "tpr", "TPR of PC 1")
    else:
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        widest = table[table["n_components"] == table["n_components"].max()] if not table.empty else table
        _panel(axes[0, 0], widest, "pc", "cum_pev", "cumulative PEV vs components")
        for ax, key in zip(axes.flat[1:], ("snr_db", "p1", "alpha")):
            _panel(ax, _sweep_rows(table, key), key, "cum_pev", f"cumulative PEV vs {key}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_plot(args):
    if args.preset not in PLOT_PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; accepted: {', '.join(PLOT_PRESETS)}")
    try:
        table = pd.read_csv(args.results)
    except pd.errors.EmptyDataError:
        table = pd.DataFrame()
    if not table.empty:
        needed = {"method", "pc", *GRID_KEYS}
        missing = needed - set(table.columns)
        if missing:
            raise ValueError(f"{args.results}: missing column(s) {', '.join(sorted(missing))}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.preset}.svg"
    render_plot(table, args.preset, path)
    write_manifest(out, "plot", {"preset": args.preset}, args.seed, [args.results], [path])
    return [path]


def _methods(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    allowed = ("ordinary", "trex", "trex_thresholded")
    for item in items:
        if item not in allowed:
            raise argparse.ArgumentTypeError(f"unknown method {item!r}; accepted: {', '.join(allowed)}")
    return items


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=_env("SEED", 0, int), help="master seed")
    common.add_argument(
        "--threads", type=int, default=_env("THREADS", os.cpu_count() or 1, int), help="worker processes"
    )
    common.add_argument("--out-dir", default=_env("OUT_DIR", "."), help="output directory")
    common.add_argument("--config", default=_env("CONFIG"), help="YAML or JSON config file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="trexpca", description="FDR-controlled sparse PCA")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo study on the sparse factor model")
    sim.add_argument("--preset", choices=sorted(PRESETS))
    sim.add_argument("--replications", type=int)
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("pca", parents=[common], help="fit a PCA variant to a data CSV")
    fit.add_argument("input", help="CSV with one column per variable")
    fit.add_argument("-M", "--components", type=int, default=1)
    fit.add_argument("--method", default="trex", choices=["ordinary", "trex", "trex_thresholded"])
    fit.add_argument("--alpha", type=float, default=0.1, help="target FDR")
    fit.add_argument("-K", "--experiments", type=int, default=20)
    fit.set_defaults(func=cmd_pca)

    stk = sub.add_parser("stocks", parents=[common], help="correlations of returns after PC removal")
    stk.add_argument("prices", help="wide CSV: date,TICKER1,...")
    stk.add_argument("--weights", help="CSV ticker,weight")
    stk.add_argument("--min-weight", type=float)
    stk.add_argument("-r", "--remove", type=int, default=3, help="number of leading PCs to remove")
    stk.add_argument("--methods", type=_methods, default=["ordinary", "trex"])
    stk.add_argument("--alpha", type=float, default=0.1)
    stk.add_argument("-K", "--experiments", type=int, default=20)
    stk.add_argument("--start", default=stocks.DEFAULT_WINDOW[0])
    stk.add_argument("--end", default=stocks.DEFAULT_WINDOW[1])
    stk.add_argument("--svg", action="store_true", help="also write a heatmap")
    stk.set_defaults(func=cmd_stocks)

    plot = sub.add_parser("plot", parents=[common], help="render a results table as SVG")
    plot.add_argument("results", help="CSV written by `simulate`")
    plot.add_argument("--preset", required=True)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
