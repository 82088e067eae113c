import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trexpca import simulator
from trexpca.simulator import (
    Cell,
    FactorModelConfig,
    Study,
    generate,
    noise_sd_for_snr,
    realized_snr_db,
    replicate,
    run_grid,
    summarize,
)


def test_noise_sd_scales_with_snr():
    rng = np.random.default_rng(0)
    Z, V = rng.standard_normal((20, 2)), rng.standard_normal((10, 2))
    var = np.var(Z @ V.T, ddof=1)
    assert noise_sd_for_snr(Z, V, 0.0) ** 2 == pytest.approx(var)
    assert noise_sd_for_snr(Z, V, 10.0) ** 2 == pytest.approx(var / 10)


def test_zero_signal_rejected():
    with pytest.raises(ValueError):
        noise_sd_for_snr(np.zeros((5, 1)), np.ones((4, 1)), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([-10.0, -5.0, 0.0, 5.0, 10.0]))
def test_realized_snr_close_to_target(seed, snr):
    t = generate(FactorModelConfig(snr_db=snr, seed=seed))
    assert abs(realized_snr_db(t.factors @ t.loadings.T, t.noise) - snr) <= 0.5


def test_defaults_and_structure():
    cfg = FactorModelConfig()
    assert (cfg.n, cfg.p, cfg.M, cfg.loading_value) == (50, 100, 3, 0.9)
    t = generate(cfg)
    assert t.X.shape == (50, 100)
    np.testing.assert_allclose(t.X.mean(axis=0), 0, atol=1e-12)
    raw = t.factors @ t.loadings.T + t.noise
    np.testing.assert_allclose(t.X, raw - raw.mean(axis=0), atol=1e-12)
    for m in range(3):
        col = t.loadings[:, m]
        assert np.count_nonzero(col) == 5
        assert set(np.unique(col[col != 0])) == {0.9}
        assert np.flatnonzero(col).max() < 30


def test_same_seed_is_bit_identical():
    a, b = generate(FactorModelConfig(seed=3)), generate(FactorModelConfig(seed=3))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.loadings, b.loadings)


def test_full_pool_supports_coincide():
    t = generate(FactorModelConfig(active_per_factor=30))
    assert all(set(s) == set(range(30)) for s in t.true_support)


def test_config_validation():
    with pytest.raises(ValueError):
        FactorModelConfig(active_per_factor=31)
    with pytest.raises(ValueError):
        FactorModelConfig(factor_sds=(1.0, 0.0))


def test_mask_is_padded_beyond_factors():
    t = generate(FactorModelConfig())
    mask = t.mask_for(5)
    assert mask.shape == (100, 5) and not mask[:, 3:].any()
    assert t.support_for(4).size == 0


def test_one_replication_one_cell_shape():
    study = Study(methods=("ordinary", "oracle_thresholded", "oracle_spca"))
    table = run_grid(study, [Cell(n_components=2)], replications=1)
    assert len(table) == 3 * 2
    assert {"method", "pc", "snr_db", "p1", "alpha", "n_components", "fdr", "tpr", "cum_pev"} <= set(table)
    assert (table["replications"] == 1).all()


def test_common_random_numbers_across_cells():
    study = Study(methods=("ordinary",))
    a = replicate(study, Cell(alpha=0.1), 0)
    b = replicate(study, Cell(alpha=0.3), 0)
    assert a[0]["signal_ev"] == b[0]["signal_ev"]


def test_parallel_schedule_does_not_change_results():
    study = Study(methods=("trex", "oracle_thresholded"), num_experiments=5)
    cells = [Cell(snr_db=0.0), Cell(snr_db=5.0)]
    serial = run_grid(study, cells, 2, threads=1)
    parallel = run_grid(study, cells, 2, threads=2)
    pd.testing.assert_frame_equal(serial, parallel)


def test_replications_must_be_positive():
    with pytest.raises(ValueError):
        run_grid(Study(), [Cell()], 0)


def test_fit_failures_are_recorded(monkeypatch):
    real = simulator.fit_methods

    def flaky(X, M, methods, cfg, p1=None):
        if methods == ["oracle_spca"]:
            raise RuntimeError("boom")
        return real(X, M, methods, cfg, p1)

    monkeypatch.setattr(simulator, "fit_methods", flaky)
    raw = run_grid(Study(methods=("ordinary", "oracle_spca")), [Cell()], 2, raw=True)
    assert raw["failed"].sum() == 2
    summary = summarize(raw)
    assert list(summary["method"]) == ["ordinary"]


def test_summary_standard_errors():
    raw = pd.DataFrame(
        {
            "rep": [0, 1],
            "method": ["trex", "trex"],
            "pc": [1, 1],
            "snr_db": [0.0, 0.0],
            "p1": [5, 5],
            "alpha": [0.1, 0.1],
            "n_components": [1, 1],
            "failed": [False, False],
            "fdp": [0.0, 0.2],
            "tpp": [1.0, 1.0],
            "n_selected": [5, 6],
            "signal_ev": [1.0, 1.0],
            "mixed_ev": [0.0, 0.0],
            "null_ev": [0.0, 0.0],
            "cum_pev": [1.0, 1.0],
        }
    )
    row = summarize(raw).iloc[0]
    assert row["fdr"] == pytest.approx(0.1)
    assert row["fdr_se"] == pytest.approx(0.1)
    assert row["tpr_se"] == 0.0 and row["failures"] == 0


def test_empty_summary_has_columns():
    assert {"method", "pc"} <= set(summarize(pd.DataFrame()).columns)
