"""End-to-end acceptance gate.

Each test asserts one release criterion; the terminal summary prints one
PASS/FAIL line per criterion (see conftest.py).  The full-pipeline fixture
runs the complete train + evaluate flow once on the default synthetic
dataset with a pinned configuration and is shared by the criteria that
inspect its artifacts.
"""

import time

import numpy as np
import pytest

from aoi_oracle import brute_force_aoi
from aoipm import dataio, lstm, pipeline, quantify, spc, synth
from aoipm.aoi import AoiParams, cluster_weight, generalized_level_weight, run_aoi
from aoipm.hierarchy import AttributeSchema, build_percentile_hierarchy

ACCEPT_CONFIG = pipeline.PipelineConfig(
    learning_rate=0.1,
    epochs=150,
    window=5,
    hidden_size=16,
    batch_size=64,
)


def _full_run(data_dir):
    """Complete train + evaluate flow; returns artifacts, series and timings."""
    t0 = time.perf_counter()
    paths = synth.write_fd_files(synth.SynthConfig(), data_dir)
    train_ds, retained = dataio.preprocess_train(dataio.load_cmapss(paths["train"]))
    sims = [s.values for s in train_ds.simulations]
    artifacts, train_series = pipeline.train_pipeline(sims, ACCEPT_CONFIG)

    test_ds = dataio.preprocess_test(dataio.load_cmapss(paths["test"]), retained)
    truth = dataio.load_rul_truth(paths["rul"], num_units=len(test_ds.simulations))
    matcher = quantify.Matcher(artifacts.kb, artifacts.hierarchies)
    reports = []
    for sim, true_rul in zip(test_ds.simulations, truth):
        series = quantify.quantify_simulation(
            artifacts.kb, sim.values, artifacts.hierarchies,
            simulation_id=sim.unit_id, matcher=matcher,
        )
        reports.append(
            pipeline.estimate_rul(
                series.weights, artifacts, simulation_id=sim.unit_id, true_rul=true_rul
            )
        )
    summary = pipeline.evaluate(reports, cycle_filter=ACCEPT_CONFIG.cycle_filter)
    elapsed = time.perf_counter() - t0
    report_text = pipeline.render_evaluation(reports, summary, wer_table=artifacts.wer_table)
    return {
        "artifacts": artifacts,
        "train_series": train_series,
        "reports": reports,
        "summary": summary,
        "report_text": report_text,
        "elapsed": elapsed,
    }


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    return _full_run(tmp_path_factory.mktemp("accept-data"))


class TestCriterion1FormulaExactness:
    def test_level_and_cluster_weights_exact(self):
        assert abs(generalized_level_weight([0] * 14) - 1.0) < 1e-12
        assert abs(generalized_level_weight([1] * 14) - 0.5) < 1e-12
        assert abs(generalized_level_weight([0] * 7 + [1] * 7) - 0.75) < 1e-12
        assert abs(cluster_weight(0.8, 100, 500, 0.2) - 0.84) < 1e-12
        assert abs(cluster_weight(0.55, 10, 380, 0.15) - (0.55 + 10 / 380 * 0.15)) < 1e-12


class TestCriterion2EwmaCorrectness:
    def test_asymptote_and_shewhart(self):
        params = spc.EwmaParams(lam=0.2, L=3.0, n=1, mu0=0.5, sigma=0.1)
        lo_inf, hi_inf = spc.asymptotic_limits(params)
        lo, hi = spc.control_limits(params, 10_000)
        assert abs(hi - hi_inf) < 1e-9
        assert abs(lo - lo_inf) < 1e-9
        shew = spc.EwmaParams(lam=1.0, L=3.0, n=1, mu0=0.5, sigma=0.1)
        lo1, hi1 = spc.control_limits(shew, 1)
        assert hi1 == 0.5 + 3.0 * 0.1
        assert lo1 == 0.5 - 3.0 * 0.1


class TestCriterion3AoiOracle:
    def test_randomized_relations_match_brute_force(self):
        start = time.perf_counter()
        rng = np.random.default_rng(20)
        cases = 0
        while cases < 100:
            num_attr = int(rng.integers(1, 5))
            n_rows = int(rng.integers(4, 51))
            m = int(rng.integers(2, 7))
            hierarchies = []
            for a in range(num_attr):
                pool = rng.uniform(0, 1, 40)
                schema = AttributeSchema(
                    name=f"a{a}", index=a, weight=float(rng.integers(1, 4))
                )
                hierarchies.append(
                    build_percentile_hierarchy(pool, num_levels=3, base_bins=2, schema=schema)
                )
            # quantized values force genuine duplicate merging
            rows = [
                tuple(round(v, 1) for v in rng.uniform(0, 1, num_attr))
                for _ in range(n_rows)
            ]
            kb = run_aoi(rows, hierarchies, AoiParams(min_cluster_size=m))
            expected, residual = brute_force_aoi(rows, hierarchies, m)
            got = sorted(
                (c.descriptor, c.signature, c.instances, c.level_weight, c.weight)
                for c in kb.clusters
            )
            assert len(got) == len(expected)
            for g, e in zip(got, sorted(expected)):
                assert g[:3] == e[:3]
                assert g[3] == pytest.approx(e[3], abs=1e-12)
                assert g[4] == pytest.approx(e[4], abs=1e-12)
            assert list(kb.residual.rows) == residual
            # vote conservation: every input row is absorbed or residual
            assert sum(c.instances for c in kb.clusters) + len(kb.residual.rows) == n_rows
            cases += 1
        assert time.perf_counter() - start < 30.0


class TestCriterion4GradientCheck:
    def test_ten_seeds_under_tolerance(self):
        start = time.perf_counter()
        for seed in range(10):
            rng = np.random.default_rng(seed)
            model = lstm.LstmModel(4, 5, rng)
            X = rng.uniform(0, 1, (3, 5))
            y = rng.uniform(0, 1, 3)
            assert lstm.gradient_check(model, X, y) < 1e-4
        assert time.perf_counter() - start < 60.0


class TestCriterion5WerOrdering:
    def test_rule_4_has_minimum_mae(self, full_run):
        maes = {row["rule"]: row["mae"] for row in full_run["artifacts"].wer_table}
        assert maes[4] == min(maes.values())
        assert full_run["artifacts"].wer_rule.rule_id == 4


class TestCriterion6EarlyDetection:
    def test_change_point_before_failure(self, full_run):
        early = 0
        series_list = full_run["train_series"]
        for series in series_list:
            x = np.asarray(series, dtype=float)
            *_, cp = pipeline._series_analysis(x, ACCEPT_CONFIG)
            if cp is not None and cp < x.size - 1:
                early += 1
        assert early / len(series_list) >= 0.95


class TestCriterion7RulError:
    def test_mae_bounds_and_filter_improvement(self, full_run):
        summary = full_run["summary"]
        assert summary.mae <= 60.0
        assert summary.filtered_mae is not None
        assert summary.filtered_mae < summary.mae


class TestCriterion8ForecasterQuality:
    def test_holdout_rmse(self, full_run):
        assert full_run["artifacts"].holdout_rmse <= 0.1


class TestCriterion9Determinism:
    def test_byte_identical_rerun(self, full_run, tmp_path):
        rerun = _full_run(tmp_path / "data")
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        pipeline.save_artifacts(full_run["artifacts"], a_dir)
        pipeline.save_artifacts(rerun["artifacts"], b_dir)
        for name in ("kb.txt", "hierarchies.txt", "model.json", "wer.txt",
                     "pipeline_config.json", "holdout_rmse.txt"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes(), name
        assert rerun["report_text"] == full_run["report_text"]


class TestCriterion10Performance:
    def test_under_ten_minutes(self, full_run):
        assert full_run["elapsed"] < 600.0
