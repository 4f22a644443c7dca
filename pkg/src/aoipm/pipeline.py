"""End-to-end train and test orchestration.

Training builds four artifacts: the weighted cluster knowledge base, default
control-chart parameters, the trained forecaster, and the run rule whose
anomaly trigger best matches the known failure moments.  Testing quantifies a
simulation, detects its change point, and rolls the forecaster forward from
there until the selected run rule fires, yielding a remaining-life estimate.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import aoi, hierarchy, lstm, quantify, spc
from .errors import AoipmError


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # induction
    min_cluster_size: int = 10
    attr_threshold: int = 20
    tuple_threshold: int = 200
    # hierarchies
    num_levels: int = 4
    base_bins: int = 10
    clamp: bool = True
    # control chart
    lam: float = 0.2
    L: float = 3.0
    n_baseline: int = 100
    two_sided: bool = False
    # forecaster
    learning_rate: float = 1e-2
    epochs: int = 200
    window: int = 30
    train_fraction: float = 0.7
    clip: float = 5.0
    hidden_size: int = 32
    batch_size: int = 256
    # remaining-life estimation
    horizon_cap: int = 300
    truth_mode: str = "file"  # or "endpoint"
    cycle_filter: int = 40

    def aoi_params(self):
        return aoi.AoiParams(
            min_cluster_size=self.min_cluster_size,
            attr_threshold=self.attr_threshold,
            tuple_threshold=self.tuple_threshold,
        )

    def train_config(self):
        return lstm.TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            window=self.window,
            train_fraction=self.train_fraction,
            seed=self.seed,
            clip=self.clip,
            hidden_size=self.hidden_size,
            batch_size=self.batch_size,
        )

    @staticmethod
    def from_json(text):
        data = json.loads(text)
        return PipelineConfig(**data)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class TrainedArtifacts:
    kb: aoi.KnowledgeBase
    hierarchies: list
    schemas: list
    model: object
    model_config: lstm.TrainConfig
    holdout_rmse: float
    wer_rule: spc.WerRule
    wer_table: list  # per rule: dict(rule, mae, mse, triggered, total)
    config: PipelineConfig


@dataclass
class RulReport:
    simulation_id: int
    change_point: int | None  # 0-based cycle index
    anomaly_at_real: int | None
    anomaly_at_forecast: int | None
    capped: bool
    predicted_rul: int | None  # cycles from the change point to the anomaly
    true_rul: int | None
    true_failure_index: int | None
    absolute_error: float | None


@dataclass
class EvaluationSummary:
    mae: float
    mse: float
    filtered_mae: float | None
    early_detection_rate: float
    evaluated: int
    no_change_point: int
    filtered_count: int


def effective_baseline(length, n_baseline):
    """Baseline window, shrunk to half the series when it is short."""
    return max(2, min(n_baseline, length // 2))


def build_hierarchies(train_sims, config, schemas=None, config_text=None):
    """Percentile hierarchies per retained attribute, honoring a config doc.

    Attributes declared in ``config_text`` use the declared trees; the rest
    are auto-built from pooled training values.
    """
    stacked = np.vstack([s for s in train_sims])
    num_attr = stacked.shape[1]
    declared = {}
    if config_text:
        for schema, h in hierarchy.parse_hierarchy_config(config_text, clamp=config.clamp):
            declared[schema.index] = (schema, h)
    hierarchies, out_schemas = [], []
    for a in range(num_attr):
        if a in declared:
            schema, h = declared[a]
        else:
            base = schemas[a] if schemas else hierarchy.AttributeSchema(name=f"s{a}", index=a)
            h = hierarchy.build_percentile_hierarchy(
                stacked[:, a], config.num_levels, config.base_bins,
                schema=base, clamp=config.clamp,
            )
            schema = h.schema
        hierarchies.append(h)
        out_schemas.append(schema)
    return hierarchies, out_schemas


def _series_analysis(series, config):
    """Baseline statistics, EWMA transform and change point for one series."""
    x = np.asarray(series, dtype=float)
    n_b = effective_baseline(x.size, config.n_baseline)
    mu0, sigma = spc.fit_baseline(x, n_b)
    sigma_g = spc.guarded_sigma(sigma)
    params = spc.EwmaParams(lam=config.lam, L=config.L, n=1, mu0=mu0, sigma=sigma_g)
    ewma = spc.ewma_transform(x, params)
    cp = spc.detect_change_point(ewma, params, start=n_b, two_sided=config.two_sided)
    return n_b, mu0, sigma_g, params, ewma, cp


def select_wer(train_series, config):
    """Pick the run rule whose trigger best matches the known failure cycles.

    Rules are evaluated on each validation series from its change point (the
    failure moment is the last cycle).  A rule that never triggers on a
    simulation is penalized with the full distance from its evaluation start
    to the failure.  Minimum MAE wins; ties break by MSE, then by the higher
    rule id.
    """
    per_rule = {rid: [] for rid in (1, 2, 3, 4)}
    triggered = {rid: 0 for rid in (1, 2, 3, 4)}
    for series in train_series:
        x = np.asarray(series, dtype=float)
        n_b, mu0, sigma_g, _, _, cp = _series_analysis(x, config)
        start = cp if cp is not None else n_b
        failure = x.size - 1
        for rid in (1, 2, 3, 4):
            rule = spc.WerRule(rule_id=rid)
            trig = spc.evaluate_wer(rule, x, mu0, sigma_g, start=start)
            if trig is None:
                per_rule[rid].append(float(failure - start))
            else:
                triggered[rid] += 1
                per_rule[rid].append(float(abs(trig - failure)))
    table = []
    for rid in (1, 2, 3, 4):
        errs = np.asarray(per_rule[rid])
        table.append(
            {
                "rule": rid,
                "mae": float(errs.mean()),
                "mse": float(np.mean(errs ** 2)),
                "triggered": triggered[rid],
                "total": len(train_series),
            }
        )
    best = min(table, key=lambda r: (r["mae"], r["mse"], -r["rule"]))
    return spc.WerRule(rule_id=best["rule"]), table


def train_pipeline(train_sims, config, schemas=None, hierarchy_config_text=None):
    """Run the full training phase over preprocessed simulations.

    ``train_sims`` is a list of (cycles, attributes) arrays.  Returns the four
    artifacts plus the training quantification series.
    """
    checksum = aoi.checksum_text(config.to_json() + (hierarchy_config_text or ""))
    hierarchies, out_schemas = build_hierarchies(
        train_sims, config, schemas=schemas, config_text=hierarchy_config_text
    )
    rows = np.vstack([s for s in train_sims])
    kb = aoi.run_aoi(rows, hierarchies, config.aoi_params(), config_checksum=checksum)
    matcher = quantify.Matcher(kb, hierarchies)
    train_series = [
        quantify.quantify_simulation(kb, sim, hierarchies, simulation_id=i, matcher=matcher).weights
        for i, sim in enumerate(train_sims, start=1)
    ]
    model, rmse = lstm.train(train_series, config.train_config())
    rule, table = select_wer(train_series, config)
    artifacts = TrainedArtifacts(
        kb=kb,
        hierarchies=hierarchies,
        schemas=out_schemas,
        model=model,
        model_config=config.train_config(),
        holdout_rmse=rmse,
        wer_rule=rule,
        wer_table=table,
        config=config,
    )
    return artifacts, train_series


def estimate_rul(series, artifacts, simulation_id=0, true_rul=None):
    """Change point, anomaly moment and remaining-life estimate for one series.

    Observation is treated as ending at the change point: the forecaster
    extends the series from there until the selected run rule completes.
    """
    config = artifacts.config
    x = np.asarray(series, dtype=float)
    n_b, mu0, sigma_g, _, _, cp = _series_analysis(x, config)
    failure_idx = None
    if true_rul is not None:
        failure_idx = x.size - 1 + int(true_rul)
    if cp is None:
        return RulReport(
            simulation_id=simulation_id,
            change_point=None,
            anomaly_at_real=None,
            anomaly_at_forecast=None,
            capped=False,
            predicted_rul=None,
            true_rul=true_rul,
            true_failure_index=failure_idx,
            absolute_error=None,
        )
    rule = artifacts.wer_rule
    anomaly_real = spc.evaluate_wer(rule, x, mu0, sigma_g, start=cp)
    observed = x[: cp + 1]
    if spc.evaluate_wer(rule, observed, mu0, sigma_g, start=cp) is not None:
        anomaly = cp
        capped = False
    else:
        seed = list(observed)
        if len(seed) < artifacts.model.window:
            # left-pad very short observations; predictions still count from cp
            seed = [seed[0]] * (artifacts.model.window - len(seed)) + seed

        def stop(ext):
            arr = np.asarray(ext)
            return (
                spc.evaluate_wer(rule, arr, mu0, sigma_g, start=arr.size - 1)
                is not None
            )

        result = lstm.forecast(artifacts.model, seed, stop, horizon_cap=config.horizon_cap)
        anomaly = cp + len(result.values)
        capped = result.capped
    predicted_rul = anomaly - cp
    err = None
    if failure_idx is not None:
        err = float(abs(anomaly - failure_idx))
    return RulReport(
        simulation_id=simulation_id,
        change_point=cp,
        anomaly_at_real=anomaly_real,
        anomaly_at_forecast=anomaly,
        capped=capped,
        predicted_rul=predicted_rul,
        true_rul=true_rul,
        true_failure_index=failure_idx,
        absolute_error=err,
    )


def evaluate(reports, cycle_filter=40):
    """Aggregate error and detection statistics over per-simulation reports."""
    errors, filtered, early, with_truth = [], [], 0, 0
    no_cp = 0
    for r in reports:
        if r.change_point is None:
            no_cp += 1
            continue
        if r.true_failure_index is not None:
            with_truth += 1
            if r.change_point < r.true_failure_index:
                early += 1
        if r.absolute_error is None:
            continue
        errors.append(r.absolute_error)
        if r.change_point + 1 > cycle_filter:  # 1-based cycle number
            filtered.append(r.absolute_error)
    errors = np.asarray(errors) if errors else np.asarray([np.nan])
    summary = EvaluationSummary(
        mae=float(np.mean(errors)),
        mse=float(np.mean(errors ** 2)),
        filtered_mae=float(np.mean(filtered)) if filtered else None,
        early_detection_rate=(early / with_truth) if with_truth else 0.0,
        evaluated=int(np.sum(np.isfinite(errors))),
        no_change_point=no_cp,
        filtered_count=len(filtered),
    )
    return summary


# ---------------------------------------------------------------------------
# Artifact persistence
# ---------------------------------------------------------------------------


def save_artifacts(artifacts, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "kb.txt"), "w") as fh:
        fh.write(aoi.serialize_kb(artifacts.kb))
    with open(os.path.join(out_dir, "hierarchies.txt"), "w") as fh:
        fh.write(
            hierarchy.serialize_hierarchy_config(
                list(zip(artifacts.schemas, artifacts.hierarchies))
            )
        )
    lstm.save_model(artifacts.model, artifacts.model_config, os.path.join(out_dir, "model.json"))
    with open(os.path.join(out_dir, "wer.txt"), "w") as fh:
        fh.write(render_wer_table(artifacts.wer_rule, artifacts.wer_table))
    with open(os.path.join(out_dir, "pipeline_config.json"), "w") as fh:
        fh.write(artifacts.config.to_json())
    with open(os.path.join(out_dir, "holdout_rmse.txt"), "w") as fh:
        fh.write(f"{artifacts.holdout_rmse!r}\n")


def load_artifacts(out_dir):
    with open(os.path.join(out_dir, "kb.txt")) as fh:
        kb = aoi.deserialize_kb(fh.read())
    with open(os.path.join(out_dir, "hierarchies.txt")) as fh:
        pairs = hierarchy.parse_hierarchy_config(fh.read())
    schemas = [p[0] for p in pairs]
    hierarchies = [p[1] for p in pairs]
    model, model_config = lstm.load_model(os.path.join(out_dir, "model.json"))
    with open(os.path.join(out_dir, "wer.txt")) as fh:
        rule, table = parse_wer_table(fh.read())
    with open(os.path.join(out_dir, "pipeline_config.json")) as fh:
        config = PipelineConfig.from_json(fh.read())
    with open(os.path.join(out_dir, "holdout_rmse.txt")) as fh:
        rmse = float(fh.read().strip())
    return TrainedArtifacts(
        kb=kb,
        hierarchies=hierarchies,
        schemas=schemas,
        model=model,
        model_config=model_config,
        holdout_rmse=rmse,
        wer_rule=rule,
        wer_table=table,
        config=config,
    )


def render_wer_table(rule, table):
    lines = ["# aoipm wer selection v1", f"selected {rule.rule_id}"]
    for row in table:
        lines.append(
            f"rule {row['rule']} mae {row['mae']!r} mse {row['mse']!r} "
            f"triggered {row['triggered']}/{row['total']}"
        )
    return "\n".join(lines) + "\n"


def parse_wer_table(text):
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != "# aoipm wer selection v1":
        raise AoipmError("not a wer selection file")
    rule = spc.WerRule(rule_id=int(lines[1].split()[1]))
    table = []
    for line in lines[2:]:
        parts = line.split()
        trig, total = parts[7].split("/")
        table.append(
            {
                "rule": int(parts[1]),
                "mae": float(parts[3]),
                "mse": float(parts[5]),
                "triggered": int(trig),
                "total": int(total),
            }
        )
    return rule, table


def render_evaluation(reports, summary, wer_table=None):
    """Human/machine readable evaluation report with a per-rule error table."""
    lines = ["unit\tchange_point\tanomaly\tpredicted_rul\ttrue_rul\tabs_error\tcapped"]
    for r in reports:
        cp = "-" if r.change_point is None else r.change_point + 1
        an = "-" if r.anomaly_at_forecast is None else r.anomaly_at_forecast + 1
        pr = "-" if r.predicted_rul is None else r.predicted_rul
        tr = "-" if r.true_rul is None else r.true_rul
        ae = "-" if r.absolute_error is None else f"{r.absolute_error:g}"
        lines.append(f"{r.simulation_id}\t{cp}\t{an}\t{pr}\t{tr}\t{ae}\t{int(r.capped)}")
    lines.append("")
    lines.append("# summary")
    lines.append(f"mae {summary.mae!r}")
    lines.append(f"mse {summary.mse!r}")
    fm = "-" if summary.filtered_mae is None else repr(summary.filtered_mae)
    lines.append(f"filtered_mae {fm} over {summary.filtered_count} simulations")
    lines.append(f"early_detection_rate {summary.early_detection_rate!r}")
    lines.append(f"evaluated {summary.evaluated} no_change_point {summary.no_change_point}")
    if wer_table:
        lines.append("")
        lines.append("# rule\tMAE\tMSE")
        for row in wer_table:
            lines.append(f"WER {row['rule']}\t{row['mae']:.2f}\t{row['mse']:.2f}")
    return "\n".join(lines) + "\n"
