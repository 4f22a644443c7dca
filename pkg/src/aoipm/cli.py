"""Command line entry points.

Subcommands mirror the workflow: ``make-data`` (synthetic dataset),
``train``, ``quantify``, ``detect``, ``rul``, ``evaluate`` and
``export-plots``.  Delimited outputs land under the output directory with
rendered figures alongside them.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import dataio, pipeline, plots, quantify, spc, synth


def _add_common(p):
    p.add_argument("--config", help="pipeline config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--data-dir", default="data", help="directory with the FD files")
    p.add_argument("--out-dir", default="out", help="directory for artifacts and reports")
    p.add_argument("--tag", default="FD001", help="dataset tag (train_<tag>.txt etc.)")


def _load_config(args):
    if args.config:
        with open(args.config) as fh:
            cfg = pipeline.PipelineConfig.from_json(fh.read())
    else:
        cfg = pipeline.PipelineConfig()
    if args.seed is not None:
        cfg = pipeline.PipelineConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def _artifact_dir(args):
    return os.path.join(args.out_dir, "artifacts")


def _load_train(args):
    ds = dataio.load_cmapss(os.path.join(args.data_dir, f"train_{args.tag}.txt"))
    return dataio.preprocess_train(ds)


def _load_test(args, retained):
    ds = dataio.load_cmapss(os.path.join(args.data_dir, f"test_{args.tag}.txt"))
    return dataio.preprocess_test(ds, retained)


def _load_retained(args):
    with open(os.path.join(_artifact_dir(args), "retained.txt")) as fh:
        return tuple(int(tok) for tok in fh.read().split())


def cmd_make_data(args):
    cfg = synth.SynthConfig(seed=args.seed if args.seed is not None else 7)
    paths = synth.write_fd_files(cfg, args.data_dir, tag=args.tag)
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    train_ds, retained = _load_train(args)
    sims = [s.values for s in train_ds.simulations]
    hier_text = None
    if args.hierarchy_config:
        with open(args.hierarchy_config) as fh:
            hier_text = fh.read()
    artifacts, train_series = pipeline.train_pipeline(
        sims, cfg, hierarchy_config_text=hier_text
    )
    adir = _artifact_dir(args)
    pipeline.save_artifacts(artifacts, adir)
    with open(os.path.join(adir, "retained.txt"), "w") as fh:
        fh.write(" ".join(str(c) for c in retained) + "\n")
    print(f"knowledge base: {len(artifacts.kb.clusters)} clusters, "
          f"{len(artifacts.kb.residual.rows)} residual rows")
    print(f"holdout RMSE: {artifacts.holdout_rmse:.6f}")
    print(f"selected rule: WER {artifacts.wer_rule.rule_id}")
    print(f"artifacts written to {adir}")
    return 0


def _quantify_split(args, artifacts, split):
    retained = _load_retained(args)
    if split == "train":
        ds, _ = _load_train(args)
    else:
        ds = _load_test(args, retained)
    matcher = quantify.Matcher(artifacts.kb, artifacts.hierarchies)
    out = []
    for sim in ds.simulations:
        series = quantify.quantify_simulation(
            artifacts.kb, sim.values, artifacts.hierarchies,
            simulation_id=sim.unit_id, matcher=matcher,
        )
        out.append(series)
    return out


def cmd_quantify(args):
    artifacts = pipeline.load_artifacts(_artifact_dir(args))
    series_list = _quantify_split(args, artifacts, args.split)
    qdir = os.path.join(args.out_dir, f"quantification_{args.split}")
    os.makedirs(qdir, exist_ok=True)
    for series in series_list:
        base = os.path.join(qdir, f"unit_{series.simulation_id:03d}")
        with open(base + ".tsv", "w") as fh:
            fh.write(quantify.export_series(series))
        if series.simulation_id <= args.plot_units:
            plots.plot_quantification(
                series.weights, base + ".png",
                title=f"Quantification, unit {series.simulation_id}",
            )
    print(f"wrote {len(series_list)} series to {qdir}")
    return 0


def cmd_detect(args):
    artifacts = pipeline.load_artifacts(_artifact_dir(args))
    series_list = _quantify_split(args, artifacts, args.split)
    ddir = os.path.join(args.out_dir, f"detect_{args.split}")
    os.makedirs(ddir, exist_ok=True)
    cfg = artifacts.config
    lines = ["unit\tchange_point"]
    for series in series_list:
        x = np.asarray(series.weights)
        n_b, mu0, sigma_g, params, ewma, cp = pipeline._series_analysis(x, cfg)
        base = os.path.join(ddir, f"unit_{series.simulation_id:03d}")
        with open(base + ".tsv", "w") as fh:
            fh.write(spc.export_chart(x, ewma, params))
        if series.simulation_id <= args.plot_units:
            plots.plot_ewma_chart(
                x, ewma, params, cp, base + ".png",
                title=f"EWMA chart, unit {series.simulation_id}",
            )
        lines.append(
            f"{series.simulation_id}\t{'-' if cp is None else cp + 1}"
        )
    with open(os.path.join(ddir, "change_points.tsv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote charts and change points to {ddir}")
    return 0


def _run_rul(args, artifacts):
    retained = _load_retained(args)
    ds = _load_test(args, retained)
    truth = None
    truth_path = os.path.join(args.data_dir, f"RUL_{args.tag}.txt")
    if artifacts.config.truth_mode == "file" and os.path.exists(truth_path):
        truth = dataio.load_rul_truth(truth_path, num_units=len(ds.simulations))
    matcher = quantify.Matcher(artifacts.kb, artifacts.hierarchies)
    reports, series_by_unit = [], {}
    for pos, sim in enumerate(ds.simulations):
        series = quantify.quantify_simulation(
            artifacts.kb, sim.values, artifacts.hierarchies,
            simulation_id=sim.unit_id, matcher=matcher,
        )
        if artifacts.config.truth_mode == "endpoint":
            true_rul = 0
        else:
            true_rul = truth[pos] if truth else None
        reports.append(
            pipeline.estimate_rul(
                series.weights, artifacts, simulation_id=sim.unit_id, true_rul=true_rul
            )
        )
        series_by_unit[sim.unit_id] = series.weights
    return reports, series_by_unit


def cmd_rul(args):
    artifacts = pipeline.load_artifacts(_artifact_dir(args))
    reports, series_by_unit = _run_rul(args, artifacts)
    os.makedirs(args.out_dir, exist_ok=True)
    summary = pipeline.evaluate(reports, cycle_filter=artifacts.config.cycle_filter)
    text = pipeline.render_evaluation(reports, summary, wer_table=artifacts.wer_table)
    out_path = os.path.join(args.out_dir, "rul_report.tsv")
    with open(out_path, "w") as fh:
        fh.write(text)
    for r in reports[: args.plot_units]:
        if r.change_point is None:
            continue
        obs = series_by_unit[r.simulation_id][: r.change_point + 1]
        plots.plot_rul_forecast(
            obs, [], r.anomaly_at_forecast,
            os.path.join(args.out_dir, f"rul_unit_{r.simulation_id:03d}.png"),
            title=f"RUL, unit {r.simulation_id}",
        )
    print(f"wrote {out_path}")
    return 0


def cmd_evaluate(args):
    artifacts = pipeline.load_artifacts(_artifact_dir(args))
    reports, _ = _run_rul(args, artifacts)
    summary = pipeline.evaluate(reports, cycle_filter=artifacts.config.cycle_filter)
    os.makedirs(args.out_dir, exist_ok=True)
    text = pipeline.render_evaluation(reports, summary, wer_table=artifacts.wer_table)
    out_path = os.path.join(args.out_dir, "evaluation.tsv")
    with open(out_path, "w") as fh:
        fh.write(text)
    errors = [r.absolute_error for r in reports if r.absolute_error is not None]
    if errors:
        plots.plot_error_histogram(errors, os.path.join(args.out_dir, "evaluation_errors.png"))
    print(text.split("# summary")[1])
    print(f"wrote {out_path}")
    return 0


def cmd_export_plots(args):
    artifacts = pipeline.load_artifacts(_artifact_dir(args))
    series_list = _quantify_split(args, artifacts, args.split)
    pdir = os.path.join(args.out_dir, "figures")
    os.makedirs(pdir, exist_ok=True)
    cfg = artifacts.config
    count = 0
    for series in series_list[: args.plot_units]:
        x = np.asarray(series.weights)
        _, _, _, params, ewma, cp = pipeline._series_analysis(x, cfg)
        uid = series.simulation_id
        plots.plot_quantification(
            x, os.path.join(pdir, f"quantification_unit_{uid:03d}.png"),
            title=f"Quantification, unit {uid}",
        )
        plots.plot_ewma_chart(
            x, ewma, params, cp, os.path.join(pdir, f"ewma_unit_{uid:03d}.png"),
            title=f"EWMA chart, unit {uid}",
        )
        count += 2
    print(f"wrote {count} figures to {pdir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aoipm",
        description="Generalization-based predictive maintenance toolchain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate a synthetic FD-format dataset")
    _add_common(p)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("train", help="build all training artifacts")
    _add_common(p)
    p.add_argument("--hierarchy-config", help="declarative hierarchy/weights document")
    p.set_defaults(func=cmd_train)

    for name, fn, needs_split in (
        ("quantify", cmd_quantify, True),
        ("detect", cmd_detect, True),
        ("rul", cmd_rul, False),
        ("evaluate", cmd_evaluate, False),
        ("export-plots", cmd_export_plots, True),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        if needs_split:
            p.add_argument("--split", choices=("train", "test"), default="test")
        p.add_argument("--plot-units", type=int, default=3,
                       help="render figures for the first N units")
        p.set_defaults(func=fn)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
