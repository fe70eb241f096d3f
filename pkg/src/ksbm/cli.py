"""Command-line entry points for the oscillator community toolkit.

Subcommands: simulate, signatures, cluster, pipeline, ingest-spikes,
figures.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path as FsPath

import numpy as np

from . import clustering, dynamics, experiments, signatures, spikes

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_preset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", default="standard",
                        choices=sorted(experiments.PRESETS) + ["custom"])
    parser.add_argument("--config", help="TOML config file; overrides --preset")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--outdir", required=True)
    parser.add_argument("--brownian-b", type=float, default=None)


def _resolve_config(args) -> experiments.ExperimentConfig:
    if args.config:
        config = experiments.load_config(args.config)
    else:
        config = experiments.ExperimentConfig.from_preset(args.preset)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "brownian_b", None) is not None:
        overrides["brownian_b"] = args.brownian_b
    overrides["outdir"] = args.outdir
    if overrides:
        import dataclasses

        config = dataclasses.replace(config, **overrides)
    return config


def _cmd_pipeline(args) -> int:
    config = _resolve_config(args)
    result = experiments.run_experiment(config)
    if args.figures:
        experiments.emit_figures(result)
    print(json.dumps(result.report, indent=2))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _resolve_config(args)
    import dataclasses

    config = dataclasses.replace(config, transforms=[], stats=[])
    result = experiments.run_experiment(config)
    print(f"wrote trajectory for {config.model} (seed {config.seed}) "
          f"to {config.outdir}")
    return EXIT_OK


def _read_series_csv(path) -> signatures.Path:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    if data.shape[1] < 2:
        raise experiments.ConfigError("series CSV needs a time column and values")
    return signatures.Path(data[:, 0], data[:, 1:])


def _cmd_signatures(args) -> int:
    path = _read_series_csv(args.series)
    g = signatures.transform(path, args.transform)
    if args.t_trans is not None:
        bounds = dynamics.RegimeBoundaries(args.t_trans, args.t_ss)
        regime = signatures.regime_split(path, bounds, args.ss_horizon,
                                         stat=args.stat, f=args.transform)
        out = FsPath(args.out)
        written = []
        for win, mat in (("clusterization", regime.clusterization),
                         ("transient", regime.transient),
                         ("steady_state", regime.steady_state)):
            if mat is not None:
                target = out.parent / f"{out.stem}_{win}"
                signatures.save_matrix(np.real(mat), target,
                                       transform_name=args.transform, window=win)
                written.append(str(target.with_suffix(".csv")))
        print("\n".join(written))
        return EXIT_OK
    if args.stat == "lead":
        mat = signatures.lead_matrix(g)
    else:
        mat = signatures.covariance_matrix(g)
    signatures.save_matrix(np.real(mat), FsPath(args.out).with_suffix(""),
                           transform_name=args.transform, window="full")
    print(str(FsPath(args.out).with_suffix(".csv")))
    return EXIT_OK


def _cmd_cluster(args) -> int:
    matrix = np.genfromtxt(args.matrix, delimiter=",", ndmin=2)
    if matrix.shape[0] != matrix.shape[1]:
        raise experiments.ConfigError("matrix CSV must be square")
    if args.method == "sce":
        est = clustering.sce(matrix, stabilizer=args.stabilizer,
                             mode=args.representative)
        if args.prune_to is not None and args.prune_to < est.n_communities:
            D = clustering.distance_matrix(matrix, args.representative)
            est = clustering.prune(est, D, args.prune_to, matrix, args.stabilizer)
        labels = est.labels
    elif args.method == "kmeans":
        vecs = clustering.representative_vectors(matrix, args.representative)
        labels = clustering.kmeans_cluster(vecs, args.k, args.seed)
    else:
        D = clustering.distance_matrix(matrix, args.representative)
        labels = clustering.hierarchical_cluster(D, args.linkage, args.k)
    clustering.save_labels(labels, args.out)
    if args.truth:
        truth = np.genfromtxt(args.truth, delimiter=",", skip_header=1, ndmin=2)[:, 1]
        value = clustering.agreement(truth.astype(int), labels)
        print(f"agreement {value:.4f}")
    print(f"k {int(np.unique(labels).size)}")
    return EXIT_OK


def _cmd_ingest_spikes(args) -> int:
    config = spikes.SpikeIngestConfig(bin_width=args.bin_width, tau=args.tau)
    path, units = spikes.ingest_spikes(args.spikes, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("time," + ",".join(units) + "\n")
        for k in range(path.times.size):
            row = ",".join(repr(float(v)) for v in path.values[k])
            fh.write(f"{path.times[k]!r},{row}\n")
    print(f"wrote {path.times.size} samples x {len(units)} units to {args.out}")
    return EXIT_OK


def _cmd_figures(args) -> int:
    outdir = FsPath(args.bundle)
    report_path = outdir / "report.json"
    if not report_path.exists():
        raise experiments.ConfigError(f"no report.json under {outdir}")
    report = json.loads(report_path.read_text(encoding="utf-8"))
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for key in report.get("matrices", {}):
        csv_path = outdir / f"{key}.csv"
        if not csv_path.exists():
            continue
        mat = np.genfromtxt(csv_path, delimiter=",", ndmin=2)
        fig, ax = plt.subplots(figsize=(4, 4))
        vmax = float(np.abs(mat).max()) or 1.0
        ax.imshow(mat, cmap="gray", vmin=-vmax, vmax=vmax)
        ax.set_title(key)
        target = outdir / f"{key}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(str(target))
    print("\n".join(written) if written else "no matrices found")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksbm",
                                     description="oscillator community toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full experiment pipeline")
    _add_preset_args(p)
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("simulate", help="integrate a model and write the trajectory")
    _add_preset_args(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("signatures", help="lead/covariance matrices of a series CSV")
    p.add_argument("--series", required=True, help="CSV: time column + value columns")
    p.add_argument("--transform", default="sin",
                   choices=["identity", "sin", "exp_i"])
    p.add_argument("--stat", default="lead", choices=["lead", "cov"])
    p.add_argument("--t-trans", type=float, default=None)
    p.add_argument("--t-ss", type=float, default=None)
    p.add_argument("--ss-horizon", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_signatures)

    p = sub.add_parser("cluster", help="community detection on a matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--method", default="sce",
                   choices=["sce", "kmeans", "hierarchical"])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--linkage", default="average",
                   choices=["single", "average", "complete"])
    p.add_argument("--stabilizer", type=float, default=0.0)
    p.add_argument("--representative", default="rowcol",
                   choices=["rowcol", "column"])
    p.add_argument("--prune-to", type=int, default=None)
    p.add_argument("--truth", default=None, help="labels CSV for agreement")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("ingest-spikes", help="bin and filter a spike CSV")
    p.add_argument("--spikes", required=True)
    p.add_argument("--bin-width", type=float, default=0.002)
    p.add_argument("--tau", type=float, default=0.040)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest_spikes)

    p = sub.add_parser("figures", help="draw heatmaps for a pipeline bundle")
    p.add_argument("--bundle", required=True, help="pipeline output directory")
    p.set_defaults(func=_cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (dynamics.IntegrationDivergedError, dynamics.NoPhaseLockError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
