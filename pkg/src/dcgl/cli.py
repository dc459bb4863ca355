"""Command-line entry point.

Subcommands: ``run`` (train + readout + reports), ``ablate`` (run a named
feature/cluster-loss variant), ``eval`` (score two label files), ``plot``
(similarity heatmap / adjacency image from saved matrices), ``gen-blobs``
(synthetic benchmark data). Exit codes: 0 success, 2 usage or config error,
3 data error, 4 numerical failure.

Flag values override config-file values, which override defaults; the fully
resolved config is echoed into the run directory. DCGL_THREADS caps torch's
internal parallelism.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np
import torch

from . import evaluation, trainer
from .data_io import (
    RunConfig,
    l2_normalize,
    load_config,
    load_dataset,
    load_matrix,
    make_blobs,
    save_config,
    save_matrix,
)
from .errors import ConfigError, DataError, NumericalError
from .graph import load_graph, save_graph

MEMORY_GUARD_N = 20000

VARIANTS = {
    "wF": {"disable_FL": True},
    "wC": {"disable_CL": True},
    "wFg": {"disable_FL_guidance": True},
    "wCg": {"disable_CL_guidance": True},
    "wall": {"disable_FL_guidance": True, "disable_CL_guidance": True},
}

_OVERRIDE_FLAGS = {
    # dest -> config field
    "c": "c", "seed": "seed", "k_init": "k_init", "t": "t", "iter": "iter",
    "alpha": "alpha", "beta": "beta", "gamma": "gamma", "tau": "tau",
    "lam": "lam", "latent_dim": "l", "hidden": "hidden",
    "hidden_ae": "hidden_ae", "lr": "lr",
}


def _add_run_flags(p):
    p.add_argument("--data", required=True, help="dataset file (csv or binary container)")
    p.add_argument("--format", choices=("csv", "bin"), help="dataset format (default: from extension)")
    p.add_argument("--labeled", action="store_true", help="csv carries a trailing label column")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--force", action="store_true", help="skip the dense-memory guard")
    p.add_argument("--c", type=int, help="cluster count")
    p.add_argument("--seed", type=int)
    p.add_argument("--k-init", dest="k_init", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--iter", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--hidden-ae", dest="hidden_ae", type=int)
    p.add_argument("--lr", type=float)


def _build_parser():
    parser = argparse.ArgumentParser(prog="dcgl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train on a dataset and write a run directory")
    _add_run_flags(run)

    ablate = sub.add_parser("ablate", help="run a named ablation variant")
    _add_run_flags(ablate)
    ablate.add_argument("--variant", required=True, choices=sorted(VARIANTS))

    ev = sub.add_parser("eval", help="score predicted labels against ground truth")
    ev.add_argument("--true", dest="true_path", required=True)
    ev.add_argument("--pred", dest="pred_path", required=True)

    plot = sub.add_parser("plot", help="render heatmap/adjacency images")
    plot.add_argument("--data", help="matrix file for the similarity heatmap")
    plot.add_argument("--format", choices=("csv", "bin"))
    plot.add_argument("--graph", help="graph container for the adjacency image")
    plot.add_argument("--labels", required=True, help="label csv ordering the rows")
    plot.add_argument("--out", required=True)
    plot.add_argument("--percentile", type=float, default=90.0)

    gen = sub.add_parser("gen-blobs", help="generate synthetic Gaussian clusters")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--c", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--sigma", type=float, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--format", choices=("csv", "bin"), default="bin")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for dest, field in _OVERRIDE_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, field, value)
    if cfg.c < 2:
        raise ConfigError("cluster count c is required (config file or --c)")
    return cfg.validate()


def _guess_format(path, explicit):
    if explicit:
        return explicit
    return "csv" if str(path).endswith(".csv") else "bin"


def _config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_losses_csv(path, history):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(trainer.HISTORY_COLUMNS) + "\n")
        for row in history:
            epoch, l_ae, l_fl, l_gl, l_cl, total, k = (float(v) for v in row)
            fh.write(
                f"{int(epoch)},{l_ae!r},{l_fl!r},{l_gl!r},{l_cl!r},{total!r},{int(k)}\n"
            )


def _write_labels_csv(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def read_labels(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except FileNotFoundError:
        raise DataError(f"label file not found: {path}")
    out = []
    for i, ln in enumerate(lines, start=1):
        if not ln:
            continue
        try:
            out.append(int(ln))
        except ValueError:
            raise DataError(f"malformed label at line {i}: {ln!r}")
    if not out:
        raise DataError("no labels")
    return np.asarray(out, dtype=np.int64)


def cmd_run(args, extra_flags: dict | None = None) -> int:
    cfg = resolve_config(args)
    for key, value in (extra_flags or {}).items():
        setattr(cfg, key, value)
    data = load_dataset(args.data, _guess_format(args.data, args.format),
                        has_labels=args.labeled, c=cfg.c)
    if data.n > MEMORY_GUARD_N and not args.force:
        raise ConfigError(
            f"n={data.n} exceeds {MEMORY_GUARD_N}; a dense graph costs "
            f"{8 * data.n * data.n} bytes per matrix. Pass --force to proceed."
        )
    data = l2_normalize(data)

    os.makedirs(args.out, exist_ok=True)
    plots_dir = os.path.join(args.out, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    save_config(cfg, os.path.join(args.out, "config.json"))

    result = trainer.train(data, cfg, dump_dir=args.out)
    print(
        f"run finished: {result.stop_epoch} epochs, "
        f"{result.negatives_per_anchor} feature-level negatives per anchor, "
        f"{result.wall_time:.2f}s",
        file=sys.stderr,
    )

    _write_losses_csv(os.path.join(args.out, "losses.csv"), result.history)
    _write_labels_csv(os.path.join(args.out, "labels.csv"), result.labels)
    save_graph(os.path.join(args.out, "graph_final.bin"), result.graph)
    trainer.save_checkpoint(result.state, cfg, os.path.join(args.out, "state_final.bin"))

    order = data.labels if data.labels is not None else result.labels
    H1 = trainer.structural_embedding(data, cfg, result.state)
    evaluation.plot_similarity_heatmap(
        H1, order, os.path.join(plots_dir, "similarity_heatmap.png")
    )
    evaluation.plot_adjacency(result.graph, order, os.path.join(plots_dir, "adjacency.png"))

    if result.metrics is not None:
        payload = {
            "acc": result.metrics["acc"], "nmi": result.metrics["nmi"],
            "n": data.n, "c": data.c, "seed": cfg.seed,
            "config_hash": _config_hash(cfg),
            "torch_threads": torch.get_num_threads(),
        }
        with open(os.path.join(args.out, "metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(json.dumps({"acc": payload["acc"], "nmi": payload["nmi"]}))
    return 0


def cmd_ablate(args) -> int:
    return cmd_run(args, extra_flags=VARIANTS[args.variant])


def cmd_eval(args) -> int:
    y_true = read_labels(args.true_path)
    y_pred = read_labels(args.pred_path)
    print(json.dumps({
        "acc": evaluation.accuracy(y_true, y_pred),
        "nmi": evaluation.nmi(y_true, y_pred),
    }))
    return 0


def cmd_plot(args) -> int:
    if args.data is None and args.graph is None:
        raise ConfigError("plot needs --data and/or --graph")
    labels = read_labels(args.labels)
    os.makedirs(args.out, exist_ok=True)
    if args.data is not None:
        X, _ = load_matrix(args.data, _guess_format(args.data, args.format))
        if X.shape[0] != labels.size:
            raise DataError("labels length does not match the matrix")
        evaluation.plot_similarity_heatmap(
            X, labels, os.path.join(args.out, "similarity_heatmap.png"),
            percentile=args.percentile,
        )
    if args.graph is not None:
        graph = load_graph(args.graph)
        if graph.W.shape[0] != labels.size:
            raise DataError("labels length does not match the graph")
        evaluation.plot_adjacency(graph, labels, os.path.join(args.out, "adjacency.png"))
    return 0


def cmd_gen_blobs(args) -> int:
    data = make_blobs(args.n, args.c, args.m, args.sigma, args.seed)
    if args.format == "bin":
        save_matrix(args.out, data.X, labels=data.labels)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row, label in zip(data.X, data.labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    print(f"wrote {args.n}x{args.m} samples, c={args.c}, to {args.out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    threads = os.environ.get("DCGL_THREADS")
    if threads:
        try:
            torch.set_num_threads(int(threads))
        except ValueError:
            print(f"dcgl: invalid DCGL_THREADS value {threads!r}", file=sys.stderr)
            return 2
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run, "ablate": cmd_ablate, "eval": cmd_eval,
        "plot": cmd_plot, "gen-blobs": cmd_gen_blobs,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"dcgl: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"dcgl: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"dcgl: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
