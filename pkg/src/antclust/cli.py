"""Command-line front end.

Subcommands: prepare (KDD CSV -> normalized splits), synth (synthetic item
generation), cluster (single clustering run on an item CSV), run-a
(whole-set protocol), run-b (batched protocol), render (positions CSV ->
PGM). Exit codes: 0 ok, 1 configuration error, 2 data error, 3 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as exp
from .errors import ConfigError, DataError, InternalError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage errors through the exit-code map
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="antclust",
                     description="Ant-colony clustering with toroidal k-NN classification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    def run_opts(p):
        p.add_argument("--steps", type=int, help="simulation steps (t_max)")
        p.add_argument("--grid", help="override grid size, e.g. 57x57")
        p.add_argument("--ants", type=int, help="override ant count")
        p.add_argument("--k", type=int, help="k-NN neighbor count (odd)")
        p.add_argument("--placement", choices=exp.PLACEMENT_MODES)
        p.add_argument("--snapshots",
                       help="'geometric' or comma-separated step numbers")
        p.add_argument("--vote-rule", dest="vote_rule",
                       choices=("strict", "lenient"))

    p = sub.add_parser("prepare", help="normalize and split a KDD CSV")
    common(p)
    p.add_argument("--data", help="raw KDD connection CSV (label field last)")
    p.add_argument("--features", choices=("full", "reduced"))

    p = sub.add_parser("synth", help="generate synthetic Gaussian class clusters")
    common(p)
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--marker-fraction", dest="marker_fraction", type=float)

    p = sub.add_parser("cluster", help="single clustering run over an item CSV")
    common(p)
    run_opts(p)
    p.add_argument("--items", help="item CSV (id, features..., class[, role])")

    p = sub.add_parser("run-a", help="whole-set protocol: one run, all items")
    common(p)
    run_opts(p)
    p.add_argument("--train", help="prepared marker CSV")
    p.add_argument("--test", help="prepared test CSV")

    p = sub.add_parser("run-b", help="batched protocol: markers + test slices")
    common(p)
    run_opts(p)
    p.add_argument("--train", help="prepared marker CSV")
    p.add_argument("--test", help="prepared test CSV")
    p.add_argument("--batch-size", dest="batch_size", type=int)

    p = sub.add_parser("render", help="re-render a positions CSV as PGM maps")
    common(p)
    p.add_argument("--positions", required=True)
    p.add_argument("--grid", required=True, help="grid size the CSV came from, WxH")
    p.add_argument("--classes", type=int, default=5)

    return parser


def _resolve(args: argparse.Namespace, **extra) -> exp.ExperimentConfig:
    file_values = exp.load_config_file(args.config) if args.config else None
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config") and v is not None}
    overrides.update(extra)
    return exp.resolve_config(file_values, **overrides)


def cmd_prepare(args) -> int:
    cfg = _resolve(args)
    summary = exp.prepare_splits(cfg, Path(cfg.out))
    print(f"prepared {summary['train_size']} train / {summary['test_size']} test "
          f"records ({summary['features']} features) in {cfg.out}")
    return 0


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    features, labels = exp.generate_synthetic(
        classes=cfg.classes, per_class=cfg.per_class, dims=cfg.dims,
        separation=cfg.separation, seed=cfg.seed)
    roles = exp.synthetic_roles(labels, cfg.marker_fraction)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    exp.write_synth_csv(out / "items.csv", features, labels, roles)
    print(f"wrote {len(labels)} items ({cfg.classes} classes) to {out / 'items.csv'}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _resolve(args, mode="synthetic")
    if not cfg.items:
        raise ConfigError("cluster needs --items")
    items = exp.load_items_csv(cfg.items)
    result = exp.run_clustering(items, cfg, cfg.seed)
    entry = exp._batch_entry(0, items, result)
    report = exp.RunReport(config=cfg.to_dict(), batches=[entry],
                           aggregate=result.report.to_dict() if result.report else None,
                           timings={"total_s": result.elapsed})
    exp.export_artifacts(Path(cfg.out), result.snapshots, report,
                         pheromone=exp.field_2d(result.state),
                         predictions=result.predictions)
    final = result.snapshots[-1] if result.snapshots else None
    if final is not None:
        print(f"t={final.t} entropy={final.entropy:.4f}")
    if result.report is not None:
        print(f"overall accuracy {100 * result.report.overall_accuracy:.2f}%")
    print(f"artifacts in {cfg.out}")
    return 0


def _print_report(report: exp.RunReport) -> None:
    agg = report.aggregate
    if not agg:
        print("no evaluation (test items unlabeled)")
        return
    per = agg["per_class_accuracy_pct"]
    names = ("normal", "probe", "dos", "u2r", "r2l")
    cells = [f"{n}={v if v is not None else 'n/a'}" for n, v in zip(names, per)]
    print("per-class accuracy (%): " + "  ".join(cells))
    print(f"overall accuracy: {agg['overall_accuracy_pct']}%  (n={agg['n_test']})")


def cmd_run_a(args) -> int:
    cfg = _resolve(args, mode="run-a")
    report = exp.run_antids_a(cfg, out_dir=Path(cfg.out))
    _print_report(report)
    return 0


def cmd_run_b(args) -> int:
    cfg = _resolve(args, mode="run-b")
    report = exp.run_antids_b(cfg, out_dir=Path(cfg.out))
    print(f"{len(report.batches)} batches")
    _print_report(report)
    return 0


def cmd_render(args) -> int:
    snap = exp.read_positions_csv(args.positions)
    w, h = exp.parse_grid_spec(args.grid)
    snap.width, snap.height = w, h
    for _id, x, y, _role, _cls in snap.placements:
        if x is not None and (x >= w or y >= h):
            raise DataError(f"item at ({x},{y}) outside {w}x{h} grid")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    exp.write_pgm(out / "items.pgm", exp.render_item_map(snap, args.classes))
    exp.write_pgm(out / "roles.pgm", exp.render_role_map(snap))
    print(f"wrote {out / 'items.pgm'} and {out / 'roles.pgm'}")
    return 0


_COMMANDS = {
    "prepare": cmd_prepare,
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "run-a": cmd_run_a,
    "run-b": cmd_run_b,
    "render": cmd_render,
}

EXIT_CODES = {ConfigError: 1, DataError: 2, InternalError: 3}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, DataError, InternalError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CODES[type(err)]
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
