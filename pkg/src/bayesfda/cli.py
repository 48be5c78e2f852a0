"""Command line interface.

Subcommands: ingest, synth, density, decompose, infocomp, ddc, lrddc,
cluster, pipeline.  Analysis flags mirror :class:`AnalysisConfig`; a
``--config`` file supplies defaults, explicit flags win.  The output
directory is taken from ``--output-dir``, then the ``BAYESFDA_OUTPUT_DIR``
environment variable, then the config.

Exit codes: 0 success, 2 invalid input or config, 3 stage failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import OUTPUT_ENV, AnalysisConfig, load_config
from .errors import BayesFDAError, InvalidInputError, StageError

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("bayesfda")

_CONFIG_FLAGS = [
    ("--grid-1d", int), ("--grid-2d", int), ("--grid-3d", int), ("--bandwidth", str),
    ("--eps-floor", float), ("--pad-factor", float), ("--spline-k", int),
    ("--spline-order", int), ("--p-cut", float), ("--agg-fraction", float),
    ("--cluster-k", str), ("--n-min", int), ("--seed", int), ("--output-dir", str),
]


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value config file")
    for flag, kind in _CONFIG_FLAGS:
        p.add_argument(flag, type=kind, default=None)


def _config(args) -> AnalysisConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else AnalysisConfig()
    over = {flag[2:].replace("-", "_"): getattr(args, flag[2:].replace("-", "_"), None)
            for flag, _ in _CONFIG_FLAGS}
    if over.get("output_dir") is None and os.environ.get(OUTPUT_ENV):
        over["output_dir"] = os.environ[OUTPUT_ENV]
    return cfg.with_overrides(**over)


def _out(cfg: AnalysisConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _print(obj):
    from .io import dumps
    sys.stdout.write(dumps(obj))


def _datasets(path, cfg: AnalysisConfig):
    from .data import ingest, partition
    rep = ingest(path)
    part = partition(rep.records, n_min=cfg.n_min)
    if not part.datasets:
        raise InvalidInputError(f"no compartment has at least n_min={cfg.n_min} samples")
    return rep, part


def _meta(cfg):
    return {"config": cfg.echo()}


def cmd_ingest(args, cfg):
    from .data import ingest, partition, write_samples
    rep = ingest(args.input)
    part = partition(rep.records, n_min=cfg.n_min) if rep.records else None
    _print({"ingest": rep.summary(), "partition": part.summary() if part else None})
    if args.write:
        write_samples(_out(cfg) / "samples.csv", rep.records)


def _parse_assignment(text: str | None) -> dict:
    from .synth import acceptance_assignment
    if not text:
        return acceptance_assignment()
    out = {}
    for item in text.split(","):
        code, sep, t = item.partition("=")
        if not sep:
            raise InvalidInputError(f"assignment items must look like CODE=TYPE, got {item!r}")
        try:
            out[code.strip()] = int(t)
        except ValueError:
            raise InvalidInputError(f"archetype type must be an integer, got {t!r}") from None
    return out


def cmd_synth(args, cfg):
    from .data import write_samples
    from .synth import BaseParams, synthesize
    records = synthesize(_parse_assignment(args.assign), BaseParams(n_samples=args.n_samples),
                         seed=cfg.seed)
    path = write_samples(args.out or _out(cfg) / "samples.csv", records)
    log.info("wrote %d synthetic records to %s", len(records), path)


def cmd_density(args, cfg):
    from .bayes import Grid, clr
    from .density import common_support, kde
    from .io import grid_to_json, write_json
    from .pipeline import _bandwidth
    _, part = _datasets(args.input, cfg)
    names = [e.strip() for e in args.elements.split(",")]
    sizes = {1: cfg.grid_1d, 2: cfg.grid_2d, 3: cfg.grid_3d}
    if not 1 <= len(names) <= 3:
        raise InvalidInputError("choose 1 to 3 elements")
    box = common_support([d.samples.columns(names) for d in part.datasets], cfg.pad_factor)
    grid = Grid(box, (sizes[len(names)],) * len(names))
    out = _out(cfg)
    tag = "".join(names)
    for d in part.datasets:
        f = kde(d.samples.columns(names), grid, _bandwidth(cfg), cfg.eps_floor)
        write_json(out / f"{d.code}_kde_{tag}.json", grid_to_json(f, compartment=d.code, **_meta(cfg)))
        write_json(out / f"{d.code}_clr_{tag}.json", grid_to_json(clr(f), compartment=d.code, **_meta(cfg)))


def _analyse(path, cfg):
    from .density import common_support
    from .pipeline import analyse_compartment
    _, part = _datasets(path, cfg)
    box = common_support([d.samples for d in part.datasets], cfg.pad_factor)
    return [analyse_compartment(d, box, cfg) for d in part.datasets]


def cmd_decompose(args, cfg):
    from .io import grid_to_json, write_json
    out = _out(cfg)
    for r in _analyse(args.input, cfg):
        d = r.decomposition
        parts = {",".join(map(str, k)): grid_to_json(d.part(k)) for k in d.keys}
        write_json(out / f"{r.code}_decomposition.json",
                   {"compartment": r.code, "parts": parts, "meta": _meta(cfg)})


def cmd_infocomp(args, cfg):
    from .io import write_compositions
    res = _analyse(args.input, cfg)
    write_compositions(args.out or _out(cfg) / "infocomp.csv", [r.code for r in res],
                       [r.composition for r in res], _meta(cfg))


def _read_matrix(path):
    from .io import read_table
    _, header, rows = read_table(path)
    try:
        values = np.array([[float(v) for v in r[1:]] for r in rows])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric cell ({exc})") from exc
    return header[1:], [r[0] for r in rows], values


def cmd_ddc(args, cfg):
    from .ddc import DataMatrix, ddc
    from .io import write_flag_matrix
    cols, rows, X = _read_matrix(args.input)
    cells = ddc(DataMatrix(X, tuple(cols), tuple(rows)), cfg.p_cut)
    write_flag_matrix(_out(cfg) / args.stem, cells, _meta(cfg))
    _print({"flagged_cells": int(cells.cell_flags.sum()), "flagged_rows": int(cells.row_flags.sum())})


def cmd_lrddc(args, cfg):
    from .ddc import lr_ddc
    from .io import read_compositions, write_table
    ids, comps = read_compositions(args.input)
    res = lr_ddc(comps, cfg.p_cut, cfg.agg_fraction, ids)
    labels = res.part_labels
    write_table(_out(cfg) / "lrddc_parts.csv",
                ["compartment", *[f"level {p}" for p in labels], *[f"flag {p}" for p in labels]],
                [[i, *lv, *fl] for i, lv, fl in zip(ids, res.part_levels, res.part_flags)],
                {**_meta(cfg), "agg_fraction": cfg.agg_fraction})
    _print({i: [p for p, f in zip(labels, fl) if f] for i, fl in zip(ids, res.part_flags)})


def cmd_cluster(args, cfg):
    from .clustering import DistanceMatrix, euclidean_distance_matrix
    from .decomposition import clr_composition
    from .io import read_compositions, write_dendrogram, write_table
    from .pipeline import cluster
    if args.distance:
        labels, rows, D = _read_matrix(args.input)
        dm = DistanceMatrix(D, tuple(rows))
    else:
        ids, comps = read_compositions(args.input)
        dm = euclidean_distance_matrix(np.vstack([clr_composition(c) for c in comps]), ids)
    dend, labels, k = cluster(dm, cfg.k)
    out = _out(cfg)
    write_dendrogram(out / "dendrogram.json", dend, {"k": k, "meta": _meta(cfg)})
    write_table(out / "clusters.csv", ["compartment", "cluster"], list(zip(dm.labels, labels.tolist())),
                {**_meta(cfg), "k": k})
    _print({"k": k, "clusters": dict(zip(dm.labels, labels.tolist()))})


def cmd_pipeline(args, cfg):
    from .pipeline import run_pipeline
    from .synth import BaseParams, synthesize
    if args.synthetic:
        source = synthesize(_parse_assignment(args.assign), BaseParams(n_samples=args.n_samples),
                            seed=cfg.seed)
    elif args.input is None:
        raise InvalidInputError("give an input CSV or --synthetic")
    else:
        source = args.input
    res = run_pipeline(cfg, source, synthetic=args.synthetic)
    _print({"output_dir": str(res.output_dir), "compartments": res.codes, "files": len(res.files)})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayesfda", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _add_config_flags(p)
        p.set_defaults(func=fn)
        return p

    p = add("ingest", cmd_ingest, "validate a CSV and report rejections")
    p.add_argument("input", type=Path)
    p.add_argument("--write", action="store_true", help="write the accepted records")

    p = add("synth", cmd_synth, "generate synthetic compartments")
    p.add_argument("--assign", help="CODE=TYPE,... (default: the 20-compartment fixture)")
    p.add_argument("--n-samples", type=int, default=300)
    p.add_argument("--out", type=Path)

    p = add("density", cmd_density, "kernel densities per compartment")
    p.add_argument("input", type=Path)
    p.add_argument("--elements", default="Cu,Pb,Zn")

    p = add("decompose", cmd_decompose, "trivariate decomposition per compartment")
    p.add_argument("input", type=Path)

    p = add("infocomp", cmd_infocomp, "information compositions")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path)

    p = add("ddc", cmd_ddc, "deviating data cells of a numeric table")
    p.add_argument("input", type=Path, help="CSV: row label then numeric columns")
    p.add_argument("--stem", default="ddc")

    p = add("lrddc", cmd_lrddc, "LR-DDC of information compositions")
    p.add_argument("input", type=Path)

    p = add("cluster", cmd_cluster, "complete-linkage clustering")
    p.add_argument("input", type=Path, help="composition CSV, or a distance matrix with --distance")
    p.add_argument("--distance", action="store_true")

    p = add("pipeline", cmd_pipeline, "full analysis run")
    p.add_argument("input", type=Path, nargs="?")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--assign")
    p.add_argument("--n-samples", type=int, default=300)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (BayesFDAError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
