"""End-to-end analysis of compartmentalised Cu/Pb/Zn data.

``run_pipeline`` ingests records, splits them into compartments and runs

* univariate EDA per element (quartiles, Tukey fence, ECDF),
* per-compartment kernel densities in 1, 2 and 3 dimensions with their clr
  grids, the trivariate decomposition and the information composition,
* the global stages: Bayes-distance clustering of the univariate densities,
  functional DDC on their clr spline coefficients, clustering of the clr
  information compositions and LR-DDC of the compositions.

Every file written is listed with its SHA-256 in ``manifest.json``.  Wall
clock timings go to ``timings.json``, which the manifest names but does
not hash, so that reruns with the same seed and config reproduce every
hashed file byte for byte.
"""
from __future__ import annotations

import logging
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bayes import Grid, DensityGrid, clr
from .clustering import (Dendrogram, DistanceMatrix, auto_k, bayes_distance_matrix,
                         complete_linkage, cut, euclidean_distance_matrix, leaf_order)
from .config import AnalysisConfig
from .data import CompartmentDataset, PartitionReport, SampleRecord, ingest, partition, write_samples
from .ddc import LogratioDDCResult, functional_ddc, lr_ddc
from .decomposition import (Decomposition, InformationComposition, clr_composition, decompose,
                            information_composition)
from .density import BandwidthSpec, common_support, kde
from .eda import ecdf, summary
from .errors import InvalidInputError, StageError
from .io import grid_to_json, sha256, write_flag_matrix, write_json, write_table
from .splines import build_basis, fit_clr_spline

__all__ = ["CompartmentResult", "PipelineResult", "run_pipeline", "analyse_compartment",
           "cluster", "ELEMENTS"]

log = logging.getLogger(__name__)

ELEMENTS = ("Cu", "Pb", "Zn")
PAIRS = tuple(combinations(range(3), 2))
MANIFEST = "manifest.json"
TIMINGS = "timings.json"
FAILED = "FAILED.json"


@dataclass(eq=False)
class CompartmentResult:
    code: str
    n: int
    kde1: dict
    kde2: dict
    kde3: DensityGrid
    decomposition: Decomposition
    composition: InformationComposition


@dataclass(eq=False)
class PipelineResult:
    output_dir: Path
    config: AnalysisConfig
    partition: PartitionReport
    compartments: list[CompartmentResult]
    pdf_clusters: dict = field(default_factory=dict)
    functional: dict = field(default_factory=dict)
    composition_dendrogram: Dendrogram | None = None
    composition_clusters: np.ndarray | None = None
    lrddc: LogratioDDCResult | None = None
    files: dict = field(default_factory=dict)

    @property
    def codes(self) -> list[str]:
        return [c.code for c in self.compartments]


class _Outputs:
    """Single writer for a run directory; records every file it writes."""

    def __init__(self, root: Path, meta: dict):
        self.root = root
        self.meta = meta
        self.files: list[str] = []

    def _path(self, rel: str) -> Path:
        self.files.append(rel)
        return self.root / rel

    def table(self, rel, header, rows, **extra) -> Path:
        return write_table(self._path(rel), header, rows, {**self.meta, **extra})

    def json(self, rel, obj) -> Path:
        return write_json(self._path(rel), {**obj, "meta": {**self.meta, **obj.get("meta", {})}})

    def grid(self, rel, f, **extra) -> Path:
        return write_json(self._path(rel), grid_to_json(f, **self.meta, **extra))

    def flags(self, stem, cells, **extra):
        a, b = write_flag_matrix(self.root / stem, cells, {**self.meta, **extra})
        self.files += [str(a.relative_to(self.root)), str(b.relative_to(self.root))]

    def heatmap(self, stem, matrix, dend, columns, **kwargs) -> Path:
        """SVG heatmap plus the leaf-ordered matrix behind it as CSV."""
        from .plotting import heatmap_with_dendrogram
        order = leaf_order(dend)
        self.table(f"{stem}_heatmap.csv", ["compartment", *columns],
                   [[dend.labels[i], *matrix[i]] for i in order])
        return heatmap_with_dendrogram(self._path(f"{stem}_heatmap.svg"), matrix, dend,
                                       columns=columns, meta=self.meta, **kwargs)


@contextmanager
def _stage(name: str, compartment: str | None, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure becomes a stage error
        raise StageError(name, compartment, exc) from exc
    finally:
        key = name if compartment is None else f"{name}:{compartment}"
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - t0


def _bandwidth(config: AnalysisConfig) -> BandwidthSpec | None:
    h = config.fixed_bandwidth
    return None if h is None else BandwidthSpec("fixed", (h,))


def analyse_compartment(dataset: CompartmentDataset, box, config: AnalysisConfig) -> CompartmentResult:
    """Densities, decomposition and information composition of one compartment."""
    samples = dataset.samples
    bw = _bandwidth(config)
    eps = config.eps_floor
    kde1 = {}
    for k, el in enumerate(ELEMENTS):
        g = Grid(box.sub([k]), (config.grid_1d,))
        kde1[el] = kde(samples.columns([el]), g, bw, eps)
    kde2 = {}
    for a, b in PAIRS:
        g = Grid(box.sub([a, b]), (config.grid_2d,) * 2)
        kde2[(a, b)] = kde(samples.columns([ELEMENTS[a], ELEMENTS[b]]), g, bw, eps)
    f3 = kde(samples, Grid(box, (config.grid_3d,) * 3), bw, eps)
    dec = decompose(f3)
    comp = information_composition(dec, elements=ELEMENTS)
    return CompartmentResult(dataset.code, dataset.count, kde1, kde2, f3, dec, comp)


def cluster(D: DistanceMatrix, k: int | None) -> tuple[Dendrogram, np.ndarray, int]:
    """Complete linkage plus a cut at ``k`` (or the automatic choice)."""
    dend = complete_linkage(D)
    k = auto_k(dend) if k is None else min(int(k), D.n)
    return dend, cut(dend, k), k


def _write_clusters(out: _Outputs, stem: str, D: DistanceMatrix, dend, labels, k, **extra):
    codes = list(D.labels)
    out.table(f"{stem}_distance.csv", ["compartment", *codes],
              [[c, *row] for c, row in zip(codes, D.values)], **extra)
    out.json(f"{stem}_dendrogram.json", {**dend.to_dict(), "k": k, "meta": extra})
    out.table(f"{stem}_clusters.csv", ["compartment", "cluster"],
              list(zip(codes, labels.tolist())), k=k, **extra)


def _write_eda(out: _Outputs, datasets: Sequence[CompartmentDataset]):
    for k, el in enumerate(ELEMENTS):
        rows, ecdf_rows = [], []
        columns = [(d.code, d.samples.data[:, k]) for d in datasets]
        pooled = np.concatenate([x for _, x in columns])
        for code, x in [*columns, ("ALL", pooled)]:
            if x.size >= 4:
                rows.append([code, *summary(x).as_row()])
            e = ecdf(x)
            ecdf_rows += [[code, v, p] for v, p in e.pairs()]
        out.table(f"eda/summary_{el}.csv", ["compartment", *summary(pooled).FIELDS], rows,
                  element=el, units="mg/kg")
        out.table(f"eda/ecdf_{el}.csv", ["compartment", "value", "fraction"], ecdf_rows,
                  element=el, units="mg/kg")


def _write_compartment(out: _Outputs, r: CompartmentResult):
    base = f"compartments/{r.code}"
    for el, f in r.kde1.items():
        out.grid(f"{base}/kde_1d_{el}.json", f, compartment=r.code, element=el, scale="log")
        out.grid(f"{base}/clr_1d_{el}.json", clr(f), compartment=r.code, element=el, scale="log")
    for (a, b), f in r.kde2.items():
        tag = ELEMENTS[a] + ELEMENTS[b]
        out.grid(f"{base}/kde_2d_{tag}.json", f, compartment=r.code, elements=[ELEMENTS[a], ELEMENTS[b]])
        out.grid(f"{base}/clr_2d_{tag}.json", clr(f), compartment=r.code,
                 elements=[ELEMENTS[a], ELEMENTS[b]])
    out.grid(f"{base}/kde_3d.json", r.kde3, compartment=r.code, elements=list(ELEMENTS))
    out.grid(f"{base}/clr_3d.json", clr(r.kde3), compartment=r.code, elements=list(ELEMENTS))
    d = r.decomposition
    parts = {}
    for key in d.keys:
        name = "f(" + ",".join(ELEMENTS[k] for k in key) + ")"
        parts[name] = grid_to_json(d.part(key))
    out.json(f"{base}/decomposition.json", {
        "compartment": r.code,
        "parts": parts,
        "squared_norms": {"f(" + ",".join(ELEMENTS[k] for k in key) + ")": v
                          for key, v in d.squared_norms().items()},
    })


def _skipped_flags(out: _Outputs, stem: str, codes, columns, reason: str):
    rows = [[c, *([0.0] * len(columns)), False] for c in codes]
    for suffix in ("levels", "flags"):
        out.table(f"{stem}_{suffix}.csv", ["row", *columns, "row_flag"], rows, skipped=reason)


def _load_records(source) -> tuple[list[SampleRecord], dict]:
    if isinstance(source, (str, Path)):
        report = ingest(source)
        return report.records, report.summary()
    records = list(source)
    return records, {"rows_read": len(records), "accepted": len(records), "rejected": 0,
                     "rejections": []}


def _versions() -> dict:
    import matplotlib
    import scipy
    return {"bayesfda": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


def _finish(out: _Outputs, timings: dict, status: str, extra: dict | None = None):
    write_json(out.root / TIMINGS, {"seconds": timings})
    files = {rel: sha256(out.root / rel) for rel in sorted(set(out.files))}
    manifest = {
        "status": status,
        "config": out.meta["config"],
        "synthetic": out.meta["synthetic"],
        "versions": _versions(),
        "files": files,
        "timings_file": TIMINGS,
        **(extra or {}),
    }
    write_json(out.root / MANIFEST, manifest)
    return files


def run_pipeline(config: AnalysisConfig, source, *, synthetic: bool = False,
                 output_dir=None) -> PipelineResult:
    """Run every analysis stage and write the result bundle.

    Parameters
    ----------
    config : AnalysisConfig
    source : path or sequence of SampleRecord
        CSV file with header ``sample_id,district,cu,pb,zn`` or parsed records.
    synthetic : bool
        Marks every output as derived from synthetic data.
    output_dir : path, optional
        Overrides ``config.output_dir``.

    Raises
    ------
    StageError
        When any stage fails.  Files written so far are kept, a ``FAILED.json``
        marker names the stage and compartment, and the manifest has status
        ``"failed"``.
    """
    root = Path(output_dir if output_dir is not None else config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / FAILED).unlink(missing_ok=True)
    meta = {"config": config.echo(), "synthetic": bool(synthetic)}
    out = _Outputs(root, meta)
    timings: dict = {}
    try:
        result = _run(config, source, out, timings)
    except StageError as exc:
        failure = {"stage": exc.stage, "compartment": exc.compartment, "error": str(exc.cause)}
        write_json(root / FAILED, failure)
        _finish(out, timings, "failed", {"failure": failure})
        raise
    result.files = _finish(out, timings, "ok")
    return result


def _run(config: AnalysisConfig, source, out: _Outputs, timings: dict) -> PipelineResult:
    # input validation errors propagate unwrapped: they are not stage failures
    t0 = time.perf_counter()
    records, ingest_report = _load_records(source)
    if not records:
        raise InvalidInputError("no valid records")
    report = partition(records, n_min=config.n_min)
    if not report.datasets:
        raise InvalidInputError(f"no compartment has at least n_min={config.n_min} samples")
    datasets = report.datasets
    timings["ingest"] = time.perf_counter() - t0

    with _stage("report", None, timings):
        out.json("report.json", {"ingest": ingest_report, "partition": report.summary(),
                                 "total_records": report.total})
        if out.meta["synthetic"]:
            write_samples(out._path("samples.csv"), records)

    with _stage("eda", None, timings):
        _write_eda(out, datasets)

    with _stage("support", None, timings):
        box = common_support([d.samples for d in datasets], config.pad_factor)

    results = []
    for d in datasets:
        with _stage("density", d.code, timings):
            r = analyse_compartment(d, box, config)
        with _stage("export", d.code, timings):
            _write_compartment(out, r)
        results.append(r)
    result = PipelineResult(out.root, config, report, results)
    codes = [r.code for r in results]
    n = len(results)

    with _stage("composition", None, timings):
        comps = [r.composition for r in results]
        out.table("global/infocomp.csv", ["compartment", *comps[0].labels],
                  [[c, *ic.parts] for c, ic in zip(codes, comps)])
        Z = np.vstack([clr_composition(ic) for ic in comps])
        out.table("global/clr_infocomp.csv", ["compartment", *comps[0].labels],
                  [[c, *row] for c, row in zip(codes, Z)])

    for el in ELEMENTS:
        with _stage("pdf-clustering", None, timings):
            if n >= 2:
                dens = [r.kde1[el] for r in results]
                D = bayes_distance_matrix(dens, codes)
                dend, labels, k = cluster(D, config.k)
                result.pdf_clusters[el] = (dend, labels)
                _write_clusters(out, f"global/density_{el}", D, dend, labels, k, element=el,
                                distance="bayes", marginal="arithmetic")
                out.heatmap(f"global/density_{el}", np.vstack([f.values for f in dens]), dend,
                            [f"x{j + 1}" for j in range(dens[0].grid.shape[0])],
                            title=f"{el} densities (log scale)")

        with _stage("functional-ddc", None, timings):
            g = results[0].kde1[el].grid
            basis = build_basis(g, config.spline_k, config.spline_order)
            fits = [fit_clr_spline(clr(r.kde1[el]), basis, r.code) for r in results]
            coefs = np.vstack([c.coefficients for c in fits])
            out.table(f"global/fddc_{el}_coefficients.csv",
                      ["compartment", *[f"b{j + 1}" for j in range(basis.size)]],
                      [[c, *row] for c, row in zip(codes, coefs)],
                      basis=basis.metadata(), element=el)
            if n >= 3:
                res = functional_ddc(fits, basis, config.p_cut, codes)
                result.functional[el] = res
                out.flags(f"global/fddc_{el}", res.cells, element=el)
                grids = res.grids
            else:
                _skipped_flags(out, f"global/fddc_{el}", codes,
                               [f"b{j + 1}" for j in range(basis.size)], "fewer than 3 compartments")
                grids = np.zeros((n, g.shape[0]))
            out.table(f"global/fddc_{el}_anomaly.csv", ["compartment", *[f"x{j + 1}" for j in range(g.shape[0])]],
                      [[c, *row] for c, row in zip(codes, grids)],
                      element=el, nodes=g.axes[0].tolist())
            if n >= 2:
                D = euclidean_distance_matrix(grids, codes)
                dend, labels, k = cluster(D, config.k)
                _write_clusters(out, f"global/fddc_{el}", D, dend, labels, k, element=el,
                                distance="euclidean", features="anomaly levels on grid")
                out.heatmap(f"global/fddc_{el}", grids, dend, [f"x{j + 1}" for j in range(g.shape[0])],
                            cmap="RdBu_r", symmetric=True, title=f"{el} anomaly functions")

    with _stage("composition-clustering", None, timings):
        if n >= 2:
            D = euclidean_distance_matrix(Z, codes)
            dend, labels, k = cluster(D, config.k)
            result.composition_dendrogram, result.composition_clusters = dend, labels
            _write_clusters(out, "global/composition", D, dend, labels, k, distance="euclidean",
                            features="clr information composition")
            out.heatmap("global/composition", Z, dend, comps[0].labels, cmap="RdBu_r", symmetric=True,
                        title="clr information compositions")

    with _stage("lr-ddc", None, timings):
        labels = list(comps[0].labels)
        if n >= 3:
            lr = lr_ddc(comps, config.p_cut, config.agg_fraction, codes)
            result.lrddc = lr
            out.flags("global/lrddc_logratios", lr.cells)
            rows = [[c, *lv, *fr, *fl] for c, lv, fr, fl in
                    zip(codes, lr.part_levels, lr.part_fractions, lr.part_flags)]
            extra = {"agg_fraction": config.agg_fraction}
        else:
            rows = [[c, *([0.0] * 7), *([0.0] * 7), *([False] * 7)] for c in codes]
            extra = {"skipped": "fewer than 3 compartments"}
        header = ["compartment", *[f"level {p}" for p in labels],
                  *[f"fraction {p}" for p in labels], *[f"flag {p}" for p in labels]]
        out.table("global/lrddc_parts.csv", header, rows, **extra)
    return result
