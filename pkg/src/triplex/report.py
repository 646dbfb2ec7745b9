"""Table-shaped outputs (CSV + Markdown) and the reproducibility manifest."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

from .cluster import ClusterComposition, SweepRow
from .metrics import MetricReport

MODE_SHORT = {
    "abstract": "Abs",
    "triples": "Trip",
    "abstract_triples": "Abs_Trip",
    "hybrid": "Hyb",
}

CLUSTERING_COLUMNS = ("representation", "model", "algorithm", "clusters", "ari", "nmi", "silhouette")
CLASSIFICATION_COLUMNS = ("using_mode", "model") + MetricReport.CSV_COLUMNS
SWEEP_COLUMNS = ("algorithm", "param", "ARI", "NMI", "silhouette", "noise_fraction", "selection_score", "seed")


def _fmt(value, decimals: int) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{decimals}f}"


@dataclass
class ClusteringTableRow:
    representation: str
    model: str
    algorithm: str
    clusters: int | None
    ari: float | None
    nmi: float | None
    silhouette: float | None


def emit_clustering_table(rows: list[ClusteringTableRow], csv_path, md_path) -> None:
    """One row per representation mode, Table-1 column order, 4 decimals."""
    rendered = []
    for r in rows:
        rendered.append(
            [
                r.representation,
                r.model or "n/a",
                r.algorithm or "n/a",
                str(r.clusters) if r.clusters is not None else "n/a",
                _fmt(r.ari, 4),
                _fmt(r.nmi, 4),
                _fmt(r.silhouette, 4),
            ]
        )
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLUSTERING_COLUMNS)
        writer.writerows(rendered)
    _write_markdown(md_path, CLUSTERING_COLUMNS, rendered)


@dataclass
class ClassificationTableRow:
    using_mode: str  # e.g. "Abs/Hyb" (cluster mode / classification mode)
    model: str
    report: MetricReport


def emit_classification_table(rows: list[ClassificationTableRow], csv_path, md_path) -> None:
    """One row per (cluster mode, classification mode) pair, 3 decimals."""
    rendered = []
    for r in rows:
        rendered.append([r.using_mode, r.model] + [_fmt(v, 3) for v in r.report.to_row()])
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLASSIFICATION_COLUMNS)
        writer.writerows(rendered)
    _write_markdown(md_path, CLASSIFICATION_COLUMNS, rendered)


def write_sweep_csv(path, table: list[SweepRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in table:
            writer.writerow(
                [
                    row.algorithm,
                    row.param,
                    _fmt(row.ari, 4),
                    _fmt(row.nmi, 4),
                    _fmt(row.silhouette, 4),
                    _fmt(row.noise_fraction, 4),
                    _fmt(row.score, 4),
                    row.seed,
                ]
            )


def write_composition_csv(path, rows: list[ClusterComposition], overall_purity: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("cluster", "total", "dominant_label", "purity", "counts"))
        for r in rows:
            counts = ";".join(f"{k}={v}" for k, v in sorted(r.counts.items()))
            writer.writerow([r.cluster, r.total, r.dominant, _fmt(r.purity, 4), counts])
        writer.writerow(("overall", sum(r.total for r in rows), "", _fmt(overall_purity, 4), ""))


def _write_markdown(path, columns, rendered_rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("| " + " | ".join(columns) + " |\n")
        fh.write("|" + "|".join("---" for _ in columns) + "|\n")
        for row in rendered_rows:
            fh.write("| " + " | ".join(str(c) for c in row) + " |\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, manifest: dict) -> None:
    """Deterministic serialization: sorted keys, no embedded wall-clock state."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
