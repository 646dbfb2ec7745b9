"""Stage implementations behind the CLI; every stage re-reads its persisted
inputs so any stage can be re-run in isolation."""
from __future__ import annotations

import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .classify import LinearHead, predict_scores, random_search, stratified_split
from .cluster import cluster_composition, density_sweep, partition_sweep
from .corpus import Document, SplitSpec, load_corpus, split_corpus, write_split_manifest
from .embed import embed_corpus, hash_provider, load_matrix, remote_provider, save_matrix
from .metrics import classification_report
from .propagate import propagate_labels, write_propagation_jsonl
from .report import (
    ClassificationTableRow,
    ClusteringTableRow,
    MODE_SHORT,
    emit_classification_table,
    emit_clustering_table,
    file_digest,
    write_manifest,
    write_sweep_csv,
)
from .reprs import ReprMode, build_representation, read_reprs_jsonl, write_reprs_jsonl
from .triples import (
    PRESETS,
    build_graph,
    extract_triples,
    parse_conllu_file,
    read_triples_jsonl,
    write_triples_jsonl,
)

log = logging.getLogger(__name__)

MODES = tuple(ReprMode)


class DataError(Exception):
    pass


@dataclass
class PipelineConfig:
    corpus: str = ""
    conllu: str = ""
    outdir: str = "runs/out"
    seed: int = 42
    n_cluster: int = 5000
    n_class: int = 10000
    provider_kind: str = "hash"
    provider_dim: int = 256
    provider_endpoint: str = ""
    provider_model: str = ""
    batch_size: int = 64
    k_min: int = 3
    k_max: int = 12
    hdbscan_sizes: list[int] = field(default_factory=lambda: [5, 10, 15, 25, 50, 100])
    n_trials: int = 20
    triples_preset: str = "spacy"
    use_lemma: bool = False
    accept_passive: bool = True
    include_graph: bool = False
    threads: int = 1

    @classmethod
    def from_toml(cls, path) -> "PipelineConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as e:
            raise DataError(f"cannot read config {path}: {e}") from e
        cfg = cls()
        cfg.seed = raw.get("seed", cfg.seed)
        paths = raw.get("paths", {})
        cfg.corpus = paths.get("corpus", cfg.corpus)
        cfg.conllu = paths.get("conllu", cfg.conllu)
        cfg.outdir = paths.get("outdir", cfg.outdir)
        split = raw.get("split", {})
        cfg.n_cluster = split.get("n_cluster", cfg.n_cluster)
        cfg.n_class = split.get("n_class", cfg.n_class)
        prov = raw.get("provider", {})
        cfg.provider_kind = prov.get("kind", cfg.provider_kind)
        cfg.provider_dim = prov.get("dim", cfg.provider_dim)
        cfg.provider_endpoint = prov.get("endpoint", cfg.provider_endpoint)
        cfg.provider_model = prov.get("model", cfg.provider_model)
        cfg.batch_size = prov.get("batch_size", cfg.batch_size)
        clus = raw.get("cluster", {})
        cfg.k_min = clus.get("k_min", cfg.k_min)
        cfg.k_max = clus.get("k_max", cfg.k_max)
        cfg.hdbscan_sizes = list(clus.get("hdbscan_sizes", cfg.hdbscan_sizes))
        train = raw.get("train", {})
        cfg.n_trials = train.get("n_trials", cfg.n_trials)
        trip = raw.get("triples", {})
        cfg.triples_preset = trip.get("preset", cfg.triples_preset)
        cfg.use_lemma = trip.get("use_lemma", cfg.use_lemma)
        cfg.accept_passive = trip.get("accept_passive", cfg.accept_passive)
        cfg.include_graph = raw.get("repr", {}).get("include_graph", cfg.include_graph)
        return cfg

    def out(self, name: str) -> Path:
        return Path(self.outdir) / name

    def make_provider(self):
        if self.provider_kind == "hash":
            return hash_provider(dim=self.provider_dim, seed=self.seed)
        if self.provider_kind == "remote":
            endpoint = os.environ.get("TRIPLEX_EMBED_URL", self.provider_endpoint)
            if not endpoint:
                raise DataError("remote provider needs an endpoint (config or TRIPLEX_EMBED_URL)")
            return remote_provider(endpoint, self.provider_model, batch_size=self.batch_size)
        raise DataError(f"unknown provider kind {self.provider_kind!r}")


def _require(path: Path) -> Path:
    if not path.exists():
        raise DataError(f"missing expected input file: {path}")
    return path


def _read_clean_corpus(cfg) -> list[Document]:
    path = _require(cfg.out("corpus_clean.jsonl"))
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            docs.append(
                Document(
                    id=rec["id"],
                    abstract_raw=rec.get("abstract_raw", rec["abstract_clean"]),
                    abstract_clean=rec["abstract_clean"],
                    categories=tuple(rec["categories"]),
                    primary_label=rec["primary_label"],
                )
            )
    return docs


def _read_split(cfg) -> tuple[list[str], list[str]]:
    path = _require(cfg.out("split_manifest.json"))
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return manifest["cluster_ids"], manifest["class_ids"]


def stage_ingest(cfg: PipelineConfig) -> None:
    Path(cfg.outdir).mkdir(parents=True, exist_ok=True)
    docs = load_corpus(_require(Path(cfg.corpus)))
    spec = SplitSpec(seed=cfg.seed, n_cluster=cfg.n_cluster, n_class=cfg.n_class)
    cluster_set, class_set = split_corpus(docs, spec)
    with open(cfg.out("corpus_clean.jsonl"), "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(
                json.dumps(
                    {
                        "id": d.id,
                        "abstract_raw": d.abstract_raw,
                        "abstract_clean": d.abstract_clean,
                        "categories": list(d.categories),
                        "primary_label": d.primary_label,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    write_split_manifest(cfg.out("split_manifest.json"), spec, cluster_set, class_set)
    log.info("ingested %d documents (%d cluster / %d class)", len(docs), len(cluster_set), len(class_set))


def stage_triples(cfg: PipelineConfig) -> None:
    sentences = parse_conllu_file(_require(Path(cfg.conllu)))
    preset = PRESETS.get(cfg.triples_preset)
    if preset is None:
        raise DataError(f"unknown deprel preset {cfg.triples_preset!r} (have {sorted(PRESETS)})")
    triples = []
    sent_index: dict[str, int] = {}
    for sent in sentences:
        doc_id = sent.doc_id or ""
        i = sent_index.get(doc_id, 0)
        sent_index[doc_id] = i + 1
        triples.extend(
            extract_triples(
                sent.tokens,
                doc_id,
                i,
                sent.text,
                preset=preset,
                use_lemma=cfg.use_lemma,
                accept_passive=cfg.accept_passive,
            )
        )
    write_triples_jsonl(cfg.out("triples.jsonl"), triples)
    log.info("extracted %d triples from %d sentences", len(triples), len(sentences))


def stage_repr(cfg: PipelineConfig) -> None:
    docs = _read_clean_corpus(cfg)
    triples = read_triples_jsonl(_require(cfg.out("triples.jsonl")))
    by_doc: dict[str, list] = {}
    for t in triples:
        by_doc.setdefault(t.doc_id, []).append(t)
    for mode in MODES:
        reprs = []
        for d in docs:
            doc_triples = by_doc.get(d.id, [])
            graph = build_graph(doc_triples) if cfg.include_graph else None
            reprs.append(build_representation(d, doc_triples, mode, include_graph=cfg.include_graph, graph=graph))
        write_reprs_jsonl(cfg.out(f"repr_{mode.value}.jsonl"), reprs)


def stage_embed(cfg: PipelineConfig) -> None:
    provider = cfg.make_provider()
    for mode in MODES:
        reprs = read_reprs_jsonl(_require(cfg.out(f"repr_{mode.value}.jsonl")))
        matrix = embed_corpus(reprs, provider, batch_size=cfg.batch_size)
        save_matrix(matrix, cfg.out(f"emb_{mode.value}.emb"))


def stage_cluster(cfg: PipelineConfig) -> None:
    docs = {d.id: d for d in _read_clean_corpus(cfg)}
    cluster_ids, _ = _read_split(cfg)
    true_labels = [docs[i].primary_label for i in cluster_ids]
    best_summary = {}
    for mode in MODES:
        matrix = load_matrix(_require(cfg.out(f"emb_{mode.value}.emb"))).rows_for(cluster_ids)
        X = matrix.vectors
        k_range = range(cfg.k_min, cfg.k_max + 1)
        km = partition_sweep(X, true_labels, "kmeans", k_range=k_range, seed=cfg.seed)
        gm = partition_sweep(X, true_labels, "gmm", k_range=k_range, seed=cfg.seed)
        hd = density_sweep(X, true_labels, sizes=cfg.hdbscan_sizes)
        write_sweep_csv(cfg.out(f"sweep_{mode.value}.csv"), km.table + gm.table + hd.table)
        best = max((km, gm), key=lambda o: o.best_score)
        comp_rows, overall = cluster_composition(best.best_labels, np.array(true_labels))
        best_summary[mode.value] = {
            "algorithm": best.best_config[0],
            "k": int(best.best_config[1]),
            "seed": int(best.best_config[2]),
            "score": best.best_score,
            "ari": next(r.ari for r in best.table if r.algorithm == best.best_config[0] and r.param == best.best_config[1]),
            "nmi": next(r.nmi for r in best.table if r.algorithm == best.best_config[0] and r.param == best.best_config[1]),
            "silhouette": next(
                r.silhouette for r in best.table if r.algorithm == best.best_config[0] and r.param == best.best_config[1]
            ),
            "provider": matrix.provider_name,
            "hdbscan_best_size": int(hd.best_config[1]),
            "hdbscan_composite": hd.best_score,
            "composition": [
                {
                    "cluster": r.cluster,
                    "total": r.total,
                    "dominant": r.dominant,
                    "purity": r.purity,
                    "counts": r.counts,
                }
                for r in comp_rows
            ],
            "overall_purity": overall,
        }
        with open(cfg.out(f"labels_{mode.value}.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "mode": mode.value,
                    "algorithm": best.best_config[0],
                    "param": int(best.best_config[1]),
                    "doc_ids": list(matrix.doc_ids),
                    "labels": [int(x) for x in best.best_labels],
                },
                fh,
                sort_keys=True,
            )
            fh.write("\n")
    with open(cfg.out("clustering_best.json"), "w", encoding="utf-8") as fh:
        json.dump(best_summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def stage_propagate(cfg: PipelineConfig) -> None:
    cluster_ids, class_ids = _read_split(cfg)
    for mode in MODES:
        with open(_require(cfg.out(f"labels_{mode.value}.json")), encoding="utf-8") as fh:
            payload = json.load(fh)
        matrix = load_matrix(_require(cfg.out(f"emb_{mode.value}.emb")))
        source = matrix.rows_for(payload["doc_ids"])
        target = matrix.rows_for(class_ids)
        pmap = propagate_labels(source, np.array(payload["labels"]), target)
        write_propagation_jsonl(cfg.out(f"propagate_{mode.value}.jsonl"), pmap)


def stage_train(cfg: PipelineConfig) -> None:
    docs = {d.id: d for d in _read_clean_corpus(cfg)}
    _, class_ids = _read_split(cfg)
    labels = [docs[i].primary_label for i in class_ids]
    for mode_i, mode in enumerate(MODES):
        matrix = load_matrix(_require(cfg.out(f"emb_{mode.value}.emb"))).rows_for(class_ids)
        head, best, trials, (train_idx, val_idx), classes = random_search(
            matrix.vectors, labels, n_trials=cfg.n_trials, seed=cfg.seed + mode_i
        )
        head.save(cfg.out(f"head_{mode.value}.json"), classes)
        with open(cfg.out(f"split_{mode.value}.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {"train": [int(i) for i in train_idx], "val": [int(i) for i in val_idx], "classes": classes},
                fh,
                sort_keys=True,
            )
            fh.write("\n")
        with open(cfg.out(f"trials_{mode.value}.jsonl"), "w", encoding="utf-8") as fh:
            for trial_i, t in enumerate(trials):
                fh.write(
                    json.dumps(
                        {
                            "trial": trial_i,
                            "lr": t.config.learning_rate,
                            "batch": t.config.batch_size,
                            "epochs": t.config.epochs,
                            "stopped_epoch": t.stopped_epoch,
                            "val_loss": t.val_loss_curve,
                            "val_macro_f1": t.val_macro_f1,
                        },
                        sort_keys=True,
                    )
                )
                fh.write("\n")


def stage_evaluate(cfg: PipelineConfig) -> None:
    docs = {d.id: d for d in _read_clean_corpus(cfg)}
    _, class_ids = _read_split(cfg)
    labels = [docs[i].primary_label for i in class_ids]
    reports = {}
    provider_name = ""
    for mode in MODES:
        head, classes = LinearHead.load(_require(cfg.out(f"head_{mode.value}.json")))
        with open(_require(cfg.out(f"split_{mode.value}.json")), encoding="utf-8") as fh:
            split = json.load(fh)
        matrix = load_matrix(_require(cfg.out(f"emb_{mode.value}.emb"))).rows_for(class_ids)
        provider_name = matrix.provider_name
        val_idx = np.array(split["val"], dtype=int)
        class_idx = {c: i for i, c in enumerate(classes)}
        y_val = [labels[i] for i in val_idx]
        scores = predict_scores(head, matrix.vectors[val_idx])
        pred = [classes[j] for j in scores.argmax(axis=1)]
        report = classification_report(y_val, pred, scores, classes=classes)
        reports[mode.value] = report
    rows = []
    for cluster_mode in MODES:
        for classify_mode in MODES:
            rep = reports[classify_mode.value]
            rows.append(
                {
                    "using_mode": f"{MODE_SHORT[cluster_mode.value]}/{MODE_SHORT[classify_mode.value]}",
                    "model": provider_name,
                    "metrics": dict(zip(rep.CSV_COLUMNS, rep.to_row())),
                }
            )
    with open(cfg.out("classification_rows.json"), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
        fh.write("\n")


def stage_report(cfg: PipelineConfig) -> None:
    from .metrics import MetricReport

    with open(_require(cfg.out("clustering_best.json")), encoding="utf-8") as fh:
        best_summary = json.load(fh)
    cluster_rows = []
    for mode in MODES:
        info = best_summary.get(mode.value)
        if info is None:
            cluster_rows.append(ClusteringTableRow(mode.value, "n/a", "n/a", None, None, None, None))
            continue
        cluster_rows.append(
            ClusteringTableRow(
                representation=mode.value,
                model=info["provider"],
                algorithm=info["algorithm"],
                clusters=info["k"],
                ari=info["ari"],
                nmi=info["nmi"],
                silhouette=info["silhouette"],
            )
        )
    emit_clustering_table(cluster_rows, cfg.out("clustering_table.csv"), cfg.out("clustering_table.md"))

    with open(_require(cfg.out("classification_rows.json")), encoding="utf-8") as fh:
        rows_raw = json.load(fh)
    class_rows = [
        ClassificationTableRow(r["using_mode"], r["model"], MetricReport(**_metric_kwargs(r["metrics"])))
        for r in rows_raw
    ]
    emit_classification_table(class_rows, cfg.out("classification_table.csv"), cfg.out("classification_table.md"))

    with open(cfg.out("cluster_composition.csv"), "w", encoding="utf-8", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(("mode", "cluster", "total", "dominant_label", "purity", "counts"))
        for mode in MODES:
            info = best_summary.get(mode.value)
            if not info:
                continue
            for r in info["composition"]:
                counts = ";".join(f"{k}={v}" for k, v in sorted(r["counts"].items()))
                writer.writerow([mode.value, r["cluster"], r["total"], r["dominant"], f"{r['purity']:.4f}", counts])
            writer.writerow([mode.value, "overall", "", "", f"{info['overall_purity']:.4f}", ""])

    provider = cfg.make_provider()
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "stage_seeds": {
            "split": cfg.seed,
            "cluster_sweep": cfg.seed,
            "train": {m.value: cfg.seed + i for i, m in enumerate(MODES)},
        },
        "config": asdict(cfg),
        "provider": {"name": provider.name, "dim": provider.dim},
        "inputs": {
            "corpus_sha256": file_digest(cfg.corpus) if cfg.corpus and Path(cfg.corpus).exists() else None,
            "conllu_sha256": file_digest(cfg.conllu) if cfg.conllu and Path(cfg.conllu).exists() else None,
        },
        "conventions": {
            "nmi_normalizer": "arithmetic-mean",
            "auc_ties": "midrank",
            "hdbscan_noise_metric_convention": "noise-as-one-pseudo-cluster",
            "gmm_covariance": "diagonal",
        },
        "timestamp": None,
    }
    write_manifest(cfg.out("manifest.json"), manifest)


def _metric_kwargs(metrics: dict) -> dict:
    names = {
        "acc": "accuracy",
        "f1_m": "f1_macro",
        "f1_w": "f1_weighted",
        "p_m": "precision_macro",
        "p_w": "precision_weighted",
        "r_m": "recall_macro",
        "r_w": "recall_weighted",
        "kappa": "kappa",
        "mcc": "mcc",
        "top3_acc": "top3_accuracy",
        "roc": "roc_auc_macro",
    }
    return {names[k]: v for k, v in metrics.items()}


STAGES = {
    "ingest": stage_ingest,
    "triples": stage_triples,
    "repr": stage_repr,
    "embed": stage_embed,
    "cluster": stage_cluster,
    "propagate": stage_propagate,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "report": stage_report,
}

PIPELINE_ORDER = ("ingest", "triples", "repr", "embed", "cluster", "propagate", "train", "evaluate", "report")


def run_pipeline(cfg: PipelineConfig) -> None:
    for name in PIPELINE_ORDER:
        log.info("stage: %s", name)
        STAGES[name](cfg)
