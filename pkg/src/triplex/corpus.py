"""Corpus ingestion: JSONL metadata -> cleaned documents and seeded splits."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

_WS = re.compile(r"\s+")


class CorpusError(Exception):
    pass


def clean_text(raw: str) -> str:
    """Lowercase and collapse every whitespace run to a single space."""
    return _WS.sub(" ", raw).strip().lower()


def map_label(category: str) -> str:
    """'cs.AI' -> 'cs'; categories without a dot ('hep-th') pass through."""
    if not category:
        raise CorpusError("empty category string")
    prefix = category.split(".", 1)[0]
    # a leading dot ('.foo') has no usable prefix; keep the string as-is
    return prefix or category


@dataclass(frozen=True)
class Document:
    id: str
    abstract_raw: str
    abstract_clean: str
    categories: tuple[str, ...]
    primary_label: str

    @classmethod
    def from_record(cls, rec: dict) -> "Document":
        raw = rec["abstract"]
        cats = tuple(rec["categories"])
        if not cats:
            raise CorpusError("record has empty categories list")
        return cls(
            id=str(rec["id"]),
            abstract_raw=raw,
            abstract_clean=clean_text(raw),
            categories=cats,
            primary_label=map_label(cats[0]),
        )


@dataclass
class LoadReport:
    n_valid: int = 0
    n_skipped: int = 0
    diagnostics: list[str] = field(default_factory=list)


def load_corpus(path, report: LoadReport | None = None) -> list[Document]:
    """Read a JSONL corpus; skip and count malformed or incomplete lines.

    Raises CorpusError if the file is unreadable or yields zero documents.
    """
    rep = report if report is not None else LoadReport()
    docs: list[Document] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise CorpusError(f"cannot read corpus file {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                rep.n_skipped += 1
                rep.diagnostics.append(f"line {lineno}: malformed JSON ({e.msg})")
                continue
            if not isinstance(rec, dict) or "id" not in rec or not rec.get("abstract") or not rec.get("categories"):
                rep.n_skipped += 1
                rep.diagnostics.append(f"line {lineno}: missing id/abstract/categories")
                continue
            doc = Document.from_record(rec)
            if doc.id in seen:
                rep.n_skipped += 1
                rep.diagnostics.append(f"line {lineno}: duplicate id {doc.id!r}")
                continue
            seen.add(doc.id)
            docs.append(doc)
    rep.n_valid = len(docs)
    for msg in rep.diagnostics:
        log.warning("%s: %s", path, msg)
    if not docs:
        raise CorpusError(f"empty corpus: no valid documents in {path}")
    return docs


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 42
    n_cluster: int = 5000
    n_class: int = 10000


def split_corpus(docs: list[Document], spec: SplitSpec) -> tuple[list[Document], list[Document]]:
    """Deterministic disjoint (cluster_set, class_set) split.

    The permutation comes from numpy's PCG64 generator seeded with spec.seed,
    so equal seeds give identical splits on every platform.
    """
    need = spec.n_cluster + spec.n_class
    if len(docs) < need:
        raise CorpusError(
            f"insufficient documents: need {need} "
            f"({spec.n_cluster} cluster + {spec.n_class} class), have {len(docs)}"
        )
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    perm = rng.permutation(len(docs))
    cluster_set = [docs[i] for i in perm[: spec.n_cluster]]
    class_set = [docs[i] for i in perm[spec.n_cluster : need]]
    return cluster_set, class_set


def write_split_manifest(path, spec: SplitSpec, cluster_set, class_set) -> None:
    payload = {
        "seed": spec.seed,
        "cluster_ids": [d.id for d in cluster_set],
        "class_ids": [d.id for d in class_set],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
