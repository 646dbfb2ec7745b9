"""The four document representation modes fed to the embedding stage."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .corpus import Document
from .triples import KnowledgeGraph, Triple, linearize

SEP = "[SEP]"


class ReprMode(str, Enum):
    ABSTRACT = "abstract"
    TRIPLES = "triples"
    ABSTRACT_TRIPLES = "abstract_triples"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class ReprDoc:
    doc_id: str
    mode: ReprMode
    text: str


def triples_text(triples: list[Triple]) -> str:
    """Linearized statements joined with single spaces, in extraction order."""
    ordered = sorted(enumerate(triples), key=lambda it: (it[1].sentence_index, it[0]))
    return " ".join(linearize(t) for _, t in ordered)


def graph_text(graph: KnowledgeGraph) -> str:
    return "; ".join(f"{s} —{r}→ {o}" for s, r, o, _ in graph.edges)


def build_representation(
    doc: Document,
    triples: list[Triple],
    mode: ReprMode,
    include_graph: bool = False,
    graph: KnowledgeGraph | None = None,
) -> ReprDoc:
    abstract = doc.abstract_clean
    tt = triples_text(triples)
    if mode is ReprMode.ABSTRACT:
        text = abstract
    elif mode is ReprMode.TRIPLES:
        text = tt
    elif mode is ReprMode.ABSTRACT_TRIPLES:
        text = f"{abstract} {tt}".rstrip() if tt else abstract
    elif mode is ReprMode.HYBRID:
        text = f"{abstract} {SEP} {tt}"
        if include_graph:
            gt = graph_text(graph) if graph is not None else ""
            text = f"{text} {SEP} {gt}"
    else:  # pragma: no cover
        raise ValueError(f"unknown mode {mode!r}")
    return ReprDoc(doc_id=doc.id, mode=mode, text=text)


def write_reprs_jsonl(path, reprs: list[ReprDoc]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reprs:
            fh.write(json.dumps({"doc_id": r.doc_id, "mode": r.mode.value, "text": r.text}, sort_keys=True))
            fh.write("\n")


def read_reprs_jsonl(path) -> list[ReprDoc]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(ReprDoc(rec["doc_id"], ReprMode(rec["mode"]), rec["text"]))
    return out
