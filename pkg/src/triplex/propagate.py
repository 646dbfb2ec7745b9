"""Nearest-neighbor propagation of cluster labels across embedding matrices."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingMatrix


class PropagationError(Exception):
    pass


@dataclass(frozen=True)
class Assignment:
    cluster: int
    neighbor_id: str
    similarity: float


@dataclass
class PropagationMap:
    provider_name: str
    mode: str
    assignments: dict[str, Assignment]


def propagate_labels(source: EmbeddingMatrix, source_labels, target: EmbeddingMatrix) -> PropagationMap:
    """Each target row takes the label of its maximum-cosine source row.

    Exact exhaustive search; ties go to the lowest source index.
    """
    if source.vectors.shape[0] == 0:
        raise PropagationError("empty source matrix")
    if source.dim != target.dim:
        raise PropagationError(f"dim mismatch: source {source.dim} vs target {target.dim}")
    source_labels = np.asarray(source_labels)
    if len(source_labels) != source.vectors.shape[0]:
        raise PropagationError("source label count does not match source rows")
    sims = target.vectors @ source.vectors.T  # rows are unit-norm, so this is cosine
    nn = sims.argmax(axis=1)  # argmax returns the first (lowest-index) maximum
    assignments = {}
    for i, doc_id in enumerate(target.doc_ids):
        j = int(nn[i])
        assignments[doc_id] = Assignment(
            cluster=int(source_labels[j]),
            neighbor_id=source.doc_ids[j],
            similarity=float(sims[i, j]),
        )
    return PropagationMap(provider_name=source.provider_name, mode=source.mode, assignments=assignments)


def write_propagation_jsonl(path, pmap: PropagationMap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, a in pmap.assignments.items():
            fh.write(
                json.dumps(
                    {"doc_id": doc_id, "cluster": a.cluster, "neighbor_id": a.neighbor_id, "similarity": a.similarity},
                    sort_keys=True,
                )
            )
            fh.write("\n")
