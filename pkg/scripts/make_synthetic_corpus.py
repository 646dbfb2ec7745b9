#!/usr/bin/env python3
"""Generate the bundled 200-document synthetic corpus plus matching parses.

Writes data/synthetic/corpus.jsonl and data/synthetic/parses.conllu.
Abstracts are simple subject-verb-object sentences with topic-specific
vocabulary so that hashed embeddings separate by label; the CoNLL-U file
carries the gold dependency structure for each sentence.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SEED = 42
DOCS_PER_LABEL = 40

TOPICS = {
    "cs.AI": {
        "nouns": ["transformer", "network", "gradient", "optimizer", "embedding", "classifier", "dataset", "benchmark"],
        "verbs": ["improves", "trains", "predicts", "encodes", "outperforms"],
    },
    "math.GR": {
        "nouns": ["group", "subgroup", "homomorphism", "lattice", "permutation", "generator", "quotient", "automorphism"],
        "verbs": ["preserves", "generates", "classifies", "extends", "characterizes"],
    },
    "astro-ph": {
        "nouns": ["galaxy", "redshift", "supernova", "spectrum", "telescope", "luminosity", "nebula", "quasar"],
        "verbs": ["measures", "observes", "constrains", "reveals", "traces"],
    },
    "hep-th": {
        "nouns": ["string", "brane", "amplitude", "symmetry", "duality", "vacuum", "lagrangian", "anomaly"],
        "verbs": ["breaks", "couples", "quantizes", "unifies", "stabilizes"],
    },
    "q-bio.PE": {
        "nouns": ["population", "mutation", "genome", "epidemic", "phenotype", "selection", "pathogen", "lineage"],
        "verbs": ["spreads", "evolves", "infects", "drives", "shapes"],
    },
}

CONLLU_SENT = """1\t{s}\t{sl}\tNOUN\t_\t_\t2\tnsubj\t_\t_
2\t{v}\t{vl}\tVERB\t_\t_\t0\tROOT\t_\t_
3\t{o}\t{ol}\tNOUN\t_\t_\t2\tdobj\t_\t_
4\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_
"""


def lemma(word: str) -> str:
    return word[:-1] if word.endswith("s") else word


def main() -> None:
    rng = np.random.Generator(np.random.PCG64(SEED))
    outdir = Path(__file__).resolve().parent.parent / "data" / "synthetic"
    outdir.mkdir(parents=True, exist_ok=True)
    corpus_lines = []
    conllu_parts = []
    doc_n = 0
    for label, vocab in TOPICS.items():
        for _ in range(DOCS_PER_LABEL):
            doc_id = f"synth-{doc_n:04d}"
            doc_n += 1
            sentences = []
            if doc_id == "synth-0000":
                sentences.append(("transformer", "improves", "accuracy"))
            while len(sentences) < 4:
                s, o = rng.choice(vocab["nouns"], size=2, replace=False)
                v = rng.choice(vocab["verbs"])
                sentences.append((str(s), str(v), str(o)))
            raw = "  ".join(f"{s.capitalize()} {v} {o}." for s, v, o in sentences)
            corpus_lines.append(
                json.dumps({"id": doc_id, "abstract": raw, "categories": [label]}, sort_keys=True)
            )
            block = [f"# newdoc id = {doc_id}"]
            for i, (s, v, o) in enumerate(sentences):
                block.append(f"# sent_id = {doc_id}-{i}")
                block.append(f"# text = {s} {v} {o} .")
                block.append(
                    CONLLU_SENT.format(s=s, sl=lemma(s), v=v, vl=lemma(v), o=o, ol=lemma(o)).rstrip("\n")
                )
                block.append("")
            conllu_parts.append("\n".join(block))
    (outdir / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    (outdir / "parses.conllu").write_text("\n".join(conllu_parts) + "\n", encoding="utf-8")
    print(f"wrote {doc_n} documents to {outdir}")


if __name__ == "__main__":
    main()
