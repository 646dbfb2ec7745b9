"""Dependency-pattern triple extraction from CoNLL-U parses."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field


class ConlluError(Exception):
    pass


def flatten_abstract(text: str) -> str:
    """Remove line breaks, joining with single spaces."""
    return re.sub(r"\s*\n\s*", " ", text)


@dataclass(frozen=True)
class ParsedToken:
    index: int  # 1-based
    form: str
    lemma: str
    upos: str
    head: int  # 0 = root
    deprel: str


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[ParsedToken, ...]
    text: str
    doc_id: str | None = None


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str
    doc_id: str
    sentence_index: int
    sentence_text: str


@dataclass
class KnowledgeGraph:
    nodes: set[str] = field(default_factory=set)
    edges: list[tuple[str, str, str, str]] = field(default_factory=list)


_MWT_ID = re.compile(r"^\d+-\d+$")
_EMPTY_ID = re.compile(r"^\d+\.\d+$")


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Multiword-token ranges ('3-4') and empty nodes ('5.1') are skipped.
    ``# newdoc id =`` comments set doc_id for the following sentences;
    ``# text =`` comments set the sentence text (else forms are joined).
    """
    sentences: list[Sentence] = []
    tokens: list[ParsedToken] = []
    sent_text: str | None = None
    doc_id: str | None = None

    def close():
        nonlocal tokens, sent_text
        if tokens:
            text_ = sent_text if sent_text is not None else " ".join(t.form for t in tokens)
            sentences.append(Sentence(tuple(tokens), text_, doc_id))
        tokens = []
        sent_text = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip():
            close()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("newdoc id"):
                close()
                doc_id = body.split("=", 1)[1].strip() if "=" in body else None
            elif body.startswith("text") and "=" in body and body.split("=", 1)[0].strip() == "text":
                sent_text = body.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        tok_id = cols[0]
        if _MWT_ID.match(tok_id) or _EMPTY_ID.match(tok_id):
            continue
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError as e:
            raise ConlluError(f"line {lineno}: non-integer token id or head ({e})") from e
        tokens.append(ParsedToken(index=index, form=cols[1], lemma=cols[2], upos=cols[3], head=head, deprel=cols[7]))
    close()
    return sentences


def parse_conllu_file(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read())


@dataclass(frozen=True)
class DeprelPreset:
    """Dependency-label inventory driving the extraction rules."""

    name: str
    subject_labels: frozenset[str]
    passive_subject_labels: frozenset[str]
    object_labels: frozenset[str]
    prep_label: str | None  # verb -> prep -> pobj chain (spaCy style)
    pobj_label: str | None
    oblique_labels: frozenset[str]  # UD: verb -> obl with case child
    case_label: str = "case"


SPACY_PRESET = DeprelPreset(
    name="spacy",
    subject_labels=frozenset({"nsubj"}),
    passive_subject_labels=frozenset({"nsubjpass"}),
    object_labels=frozenset({"dobj"}),
    prep_label="prep",
    pobj_label="pobj",
    oblique_labels=frozenset(),
)

UD_PRESET = DeprelPreset(
    name="ud",
    subject_labels=frozenset({"nsubj"}),
    passive_subject_labels=frozenset({"nsubj:pass"}),
    object_labels=frozenset({"obj"}),
    prep_label=None,
    pobj_label=None,
    oblique_labels=frozenset({"obl"}),
)

PRESETS = {p.name: p for p in (SPACY_PRESET, UD_PRESET)}


def _children(tokens) -> dict[int, list[ParsedToken]]:
    kids: dict[int, list[ParsedToken]] = {}
    for t in tokens:
        kids.setdefault(t.head, []).append(t)
    for lst in kids.values():
        lst.sort(key=lambda t: t.index)
    return kids


def subtree_text(tokens, head: ParsedToken, kids=None, drop_deprels: frozenset[str] = frozenset()) -> str:
    """Contiguous text of the head's dependency subtree, punctuation excluded."""
    if kids is None:
        kids = _children(tokens)
    stack = [head]
    members = []
    while stack:
        t = stack.pop()
        members.append(t)
        stack.extend(kids.get(t.index, ()))
    members = [t for t in members if t.upos != "PUNCT" and t.deprel not in drop_deprels]
    members.sort(key=lambda t: t.index)
    return " ".join(t.form for t in members)


def extract_triples(
    tokens,
    doc_id: str,
    sentence_index: int,
    sentence_text: str,
    preset: DeprelPreset = SPACY_PRESET,
    use_lemma: bool = False,
    accept_passive: bool = True,
) -> list[Triple]:
    """Verb-anchored (subject, relation, object) extraction.

    One triple per verb: leftmost subject dependent, leftmost direct object,
    with a prepositional-object (or UD oblique) fallback when no direct
    object exists. Argument strings are punctuation-free subtree spans.
    """
    tokens = tuple(tokens)
    kids = _children(tokens)
    subj_labels = set(preset.subject_labels)
    if accept_passive:
        subj_labels |= preset.passive_subject_labels
    triples: list[Triple] = []
    for verb in sorted(tokens, key=lambda t: t.index):
        if verb.upos != "VERB":
            continue
        deps = kids.get(verb.index, [])
        subj = next((d for d in deps if d.deprel in subj_labels), None)
        if subj is None:
            continue
        obj = next((d for d in deps if d.deprel in preset.object_labels), None)
        obj_drop: frozenset[str] = frozenset()
        if obj is None and preset.prep_label is not None:
            for prep in deps:
                if prep.deprel != preset.prep_label:
                    continue
                pobj = next(
                    (d for d in kids.get(prep.index, []) if d.deprel == preset.pobj_label),
                    None,
                )
                if pobj is not None:
                    obj = pobj
                    break
        if obj is None and preset.oblique_labels:
            obj = next((d for d in deps if d.deprel in preset.oblique_labels), None)
            if obj is not None:
                obj_drop = frozenset({preset.case_label})
        if obj is None:
            continue
        triples.append(
            Triple(
                subject=subtree_text(tokens, subj, kids),
                relation=verb.lemma if use_lemma else verb.form,
                object=subtree_text(tokens, obj, kids, drop_deprels=obj_drop),
                doc_id=doc_id,
                sentence_index=sentence_index,
                sentence_text=sentence_text,
            )
        )
    return triples


def extract_document_triples(sentences: list[Sentence], doc_id: str, **kwargs) -> list[Triple]:
    out: list[Triple] = []
    for i, sent in enumerate(sentences):
        out.extend(extract_triples(sent.tokens, doc_id, i, sent.text, **kwargs))
    return out


def linearize(triple: Triple) -> str:
    """Render a triple as a capitalized, period-terminated statement."""
    stmt = f"{triple.subject} {triple.relation} {triple.object}."
    return stmt[:1].upper() + stmt[1:]


def build_graph(triples: list[Triple]) -> KnowledgeGraph:
    g = KnowledgeGraph()
    for t in triples:
        g.nodes.add(t.subject)
        g.nodes.add(t.object)
        g.edges.append((t.subject, t.relation, t.object, t.sentence_text))
    return g


def write_triples_jsonl(path, triples: list[Triple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(
                json.dumps(
                    {
                        "doc_id": t.doc_id,
                        "sentence_index": t.sentence_index,
                        "subject": t.subject,
                        "relation": t.relation,
                        "object": t.object,
                        "sentence_text": t.sentence_text,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


def read_triples_jsonl(path) -> list[Triple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                Triple(
                    subject=rec["subject"],
                    relation=rec["relation"],
                    object=rec["object"],
                    doc_id=rec["doc_id"],
                    sentence_index=rec["sentence_index"],
                    sentence_text=rec["sentence_text"],
                )
            )
    return out
