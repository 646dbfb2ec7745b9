from pathlib import Path

import pytest

from triplex.triples import (
    ConlluError,
    PRESETS,
    Triple,
    build_graph,
    extract_document_triples,
    extract_triples,
    flatten_abstract,
    linearize,
    parse_conllu,
    parse_conllu_file,
)

FIXTURE = Path(__file__).parent / "data" / "extraction_fixture.conllu"


def test_flatten_abstract():
    assert flatten_abstract("line1\nline2") == "line1 line2"
    assert flatten_abstract("no breaks") == "no breaks"
    assert flatten_abstract("a\n\nb") == "a b"


SIMPLE = """1\ttransformer\ttransformer\tNOUN\t_\t_\t2\tnsubj\t_\t_
2\timproves\timprove\tVERB\t_\t_\t0\tROOT\t_\t_
3\taccuracy\taccuracy\tNOUN\t_\t_\t2\tdobj\t_\t_

1\tok\tok\tNOUN\t_\t_\t0\tROOT\t_\t_
"""


def test_parse_conllu_structure():
    sents = parse_conllu(SIMPLE)
    assert len(sents) == 2
    tok = sents[0].tokens[0]
    assert tok.index == 1 and tok.deprel == "nsubj" and tok.head == 2
    assert tok.upos == "NOUN"


def test_parse_conllu_skips_ranges_and_empty_nodes():
    text = (
        "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\ta\ta\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
        "2\tb\tb\tVERB\t_\t_\t0\tROOT\t_\t_\n"
        "2.1\tnull\t_\t_\t_\t_\t_\t_\t_\t_\n"
    )
    sents = parse_conllu(text)
    assert [t.index for t in sents[0].tokens] == [1, 2]


def test_parse_conllu_errors():
    with pytest.raises(ConlluError, match="10 columns"):
        parse_conllu("1\ta\tb\n")
    with pytest.raises(ConlluError, match="non-integer"):
        parse_conllu("1\ta\ta\tNOUN\t_\t_\tX\tnsubj\t_\t_\n")


def test_parse_conllu_newdoc_comment():
    text = "# newdoc id = doc-1\n" + SIMPLE
    sents = parse_conllu(text)
    assert sents[0].doc_id == "doc-1"


def test_extract_simple_svo():
    sent = parse_conllu(SIMPLE)[0]
    triples = extract_triples(sent.tokens, "d", 0, sent.text)
    assert [(t.subject, t.relation, t.object) for t in triples] == [("transformer", "improves", "accuracy")]


def test_extract_lemma_mode():
    sent = parse_conllu(SIMPLE)[0]
    triples = extract_triples(sent.tokens, "d", 0, sent.text, use_lemma=True)
    assert triples[0].relation == "improve"


EXPECTED_FIXTURE_TRIPLES = [
    ("transformer", "improves", "accuracy"),
    ("we", "rely", "embeddings"),
    ("deep models", "require", "large data"),
    ("the method", "proposed", "authors"),
    ("results", "suggest", "improvements"),
    ("the model", "achieves", "accuracy and speed"),
    ("authors", "propose", "a framework"),
    ("it", "depends", "data quality"),
    ("the study", "shows", "gains"),
    ("researchers", "evaluate", "models"),
    ("this approach", "reduces", "cost"),
    ("noise", "hurts", "performance"),
    ("regularization", "helps", "generalization"),
    ("we", "present", "a new method for clustering"),
    ("the system", "outperforms", "baselines"),
    ("experiments", "confirm", "the hypothesis"),
]


def test_extraction_fixture_parity():
    sents = parse_conllu_file(FIXTURE)
    assert len(sents) == 20
    got = []
    for i, sent in enumerate(sents):
        for t in extract_triples(sent.tokens, "fx", i, sent.text):
            got.append((t.subject, t.relation, t.object))
    assert got == EXPECTED_FIXTURE_TRIPLES


def test_passive_config_off():
    sents = parse_conllu_file(FIXTURE)
    passive = sents[4]  # "the method was proposed by authors ."
    assert extract_triples(passive.tokens, "fx", 4, passive.text, accept_passive=False) == []


def test_ud_preset_oblique():
    text = (
        "1\twe\twe\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
        "2\trely\trely\tVERB\t_\t_\t0\troot\t_\t_\n"
        "3\ton\ton\tADP\t_\t_\t4\tcase\t_\t_\n"
        "4\tembeddings\tembedding\tNOUN\t_\t_\t2\tobl\t_\t_\n"
        "5\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n"
    )
    sent = parse_conllu(text)[0]
    triples = extract_triples(sent.tokens, "d", 0, sent.text, preset=PRESETS["ud"])
    assert [(t.subject, t.relation, t.object) for t in triples] == [("we", "rely", "embeddings")]


def test_extract_deterministic():
    sents = parse_conllu_file(FIXTURE)
    runs = [extract_document_triples(sents, "fx") for _ in range(2)]
    assert runs[0] == runs[1]


def _triple(s, r, o):
    return Triple(subject=s, relation=r, object=o, doc_id="d", sentence_index=0, sentence_text="")


def test_linearize():
    assert linearize(_triple("transformer", "improves", "accuracy")) == "Transformer improves accuracy."
    assert linearize(_triple("x", "y", "z")) == "X y z."
    assert linearize(_triple("deep models", "require", "large data")) == "Deep models require large data."


def test_build_graph():
    g = build_graph([])
    assert g.nodes == set() and g.edges == []
    g = build_graph([_triple("a", "r", "b")])
    assert g.nodes == {"a", "b"} and len(g.edges) == 1
    g = build_graph([_triple("a", "r", "b"), _triple("b", "s", "c"), _triple("a", "r", "b")])
    assert g.nodes == {"a", "b", "c"} and len(g.edges) == 3
