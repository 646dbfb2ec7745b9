import json

import pytest

from triplex.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main


def _config(tmp_path, **overrides):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text(
        "\n".join(
            json.dumps({"id": f"d{i}", "abstract": f"model {i} improves task {i}.", "categories": ["cs.AI" if i % 2 else "math.GR"]})
            for i in range(20)
        )
        + "\n"
    )
    conllu = []
    for i in range(20):
        conllu.append(f"# newdoc id = d{i}")
        conllu.append("1\tmodel\tmodel\tNOUN\t_\t_\t2\tnsubj\t_\t_")
        conllu.append("2\timproves\timprove\tVERB\t_\t_\t0\tROOT\t_\t_")
        conllu.append("3\ttask\ttask\tNOUN\t_\t_\t2\tdobj\t_\t_")
        conllu.append("")
    (tmp_path / "parses.conllu").write_text("\n".join(conllu))
    cfg = tmp_path / "cfg.toml"
    settings = {
        "n_cluster": 8,
        "n_class": 8,
        "k_min": 2,
        "k_max": 3,
        "hdbscan_sizes": "[2, 4]",
        "n_trials": 1,
        **overrides,
    }
    cfg.write_text(
        f"""
seed = 42

[paths]
corpus = "{corpus}"
conllu = "{tmp_path / 'parses.conllu'}"
outdir = "{tmp_path / 'out'}"

[split]
n_cluster = {settings['n_cluster']}
n_class = {settings['n_class']}

[provider]
kind = "hash"
dim = 16

[cluster]
k_min = {settings['k_min']}
k_max = {settings['k_max']}
hdbscan_sizes = {settings['hdbscan_sizes']}

[train]
n_trials = {settings['n_trials']}
"""
    )
    return cfg


def test_usage_errors_exit_1(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["not-a-command"]) == EXIT_USAGE
    assert main(["cluster"]) == EXIT_USAGE  # --config is required
    assert main(["cluster", "--config", "x.toml", "--seed", "abc"]) == EXIT_USAGE


def test_missing_config_file_exit_2(tmp_path, capsys):
    assert main(["ingest", "--config", str(tmp_path / "nope.toml")]) == EXIT_DATA
    assert "error" in capsys.readouterr().err


def test_stage_without_inputs_exit_2(tmp_path, capsys):
    cfg = _config(tmp_path)
    # evaluate needs artifacts from earlier stages that do not exist yet
    assert main(["evaluate", "--config", str(cfg)]) == EXIT_DATA


def test_ingest_and_triples_exit_0(tmp_path):
    cfg = _config(tmp_path)
    assert main(["ingest", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "corpus_clean.jsonl").exists()
    assert (tmp_path / "out" / "split_manifest.json").exists()
    assert main(["triples", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "triples.jsonl").exists()


def test_bad_corpus_exit_2(tmp_path, capsys):
    cfg = _config(tmp_path)
    (tmp_path / "corpus.jsonl").write_text("")
    assert main(["ingest", "--config", str(cfg)]) == EXIT_DATA


def test_parser_has_all_stages():
    parser = build_parser()
    actions = {a.dest: a for a in parser._subparsers._group_actions}
    sub = actions["command"]
    for name in ("ingest", "triples", "repr", "embed", "cluster", "propagate", "train", "evaluate", "report", "pipeline"):
        assert name in sub.choices


def test_seed_override(tmp_path):
    cfg = _config(tmp_path)
    assert main(["ingest", "--config", str(cfg), "--seed", "7"]) == EXIT_OK
    manifest = json.loads((tmp_path / "out" / "split_manifest.json").read_text())
    assert manifest["seed"] == 7
