from __future__ import annotations

import json

import pytest

from forum_sentinel.cli import load_feature_dump, main
from forum_sentinel.model import load_model
from forum_sentinel.syngen import GenSpec, generate

from conftest import post_obj, record


@pytest.fixture
def small_corpus(tmp_path):
    """Two courses, known counts: C1 has 2 intervened / 3 not, C2 has 1 / 1."""
    records = []

    def add(course, tid, roles, texts=None, subforum="lecture"):
        texts = texts or ["But if alpha is beta then we wait"] * len(roles)
        posts = [post_obj(i, role=r, text=t) for i, (r, t) in enumerate(zip(roles, texts))]
        records.append(record(course=course, tid=tid, subforum=subforum, posts=posts))

    for i in range(2):
        add("C1", f"pos{i}", ["student", "student", "instructor"])
    for i in range(3):
        add("C1", f"neg{i}", ["student", "student"], texts=["gamma delta epsilon"] * 2)
    add("C2", "pos0", ["student", "instructor"])
    add("C2", "neg0", ["student"], texts=["omega words here"])
    # dropped on ingestion: noisy subforum and staff-first threads
    add("C1", "noise", ["student"], subforum="study_group")
    add("C1", "staff-first", ["instructor", "student"])
    path = tmp_path / "corpus.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in records), "utf-8")
    return path


@pytest.fixture
def syn_corpus(tmp_path):
    path = tmp_path / "syn.jsonl"
    generate(
        GenSpec(
            n_courses=2, threads_per_course=50, intervention_ratio=0.3,
            vocabulary_disjointness=0.5, discourse_signal_strength=0.8, seed=2,
        ),
        path,
    )
    return path


class TestIngest:
    def test_counts_after_filtering(self, small_corpus, capsys):
        assert main(["ingest", "--corpus", str(small_corpus)]) == 0
        out = capsys.readouterr().out
        lines = [l.split() for l in out.strip().splitlines()[1:]]
        assert lines[0] == ["C1", "2", "3", "0.67"]
        assert lines[1] == ["C2", "1", "1", "1.00"]

    def test_empty_corpus(self, tmp_path, capsys):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert main(["ingest", "--corpus", str(path)]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 1  # header only


class TestTag:
    def test_writes_tagfile_and_distribution(self, small_corpus, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["tag", "--corpus", str(small_corpus), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "%" in printed
        tagfile = out / "tags.tsv"
        assert tagfile.exists()
        line = tagfile.read_text().splitlines()[0]
        assert line.startswith("C1\tpos0\tp0\t")

    def test_import_echoes_verbatim(self, small_corpus, tmp_path):
        out1 = tmp_path / "o1"
        main(["tag", "--corpus", str(small_corpus), "--out", str(out1)])
        out2 = tmp_path / "o2"
        code = main(
            ["tag", "--corpus", str(small_corpus), "--tags", str(out1 / "tags.tsv"), "--out", str(out2)]
        )
        assert code == 0
        assert (out1 / "tags.tsv").read_bytes() == (out2 / "tags.tsv").read_bytes()


class TestFeaturizeTrain:
    def test_featurize_then_train(self, small_corpus, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["featurize", "--corpus", str(small_corpus), "--features", "eplusp", "--out", str(out)]) == 0
        space, rows = load_feature_dump(out / "features.tsv")
        assert space.config == "eplusp"
        assert len(rows) == 7
        assert main(["train", "--features-file", str(out / "features.tsv"), "--out", str(out)]) == 0
        model = load_model(out / "model.txt")
        assert model.feature_space == space
        assert model.class_weight_value == pytest.approx(4 / 3)

    def test_featurize_jobs_equivalence(self, syn_corpus, tmp_path):
        o1, o2 = tmp_path / "j1", tmp_path / "j2"
        main(["featurize", "--corpus", str(syn_corpus), "--features", "pdtb", "--out", str(o1)])
        main(["featurize", "--corpus", str(syn_corpus), "--features", "pdtb", "--jobs", "2", "--out", str(o2)])
        assert (o1 / "features.tsv").read_bytes() == (o2 / "features.tsv").read_bytes()


class TestEval:
    def test_in_domain_records_and_rerun_identical(self, syn_corpus, tmp_path, capsys):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        args = ["eval", "--corpus", str(syn_corpus), "--features", "pdtb",
                "--regime", "in-domain", "--k", "3", "--seed", "5", "--emit", "records"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "report.jsonl").read_bytes() == (out2 / "report.jsonl").read_bytes()
        rows = [json.loads(l) for l in (out1 / "report.jsonl").read_text().splitlines()]
        assert rows[0]["row"] == "config"
        assert {r["row"] for r in rows} == {"config", "course", "macro", "weighted_macro"}

    def test_ccv_table_output(self, syn_corpus, tmp_path, capsys):
        out = tmp_path / "e"
        code = main(["eval", "--corpus", str(syn_corpus), "--features", "eplusp",
                     "--regime", "ccv", "--emit", "table", "--out", str(out)])
        assert code == 0
        text = (out / "report.txt").read_text()
        assert "Weighted macro avg." in text

    def test_csv_output(self, syn_corpus, tmp_path):
        out = tmp_path / "e"
        main(["eval", "--corpus", str(syn_corpus), "--features", "pdtb",
              "--regime", "ccv", "--emit", "csv", "--out", str(out)])
        header = (out / "report.csv").read_text().splitlines()[0]
        assert header == "course,n_threads,precision,recall,f1"


class TestSyngenCommand:
    def test_generates_corpus(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {
                    "n_courses": 1, "threads_per_course": 5, "intervention_ratio": 0.5,
                    "vocabulary_disjointness": 0.5, "discourse_signal_strength": 0.5, "seed": 3,
                }
            )
        )
        out = tmp_path / "o"
        assert main(["syngen", "--spec", str(spec), "--out", str(out)]) == 0
        assert len((out / "corpus.jsonl").read_text().splitlines()) == 5


class TestConfigAndErrors:
    def test_config_file_supplies_corpus(self, small_corpus, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"corpus": str(small_corpus)}))
        assert main(["ingest", "--config", str(cfg)]) == 0
        assert "C1" in capsys.readouterr().out

    def test_flag_overrides_config(self, small_corpus, tmp_path, capsys):
        other = tmp_path / "other.jsonl"
        other.write_text("")
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"corpus": str(other)}))
        assert main(["ingest", "--config", str(cfg), "--corpus", str(small_corpus)]) == 0
        assert "C1" in capsys.readouterr().out

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"corpse": "x"}))
        assert main(["ingest", "--config", str(cfg), "--corpus", "anything"]) == 1

    def test_missing_corpus_flag(self, capsys):
        assert main(["ingest"]) == 1

    def test_malformed_corpus_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json\n")
        assert main(["ingest", "--corpus", str(bad)]) == 2

    def test_missing_file_exit_code(self, tmp_path, capsys):
        assert main(["ingest", "--corpus", str(tmp_path / "nope.jsonl")]) == 2
