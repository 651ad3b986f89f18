from __future__ import annotations

import json
import subprocess
import sys

import pytest

from courtrel._resources import data_path
from courtrel.annotate import annotate_sentence
from courtrel.cli import detect_kind, main
from courtrel.corpus import RelationLabel as R, SentencePair
from courtrel.pipeline import PairRecord, load_records, persist_records

FOUR = (R.ELABORATION, R.NO_RELATION, R.CITATION, R.SHIFT_IN_VIEW)
REFERENCE_COUNTS = ((93, 6, 0, 0), (5, 37, 0, 0), (0, 1, 20, 0), (3, 0, 0, 0))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.json"
    assert run("train", data_path("cst_pairs.tsv"), "--model", path, "--folds", "0") == 0
    return path


@pytest.fixture
def store(model_path, tmp_path):
    path = tmp_path / "store.jsonl"
    assert run("classify", data_path("sample_transcript.txt"), "--model", model_path, "--store", path) == 0
    return path


class TestIngest:
    def test_pairs_census(self, tmp_path, capsys):
        assert run("ingest", data_path("cst_pairs.tsv"), "--out", tmp_path) == 0
        census = (tmp_path / "cst_pairs.census.tsv").read_text(encoding="utf-8").splitlines()
        assert census[0] == "label\tcount" and sum(int(l.split("\t")[1]) for l in census[1:]) == 100
        rows = (tmp_path / "cst_pairs.features.tsv").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 101
        manifest = json.loads((tmp_path / "ingest.manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "ingest" and manifest["seed"] == 0 and len(manifest["inputs"]) == 1

    def test_transcript_directory(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        (src / "a.txt").write_text("One sentence. Two sentences.", encoding="utf-8")
        (src / "b.txt").write_text("Just one.", encoding="utf-8")
        assert run("ingest", src, "--out", tmp_path / "out") == 0
        summary = (tmp_path / "out" / "ingest.tsv").read_text(encoding="utf-8")
        assert "a.txt\ttranscript\t2" in summary and "b.txt\ttranscript\t1" in summary

    def test_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("id\ttarget_text\tsource_text\tlabel\np1\ta\tb\tFriendship\n", encoding="utf-8")
        assert run("ingest", bad) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "Friendship" in err

    def test_missing(self, tmp_path, capsys):
        assert run("ingest", tmp_path / "absent.tsv") == 2

    def test_kind_detection(self):
        assert detect_kind("id\ttarget_text\tsource_text\tlabel\n") == "pairs"
        assert detect_kind("pair_id\tjudge_id\tlabel\n") == "judges"
        assert detect_kind("Some plain prose.") == "transcript"


class TestTrain:
    def test_synthetic(self, tmp_path, capsys):
        path = tmp_path / "m.json"
        assert run("train", data_path("synthetic_separable.tsv"), "--model", path, "--folds", "2") == 0
        out = capsys.readouterr().out
        assert "training accuracy: 1.000000" in out
        assert (tmp_path / "m.json.cv.tsv").exists() and (tmp_path / "m.json.manifest.json").exists()

    def test_checksum_repeatable(self, tmp_path, capsys):
        for name in ("a.json", "b.json"):
            assert run("train", data_path("synthetic_separable.tsv"), "--model", tmp_path / name,
                       "--folds", "0", "--seed", "4") == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_missing_dataset(self, tmp_path, capsys):
        assert run("train", tmp_path / "absent.tsv", "--model", tmp_path / "m.json") == 2

    def test_bad_flag(self, tmp_path, capsys):
        assert run("train", data_path("synthetic_separable.tsv"), "--model", tmp_path / "m.json",
                   "--epochs", "0") == 2

    def test_select_lambda(self, tmp_path, capsys):
        assert run("train", data_path("synthetic_separable.tsv"), "--model", tmp_path / "m.json",
                   "--folds", "2", "--epochs", "5", "--select-lambda", "0.001,0.01") == 0
        assert "lambda selection" in capsys.readouterr().out


class TestClassify:
    def test_sample(self, store, capsys):
        records = load_records(store)
        assert len(records) == 11
        assert sorted(r.provenance for r in records if r.rule_gated) == ["rule:R1", "rule:R2"]

    def test_empty_transcript(self, model_path, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("", encoding="utf-8")
        assert run("classify", empty, "--model", model_path, "--store", tmp_path / "s.jsonl") == 0
        assert load_records(tmp_path / "s.jsonl") == []

    def test_refuses_overwrite(self, model_path, store, capsys):
        args = ("classify", data_path("sample_transcript.txt"), "--model", model_path, "--store", store)
        assert run(*args) == 2
        assert run(*args, "--force") == 0

    def test_corrupt_model(self, tmp_path, capsys):
        bad = tmp_path / "m.json"
        bad.write_text("{\"kind\":", encoding="utf-8")
        assert run("classify", data_path("sample_transcript.txt"), "--model", bad, "--store",
                   tmp_path / "s.jsonl") == 2

    def test_citation_sentences(self, model_path, tmp_path, capsys):
        text = tmp_path / "cites.txt"
        text.write_text("The court considered the plea. See Hill v. Lockhart, 474 U. S. 52, 59 (1985). "
                        "Id., at 59.", encoding="utf-8")
        assert run("classify", text, "--model", model_path, "--store", tmp_path / "s.jsonl") == 0
        assert [r.provenance for r in load_records(tmp_path / "s.jsonl")] == ["rule:R1", "rule:R4"]


class TestSample:
    def test_export(self, store, tmp_path, capsys):
        out = tmp_path / "sheet.tsv"
        assert run("sample", "--store", store, "--out", out, "--sample-n", "10") == 0
        rows = out.read_text(encoding="utf-8").splitlines()
        assert len(rows) == 11

    def test_too_many(self, store, tmp_path, capsys):
        assert run("sample", "--store", store, "--out", tmp_path / "x.tsv") == 2

    def test_missing_store(self, tmp_path, capsys):
        assert run("sample", "--store", tmp_path / "none", "--out", tmp_path / "x.tsv") == 2


def reference_store(tmp_path):
    """Store and judge file whose both-agree confusion matrix is REFERENCE_COUNTS."""
    pair = SentencePair("x", annotate_sentence("The court ruled."), annotate_sentence("It agreed."))
    records, lines = [], ["pair_id\tjudge_id\tlabel"]
    for i, row in enumerate(REFERENCE_COUNTS):
        for j, count in enumerate(row):
            for _ in range(count):
                pid = f"t:{len(records):03d}"
                gated = FOUR[j] is R.CITATION
                records.append(PairRecord(pid, "t", pair, FOUR[j], "rule:R1" if gated else "svm"))
                lines += [f"{pid}\tj1\t{FOUR[i].value}", f"{pid}\tj2\t{FOUR[i].value}"]
    store = tmp_path / "table.jsonl"
    persist_records(records, store)
    judges = tmp_path / "judges.tsv"
    judges.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return store, judges


class TestEval:
    def test_reference_metrics(self, tmp_path, capsys):
        store, judges = reference_store(tmp_path)
        assert run("eval", "--store", store, "--annotations", judges, "--out", tmp_path / "ev") == 0
        rows = {l.split("\t")[0]: l.split("\t") for l in
                (tmp_path / "ev" / "metrics.tsv").read_text(encoding="utf-8").splitlines()[1:]}
        expect = {"Elaboration": (0.921, 0.939, 0.930), "No Relation": (0.841, 0.881, 0.861),
                  "Citation": (1.0, 0.952, 0.975)}
        for label, values in expect.items():
            assert [float(v) for v in rows[label][1:4]] == pytest.approx(values, abs=1e-3)
        assert rows["Shift in View"][1:4] == ["undefined", "0.000000", "undefined"]

    def test_policies_differ(self, store, tmp_path, capsys):
        outs = {}
        for policy in ("both-agree", "at-least-one"):
            out = tmp_path / policy
            assert run("eval", "--store", store, "--annotations", data_path("sample_judges.tsv"),
                       "--policy", policy, "--out", out) == 0
            outs[policy] = (out / "confusion.tsv").read_text(encoding="utf-8")
            assert (out / "report.txt").read_text(encoding="utf-8").startswith(f"policy: {policy}")
        assert outs["both-agree"] != outs["at-least-one"]

    def test_missing_annotations(self, store, tmp_path, capsys):
        assert run("eval", "--store", store, "--annotations", tmp_path / "none.tsv", "--out", tmp_path) == 2

    def test_unknown_pair(self, store, tmp_path, capsys):
        judges = tmp_path / "j.tsv"
        judges.write_text("pair_id\tjudge_id\tlabel\nnope:1\tj1\tElaboration\n", encoding="utf-8")
        assert run("eval", "--store", store, "--annotations", judges, "--out", tmp_path / "ev") == 2

    def test_store_not_modified(self, store, tmp_path, capsys):
        before = store.read_bytes()
        run("eval", "--store", store, "--annotations", data_path("sample_judges.tsv"), "--out", tmp_path / "ev")
        assert store.read_bytes() == before


def test_usage_errors(capsys):
    assert run() == 2
    assert run("frobnicate") == 2
    assert run("--version") == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "courtrel", "train", str(tmp_path / "absent.tsv"),
                           "--model", str(tmp_path / "m.json")], capture_output=True, text=True)
    assert proc.returncode == 2 and "error" in proc.stderr
