"""Command-line entry point: ``courtrel {ingest,train,classify,sample,eval}``.

Exit status is 0 on success, 2 for bad input files or arguments and 1 for
anything else (an internal error).  Every command that writes output also
writes a ``*.manifest.json`` run manifest beside it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from courtrel import __version__, _resources
from courtrel.annotate import annotate_sentence, load_resources
from courtrel.citation_rules import format_rules, load_rules
from courtrel.corpus import (LABEL_ORDER, PAIR_HEADER, as_relation, load_transcript, parse_annotated_corpus,
                             parse_judge_annotations, parse_pair_dataset, validate_dataset_census)
from courtrel.errors import UserInputError
from courtrel.evaluation import (POLICIES, build_confusion, format_confusion_tsv, format_metrics_tsv,
                                 format_report_text, overall_corr_hh, overall_corr_hs,
                                 per_class_correlation_tsv, precision_recall_f1)
from courtrel.features import FEATURE_NAMES, SimilarityLexicon, extract_features, load_transitions
from courtrel.pipeline import (RecordStore, format_annotation_export, run_transcript, sample_for_annotation,
                               with_annotations)
from courtrel.svm import (TrainingConfig, accuracy, cross_validate, dumps_model, format_feature_table,
                          load_model, read_feature_table, select_lambda, train)

EXIT_OK, EXIT_INTERNAL, EXIT_USER = 0, 1, 2


class CliError(UserInputError):
    pass


# ---------------------------------------------------------------------------
# Run manifest


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    seed: int
    config_paths: dict[str, str | None] = field(default_factory=dict)
    resource_versions: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: list[str] = field(default_factory=list)
    package_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json") if not output.is_dir() else output / "manifest.json"


# ---------------------------------------------------------------------------
# Helpers


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError("no such file", source=str(path)) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read: {exc}", source=str(path)) from None


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip() and not line.startswith("# "):
            return line
    return ""


def detect_kind(text: str) -> str:
    first = _first_line(text)
    fields = first.split("\t")
    if tuple(f.strip().lower() for f in fields) == PAIR_HEADER:
        return "pairs"
    if [f.strip().lower() for f in fields] == ["pair_id", "judge_id", "label"]:
        return "judges"
    if fields and fields[-1].strip() == "label" and set(fields[:-1]) <= set(FEATURE_NAMES) and len(fields) > 1:
        return "features"
    if first.startswith("#text") or len(fields) == 8:
        return "corpus"
    return "transcript"


def _transcript_files(paths: Sequence[str]) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix == ".txt"))
        elif p.exists():
            out.append(p)
        else:
            raise CliError("no such file or directory", source=str(p))
    return out


@dataclass
class Components:
    resources: object
    transitions: object
    lexicon: SimilarityLexicon
    paths: dict[str, str | None]

    def annotator(self, text: str):
        return annotate_sentence(text, self.resources)

    def versions(self) -> dict[str, str]:
        return {"annotation": self.resources.version, "transitions": self.transitions.version,
                "lexicon": self.lexicon.version}


def load_components(args) -> Components:
    directory = args.resources or os.environ.get(_resources.RESOURCE_DIR_ENV)
    if directory and not Path(directory).is_dir():
        raise CliError("resource directory does not exist", source=str(directory))
    resources = load_resources(directory)
    transitions = load_transitions(directory)
    lexicon_path = args.lexicon or str(_resources.resolve("similarity_lexicon.tsv", directory))
    if not Path(lexicon_path).is_file():
        raise CliError("no such lexicon file", source=lexicon_path)
    lexicon = SimilarityLexicon.load(lexicon_path)
    return Components(resources, transitions, lexicon, {"resources": directory, "lexicon": args.lexicon})


def _labelled_features(text: str, kind: str, source: str, comp: Components):
    if kind == "features":
        return read_feature_table(text.splitlines(), source=source)
    if kind == "pairs":
        dataset = parse_pair_dataset(text.splitlines(), annotator=comp.annotator, source=source)
        return [(extract_features(pair, comp.resources, comp.lexicon, comp.transitions), as_relation(label))
                for pair, label in dataset]
    raise CliError(f"expected a pair dataset or feature table, found {kind}", source=source)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args) -> int:
    comp = load_components(args)
    out = Path(args.out) if args.out else None
    manifest = RunManifest("ingest", args.argv, args.seed, comp.paths, comp.versions())
    summary = ["path\tkind\titems"]
    for path in _transcript_files(args.paths):
        text = _read_text(path)
        kind = args.kind if args.kind != "auto" else detect_kind(text)
        manifest.add_input(path)
        if kind == "pairs":
            dataset = parse_pair_dataset(text.splitlines(), annotator=comp.annotator, source=str(path))
            census = validate_dataset_census(dataset)
            report = "label\tcount\n" + "".join(f"{k.value}\t{v}\n" for k, v in census.items())
            print(f"{path}: {len(dataset)} pairs")
            sys.stdout.write(report)
            if out:
                _write(out / f"{path.stem}.census.tsv", report)
                rows = [(extract_features(p, comp.resources, comp.lexicon, comp.transitions), as_relation(l))
                        for p, l in dataset]
                _write(out / f"{path.stem}.features.tsv", format_feature_table(rows))
                manifest.outputs += [f"{path.stem}.census.tsv", f"{path.stem}.features.tsv"]
            summary.append(f"{path}\tpairs\t{len(dataset)}")
        elif kind == "judges":
            anns = parse_judge_annotations(text.splitlines(), source=str(path))
            print(f"{path}: {len(anns)} judge annotations")
            summary.append(f"{path}\tjudges\t{len(anns)}")
        elif kind == "corpus":
            sentences = parse_annotated_corpus(text.splitlines(), source=str(path))
            print(f"{path}: {len(sentences)} annotated sentences")
            summary.append(f"{path}\tcorpus\t{len(sentences)}")
        elif kind == "features":
            rows = read_feature_table(text.splitlines(), source=str(path))
            print(f"{path}: {len(rows)} feature rows")
            summary.append(f"{path}\tfeatures\t{len(rows)}")
        else:
            sentences = load_transcript(text, comp.resources.abbreviations)
            print(f"{path}: {len(sentences)} sentences")
            if out:
                _write(out / f"{path.stem}.sentences.txt", "".join(s + "\n" for s in sentences))
                manifest.outputs.append(f"{path.stem}.sentences.txt")
            summary.append(f"{path}\ttranscript\t{len(sentences)}")
    if out:
        _write(out / "ingest.tsv", "\n".join(summary) + "\n")
        manifest.outputs.append("ingest.tsv")
        manifest.write(out / "ingest.manifest.json")
    return EXIT_OK


def cmd_train(args) -> int:
    comp = load_components(args)
    path = Path(args.dataset)
    text = _read_text(path)
    data = _labelled_features(text, detect_kind(text), str(path), comp)
    config = TrainingConfig(args.lam, args.epochs, args.seed, args.weighting)
    manifest = RunManifest("train", args.argv, args.seed, comp.paths, comp.versions())
    manifest.add_input(path)
    if args.select_lambda:
        try:
            candidates = [float(v) for v in args.select_lambda.split(",")]
        except ValueError:
            raise CliError(f"--select-lambda expects comma-separated numbers, got {args.select_lambda!r}") from None
        best, scores = select_lambda(data, candidates, args.folds or 5, config)
        print("lambda selection (pooled macro F1): " + ", ".join(f"{k:g}={v:.4f}" for k, v in scores.items()))
        config = TrainingConfig(best, args.epochs, args.seed, args.weighting)
    model = train(data, config)
    model_path = Path(args.model)
    text = dumps_model(model)
    _write(model_path, text)
    manifest.outputs.append(str(model_path))
    print(f"classes: {', '.join(c.value for c in model.classes)}")
    print(f"training accuracy: {accuracy(model, data):.6f}")
    print(f"model checksum: {hashlib.sha256(text.encode()).hexdigest()}")
    if args.folds:
        cv = cross_validate(data, args.folds, config)
        cv_path = model_path.with_name(model_path.name + ".cv.tsv")
        _write(cv_path, f"# {args.folds}-fold mean accuracy {cv.mean_accuracy:.6f} sd {cv.std_accuracy:.6f}\n"
               + format_metrics_tsv(cv.metrics))
        manifest.outputs.append(str(cv_path))
        print(f"cross-validation accuracy ({args.folds} folds): {cv.mean_accuracy:.6f} +/- {cv.std_accuracy:.6f}")
    manifest.write(manifest_path(model_path))
    return EXIT_OK


def cmd_classify(args) -> int:
    comp = load_components(args)
    model = load_model(args.model)
    rules = load_rules(args.rules)
    store_path = Path(args.store)
    if store_path.exists():
        if not args.force:
            raise CliError("store already exists (use --force to replace it)", source=str(store_path))
        store_path.unlink()
        store_path.with_name(store_path.name + ".idx").unlink(missing_ok=True)
    files = _transcript_files(args.transcripts)
    stems = [f.stem for f in files]
    if len(set(stems)) != len(stems):
        raise CliError("transcript file names must be unique (they become transcript ids)")
    manifest = RunManifest("classify", args.argv, args.seed, {**comp.paths, "model": args.model, "rules": args.rules},
                           {**comp.versions(), "rules": hashlib.sha256(format_rules(rules).encode()).hexdigest()[:12],
                            "model": model.data_fingerprint[:12]})
    manifest.add_input(Path(args.model))
    store = RecordStore(store_path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    total = 0
    for path in files:
        manifest.add_input(path)
        records = run_transcript(_read_text(path), model, rules, comp.resources, comp.lexicon, comp.transitions,
                                 transcript_id=path.stem, window=args.window, jobs=args.jobs)
        store.append(records)
        gated = sum(r.rule_gated for r in records)
        print(f"{path}: {len(records)} pairs ({gated} rule-gated)")
        total += len(records)
    if not store_path.exists():
        store.append([])
    manifest.outputs.append(str(store_path))
    manifest.write(manifest_path(store_path))
    print(f"{total} records written to {store_path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    store_path = Path(args.store)
    if not store_path.is_file():
        raise CliError("no such record store", source=str(store_path))
    clusters = sample_for_annotation(RecordStore(store_path), args.sample_n, args.seed, args.cluster_size)
    out = Path(args.out)
    _write(out, format_annotation_export(clusters))
    manifest = RunManifest("sample", args.argv, args.seed, {"store": str(store_path)})
    manifest.add_input(store_path)
    manifest.outputs.append(str(out))
    manifest.write(manifest_path(out))
    print(f"{len(clusters)} clusters of {args.cluster_size} written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    store_path, ann_path = Path(args.store), Path(args.annotations)
    if not store_path.is_file():
        raise CliError("no such record store", source=str(store_path))
    annotations = parse_judge_annotations(_read_text(ann_path).splitlines(), source=str(ann_path))
    records = {r.pair_id: r for r in RecordStore(store_path).load()}
    by_pair: dict[str, list] = {}
    for a in annotations:
        if a.pair_id not in records:
            raise CliError(f"annotation for unknown pair {a.pair_id!r}", source=str(ann_path))
        by_pair.setdefault(a.pair_id, []).append(a)
    judged = []
    for pid, rec in records.items():
        merged = with_annotations(rec, by_pair.get(pid, ()))
        seen = [a.judge_id for a in merged.judge_annotations]
        if len(set(seen)) != len(seen):
            raise CliError(f"pair {pid!r} annotated twice by the same judge", source=str(ann_path))
        if merged.judge_annotations:
            judged.append(merged)
    matrix = build_confusion(judged, args.policy)
    report = precision_recall_f1(matrix)
    two = all(len(r.judge_annotations) == 2 for r in judged)
    hh = overall_corr_hh(judged_labels(judged)) if two and judged else None
    hs = overall_corr_hs(judged) if two and judged else None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "metrics.tsv", format_metrics_tsv(report))
    _write(out / "confusion.tsv", format_confusion_tsv(matrix))
    _write(out / "correlations.tsv", per_class_correlation_tsv(judged, LABEL_ORDER))
    text = format_report_text(matrix, report, args.policy, hh, hs)
    if not two:
        text += "overall correlations skipped: some pairs do not have exactly two judge annotations\n"
    _write(out / "report.txt", text)
    sys.stdout.write(text)
    manifest = RunManifest("eval", args.argv, args.seed, {"store": str(store_path), "annotations": str(ann_path)})
    manifest.add_input(store_path)
    manifest.add_input(ann_path)
    manifest.outputs += ["metrics.tsv", "confusion.tsv", "correlations.tsv", "report.txt"]
    manifest.write(out / "manifest.json")
    return EXIT_OK


def judged_labels(records) -> dict[str, list]:
    return {r.pair_id: [a.label for a in sorted(r.judge_annotations, key=lambda a: a.judge_id)] for r in records}


# ---------------------------------------------------------------------------
# Argument parsing


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--resources", help=f"resource directory (default: ${_resources.RESOURCE_DIR_ENV} or bundled)")
    common.add_argument("--lexicon", help="similarity lexicon file (default: from the resource directory)")
    common.add_argument("--seed", type=int, default=0, help="seed for every shuffle and for training (default 0)")

    parser = argparse.ArgumentParser(prog="courtrel", description="Discourse relations between court transcript sentences.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate input files and report counts")
    p.add_argument("paths", nargs="+", help="files or directories of .txt transcripts")
    p.add_argument("--kind", default="auto", choices=["auto", "pairs", "transcript", "corpus", "judges", "features"])
    p.add_argument("--out", help="directory for census, feature tables and split sentences")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train the SVM on a pair dataset or feature table")
    p.add_argument("dataset")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--lam", type=float, default=TrainingConfig.lam, help="regularisation strength")
    p.add_argument("--epochs", type=_positive_int, default=TrainingConfig.epochs)
    p.add_argument("--weighting", default=TrainingConfig.class_weighting, choices=["uniform", "inverse-frequency"])
    p.add_argument("--folds", type=int, default=5, help="cross-validation folds, 0 to skip (default 5)")
    p.add_argument("--select-lambda", metavar="L1,L2,...", help="pick lambda by cross-validated macro F1")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="classify adjacent sentence pairs of transcripts")
    p.add_argument("transcripts", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--store", required=True, help="output record store (JSON lines)")
    p.add_argument("--rules", help="citation rule file (default: built-in rules)")
    p.add_argument("--window", type=_positive_int, default=1, help="pair each sentence with the next N (default 1)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--force", action="store_true", help="replace an existing store")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sample", parents=[common], help="draw clusters of pairs for human judges")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="annotation sheet to write")
    p.add_argument("--sample-n", type=_positive_int, default=200)
    p.add_argument("--cluster-size", type=_positive_int, default=5)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common], help="score stored predictions against judge annotations")
    p.add_argument("--store", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--policy", default="both-agree", choices=list(POLICIES))
    p.add_argument("--out", required=True, help="directory for metrics, confusion grid and report")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USER if exc.code else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except UserInputError as exc:
        print(f"courtrel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001 - last-resort reporting
        print(f"courtrel {args.command}: internal error", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
