"""Command-line entry point: one binary, subcommand per pipeline stage.

Subcommands: ingest, tag, featurize, train, eval, syngen. A JSON config file
(--config) can pre-set any long flag; explicit flags win. The env var
FORUM_SENTINEL_LOG sets the log level. Every subcommand writes byte-identical
outputs for identical inputs and seed.

Exit codes: 0 success, 1 usage or configuration error, 2 malformed input
data (corpus, lexicon, tags, features or model file), 3 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation, features, syngen
from .corpus import CorpusFormatError, corpus_stats, filter_and_label, load_corpus
from .discourse import (
    LexiconError,
    format_tag_records,
    load_lexicon,
    load_tag_import,
    sense_distribution,
    tag_thread,
)
from .features import FeatureSpace, FeatureVector, build_vocabulary, prepare_thread, vectorize
from .model import ModelFormatError, TrainConfig, save_model, train

logger = logging.getLogger(__name__)

_CONFIG_KEYS = (
    "corpus", "lexicon", "tags", "features", "regime", "k", "seed", "l2",
    "jobs", "emit", "out", "fold_metrics", "unigrams", "class_weights",
    "max_iter", "tol",
)


def _setup_logging() -> None:
    level = os.environ.get("FORUM_SENTINEL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset flags from the JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return
    obj = json.loads(Path(args.config).read_text("utf-8"))
    for key, value in obj.items():
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        attr = key
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _load_filtered(corpus_path: str):
    result = load_corpus(corpus_path)
    return filter_and_label(result.threads)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        l2_lambda=args.l2 if args.l2 is not None else 1e-4,
        max_iterations=args.max_iter if args.max_iter is not None else 500,
        convergence_tol=args.tol if args.tol is not None else 1e-6,
        class_weight_mode=args.class_weights if args.class_weights is not None else "neg_over_pos",
        seed=args.seed if args.seed is not None else 0,
    )


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    threads = _load_filtered(args.corpus)
    rows = corpus_stats(threads)
    width = max([len("course")] + [len(r.course_id) for r in rows])
    print(f"{'course':<{width}}  {'intervened':>10}  {'non-intervened':>14}  {'ratio':>6}")
    for row in rows:
        print(
            f"{row.course_id:<{width}}  {row.n_intervened:>10}  "
            f"{row.n_not_intervened:>14}  {row.ratio_display():>6}"
        )
    return 0


def cmd_tag(args) -> int:
    threads = _load_filtered(args.corpus)
    lexicon = load_lexicon(args.lexicon)
    imports = load_tag_import(args.tags) if args.tags else None
    lines = []
    taggings = []
    for thread in threads:
        tokenized = list(prepare_thread(thread))
        tags = tag_thread(thread, tokenized, lexicon, imported=imports)
        taggings.append(tags)
        lines.extend(format_tag_records(thread, tags))
    out = _out_dir(args) / "tags.tsv"
    out.write_bytes(("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
    dist = sense_distribution(taggings)
    if dist is None:
        print("no connectives tagged")
    else:
        abbrev = {"Temporal": "Temp.", "Contingency": "Cont.", "Comparison": "Comp.", "Expansion": "Exp."}
        print("  ".join(f"{abbrev[sense.label]} {pct:.0f}%" for sense, pct in dist.items()))
    print(f"wrote {out}")
    return 0


def _featurize_chunk(chunk_args):
    threads, config, vocabulary, lexicon, tag_imports, unigram_mode = chunk_args
    return vectorize(
        threads, config,
        vocabulary=vocabulary, lexicon=lexicon,
        tag_imports=tag_imports, unigram_mode=unigram_mode,
    )


def _format_feature_record(course_id, thread_id, label, vec: FeatureVector) -> str:
    cells = [course_id, thread_id, "intervened" if label else "not_intervened"]
    cells += [f"{name}:{value!r}" for name, value in sorted(vec.values.items())]
    return "\t".join(cells)


def cmd_featurize(args) -> int:
    threads = _load_filtered(args.corpus)
    config = args.features or "eplusp"
    lexicon = load_lexicon(args.lexicon) if config != "edm15" else None
    imports = load_tag_import(args.tags) if args.tags else None
    unigram_mode = args.unigrams or "counts"
    # the dump is an in-sample artifact: vocabulary comes from this corpus;
    # the eval subcommand rebuilds fold-local vocabularies itself
    vocabulary = build_vocabulary(threads) if config in ("edm15", "eplusp") else None
    jobs = args.jobs or 1
    if jobs > 1:
        chunks = [threads[i::jobs] for i in range(jobs)]
        order = [i for j in range(jobs) for i in range(j, len(threads), jobs)]
        results = evaluation._pmap(
            _featurize_chunk,
            [(c, config, vocabulary, lexicon, imports, unigram_mode) for c in chunks],
            jobs,
        )
        flat = [pair for chunk in results for pair in chunk]
        data = [None] * len(threads)
        for pos, pair in zip(order, flat):
            data[pos] = pair
    else:
        data = vectorize(
            threads, config,
            vocabulary=vocabulary, lexicon=lexicon,
            tag_imports=imports, unigram_mode=unigram_mode,
        )
    space = data[0][0].space if data else features.build_space(config, vocabulary)
    lines = ["#space\t" + "\t".join((config,) + space.names)]
    for thread, (vec, label) in zip(threads, data):
        lines.append(_format_feature_record(thread.course_id, thread.thread_id, label, vec))
    out = _out_dir(args) / "features.tsv"
    out.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"wrote {out} ({len(threads)} threads, {len(space)} dims)")
    return 0


def load_feature_dump(path: str | Path):
    """Read a featurize dump back into (space, [(course, thread, vector, label)])."""
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines or not lines[0].startswith("#space\t"):
        raise ValueError("feature dump missing #space header")
    header = lines[0].split("\t")
    space = FeatureSpace(tuple(header[2:]), header[1])
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        course_id, thread_id, label_s = cells[0], cells[1], cells[2]
        values = {}
        for cell in cells[3:]:
            name, _, value = cell.rpartition(":")
            values[name] = float(value)
        rows.append((course_id, thread_id, FeatureVector(values, space), 1 if label_s == "intervened" else 0))
    return space, rows


def cmd_train(args) -> int:
    _space, rows = load_feature_dump(args.features_file)
    dataset = [(vec, label) for _c, _t, vec, label in rows]
    model = train(dataset, _train_config(args))
    out = _out_dir(args) / "model.txt"
    save_model(model, out)
    status = "converged" if model.converged else "hit max_iterations"
    print(f"wrote {out} ({len(model.feature_space)} dims, {status}, class weight {model.class_weight_value:.4g})")
    return 0


def cmd_eval(args) -> int:
    threads = _load_filtered(args.corpus)
    config = args.features or "eplusp"
    lexicon = load_lexicon(args.lexicon) if config != "edm15" else None
    imports = load_tag_import(args.tags) if args.tags else None
    train_config = _train_config(args)
    regime = args.regime or "in-domain"
    jobs = args.jobs or 1
    unigram_mode = args.unigrams or "counts"
    if regime == "in-domain":
        report = evaluation.run_in_domain(
            threads, config, lexicon, train_config,
            k=args.k if args.k is not None else 5,
            seed=train_config.seed,
            jobs=jobs,
            fold_mode=args.fold_metrics or "pooled",
            tag_imports=imports,
            unigram_mode=unigram_mode,
        )
    else:
        report = evaluation.run_loo_ccv(
            threads, config, lexicon, train_config,
            jobs=jobs, tag_imports=imports, unigram_mode=unigram_mode,
        )
    emit = args.emit or "table"
    renderers = {
        "table": (evaluation.render_table, "report.txt"),
        "csv": (evaluation.render_csv, "report.csv"),
        "records": (evaluation.render_records, "report.jsonl"),
    }
    render, filename = renderers[emit]
    text = render(report)
    out = _out_dir(args) / filename
    out.write_bytes(text.encode("utf-8"))
    print(text, end="")
    print(f"wrote {out}")
    return 0


def cmd_syngen(args) -> int:
    spec = syngen.load_genspec(args.spec)
    out = _out_dir(args) / "corpus.jsonl"
    syngen.generate(spec, out)
    print(f"wrote {out} ({spec.n_courses} courses x {spec.threads_per_course} threads)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forum-sentinel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, needs_corpus=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        if needs_corpus:
            p.add_argument("--corpus", help="line-delimited corpus file")
        p.add_argument("--out", help="output directory (default: cwd)")

    p = sub.add_parser("ingest", help="print per-course intervention counts")
    add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tag", help="tag connectives; write tag file + sense distribution")
    add_common(p)
    p.add_argument("--lexicon", help="connective lexicon (default: shipped)")
    p.add_argument("--tags", help="tag-import file; echoed verbatim when given")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("featurize", help="dump feature vectors for a corpus")
    add_common(p)
    p.add_argument("--lexicon")
    p.add_argument("--tags")
    p.add_argument("--features", choices=features.FEATURE_CONFIGS)
    p.add_argument("--unigrams", choices=("counts", "binary"))
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a model from a feature dump")
    add_common(p, needs_corpus=False)
    p.add_argument("--features-file", required=True, help="dump from `featurize`")
    p.add_argument("--l2", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--class-weights", choices=("none", "neg_over_pos"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run an evaluation regime and write a report")
    add_common(p)
    p.add_argument("--lexicon")
    p.add_argument("--tags")
    p.add_argument("--features", choices=features.FEATURE_CONFIGS)
    p.add_argument("--unigrams", choices=("counts", "binary"))
    p.add_argument("--regime", choices=("in-domain", "ccv"))
    p.add_argument("--k", type=int)
    p.add_argument("--fold-metrics", choices=("pooled", "mean"))
    p.add_argument("--seed", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--class-weights", choices=("none", "neg_over_pos"))
    p.add_argument("--jobs", type=int)
    p.add_argument("--emit", choices=("table", "csv", "records"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("syngen", help="generate a synthetic corpus from a spec file")
    add_common(p, needs_corpus=False)
    p.add_argument("--spec", required=True, help="JSON generation spec")
    p.set_defaults(func=cmd_syngen)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        if getattr(args, "corpus", "_") is None:
            print(f"error: {args.command} requires --corpus (flag or config file)", file=sys.stderr)
            return 1
        return args.func(args)
    except (CorpusFormatError, LexiconError, ModelFormatError, syngen.GenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover
        logger.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
