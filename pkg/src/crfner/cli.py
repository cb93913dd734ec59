"""``crfner`` command line: train, tag, eval, cluster, convert, ablate.

The seed comes from ``--seed``, else ``$CRFNER_SEED``, else ``[train] seed``
in the config, else 42; each stage draws a named sub-seed from it.
``$CRFNER_LOG_LEVEL`` sets log verbosity (default WARNING).
"""
from __future__ import annotations

import argparse
import hashlib
import io
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from .brown import ClusterRun, cluster, count_ngrams, write_paths
from .config import ConfigError, RunConfig, load_config
from .corpus import (
    ConllFormatError,
    Corpus,
    Layout,
    corpus_to_syllables,
    read_conll,
    token_fields,
    write_conll,
)
from .crf import ModelFormatError, load_model, predict, save_model, tag_corpus, train
from .evaluation import (
    AlignmentError,
    ablation_csv,
    format_ablation,
    run_ablation,
    score,
)

DEFAULT_SEED = 42

log = logging.getLogger("crfner")


class CommandError(Exception):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(message)


def derive_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def resolve_seed(flag: Optional[int], cfg: Optional[RunConfig] = None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("CRFNER_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CommandError("seed", f"CRFNER_SEED is not an integer: {env!r}") from None
    if cfg is not None and cfg.seed_set:
        return cfg.train.seed
    return DEFAULT_SEED


def _open_text(path: str, stage: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise CommandError(stage, f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError as exc:
        raise CommandError(stage, f"{path} is not UTF-8: {exc}") from None


def _write_text(path: Optional[str], text: str, stage: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as exc:
        raise CommandError(stage, f"cannot write {path}: {exc.strerror}") from None


def _read_corpus(path: str, layout: Layout, stage: str) -> Corpus:
    text = _open_text(path, stage)
    try:
        return read_conll(io.StringIO(text), layout)
    except (ConllFormatError, ValueError) as exc:
        raise CommandError(stage, f"{path}: {exc}") from None


def _load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise CommandError("config", f"config file not found: {path}")
    try:
        return load_config(path)
    except ConfigError as exc:
        raise CommandError("config", f"{path}: {exc}") from None


def _first_width(text: str) -> int:
    for line in text.splitlines():
        if line.split():
            return len(line.split())
    return 0


# -- commands --------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    tcfg = replace(cfg.train, seed=derive_seed(seed, "train"))
    log.info("seed %d, training sub-seed %d", seed, tcfg.seed)
    corpus = _read_corpus(args.train, cfg.layout, "read-train")
    if "label" not in cfg.layout:
        raise CommandError("config", "training needs a label column in [data] columns")
    dev = _read_corpus(args.dev, cfg.layout, "read-dev") if args.dev else None
    lexicons = cfg.load_lexicons()

    def report(epoch, objective, model):
        line = f"epoch {epoch:3d}  objective {objective:.6f}"
        if dev is not None:
            line += f"  dev-f1 {score(dev, tag_corpus(model, dev)).overall.f1:.2f}"
        print(line, flush=True)

    try:
        model = train(corpus, cfg.features, tcfg, lexicons, on_epoch=report)
    except ValueError as exc:
        raise CommandError("train", str(exc)) from None
    try:
        with open(args.model_out, "wb") as f:
            save_model(model, f)
    except OSError as exc:
        raise CommandError("save-model", f"cannot write {args.model_out}: {exc.strerror}") from None
    print(f"model written to {args.model_out} ({len(model.attr_index)} attributes, "
          f"{len(model.label_set)} labels)")
    return 0


def cmd_tag(args) -> int:
    try:
        with open(args.model, "rb") as f:
            model = load_model(f)
    except OSError as exc:
        raise CommandError("load-model", f"cannot read {args.model}: {exc.strerror}") from None
    except (ModelFormatError, ValueError, KeyError) as exc:
        raise CommandError("load-model", f"{args.model}: {exc}") from None

    full = model.layout or Layout(("surface", "label"))
    bare = full.without("label")
    text = _open_text(args.input, "read-input")
    width = _first_width(text)
    if width == 0:
        _write_text(args.output, "", "write-output")
        return 0
    if width == len(full):
        layout = full
    elif width == len(bare):
        layout = bare
    else:
        raise CommandError(
            "read-input",
            f"{args.input} has {width} columns; the model expects ({bare}) or ({full})",
        )
    try:
        corpus = read_conll(io.StringIO(text), layout)
    except (ConllFormatError, ValueError) as exc:
        raise CommandError("read-input", f"{args.input}: {exc}") from None

    out = []
    try:
        for sent in corpus:
            labels = predict(model, sent)
            for tok, label in zip(sent, labels):
                out.append("\t".join(token_fields(tok, layout) + [label]) + "\n")
            out.append("\n")
    except ValueError as exc:
        raise CommandError("tag", str(exc)) from None
    _write_text(args.output, "".join(out), "write-output")
    return 0


def _read_labeled(path: str, stage: str) -> Corpus:
    text = _open_text(path, stage)
    width = _first_width(text)
    if width == 0:
        return Corpus((), Layout())
    if width < 2:
        raise CommandError(stage, f"{path}: need at least a surface and a label column")
    try:
        return read_conll(io.StringIO(text), Layout.surface_and_label(width))
    except (ConllFormatError, ValueError) as exc:
        raise CommandError(stage, f"{path}: {exc}") from None


def cmd_eval(args) -> int:
    gold = _read_labeled(args.gold, "read-gold")
    pred = _read_labeled(args.pred, "read-pred")
    try:
        report = score(gold, pred)
    except AlignmentError as exc:
        raise CommandError("align", str(exc)) from None
    sys.stdout.write(report.format_table())
    return 0


def cmd_cluster(args) -> int:
    text = _open_text(args.corpus, "read-corpus")
    try:
        counts = count_ngrams(text.splitlines())
        tree, _ = cluster(counts, ClusterRun(args.clusters, args.min_freq, resolve_seed(args.seed)))
    except ValueError as exc:
        raise CommandError("cluster", str(exc)) from None
    _write_text(args.out, write_paths(tree), "write-paths")
    return 0


def cmd_convert(args) -> int:
    if not args.to_syllables:
        raise CommandError("convert", "no conversion requested (use --to-syllables)")
    try:
        layout = Layout.parse(args.columns)
    except ValueError as exc:
        raise CommandError("convert", f"--columns: {exc}") from None
    corpus = _read_corpus(args.input, layout, "read-input")
    try:
        converted = corpus_to_syllables(corpus)
    except ValueError as exc:
        raise CommandError("convert", str(exc)) from None
    _write_text(args.output, write_conll(converted), "write-output")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    if cfg.ablation is None:
        raise CommandError("config", f"{args.config} has no [ablation: NAME] sections")
    seed = resolve_seed(args.seed, cfg)
    tcfg = replace(cfg.train, seed=derive_seed(seed, "train"))
    log.info("seed %d, training sub-seed %d", seed, tcfg.seed)
    train_corpus = _read_corpus(args.train, cfg.layout, "read-train")
    test_corpus = _read_corpus(args.test, cfg.layout, "read-test")
    try:
        rows = run_ablation(train_corpus, test_corpus, cfg.ablation, tcfg, cfg.load_lexicons())
    except (ValueError, AlignmentError) as exc:
        raise CommandError("ablate", str(exc)) from None
    sys.stdout.write(format_ablation(rows))
    _write_text(args.csv, ablation_csv(rows), "write-csv")
    return 0


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crfner", description="Feature-rich CRF named-entity tagger.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--dev")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="tag a column file; appends a predicted-label column")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="entity-level P/R/F1; labels are read from the last column")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="Brown clusters from raw text, one sentence per line")
    p.add_argument("--corpus", required=True)
    p.add_argument("--clusters", type=int, default=1000)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--out", default="-")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("convert", help="word-segmented corpus to syllables")
    p.add_argument("--to-syllables", action="store_true")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--columns", default="surface,label")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("ablate", help="train/score one model per [ablation: NAME] section")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--csv", default="ablation.csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CRFNER_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"crfner {args.command}: error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
