"""Command-line entry point.

Subcommands: gen-corpus | train | eval | predict | stats. Every option can
also come from a plain key=value config file (``--config``); command-line
flags win. Each run emits a resolved-config dump listing every option,
defaults included, so the run is reproducible from the dump alone.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

import argparse
import os
import sys

from .cnn import CnnConfig, build_word_vocab
from .corpus import (LabelSet, SyntheticSpec, format_cdf, generate_synthetic,
                     load_corpus, load_notes, restrict_to_labels,
                     token_length_cdf)
from .metrics import format_report_kv, format_report_table
from .model import CodingModel, new_model
from .tokenizer import Vocab, tokenize
from .training import TrainConfig, evaluate_model, prepare_examples, train_loop
from .transformer import EncoderConfig

RESOLVED_NAME = "config.resolved.txt"


class UsageError(Exception):
    pass


GEN_DEFAULTS = {
    "out_dir": None, "num_codes": 20, "vocab_size": 500,
    "doc_len_min": 256, "doc_len_max": 256, "evidence_per_code": 1,
    "place_min": 0, "place_max": 254, "codes_min": 1, "codes_max": 3,
    "train_notes": 2000, "val_notes": 200, "test_notes": 200, "seed": 0,
}

TRAIN_DEFAULTS = {
    "corpus": None, "val": None, "codes": None, "vocab": None, "out_dir": None,
    "encoder": "transformer", "seg_len": 512, "seg_stride": 0,
    "max_seq_len": 512, "hidden": 256, "blocks": 2, "heads": 4,
    "intermediate": 1024, "max_positions": 0,
    "cnn_embed": 100, "cnn_filters": 256, "cnn_kernel": 9, "cnn_max_words": 2500,
    "lr": 2e-4, "batch_size": 4, "max_steps": 1000, "eval_every": 100, "seed": 0,
}

EVAL_DEFAULTS = {
    "checkpoint": None, "test": None, "val": None, "codes": None,
    "threshold": -1.0,
}

PREDICT_DEFAULTS = {
    "checkpoint": None, "text": None, "file": None, "top_n": 10,
}

STATS_DEFAULTS = {
    "corpus": None, "vocab": None, "out": None,
}


def parse_config_file(path):
    opts = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            opts[k.strip().replace("-", "_")] = v.strip()
    return opts


def _coerce(raw, default, key):
    if default is None or isinstance(default, str):
        return raw
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def resolve_options(args, defaults):
    """Layer defaults < config file < explicit flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise UsageError(f"--config: no such file: {args.config}")
        for k, raw in parse_config_file(args.config).items():
            if k not in resolved:
                raise UsageError(f"unknown config key {k!r}")
            resolved[k] = _coerce(raw, defaults[k], k)
    for k in resolved:
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = v
    return resolved


def emit_resolved(resolved, command, out_dir=None):
    lines = [f"command={command}"]
    lines += [f"{k}={resolved[k]}" for k in sorted(resolved)]
    text = "\n".join(lines) + "\n"
    sys.stderr.write(text)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, RESOLVED_NAME), "w", encoding="utf-8") as f:
            f.write(text)


def _require(resolved, key, flag):
    v = resolved.get(key)
    if not v:
        raise UsageError(f"{flag} is required")
    return v


def _require_file(resolved, key, flag):
    path = _require(resolved, key, flag)
    if not os.path.isfile(path):
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _require_dir(resolved, key, flag):
    path = _require(resolved, key, flag)
    if not os.path.isdir(path):
        raise UsageError(f"{flag}: no such directory: {path}")
    return path


def cmd_gen_corpus(args):
    opt = resolve_options(args, GEN_DEFAULTS)
    out_dir = _require(opt, "out_dir", "--out-dir")
    emit_resolved(opt, "gen-corpus", out_dir)
    spec = SyntheticSpec(
        num_codes=opt["num_codes"], vocab_size=opt["vocab_size"],
        doc_len=(opt["doc_len_min"], opt["doc_len_max"]),
        evidence_per_code=opt["evidence_per_code"],
        placement=(opt["place_min"], opt["place_max"]),
        codes_per_note=(opt["codes_min"], opt["codes_max"]),
        seed=opt["seed"], n_train=opt["train_notes"], n_val=opt["val_notes"],
        n_test=opt["test_notes"],
    )
    try:
        spec.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    paths = generate_synthetic(spec, out_dir)
    for name in ("train", "val", "test", "codes", "vocab"):
        print(f"{name}={paths[name]}")
    return 0


def _build_model(opt, train_notes, label_set):
    kind = opt["encoder"]
    if kind == "transformer":
        vocab = Vocab.from_file(_require_file(opt, "vocab", "--vocab"))
        max_pos = opt["max_positions"] or max(512, opt["seg_len"])
        cfg = EncoderConfig(
            num_blocks=opt["blocks"], hidden=opt["hidden"], heads=opt["heads"],
            intermediate=opt["intermediate"], vocab_size=len(vocab),
            max_positions=max_pos, seg_len=opt["seg_len"],
        )
    elif kind == "cnn":
        if opt["vocab"]:
            vocab = Vocab.from_file(_require_file(opt, "vocab", "--vocab"))
        else:
            vocab = build_word_vocab(n.text for n in train_notes)
        cfg = CnnConfig(
            embed_dim=opt["cnn_embed"], filters=opt["cnn_filters"],
            kernel=opt["cnn_kernel"], max_words=opt["cnn_max_words"],
            vocab_size=len(vocab),
        )
    else:
        raise UsageError(f"--encoder must be transformer or cnn, got {kind!r}")
    return new_model(kind, cfg, vocab, label_set, s_max=opt["max_seq_len"],
                     stride=opt["seg_stride"], seed=opt["seed"])


def cmd_train(args):
    opt = resolve_options(args, TRAIN_DEFAULTS)
    corpus_path = _require_file(opt, "corpus", "--corpus")
    val_path = _require_file(opt, "val", "--val")
    out_dir = _require(opt, "out_dir", "--out-dir")
    if opt["codes"]:
        _require_file(opt, "codes", "--codes")
    if opt["vocab"]:
        _require_file(opt, "vocab", "--vocab")
    emit_resolved(opt, "train", out_dir)

    label_set = LabelSet.from_file(opt["codes"]) if opt["codes"] else None
    train_notes, label_set = load_corpus(corpus_path, label_set)
    if not train_notes:
        raise ValueError(f"training corpus {corpus_path} is empty")
    val_notes, _ = load_corpus(val_path, label_set)
    val_notes, dropped = restrict_to_labels(val_notes, label_set)
    if dropped:
        sys.stderr.write(f"ignored {dropped} validation code instances "
                         f"outside the label set\n")

    model = _build_model(opt, train_notes, label_set)
    tc = TrainConfig(lr=opt["lr"], batch_size=opt["batch_size"],
                     max_steps=opt["max_steps"], eval_every=opt["eval_every"],
                     max_seq_len=opt["max_seq_len"], seed=opt["seed"])
    try:
        tc.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    result = train_loop(model, train_notes, val_notes, tc, out_dir)
    print(f"best_step={result.best_step}")
    print(f"best_val_micro_f1={result.best_val_f1:.6f}")
    print(f"best_threshold={result.best_threshold:.2f}")
    print(f"best_checkpoint={result.best_dir}")
    print(f"metrics_log={result.log_path}")
    return 0


def _load_examples(model, path, what):
    notes, _ = load_corpus(path, model.label_set)
    notes, dropped = restrict_to_labels(notes, model.label_set)
    if dropped:
        sys.stderr.write(f"ignored {dropped} {what} code instances "
                         f"outside the label set\n")
    if not notes:
        raise ValueError(f"{what} corpus {path} is empty")
    return prepare_examples(model, notes)


def cmd_eval(args):
    opt = resolve_options(args, EVAL_DEFAULTS)
    ckpt = _require_dir(opt, "checkpoint", "--checkpoint")
    test_path = _require_file(opt, "test", "--test")
    emit_resolved(opt, "eval")
    model = CodingModel.load(ckpt)
    if opt["codes"]:
        given = LabelSet.from_file(_require_file(opt, "codes", "--codes"))
        if len(given) != model.num_classes:
            raise ValueError(
                f"label-space mismatch: --codes has K={len(given)}, "
                f"checkpoint has K={model.num_classes}")
    threshold = opt["threshold"]
    if threshold >= 0.0:
        if not 0.0 <= threshold <= 1.0:
            raise UsageError(f"--threshold must be in [0,1], got {threshold}")
    else:
        val_path = opt["val"]
        if not val_path:
            raise UsageError("--val is required unless --threshold is given")
        val_ex = _load_examples(model, _require_file(opt, "val", "--val"), "validation")
        threshold = evaluate_model(model, val_ex).threshold
    test_ex = _load_examples(model, test_path, "test")
    report = evaluate_model(model, test_ex, threshold=threshold)
    sys.stdout.write(format_report_kv(report))
    sys.stdout.write("\n" + format_report_table(report))
    return 0


def cmd_predict(args):
    opt = resolve_options(args, PREDICT_DEFAULTS)
    ckpt = _require_dir(opt, "checkpoint", "--checkpoint")
    emit_resolved(opt, "predict")
    if opt["file"]:
        with open(_require_file(opt, "file", "--file"), encoding="utf-8") as f:
            text = f.read()
    else:
        text = opt["text"] or ""
    if not text.strip():
        raise UsageError("empty input text; pass --text or --file")
    model = CodingModel.load(ckpt)
    top_n = opt["top_n"]
    if top_n < 1:
        raise UsageError(f"--top-n must be >= 1, got {top_n}")
    for code, prob in model.rank_codes(text, top_n=top_n):
        print(f"{code}\t{prob:.6f}")
    return 0


def cmd_stats(args):
    opt = resolve_options(args, STATS_DEFAULTS)
    corpus_path = _require_file(opt, "corpus", "--corpus")
    emit_resolved(opt, "stats")
    notes = load_notes(corpus_path)
    if opt["vocab"]:
        vocab = Vocab.from_file(_require_file(opt, "vocab", "--vocab"))
        counter = lambda text: tokenize(text, vocab)
    else:
        counter = lambda text: len(text.split())
    cdf = token_length_cdf(notes, counter)
    text = format_cdf(cdf)
    if opt["out"]:
        with open(opt["out"], "w", encoding="utf-8") as f:
            f.write(text)
        print(f"wrote {opt['out']}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="segcoder",
        description="Segmented long-document encoder with per-class label "
                    "attention for multi-label code assignment.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file; flags override")
        p.set_defaults(func=func)
        return p

    g = add("gen-corpus", cmd_gen_corpus, "write a synthetic planted-evidence corpus")
    g.add_argument("--out-dir")
    for flag in ("num-codes", "vocab-size", "doc-len-min", "doc-len-max",
                 "evidence-per-code", "place-min", "place-max", "codes-min",
                 "codes-max", "train-notes", "val-notes", "test-notes", "seed"):
        g.add_argument(f"--{flag}", type=int)

    t = add("train", cmd_train, "train a model and keep the best checkpoint")
    t.add_argument("--corpus")
    t.add_argument("--val")
    t.add_argument("--codes")
    t.add_argument("--vocab")
    t.add_argument("--out-dir")
    t.add_argument("--encoder", choices=("transformer", "cnn"))
    for flag in ("seg-len", "seg-stride", "max-seq-len", "hidden", "blocks",
                 "heads", "intermediate", "max-positions", "cnn-embed",
                 "cnn-filters", "cnn-kernel", "cnn-max-words", "batch-size",
                 "max-steps", "eval-every", "seed"):
        t.add_argument(f"--{flag}", type=int)
    t.add_argument("--lr", type=float)

    e = add("eval", cmd_eval, "evaluate a checkpoint on a test corpus")
    e.add_argument("--checkpoint")
    e.add_argument("--test")
    e.add_argument("--val")
    e.add_argument("--codes")
    e.add_argument("--threshold", type=float)

    p = add("predict", cmd_predict, "rank codes for one note")
    p.add_argument("--checkpoint")
    p.add_argument("--text")
    p.add_argument("--file")
    p.add_argument("--top-n", type=int)

    s = add("stats", cmd_stats, "token-length CDF of a corpus")
    s.add_argument("--corpus")
    s.add_argument("--vocab")
    s.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except (OSError, ValueError, RuntimeError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
