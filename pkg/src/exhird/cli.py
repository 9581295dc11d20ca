"""Command-line surface: preprocess, train, predict, evaluate, ablate.

Every run writes a manifest (config snapshot, seed, git description, wall
time) next to its primary output. Exit codes: 0 ok, 2 config error,
3 data error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

from .decoder import DecodeLimits
from .errors import ConfigError, DataError, ExhirdError, NumericError
from .evaluation import (
    MetricsReport,
    PredictionSet,
    corpus_report,
    load_predictions,
)
from .exclusion import ExclusionConfig
from .model import KeyphraseModel, ModelConfig
from .text import (
    RawSample,
    Vocabulary,
    build_target_program,
    build_vocabulary,
    load_corpus,
    preprocess,
)
from .training import TrainConfig, fit

DATA_DIR_ENV = "EXHIRD_DATA_DIR"

# K_ES defaults by corpus profile; 1 is the large-corpus choice.
DEFAULT_HARD_WINDOW = 1
DEFAULT_SOFT_WINDOW = 4


def _resolve_input(path: str) -> Path:
    """Resolve a corpus path, trying EXHIRD_DATA_DIR for relative names."""
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root and not p.is_absolute():
        candidate = Path(root) / path
        if candidate.exists():
            return candidate
    return p


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(command: str, args: argparse.Namespace,
                    out_dir: Path, started: float) -> None:
    snapshot = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func"
    }
    manifest = {
        "command": command,
        "config": snapshot,
        "seed": getattr(args, "seed", None),
        "git": _git_describe(),
        "wall_time_s": round(time.time() - started, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"manifest-{command}.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8").strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config {p}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config {p} must hold a JSON object")
        return obj
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _prepare_samples(corpus: list[RawSample], vocab: Vocabulary):
    out = []
    for raw in corpus:
        doc = preprocess(raw, vocab)
        out.append((doc, build_target_program(doc, list(raw.keyphrases), vocab)))
    return out


def _limits_from_args(args: argparse.Namespace) -> DecodeLimits:
    return DecodeLimits(
        max_phrases=args.max_pd_steps,
        max_words_per_phrase=args.max_wd_steps,
        max_tokens=args.max_seq_tokens,
        min_phrases=getattr(args, "min_pd_steps", 1),
    )


def _predict_corpus(model: KeyphraseModel, corpus: list[RawSample],
                    vocab: Vocabulary, limits: DecodeLimits,
                    exclusion: ExclusionConfig) -> list[dict]:
    records = []
    for raw in corpus:
        doc = preprocess(raw, vocab)
        result = model.decode_document(doc, limits, exclusion)
        present = [" ".join(p.words) for p in result.phrases if p.kind == "present"]
        absent = [" ".join(p.words) for p in result.phrases if p.kind == "absent"]
        records.append(
            {
                "present": present,
                "absent": absent,
                "raw_sequence": [" ".join(p.words) for p in result.phrases],
                "exclusion_fallbacks": result.exclusion_fallbacks,
            }
        )
    return records


def _write_predictions(records: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_preprocess(args: argparse.Namespace) -> int:
    started = time.time()
    corpus = load_corpus(_resolve_input(args.corpus))
    vocab = build_vocabulary(corpus, size=args.vocab_size)
    out = Path(args.vocab)
    out.parent.mkdir(parents=True, exist_ok=True)
    vocab.save(out)
    if args.cache:
        cache_path = Path(args.cache)
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        with open(cache_path, "w", encoding="utf-8") as fh:
            for raw in corpus:
                doc = preprocess(raw, vocab)
                program = build_target_program(
                    doc, list(raw.keyphrases), vocab
                )
                fh.write(
                    json.dumps(
                        {
                            "tokens": doc.tokens,
                            "token_ids": doc.token_ids,
                            "copy_ids": doc.copy_ids,
                            "target": [
                                {
                                    "kind": p.kind,
                                    "words": p.words,
                                    "word_ids": p.word_ids,
                                    "copy_word_ids": p.copy_word_ids,
                                }
                                for p in program.phrases
                            ],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    print(f"vocabulary: {len(vocab)} tokens -> {out}")
    _write_manifest("preprocess", args, out.parent, started)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    train_corpus = load_corpus(_resolve_input(args.train))
    valid_corpus = load_corpus(_resolve_input(args.valid))
    vocab = Vocabulary.load(_resolve_input(args.vocab))
    model_config = ModelConfig(
        embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
        decoder=args.decoder,
    )
    window = ExclusionConfig.parse_window(args.window)
    if window is None and args.window is None and args.exclusion == "soft":
        window = DEFAULT_SOFT_WINDOW
    train_config = TrainConfig(
        batch_size=args.batch_size,
        max_grad_norm=args.max_grad_norm,
        lr=args.lr,
        epochs_cap=args.epochs,
        patience=args.patience,
        exclusion_mode=args.exclusion if args.exclusion == "soft" else "none",
        exclusion_window=window,
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
    )
    model = KeyphraseModel(vocab, model_config, seed=args.seed)
    train_set = _prepare_samples(train_corpus, vocab)
    valid_set = _prepare_samples(valid_corpus, vocab)
    checkpoint = Path(args.checkpoint)
    checkpoint.parent.mkdir(parents=True, exist_ok=True)
    result = fit(
        model, train_set, valid_set, train_config, seed=args.seed,
        log_path=args.log, checkpoint_path=None,
    )
    model.save_checkpoint(
        checkpoint, epoch=result.best_epoch,
        best_perplexity=result.best_perplexity,
        extra_config={
            "seed": args.seed,
            "exclusion": args.exclusion,
            "window": "all" if window is None else window,
            "decoder": args.decoder,
        },
    )
    print(
        f"trained {result.epochs_run} epochs; best perplexity "
        f"{result.best_perplexity:.4f} at epoch {result.best_epoch} -> "
        f"{checkpoint}"
    )
    _write_manifest("train", args, checkpoint.parent, started)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    started = time.time()
    corpus = load_corpus(_resolve_input(args.corpus))
    vocab = Vocabulary.load(_resolve_input(args.vocab))
    model, _meta = KeyphraseModel.load_checkpoint(
        _resolve_input(args.checkpoint), vocab
    )
    window = ExclusionConfig.parse_window(args.window)
    if window is None and args.window is None and args.exclusion == "hard":
        window = DEFAULT_HARD_WINDOW
    exclusion = ExclusionConfig(
        mode=args.exclusion if args.exclusion == "hard" else "none",
        window=window,
    )
    limits = _limits_from_args(args)
    records = _predict_corpus(model, corpus, vocab, limits, exclusion)
    out = Path(args.output)
    _write_predictions(records, out)
    print(f"wrote {len(records)} prediction records -> {out}")
    _write_manifest("predict", args, out.parent, started)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.time()
    predictions = load_predictions(_resolve_input(args.predictions))
    gold = load_corpus(_resolve_input(args.gold))
    report = corpus_report(predictions, gold)
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True),
        encoding="utf-8",
    )
    print(report.format_table(label=Path(args.predictions).stem))
    _write_manifest("evaluate", args, out.parent, started)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    """Train hierarchical + sequential variants and report the three
    ablation rows: full model, sequential decoder (w/o HRD), and the
    hierarchical decoder without exclusive search (w/o ES)."""
    started = time.time()
    train_corpus = load_corpus(_resolve_input(args.train))
    valid_corpus = load_corpus(_resolve_input(args.valid))
    test_corpus = load_corpus(_resolve_input(args.test))
    out_dir = Path(args.outdir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab = build_vocabulary(train_corpus, size=args.vocab_size)
    vocab.save(out_dir / "vocab.txt")
    train_set = _prepare_samples(train_corpus, vocab)
    valid_set = _prepare_samples(valid_corpus, vocab)
    window = ExclusionConfig.parse_window(args.window)
    limits = _limits_from_args(args)
    train_config = TrainConfig(
        batch_size=args.batch_size, lr=args.lr, epochs_cap=args.epochs,
        patience=args.patience, exclusion_mode="none",
        embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
    )
    models = {}
    for mode in ("hierarchical", "sequential"):
        config = ModelConfig(
            embed_dim=args.embed_dim, hidden_dim=args.hidden_dim, decoder=mode,
        )
        model = KeyphraseModel(vocab, config, seed=args.seed)
        fit(model, train_set, valid_set, train_config, seed=args.seed)
        model.save_checkpoint(out_dir / f"checkpoint-{mode}.json")
        models[mode] = model
    hard = ExclusionConfig(mode="hard", window=window)
    none = ExclusionConfig(mode="none")
    rows = {
        "ExHiRD-h": (models["hierarchical"], hard),
        "w/o HRD": (models["sequential"], hard),
        "w/o ES": (models["hierarchical"], none),
    }
    report_rows = {}
    lines = []
    for label, (model, exclusion) in rows.items():
        records = _predict_corpus(model, test_corpus, vocab, limits, exclusion)
        safe = label.replace("/", "_").replace(" ", "_")
        _write_predictions(records, out_dir / f"predictions-{safe}.jsonl")
        report = corpus_report(
            [PredictionSet.from_record(r) for r in records], test_corpus
        )
        report_rows[label] = report.to_dict(include_per_document=False)
        lines.append(report.format_table(label=label).splitlines()[1])
    header = MetricsReport(
        docs=0, present_f1_at_m=0, present_f1_at_5=0, absent_f1_at_m=0,
        absent_f1_at_5=0, dup_ratio=0, avg_present_unique=0,
        avg_absent_unique=0, present_docs_counted=0, absent_docs_counted=0,
    ).format_table().splitlines()[0]
    print(header)
    for line in lines:
        print(line)
    report_path = out_dir / "ablation_report.json"
    report_path.write_text(
        json.dumps({"rows": report_rows}, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    print(f"ablation report -> {report_path}")
    _write_manifest("ablate", args, out_dir, started)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_decode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--exclusion", choices=["none", "soft", "hard"],
                        default="hard")
    parser.add_argument("--window", default=None,
                        help="exclusion window size (integer or 'all')")
    parser.add_argument("--max-pd-steps", type=int, default=20,
                        help="maximum number of phrases")
    parser.add_argument("--min-pd-steps", type=int, default=1,
                        help="phrase slots to decode before </s> is allowed")
    parser.add_argument("--max-wd-steps", type=int, default=10,
                        help="maximum words per phrase")
    parser.add_argument("--max-seq-tokens", type=int, default=120,
                        help="sequential-mode token cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exhird",
        description="Keyphrase generation with exclusive hierarchical decoding",
    )
    parser.add_argument("--config", default=None,
                        help="JSON or key=value config file; flags override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="build a vocabulary (and cache)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True, help="output vocabulary file")
    p.add_argument("--vocab-size", type=int, default=50000)
    p.add_argument("--cache", default=None, help="optional cache JSONL")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="teacher-forced training")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", default=None, help="CSV training log")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--max-grad-norm", type=float, default=1.0)
    p.add_argument("--embed-dim", type=int, default=100)
    p.add_argument("--hidden-dim", type=int, default=300)
    p.add_argument("--decoder", choices=["hierarchical", "sequential"],
                   default="hierarchical")
    p.add_argument("--exclusion", choices=["none", "soft", "hard"],
                   default="none",
                   help="'soft' adds the exclusive loss during training")
    p.add_argument("--window", default=None)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="greedy decoding of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=1)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="full / w-o HRD / w-o ES comparison")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--vocab-size", type=int, default=50000)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--window", default="1")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-pd-steps", type=int, default=20)
    p.add_argument("--min-pd-steps", type=int, default=1)
    p.add_argument("--max-wd-steps", type=int, default=10)
    p.add_argument("--max-seq-tokens", type=int, default=120)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    config_file = None
    # peek at --config so file values become parser defaults
    peek = argparse.ArgumentParser(add_help=False)
    peek.add_argument("--config", default=None)
    known, _ = peek.parse_known_args(argv)
    try:
        if known.config:
            config_file = _load_config_file(known.config)
        args = parser.parse_args(argv)
        if config_file:
            aliases = {"exclusion.mode": "exclusion",
                       "exclusion.window": "window"}
            valid_keys = set(vars(args))
            for key, value in config_file.items():
                dest = aliases.get(key, key).replace("-", "_")
                if dest not in valid_keys:
                    raise ConfigError(f"unknown config key: {key!r}")
                current = parser.get_default(dest)
                if getattr(args, dest) == current:
                    expected = type(current) if current is not None else str
                    setattr(
                        args, dest,
                        expected(value) if expected in (int, float, str)
                        else value,
                    )
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except ExhirdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
