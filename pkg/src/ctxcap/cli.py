"""``ctxcap`` command line.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
Tabular results go to stdout as tab-separated lines; figures and JSON
reports go to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import STAGES, ExperimentConfig, preset
from .corpus.manifest import DataError, DatasetManifest
from .corpus.script import ScriptParseError
from .corpus.srt import SubtitleError
from .gradcheck import NumericError
from .metrics import ALL_METRICS
from .params import CheckpointError
from .synthetic import SpecError, SyntheticTaskSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("ctxcap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(*fields) -> None:
    print("\t".join(str(f) for f in fields))


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        try:
            cfg = ExperimentConfig.load(args.config)
        except FileNotFoundError:
            raise DataError(f"config {args.config} does not exist") from None
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise UsageError(f"bad config {args.config}: {exc}") from None
    else:
        try:
            cfg = preset(getattr(args, "preset", None) or "synthetic")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _manifest_vocab(path, cfg: ExperimentConfig):
    from .vocab import Vocabulary, build_vocab

    manifest = DatasetManifest.load(path)
    vfile = manifest.root / "vocab.json"
    if vfile.exists():
        return manifest, Vocabulary.load(vfile)
    train = manifest.split("train")
    if not train:
        raise DataError(f"{path}: no training records to build a vocabulary from")
    return manifest, build_vocab((r.caption + r.context for r in train), cfg.vocab_size)


# -- subcommands ----------------------------------------------------------------

def cmd_synthesize(args) -> int:
    from .synthetic import generate_synthetic_dataset

    spec = SyntheticTaskSpec()
    if args.config:
        spec = SyntheticTaskSpec(**json.loads(Path(args.config).read_text()))
    for key in ("task", "train", "val", "test", "pretrain", "contexts_per_clip", "noise_sentences", "list_min", "list_max"):
        value = getattr(args, key)
        if value is not None:
            setattr(spec, key, value)
    if args.seed is not None:
        spec.seed = args.seed
    manifest, vocab = generate_synthetic_dataset(spec, args.out_dir)
    _emit("records", len(manifest))
    _emit("vocab", len(vocab))
    _emit("manifest", Path(args.out_dir) / "manifest.jsonl")
    return EXIT_OK


def cmd_train(args) -> int:
    from .plotting import plot_loss_curve
    from .training import load_model, save_model, train

    cfg = _load_config(args)
    if args.variant:
        cfg.variant = args.variant
    manifest, vocab = _manifest_vocab(args.manifest, cfg)
    stages = args.stages.split(",") if args.stages else cfg.stages
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise UsageError(f"unknown stages {unknown}; choose from {','.join(STAGES)}")
    model = None
    if args.checkpoint:
        model, _, ck_vocab, _ = load_model(args.checkpoint)
        if ck_vocab.itos != vocab.itos:
            raise DataError("checkpoint vocabulary differs from the manifest's")
        model.cfg.variant = cfg.variant
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.time()
    result = train(cfg, manifest, vocab, stages, model=model, checkpoint_dir=out / "stages")
    save_model(out / "model.ckpt", result.model, cfg, vocab)
    curve = result.curve_dicts()
    (out / "loss_curve.json").write_text(json.dumps(curve, indent=1))
    cfg.save(out / "config.json")
    if curve:
        plot_loss_curve(curve, out / "loss_curve.png")
    _emit("stage", "epoch", "train_loss", "val_loss")
    for r in curve:
        _emit(r["stage"], r["epoch"], f"{r['train_loss']:.6f}", "" if r["val_loss"] is None else f"{r['val_loss']:.6f}")
    _emit("checkpoint", out / "model.ckpt")
    _emit("seconds", f"{time.time() - start:.1f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .ablation import generate
    from .plotting import plot_trace
    from .training import load_model

    if not args.checkpoint:
        raise UsageError("generate needs --checkpoint")
    model, cfg, vocab, _ = load_model(args.checkpoint)
    if args.seed is not None:
        cfg.seed = args.seed
    dc = cfg.decode
    if args.beam_width is not None:
        dc.beam_width = args.beam_width
    if args.rep_beta is not None:
        dc.repetition_beta = args.rep_beta
    if args.max_len is not None:
        dc.max_len = args.max_len
    dc.__post_init__()
    manifest = DatasetManifest.load(args.manifest)
    preds = generate(model, manifest, vocab, dc, args.split, cfg.max_context_len, args.limit)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for p in preds:
                fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            for p in preds:
                fh.write(json.dumps(p.to_dict(with_traces=True), ensure_ascii=False) + "\n")
    if args.figures_dir:
        for p in preds[: args.max_figures]:
            plot_trace(p.context, p.words, [t.__dict__ for t in p.traces], Path(args.figures_dir) / f"trace_{p.clip_id}.png")
    for p in preds:
        _emit(p.clip_id, " ".join(p.words))
    return EXIT_OK


def _read_predictions(path) -> dict[str, list[str]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                pred = d["prediction"]
                out[d["clip_id"]] = pred.split() if isinstance(pred, str) else list(pred)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{n}: bad prediction record ({exc})") from None
    return out


def cmd_evaluate(args) -> int:
    from .metrics import evaluate

    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(metrics) - set(ALL_METRICS)
    if unknown:
        raise UsageError(f"unknown metrics {sorted(unknown)}; choose from {','.join(ALL_METRICS)}")
    preds = _read_predictions(args.pred)
    manifest = DatasetManifest.load(args.manifest)
    refs = {}
    for r in manifest.records:
        refs.setdefault(r.clip_id, r)
    missing = sorted(set(preds) - set(refs))
    if missing:
        raise DataError(f"{len(missing)} predicted clips are not in the manifest, e.g. {missing[0]}")
    clips = sorted(preds)
    if not clips:
        raise DataError(f"{args.pred}: no predictions")
    report = evaluate(
        [preds[c] for c in clips], [refs[c].caption for c in clips], [refs[c].names for c in clips], metrics
    )
    _emit("metric", "value")
    for m in metrics:
        v = report.corpus[m]
        # CIDEr is displayed with its customary x10 factor on top of the percent scale
        shown = None if v is None else (v * 1000.0 if m == "cider" else v * 100.0)
        _emit(m, "n/a" if shown is None else f"{shown:.2f}")
    _emit("count", report.count)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1))
    if args.figure:
        from .plotting import plot_scores

        plot_scores({Path(args.pred).stem: report.percent()}, args.figure)
    return EXIT_OK


def cmd_build_corpus(args) -> int:
    from .corpus.build import build_corpus

    if not 0.0 <= args.overlap_threshold <= 1.0:
        raise UsageError("--overlap-threshold must lie in [0, 1]")
    manifest, report = build_corpus(
        args.captions,
        args.scripts_dir,
        args.out_manifest,
        subs_dir=args.subs_dir,
        mode=args.mode,
        overlap_threshold=args.overlap_threshold,
        max_context=args.max_context,
        seed=args.seed or 0,
    )
    _emit("movie", "overlap", "alignment", "kept")
    for movie in sorted(set(report.overlaps) | set(report.alignment_scores) | set(report.dropped_movies)):
        ov = report.overlaps.get(movie)
        al = report.alignment_scores.get(movie)
        _emit(movie, "" if ov is None else f"{ov:.4f}", "" if al is None else f"{al:.4f}", int(movie not in report.dropped_movies))
    _emit("records", report.kept_records)
    return EXIT_OK


def cmd_grad_check(args) -> int:
    from .diagnostics import model_grad_check

    start = time.time()
    errors = model_grad_check(dim=args.dim, seed=args.seed or 0, max_coords=args.max_coords)
    _emit("parameter", "max_rel_error")
    for name, err in sorted(errors.items()):
        _emit(name, f"{err:.3e}")
    worst = max(errors.values())
    _emit("max", f"{worst:.3e}")
    _emit("seconds", f"{time.time() - start:.1f}")
    if worst >= args.tolerance:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {args.tolerance:g}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctxcap", description="Contextual video captioning with a pointer-generator decoder.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_help="experiment config (JSON)"):
        sp.add_argument("--config", help=config_help)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--checkpoint")

    s = sub.add_parser("synthesize", help="write a synthetic copy-task dataset")
    common(s, "synthetic task spec (JSON)")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--task", choices=["caption", "list"])
    for key in ("train", "val", "test", "pretrain", "contexts-per-clip", "noise-sentences", "list-min", "list-max"):
        s.add_argument(f"--{key}", type=int)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("train", help="staged training")
    common(s)
    s.add_argument("--preset", help="named config used when --config is absent (default: synthetic)")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--stages", help=f"comma-separated subset of {','.join(STAGES)}")
    s.add_argument("--variant", choices=["full", "video_only", "context_only"])
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="caption a manifest split")
    common(s)
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--beam-width", type=int)
    s.add_argument("--rep-beta", type=float)
    s.add_argument("--max-len", type=int)
    s.add_argument("--limit", type=int)
    s.add_argument("--out", help="predictions (JSON lines)")
    s.add_argument("--trace-out", help="per-step p_gen / attention / coverage traces (JSON lines)")
    s.add_argument("--figures-dir", help="render trace figures here")
    s.add_argument("--max-figures", type=int, default=5)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="score predictions against a manifest")
    common(s)
    s.add_argument("--pred", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--metrics", default=",".join(ALL_METRICS))
    s.add_argument("--out", help="JSON score report")
    s.add_argument("--figure", help="bar chart of the scores")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("build-corpus", help="captions + scripts + subtitles -> manifest")
    common(s)
    s.add_argument("--scripts-dir", required=True)
    s.add_argument("--subs-dir")
    s.add_argument("--captions", required=True)
    s.add_argument("--overlap-threshold", type=float, default=1.0 / 3.0)
    s.add_argument("--mode", choices=["ad", "script", "news"], default="ad")
    s.add_argument("--out-manifest", required=True)
    s.add_argument("--max-context", type=int)
    s.set_defaults(func=cmd_build_corpus)

    s = sub.add_parser("grad-check", help="finite-difference check of the whole model")
    common(s)
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--max-coords", type=int, default=6)
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.set_defaults(func=cmd_grad_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ctxcap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"ctxcap: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CheckpointError, SpecError, ScriptParseError, SubtitleError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"ctxcap: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
