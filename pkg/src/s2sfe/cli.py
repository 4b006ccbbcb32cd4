"""Command-line entry point: ``s2sfe <command> [<subcommand>] ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bpe, corpus as C, metrics, model as M, pipeline as P
from .errors import S2SFEError
from .splice import ChunkPlan, SpliceConfig, chunk, splice

log = logging.getLogger("s2sfe")


def _read_stream(path):
    if path in (None, "-"):
        return [line.rstrip("\n") for line in sys.stdin]
    return C.read_lines(path)


def _write_stream(path, lines):
    if path in (None, "-"):
        for line in lines:
            sys.stdout.write(line + "\n")
    else:
        C.write_lines(path, lines)


# -- corpus -------------------------------------------------------------------------

def cmd_corpus_split(a):
    corpus = C.load_parallel(a.src, a.tgt, C.Stage.parse(a.stage))
    parts = C.split(corpus, C.SplitSpec(a.n_valid, a.n_test, a.seed))
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "valid", "test"), parts):
        part.write(out / f"{name}.src", out / f"{name}.tgt")
        print(f"{name}\t{len(part)}")


def cmd_corpus_teacher(a):
    corpus = C.build_from_teacher(a.raw, a.cmd, C.Stage.parse(a.stage))
    corpus.write(a.out_src, a.out_tgt)
    print(f"{len(corpus)} pairs ({corpus.stage.source_form} -> {corpus.stage.target_form})")


# -- bpe ----------------------------------------------------------------------------

def cmd_bpe_learn(a):
    codec = bpe.learn([C.read_lines(p) for p in a.inputs], bpe.BpeConfig(a.merges))
    codec.save(a.output)
    print(f"{len(codec.merges)} merges, {len(codec.char_vocab)} characters")


def cmd_bpe_apply(a):
    codec = bpe.BpeCodec.load(a.codec)
    _write_stream(a.output, [" ".join(codec.encode(line)) for line in _read_stream(a.input)])


def cmd_bpe_decode(a):
    _write_stream(a.output, [bpe.decode(line.split()) for line in _read_stream(a.input)])


# -- train --------------------------------------------------------------------------

def cmd_train(a):
    stage = C.Stage.parse(a.stage)
    train = C.load_parallel(a.src, a.tgt, stage)
    valid = C.load_parallel(a.valid_src, a.valid_tgt, stage) if a.valid_src else None
    codec = bpe.BpeCodec.load(a.codec) if a.codec else None
    spec = M.TrainSpec(learning_rate=a.lr, batch_size=a.batch_size, max_steps=a.max_steps,
                       seed=a.seed, warmup_steps=a.warmup, eval_every=a.eval_every,
                       patience=a.patience, log_every=a.log_every)
    overrides = {"num_layers": a.layers, "num_heads": a.heads, "embed_dim": a.dim,
                 "ffn_dim": a.ffn}
    bundle, curve = P.train_bundle(train, spec, a.merges, valid=valid,
                                   config_overrides=overrides, codec=codec,
                                   init_seed=a.seed, log_fn=log.info)
    bundle.save(a.model_out, a.codec_out)
    if a.curve_out:
        _write_stream(a.curve_out, [f"{i + 1}\t{v:.6f}" for i, v in enumerate(curve.train)])
    print(f"trained {curve.stopped_at} steps; final loss "
          f"{curve.train[-1] if curve.train else float('nan'):.4f}")


# -- pipeline -----------------------------------------------------------------------

def _pipeline_config(a) -> P.PipelineConfig:
    overrides = {
        "mode": a.mode, "window": a.window, "overlap": a.overlap, "beam": a.beam,
        "locale": a.locale,
        "normalization_model": a.normalization_model,
        "normalization_codec": a.normalization_codec,
        "pronunciation_model": a.pronunciation_model,
        "pronunciation_codec": a.pronunciation_codec,
        "combined_model": a.combined_model, "combined_codec": a.combined_codec,
    }
    if a.no_splice:
        overrides["splice"] = False
    if getattr(a, "compare_splicing", False):
        overrides["compare_splicing"] = True
    if a.config:
        return P.PipelineConfig.from_file(a.config, **overrides)
    return P.PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_translate(a):
    cfg = _pipeline_config(a)
    summary = P.run_translate(cfg, a.input, a.output)
    log.info("translated %d sentences in %.2fs", summary.sentences, summary.seconds)
    print(f"sentences {summary.sentences} failed {summary.failed} "
          f"model_calls {summary.model_calls} spliced {summary.spliced}")
    return 0 if summary.ok else 1


def cmd_eval(a):
    cfg = _pipeline_config(a)
    test = C.load_parallel(a.src, a.tgt, C.Stage.parse(a.stage))
    norm_refs = C.read_lines(a.normalized_refs) if a.normalized_refs else None
    report = P.run_eval(cfg, test, normalized_refs=norm_refs, labels=a.labels)
    log.info("evaluated %d sentences in %.2fs", report.sentences, report.seconds)
    if a.report:
        report.write(a.report, a.tsv)
    else:
        print("\n".join(report.lines()))
    return 0 if report.failed == 0 else 1


def cmd_splice(a):
    cfg = SpliceConfig(a.window, a.overlap)
    if a.words is not None:
        print(chunk(range(a.words), cfg).describe())
        return 0
    plan = ChunkPlan.parse(a.plan)
    outputs = [C.split_words(line) for line in _read_stream(a.chunks)]
    print(" ".join(splice(outputs, plan, cfg)))
    return 0


# -- scoring ------------------------------------------------------------------------

def cmd_score(a):
    hyp, ref = C.read_lines(a.hyp), C.read_lines(a.ref)
    if a.metric == "bleu":
        print(f"BLEU {metrics.bleu(hyp, ref, metrics.BleuConfig(a.max_n or 4)):.2f}")
    else:
        print(f"chrF{a.beta:g} "
              f"{metrics.chrf(hyp, ref, metrics.ChrfConfig(a.max_n or 6, a.beta)):.4f}")


def cmd_report_diff(a):
    rep = metrics.diff_report(C.read_lines(a.hyp), C.read_lines(a.ref), labels=a.labels,
                              locale=a.locale)
    print("\n".join(rep.summary_lines()))
    if a.tsv:
        rep.write(tsv_path=a.tsv)


# -- parser -------------------------------------------------------------------------

def _add_pipeline_flags(p):
    p.add_argument("--config", help="key = value pipeline config file")
    p.add_argument("--mode", choices=["dual", "single"])
    p.add_argument("--window", type=int, help="chunk length in words (default 25)")
    p.add_argument("--overlap", type=int, help="chunk overlap in words (default 10)")
    p.add_argument("--no-splice", action="store_true")
    p.add_argument("--beam", type=int)
    p.add_argument("--locale")
    for stage in ("normalization", "pronunciation", "combined"):
        p.add_argument(f"--{stage}-model")
        p.add_argument(f"--{stage}-codec")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="s2sfe", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    corpus = sub.add_parser("corpus").add_subparsers(dest="sub", required=True)
    p = corpus.add_parser("split", help="dedup and split a parallel corpus")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--stage", default="combined")
    p.add_argument("--n-valid", type=int, default=10000)
    p.add_argument("--n-test", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_corpus_split)
    p = corpus.add_parser("teacher", help="pair raw sentences with a teacher command's output")
    p.add_argument("--raw", required=True)
    p.add_argument("--cmd", required=True, help="command line; {stage} is substituted")
    p.add_argument("--stage", default="normalization")
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    p.set_defaults(func=cmd_corpus_teacher)

    b = sub.add_parser("bpe").add_subparsers(dest="sub", required=True)
    p = b.add_parser("learn", help="learn one joint merge table over all inputs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--merges", type=int, default=32000)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bpe_learn)
    p = b.add_parser("apply")
    p.add_argument("--codec", required=True)
    p.add_argument("--input")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bpe_apply)
    p = b.add_parser("decode")
    p.add_argument("--input")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bpe_decode)

    p = sub.add_parser("train", help="train one stage model with plain SGD")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--valid-src")
    p.add_argument("--valid-tgt")
    p.add_argument("--stage", default="combined")
    p.add_argument("--codec", help="existing codec; learned from the training data if absent")
    p.add_argument("--merges", type=int, default=32000)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--ffn", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-steps", type=int, default=10000)
    p.add_argument("--warmup", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=1000)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", required=True)
    p.add_argument("--codec-out", required=True)
    p.add_argument("--curve-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="run the frontend over a file of sentences")
    _add_pipeline_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="translate a test corpus and report BLEU/chrF3/diffs")
    _add_pipeline_flags(p)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--stage", default="combined")
    p.add_argument("--normalized-refs")
    p.add_argument("--labels")
    p.add_argument("--compare-splicing", action="store_true")
    p.add_argument("--report")
    p.add_argument("--tsv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("splice", help="splice per-line chunk outputs, or print a chunk plan")
    p.add_argument("--chunks", help="file with one chunk output per line (default stdin)")
    p.add_argument("--plan", help='spans as "START:END START:END ..."')
    p.add_argument("--words", type=int, help="print the plan for a sentence of N words")
    p.add_argument("--window", type=int, default=25)
    p.add_argument("--overlap", type=int, default=10)
    p.set_defaults(func=cmd_splice)

    s = sub.add_parser("score").add_subparsers(dest="metric", required=True)
    for name in ("bleu", "chrf"):
        p = s.add_parser(name)
        p.add_argument("--hyp", required=True)
        p.add_argument("--ref", required=True)
        p.add_argument("--max-n", type=int)
        if name == "chrf":
            p.add_argument("--beta", type=float, default=3.0)
        p.set_defaults(func=cmd_score)

    r = sub.add_parser("report").add_subparsers(dest="sub", required=True)
    p = r.add_parser("diff", help="categorize differing sentences")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--labels")
    p.add_argument("--locale", default="en-US")
    p.add_argument("--tsv")
    p.set_defaults(func=cmd_report_diff)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.command == "splice" and args.words is None and not args.plan:
        print("splice: need --plan or --words", file=sys.stderr)
        return 2
    try:
        return args.func(args) or 0
    except (S2SFEError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
