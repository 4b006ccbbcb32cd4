"""End-to-end frontend runs: dual (normalize -> pronounce) or single combined model."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

from . import bpe
from . import model as M
from .corpus import ParallelCorpus, Sentence, Stage, read_lines, split_words, write_lines
from .errors import ConfigError
from .metrics import BleuConfig, ChrfConfig, DiffReport, bleu, chrf, diff_report
from .splice import SpliceConfig, chunk, splice

log = logging.getLogger(__name__)

FAILED = "⟨failed⟩"


class Mode(enum.Enum):
    DUAL = "dual"
    SINGLE = "single"


# -- model bundles ---------------------------------------------------------------

@dataclass
class ModelBundle:
    """A checkpoint together with the codec its vocabulary was built from."""

    params: M.ParameterSet
    codec: bpe.BpeCodec
    vocab: bpe.Vocab = None

    def __post_init__(self):
        if self.vocab is None:
            self.vocab = bpe.Vocab.from_codec(self.codec)
        if len(self.vocab) != self.params.config.vocab_size:
            raise ConfigError(f"codec yields {len(self.vocab)} tokens but the model "
                              f"expects {self.params.config.vocab_size}")

    @classmethod
    def load(cls, model_path, codec_path) -> "ModelBundle":
        return cls(M.load_checkpoint(model_path)[0], bpe.BpeCodec.load(codec_path))

    def save(self, model_path, codec_path) -> None:
        M.save_checkpoint(self.params, model_path)
        self.codec.save(codec_path)

    def encode(self, text: str) -> list[int]:
        return self.vocab.ids(self.codec.encode(text))

    def encode_pairs(self, corpus: ParallelCorpus) -> list[tuple[list[int], list[int]]]:
        return encode_pairs(self.codec, self.vocab, corpus)


def encode_pairs(codec: bpe.BpeCodec, vocab: bpe.Vocab, corpus: ParallelCorpus
                 ) -> list[tuple[list[int], list[int]]]:
    return [(vocab.ids(codec.encode(s.text)), vocab.ids(codec.encode(t.text)))
            for s, t in corpus.pairs]


def learn_joint_codec(corpus: ParallelCorpus, num_merges: int) -> bpe.BpeCodec:
    return bpe.learn([corpus.sources, corpus.targets], bpe.BpeConfig(num_merges))


def train_bundle(train: ParallelCorpus, spec: M.TrainSpec, num_merges: int,
                 valid: ParallelCorpus | None = None, config_overrides: dict | None = None,
                 codec: bpe.BpeCodec | None = None, init_seed: int = 0,
                 log_fn=None) -> tuple[ModelBundle, M.LossCurve]:
    codec = codec or learn_joint_codec(train, num_merges)
    vocab = bpe.Vocab.from_codec(codec)
    pairs = encode_pairs(codec, vocab, train)
    valid_pairs = encode_pairs(codec, vocab, valid) if valid else None
    longest = max(max(len(s), len(t)) for s, t in pairs) + 2
    kw = {"vocab_size": len(vocab), "max_positions": max(256, 2 * longest)}
    kw.update(config_overrides or {})
    cfg = M.TransformerConfig(**{**M.TransformerConfig.desk(len(vocab)).__dict__, **kw})
    params, curve = M.train(M.init(cfg, init_seed), pairs, spec, valid_pairs, log=log_fn)
    return ModelBundle(params, codec, vocab), curve


# -- translation -----------------------------------------------------------------

@dataclass(frozen=True)
class DecodeConfig:
    beam: int = 1  # 1 = greedy
    length_factor: float = 4.0
    length_slack: int = 16
    batch_size: int = 128


class Seq2SeqTranslator:
    """Batched sentence translation through one model bundle."""

    def __init__(self, bundle: ModelBundle, decode: DecodeConfig = DecodeConfig()):
        self.bundle = bundle
        self.decode = decode
        self.calls = 0

    def max_len(self, n_src: int) -> int:
        d = self.decode
        return min(self.bundle.params.config.max_positions - 1,
                   int(d.length_factor * n_src) + d.length_slack)

    def translate_batch(self, texts: Sequence[str]) -> list[str]:
        self.calls += len(texts)
        b = self.bundle
        out = [None] * len(texts)
        encoded = [b.encode(t) for t in texts]
        # length-sorted batches keep padding small; results return in input order
        order = sorted(range(len(texts)), key=lambda i: len(encoded[i]))
        limit = b.params.config.max_positions - 1
        for i in range(0, len(order), self.decode.batch_size):
            idx = order[i:i + self.decode.batch_size]
            too_long = [j for j in idx if len(encoded[j]) > limit]
            if too_long:
                raise M.PositionError(f"source of {len(encoded[too_long[0]])} tokens "
                                      f"exceeds the model's {limit} positions")
            if self.decode.beam == 1:
                ml = self.max_len(max(len(encoded[j]) for j in idx))
                hyps = M.greedy_decode_batch(b.params, [encoded[j] for j in idx], ml)
            else:
                hyps = [M.beam_decode(b.params, encoded[j], self.decode.beam,
                                      self.max_len(len(encoded[j]))) for j in idx]
            for j, h in zip(idx, hyps):
                out[j] = b.vocab.detokenize(h)
        return out

    def __call__(self, sentence: Sentence) -> Sentence:
        return Sentence(self.translate_batch([sentence.text])[0])


BatchTranslator = Callable[[Sequence[str]], list[str]]


@dataclass
class StageRun:
    outputs: list[str]
    failed: list[int] = field(default_factory=list)
    spliced: int = 0
    chunks: int = 0


def translate_sentences(translate_batch: BatchTranslator, texts: Sequence[str],
                        splice_config: SpliceConfig | None) -> StageRun:
    """Translate every sentence, chunking and splicing those longer than the window.

    A chunk that fails marks its whole sentence with the failure placeholder;
    the other sentences are unaffected.
    """
    plans = []
    pieces: list[str] = []
    owners: list[int] = []
    for i, text in enumerate(texts):
        words = split_words(text)
        if splice_config is not None and len(words) > splice_config.window:
            plan = chunk(words, splice_config)
            for s, e in plan.spans:
                pieces.append(" ".join(words[s:e]))
                owners.append(i)
            plans.append(plan)
        else:
            pieces.append(" ".join(words))
            owners.append(i)
            plans.append(None)
    try:
        results: list[str | None] = list(translate_batch(pieces))
    except Exception as exc:
        log.warning("batch translation failed (%s); retrying piece by piece", exc)
        results = []
        for piece in pieces:
            try:
                results.append(translate_batch([piece])[0])
            except Exception as inner:
                log.error("translation failed for %r: %s", piece, inner)
                results.append(None)
    grouped: dict[int, list] = {}
    for owner, res in zip(owners, results):
        grouped.setdefault(owner, []).append(res)
    run = StageRun(outputs=[], chunks=len(pieces))
    for i in range(len(texts)):
        outs = grouped[i]
        if any(o is None for o in outs):
            run.failed.append(i)
            run.outputs.append(FAILED)
            continue
        plan = plans[i]
        if plan is None:
            run.outputs.append(outs[0])
        else:
            run.spliced += 1
            run.outputs.append(" ".join(splice([split_words(o) for o in outs], plan,
                                               splice_config)))
    return run


# -- configuration ---------------------------------------------------------------

@dataclass
class PipelineConfig:
    mode: Mode = Mode.SINGLE
    normalization_model: str | None = None
    normalization_codec: str | None = None
    pronunciation_model: str | None = None
    pronunciation_codec: str | None = None
    combined_model: str | None = None
    combined_codec: str | None = None
    splice: bool = True
    window: int = 25
    overlap: int = 10
    beam: int = 1
    locale: str = "en-US"
    compare_splicing: bool = False
    batch_size: int = 128

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode.lower())
        if self.beam < 1:
            raise ConfigError("beam must be >= 1")
        self.splice_config()  # validates window/overlap

    def splice_config(self) -> SpliceConfig | None:
        try:
            cfg = SpliceConfig(self.window, self.overlap)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg if self.splice else None

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(beam=self.beam, batch_size=self.batch_size)

    def required_stages(self) -> list[Stage]:
        if self.mode is Mode.DUAL:
            return [Stage.NORMALIZATION, Stage.PRONUNCIATION]
        return [Stage.COMBINED]

    def paths_for(self, stage: Stage) -> tuple[str, str]:
        model = getattr(self, f"{stage.value}_model")
        codec = getattr(self, f"{stage.value}_codec")
        if not model or not codec:
            raise ConfigError(f"{self.mode.value} mode needs {stage.value}_model and "
                              f"{stage.value}_codec")
        return model, codec

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Read ``key = value`` lines; ``#`` starts a comment. Relative paths resolve
        against the config file's directory."""
        base = Path(path).parent
        values: dict = {}
        known = {f.name: f for f in fields(cls)}
        for no, raw in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{no}: unknown key {key!r}")
            values[key] = _coerce(key, value, base)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


_BOOL_KEYS = {"splice", "compare_splicing"}
_INT_KEYS = {"window", "overlap", "beam", "batch_size"}


def _coerce(key: str, value: str, base: Path):
    if key in _BOOL_KEYS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: not a boolean: {value!r}")
    if key in _INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: not an integer: {value!r}") from None
    if key.endswith("_model") or key.endswith("_codec"):
        p = Path(value)
        return str(p if p.is_absolute() else base / p)
    return value


# -- frontend --------------------------------------------------------------------

class Frontend:
    """Loads exactly the models the mode demands and chains them."""

    def __init__(self, config: PipelineConfig, bundles: dict[Stage, ModelBundle] | None = None,
                 translators: dict[Stage, BatchTranslator] | None = None):
        self.config = config
        self.translators: dict[Stage, BatchTranslator] = {}
        for stage in config.required_stages():
            if translators and stage in translators:
                self.translators[stage] = translators[stage]
                continue
            bundle = (bundles or {}).get(stage)
            if bundle is None:
                bundle = ModelBundle.load(*config.paths_for(stage))
            self.translators[stage] = Seq2SeqTranslator(
                bundle, config.decode_config()).translate_batch

    def run_stage(self, stage: Stage, texts: Sequence[str], splice_on: bool = True) -> StageRun:
        cfg = self.config.splice_config() if splice_on else None
        return translate_sentences(self.translators[stage], texts, cfg)

    def run(self, texts: Sequence[str], splice_on: bool = True) -> dict[Stage, StageRun]:
        """All stage outputs in order; the last entry is the phone sequence."""
        if self.config.mode is Mode.SINGLE:
            return {Stage.COMBINED: self.run_stage(Stage.COMBINED, texts, splice_on)}
        norm = self.run_stage(Stage.NORMALIZATION, texts, splice_on)
        # failed sentences pass their placeholder through; the placeholder is re-marked below
        pron = self.run_stage(Stage.PRONUNCIATION, norm.outputs, splice_on)
        for i in norm.failed:
            if i not in pron.failed:
                pron.failed.append(i)
            pron.outputs[i] = FAILED
        pron.failed.sort()
        return {Stage.NORMALIZATION: norm, Stage.PRONUNCIATION: pron}

    def phones(self, texts: Sequence[str], splice_on: bool = True) -> StageRun:
        return list(self.run(texts, splice_on).values())[-1]


@dataclass
class RunSummary:
    sentences: int
    failed: int
    model_calls: int
    spliced: int
    seconds: float

    @property
    def ok(self) -> bool:
        return self.failed == 0


def run_translate(config: PipelineConfig, input_path, output_path,
                  frontend: Frontend | None = None) -> RunSummary:
    fe = frontend or Frontend(config)
    texts = read_lines(input_path)
    t0 = time.perf_counter()
    runs = fe.run(texts)
    final = list(runs.values())[-1]
    write_lines(output_path, final.outputs)
    return RunSummary(
        sentences=len(texts),
        failed=len(final.failed),
        model_calls=sum(r.chunks for r in runs.values()),
        spliced=sum(r.spliced for r in runs.values()),
        seconds=time.perf_counter() - t0,
    )


# -- evaluation ------------------------------------------------------------------

@dataclass
class StageScore:
    bleu: float
    chrf: float

    def line(self, name: str) -> str:
        return f"{name}\tBLEU {self.bleu:.2f}\tchrF3 {self.chrf:.4f}"


def score(candidates: Sequence[str], references: Sequence[str]) -> StageScore:
    return StageScore(bleu(candidates, references, BleuConfig()),
                      chrf(candidates, references, ChrfConfig()))


@dataclass
class EvalReport:
    locale: str
    mode: Mode
    spliced: bool
    scores: dict[str, StageScore]
    unspliced: dict[str, StageScore] | None
    diff: DiffReport
    sentences: int
    failed: int
    seconds: float = 0.0

    def lines(self) -> list[str]:
        """Deterministic report body; wall-clock timing is kept out of it."""
        out = [f"locale\t{self.locale}", f"mode\t{self.mode.value}",
               f"sentences\t{self.sentences}", f"failed\t{self.failed}",
               f"spliced\t{'yes' if self.spliced else 'no'}"]
        for name, sc in self.scores.items():
            out.append(sc.line(name + (" (spliced)" if self.unspliced is not None else "")))
        if self.unspliced is not None:
            for name, sc in self.unspliced.items():
                out.append(sc.line(name + " (unspliced)"))
        out += ["# diff " + line for line in self.diff.summary_lines()]
        return out

    def write(self, path, tsv_path=None) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n", encoding="utf-8")
        if tsv_path is not None:
            self.diff.write(tsv_path=tsv_path)


_EVAL_STAGES = {
    Mode.SINGLE: {Stage.COMBINED},
    Mode.DUAL: {Stage.COMBINED, Stage.NORMALIZATION, Stage.PRONUNCIATION},
}


def run_eval(config: PipelineConfig, test_corpus: ParallelCorpus,
             frontend: Frontend | None = None,
             normalized_refs: Sequence[str] | None = None, labels=None) -> EvalReport:
    """Translate the test sources and score them against the targets.

    Single mode takes a Combined-stage corpus. Dual mode takes a Combined
    corpus (scored end to end, plus the normalization stage when
    ``normalized_refs`` is given) or a single-stage corpus, which is run
    through that stage's model alone.
    """
    if test_corpus.stage not in _EVAL_STAGES[config.mode]:
        raise ConfigError(f"{config.mode.value} mode cannot evaluate a "
                          f"{test_corpus.stage.value} corpus")
    fe = frontend or Frontend(config)
    sources, targets = test_corpus.sources, test_corpus.targets
    t0 = time.perf_counter()

    def evaluate(splice_on: bool) -> tuple[dict[str, StageScore], list[str], int]:
        scores: dict[str, StageScore] = {}
        if test_corpus.stage is Stage.COMBINED:
            runs = fe.run(sources, splice_on)
            final = list(runs.values())[-1]
            if Stage.NORMALIZATION in runs and normalized_refs is not None:
                scores[Stage.NORMALIZATION.value] = score(
                    runs[Stage.NORMALIZATION].outputs, normalized_refs)
            scores[Stage.COMBINED.value] = score(final.outputs, targets)
        else:
            final = fe.run_stage(test_corpus.stage, sources, splice_on)
            scores[test_corpus.stage.value] = score(final.outputs, targets)
        return scores, final.outputs, len(final.failed)

    splice_on = config.splice
    scores, outputs, failed = evaluate(splice_on)
    unspliced = None
    if config.compare_splicing and splice_on:
        unspliced = evaluate(False)[0]
    diff = diff_report(outputs, targets, labels=labels, locale=config.locale)
    return EvalReport(locale=config.locale, mode=config.mode, spliced=splice_on,
                      scores=scores, unspliced=unspliced, diff=diff,
                      sentences=len(sources), failed=failed,
                      seconds=time.perf_counter() - t0)
