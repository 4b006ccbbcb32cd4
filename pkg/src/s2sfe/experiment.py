"""Desk-scale end-to-end experiment on the toy locale: single vs dual frontend."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import model as M
from . import synthetic
from .corpus import ParallelCorpus, SplitSpec, Stage, split
from .pipeline import (EvalReport, Frontend, Mode, ModelBundle, PipelineConfig, run_eval,
                       train_bundle)

log = logging.getLogger(__name__)


@dataclass
class SyntheticSetup:
    n_train: int = 20000
    n_valid: int = 500
    n_test: int = 500
    data_seed: int = 1
    split_seed: int = 7
    merges: int = 300
    dropout: float = 0.1
    train: M.TrainSpec = field(default_factory=lambda: M.TrainSpec(
        learning_rate=0.2, batch_size=64, max_steps=25000, eval_every=1000, patience=5,
        log_every=1000))
    locale: str = "xx-TOY"


@dataclass
class SyntheticData:
    train: dict[Stage, ParallelCorpus]
    valid: dict[Stage, ParallelCorpus]
    test: dict[Stage, ParallelCorpus]


def _derive(raw: list[str]) -> dict[Stage, ParallelCorpus]:
    return synthetic.make_corpora(raw)


def _without(corpus: ParallelCorpus, *held: ParallelCorpus) -> ParallelCorpus:
    banned = {(s.text, t.text) for h in held for s, t in h.pairs}
    seen = set()
    kept = []
    for s, t in corpus.pairs:
        key = (s.text, t.text)
        if key not in banned and key not in seen:
            seen.add(key)
            kept.append((s, t))
    return ParallelCorpus(corpus.stage, kept)


def build_data(setup: SyntheticSetup) -> SyntheticData:
    """Generate raw sentences, split once at the Combined level, derive every stage.

    Stage corpora derived from different raw lines can coincide (e.g. two raw
    forms normalizing alike), so each training set is purged of pairs that
    occur in its own valid or test set.
    """
    # oversample so the deduplicated pool still covers train + valid + test
    want = setup.n_train + setup.n_valid + setup.n_test
    raw = synthetic.generate_raw(int(want * 1.15) + 100, seed=setup.data_seed)
    combined = synthetic.make_corpora(raw)[Stage.COMBINED]
    tr, va, te = split(combined, SplitSpec(setup.n_valid, setup.n_test, setup.split_seed))
    tr = ParallelCorpus(tr.stage, tr.pairs[:setup.n_train])
    parts = [_derive(c.sources) for c in (tr, va, te)]
    train = {st: _without(parts[0][st], parts[1][st], parts[2][st]) for st in Stage}
    return SyntheticData(train, parts[1], parts[2])


@dataclass
class ExperimentResult:
    single: EvalReport
    dual: EvalReport
    curves: dict[str, M.LossCurve]
    seconds: dict[str, float]
    bundles: dict[Stage, ModelBundle]

    def lines(self) -> list[str]:
        out = ["# single (combined model)"] + self.single.lines()
        out += ["# dual (normalization -> pronunciation)"] + self.dual.lines()
        for name, c in self.curves.items():
            out.append(f"# {name}: {c.stopped_at} steps, best valid step {c.best_step}, "
                       f"{self.seconds[name]:.0f}s")
        return out


def train_stage(data: SyntheticData, stage: Stage, setup: SyntheticSetup, log_fn=None
                ) -> tuple[ModelBundle, M.LossCurve]:
    return train_bundle(data.train[stage], setup.train, setup.merges,
                        valid=data.valid[stage], log_fn=log_fn,
                        config_overrides={"dropout": setup.dropout})


def run(setup: SyntheticSetup = SyntheticSetup(), log_fn=None) -> ExperimentResult:
    data = build_data(setup)
    bundles: dict[Stage, ModelBundle] = {}
    curves: dict[str, M.LossCurve] = {}
    seconds: dict[str, float] = {}
    for stage in (Stage.COMBINED, Stage.NORMALIZATION, Stage.PRONUNCIATION):
        t0 = time.perf_counter()
        prefix = stage.value

        def stage_log(msg, _p=prefix):
            if log_fn:
                log_fn(f"[{_p}] {msg}")

        bundles[stage], curves[prefix] = train_stage(data, stage, setup, stage_log)
        seconds[prefix] = time.perf_counter() - t0
    test = data.test[Stage.COMBINED]
    single_cfg = PipelineConfig(mode=Mode.SINGLE, locale=setup.locale)
    dual_cfg = PipelineConfig(mode=Mode.DUAL, locale=setup.locale)
    single = run_eval(single_cfg, test, Frontend(single_cfg, bundles))
    dual = run_eval(dual_cfg, test, Frontend(dual_cfg, bundles),
                    normalized_refs=data.test[Stage.NORMALIZATION].targets)
    return ExperimentResult(single, dual, curves, seconds, bundles)
