import pytest

from s2sfe import model as M
from s2sfe import synthetic
from s2sfe.corpus import ParallelCorpus, Stage, read_lines, write_lines
from s2sfe.errors import ConfigError
from s2sfe.pipeline import (FAILED, Frontend, Mode, ModelBundle, PipelineConfig, run_eval,
                            run_translate, train_bundle)


class Counting:
    """Batch translator wrapper that records every piece it is asked to translate."""

    def __init__(self, fn):
        self.fn = fn
        self.pieces = []

    def __call__(self, texts):
        self.pieces.extend(texts)
        return [self.fn(t) for t in texts]


def fake_frontend(mode, **cfg):
    config = PipelineConfig(mode=mode, **cfg)
    tr = {
        Stage.NORMALIZATION: Counting(synthetic.normalize),
        Stage.PRONUNCIATION: Counting(synthetic.pronounce),
        Stage.COMBINED: Counting(synthetic.combined),
    }
    return Frontend(config, translators=tr), tr


def test_dual_short_sentence_two_invocations(tmp_path):
    fe, tr = fake_frontend(Mode.DUAL)
    src = tmp_path / "in.txt"
    write_lines(src, ["the 12kg box weighs 3 ."])
    summary = run_translate(fe.config, src, tmp_path / "out.txt", frontend=fe)
    assert summary.model_calls == 2 and summary.spliced == 0
    assert len(tr[Stage.NORMALIZATION].pieces) == 1 == len(tr[Stage.PRONUNCIATION].pieces)
    assert not tr[Stage.COMBINED].pieces


def test_single_long_sentence_two_chunks(tmp_path):
    fe, tr = fake_frontend(Mode.SINGLE)
    words = [f"w{i}" for i in range(40)]
    src = tmp_path / "in.txt"
    write_lines(src, [" ".join(words)])
    summary = run_translate(fe.config, src, tmp_path / "out.txt", frontend=fe)
    pieces = tr[Stage.COMBINED].pieces
    assert pieces == [" ".join(words[0:25]), " ".join(words[15:40])]
    assert summary.spliced == 1
    assert read_lines(tmp_path / "out.txt") == [synthetic.combined(" ".join(words))]


def test_combined_outputs_phones(tmp_path):
    fe, _ = fake_frontend(Mode.SINGLE)
    write_lines(tmp_path / "in", ["a wind that stiffened to 70kmh by lunch."])
    run_translate(fe.config, tmp_path / "in", tmp_path / "out", frontend=fe)
    out = read_lines(tmp_path / "out")[0]
    assert out == synthetic.pronounce(
        "a wind that stiffened to seventy kilometers per hour by lunch")


def test_splicing_can_be_disabled():
    fe, tr = fake_frontend(Mode.SINGLE, splice=False)
    fe.run([" ".join(["x"] * 60)])
    assert len(tr[Stage.COMBINED].pieces) == 1


def test_dual_splices_normalized_intermediate():
    # 20 raw words expand past the window after normalization
    fe, tr = fake_frontend(Mode.DUAL)
    raw = " ".join(["7777"] * 5)
    runs = fe.run([raw])
    assert len(tr[Stage.NORMALIZATION].pieces) == 1
    assert len(tr[Stage.PRONUNCIATION].pieces) == 2
    assert runs[Stage.PRONUNCIATION].outputs == [synthetic.combined(raw)]


def test_failures_keep_line_count(tmp_path):
    def flaky(t):
        if "boom" in t:
            raise RuntimeError("model exploded")
        return t

    config = PipelineConfig(mode=Mode.SINGLE)
    fe = Frontend(config, translators={Stage.COMBINED: Counting(flaky)})
    write_lines(tmp_path / "in", ["a", "boom here", "c"])
    summary = run_translate(config, tmp_path / "in", tmp_path / "out", frontend=fe)
    assert read_lines(tmp_path / "out") == ["a", FAILED, "c"]
    assert summary.failed == 1 and not summary.ok


def test_dual_failure_propagates_placeholder():
    def flaky(t):
        if "boom" in t:
            raise RuntimeError("x")
        return t

    config = PipelineConfig(mode=Mode.DUAL)
    fe = Frontend(config, translators={Stage.NORMALIZATION: Counting(flaky),
                                       Stage.PRONUNCIATION: Counting(str.upper)})
    runs = fe.run(["ok", "boom"])
    assert runs[Stage.PRONUNCIATION].outputs == ["OK", FAILED]
    assert runs[Stage.PRONUNCIATION].failed == [1]


def _teacher_corpus(n=40, seed=3):
    raw = synthetic.generate_raw(n, seed=seed)
    return synthetic.make_corpora(raw)


def test_eval_with_perfect_model():
    corpora = _teacher_corpus()
    fe, _ = fake_frontend(Mode.DUAL)
    rep = run_eval(fe.config, corpora[Stage.COMBINED], frontend=fe,
                   normalized_refs=corpora[Stage.NORMALIZATION].targets)
    assert rep.scores["combined"].bleu == 100.0
    assert rep.scores["combined"].chrf == 1.0
    assert rep.scores["normalization"].bleu == 100.0
    assert rep.diff.differing == 0


def test_eval_stage_mismatch():
    corpora = _teacher_corpus(5)
    fe, _ = fake_frontend(Mode.SINGLE)
    with pytest.raises(ConfigError):
        run_eval(fe.config, corpora[Stage.NORMALIZATION], frontend=fe)


def test_eval_single_stage_in_dual_mode():
    corpora = _teacher_corpus(10)
    fe, tr = fake_frontend(Mode.DUAL)
    rep = run_eval(fe.config, corpora[Stage.PRONUNCIATION], frontend=fe)
    assert list(rep.scores) == ["pronunciation"]
    assert not tr[Stage.NORMALIZATION].pieces


def test_eval_reports_both_splice_variants():
    raw = [" ".join(f"{i}" for i in range(k, k + 40)) for k in range(5)]
    corpus = synthetic.make_corpora(raw)[Stage.COMBINED]
    fe, _ = fake_frontend(Mode.SINGLE, compare_splicing=True)
    rep = run_eval(fe.config, corpus, frontend=fe)
    assert rep.unspliced is not None
    lines = rep.lines()
    assert any("(spliced)" in l for l in lines) and any("(unspliced)" in l for l in lines)
    assert all("seconds" not in l for l in lines)


def test_config_file(tmp_path):
    (tmp_path / "fe.conf").write_text(
        "# toy locale\nmode = dual\nnormalization_model = norm.ckpt\n"
        "normalization_codec = norm.bpe\npronunciation_model = /abs/pron.ckpt\n"
        "pronunciation_codec = pron.bpe\nwindow = 30\noverlap = 12\nsplice = no\n"
        "locale = en-US\n")
    cfg = PipelineConfig.from_file(tmp_path / "fe.conf", beam=4)
    assert cfg.mode is Mode.DUAL and cfg.window == 30 and cfg.overlap == 12
    assert cfg.splice is False and cfg.beam == 4
    assert cfg.normalization_model == str(tmp_path / "norm.ckpt")
    assert cfg.pronunciation_model == "/abs/pron.ckpt"
    assert cfg.paths_for(Stage.PRONUNCIATION)[1] == str(tmp_path / "pron.bpe")
    with pytest.raises(ConfigError):
        cfg.paths_for(Stage.COMBINED)
    (tmp_path / "bad.conf").write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(tmp_path / "bad.conf")
    with pytest.raises(ConfigError):
        PipelineConfig(window=10, overlap=10)


# -- real (tiny) checkpoints --------------------------------------------------------

TINY = {"num_layers": 1, "num_heads": 2, "embed_dim": 16, "ffn_dim": 32}


@pytest.fixture(scope="module")
def tiny_models(tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    corpora = _teacher_corpus(120, seed=5)
    spec = M.TrainSpec(learning_rate=0.1, batch_size=16, max_steps=30, seed=1)
    paths = {}
    for stage in Stage:
        bundle, _ = train_bundle(corpora[stage], spec, 50, config_overrides=TINY)
        m, c = d / f"{stage.value}.ckpt", d / f"{stage.value}.bpe"
        bundle.save(m, c)
        paths[stage] = (str(m), str(c))
    return paths, corpora


def _config(paths, mode):
    return PipelineConfig(
        mode=mode,
        normalization_model=paths[Stage.NORMALIZATION][0],
        normalization_codec=paths[Stage.NORMALIZATION][1],
        pronunciation_model=paths[Stage.PRONUNCIATION][0],
        pronunciation_codec=paths[Stage.PRONUNCIATION][1],
        combined_model=paths[Stage.COMBINED][0],
        combined_codec=paths[Stage.COMBINED][1])


def test_mismatched_codec_is_config_error(tiny_models):
    paths, _ = tiny_models
    with pytest.raises(ConfigError):
        ModelBundle.load(paths[Stage.COMBINED][0], paths[Stage.NORMALIZATION][1])


def test_only_required_models_load(tiny_models, tmp_path):
    paths, _ = tiny_models
    cfg = _config(paths, Mode.SINGLE)
    cfg.normalization_model = str(tmp_path / "missing.ckpt")
    fe = Frontend(cfg)
    assert list(fe.translators) == [Stage.COMBINED]


def test_dual_file_chaining_equals_fused(tiny_models, tmp_path):
    paths, corpora = tiny_models
    src = tmp_path / "in"
    write_lines(src, corpora[Stage.COMBINED].sources[:20])
    dual = _config(paths, Mode.DUAL)
    run_translate(dual, src, tmp_path / "fused")
    # stage 1 alone, to a file; then stage 2 from that file
    norm_only = Frontend(dual)
    inter = norm_only.run_stage(Stage.NORMALIZATION, read_lines(src)).outputs
    write_lines(tmp_path / "inter", inter)
    pron = norm_only.run_stage(Stage.PRONUNCIATION, read_lines(tmp_path / "inter")).outputs
    write_lines(tmp_path / "chained", pron)
    assert (tmp_path / "chained").read_bytes() == (tmp_path / "fused").read_bytes()


def test_translate_deterministic(tiny_models, tmp_path):
    paths, corpora = tiny_models
    src = tmp_path / "in"
    write_lines(src, corpora[Stage.COMBINED].sources[:15] + [" ".join(["5kg"] * 30)])
    cfg = _config(paths, Mode.SINGLE)
    run_translate(cfg, src, tmp_path / "a")
    run_translate(cfg, src, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert len(read_lines(tmp_path / "a")) == 16


def test_beam_pipeline_runs(tiny_models):
    paths, corpora = tiny_models
    cfg = _config(paths, Mode.SINGLE)
    cfg.beam = 3
    rep = run_eval(cfg, ParallelCorpus(Stage.COMBINED, corpora[Stage.COMBINED].pairs[:5]))
    assert rep.sentences == 5
