import subprocess
import sys

import pytest

from s2sfe import synthetic
from s2sfe.cli import main
from s2sfe.corpus import Stage, read_lines, write_lines


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("corpus", "bpe", "train", "translate", "eval", "splice", "score", "report"):
        assert cmd in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "s2sfe", "splice", "--words", "40"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "0:25 15:40"


def test_bpe_learn_apply_decode(tmp_path, capsys):
    lines = ["the lower the newer", "lowest widest ünïcode", "a @@ b"]
    write_lines(tmp_path / "a.txt", lines)
    write_lines(tmp_path / "b.txt", ["newest low"])
    code, out, _ = run(capsys, "bpe", "learn", tmp_path / "a.txt", tmp_path / "b.txt",
                       "--merges", 20, "--output", tmp_path / "codes")
    assert code == 0 and "merges" in out
    assert read_lines(tmp_path / "codes")[0] == "#s2sfe-bpe v1"
    run(capsys, "bpe", "apply", "--codec", tmp_path / "codes", "--input", tmp_path / "a.txt",
        "--output", tmp_path / "a.bpe")
    assert any("@@" in l for l in read_lines(tmp_path / "a.bpe"))
    run(capsys, "bpe", "decode", "--input", tmp_path / "a.bpe", "--output", tmp_path / "a.dec")
    assert read_lines(tmp_path / "a.dec") == lines


def test_bpe_decode_dangling_is_error(tmp_path, capsys):
    write_lines(tmp_path / "x", ["lo@@"])
    code, _, err = run(capsys, "bpe", "decode", "--input", tmp_path / "x")
    assert code == 1 and "error" in err


def test_corpus_teacher_and_split(tmp_path, capsys):
    raw = synthetic.generate_raw(60, seed=4)
    write_lines(tmp_path / "raw", raw)
    cmd = f"{sys.executable} -m s2sfe.synthetic --form normalized"
    code, out, _ = run(capsys, "corpus", "teacher", "--raw", tmp_path / "raw", "--cmd", cmd,
                       "--stage", "normalization", "--out-src", tmp_path / "s",
                       "--out-tgt", tmp_path / "t")
    assert code == 0 and "60 pairs" in out
    assert read_lines(tmp_path / "t") == [synthetic.normalize(r) for r in raw]
    code, out, _ = run(capsys, "corpus", "split", "--src", tmp_path / "s", "--tgt",
                       tmp_path / "t", "--stage", "normalization", "--n-valid", 5,
                       "--n-test", 7, "--seed", 3, "--out-dir", tmp_path / "parts")
    assert code == 0
    assert len(read_lines(tmp_path / "parts" / "valid.src")) == 5
    assert len(read_lines(tmp_path / "parts" / "test.tgt")) == 7


def test_corpus_teacher_failure(tmp_path, capsys):
    write_lines(tmp_path / "raw", ["x"])
    code, _, err = run(capsys, "corpus", "teacher", "--raw", tmp_path / "raw", "--cmd",
                       f"{sys.executable} -c 'import sys; sys.exit(3)'",
                       "--out-src", tmp_path / "s", "--out-tgt", tmp_path / "t")
    assert code == 1 and "error" in err


def test_splice_commands(tmp_path, capsys):
    assert run(capsys, "splice", "--words", 10)[1].strip() == "0:10"
    words = [f"w{i}" for i in range(40)]
    write_lines(tmp_path / "chunks", [" ".join(words[:25]), " ".join(words[15:])])
    code, out, _ = run(capsys, "splice", "--plan", "0:25 15:40", "--chunks", tmp_path / "chunks")
    assert code == 0 and out.split() == words
    assert run(capsys, "splice")[0] == 2
    assert run(capsys, "splice", "--plan", "0-25", "--chunks", tmp_path / "chunks")[0] == 1


def test_score_and_report(tmp_path, capsys):
    refs = ["the cat sat on the mat", "hello world"]
    write_lines(tmp_path / "ref", refs)
    write_lines(tmp_path / "hyp", ["the cat sat on the mat", "hello, world"])
    assert run(capsys, "score", "bleu", "--hyp", tmp_path / "ref", "--ref",
               tmp_path / "ref")[1].strip() == "BLEU 100.00"
    assert run(capsys, "score", "chrf", "--hyp", tmp_path / "ref", "--ref",
               tmp_path / "ref")[1].strip() == "chrF3 1.0000"
    code, out, _ = run(capsys, "report", "diff", "--hyp", tmp_path / "hyp", "--ref",
                       tmp_path / "ref", "--tsv", tmp_path / "d.tsv")
    assert code == 0 and "punctuation_only" in out
    assert read_lines(tmp_path / "d.tsv") == ["1\tpunctuation_only\thello, world\thello world"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    corpora = synthetic.make_corpora(synthetic.generate_raw(80, seed=11))
    for stage, corpus in corpora.items():
        corpus.write(d / f"{stage.value}.src", d / f"{stage.value}.tgt")
    for stage in Stage:
        code = main(["train", "--src", str(d / f"{stage.value}.src"),
                     "--tgt", str(d / f"{stage.value}.tgt"), "--stage", stage.value,
                     "--merges", "40", "--layers", "1", "--dim", "16", "--ffn", "32",
                     "--max-steps", "20", "--batch-size", "16", "--eval-every", "0",
                     "--model-out", str(d / f"{stage.value}.ckpt"),
                     "--codec-out", str(d / f"{stage.value}.bpe"),
                     "--curve-out", str(d / f"{stage.value}.curve")])
        assert code == 0
    (d / "fe.conf").write_text(
        "mode = dual\n" + "".join(
            f"{s.value}_model = {s.value}.ckpt\n{s.value}_codec = {s.value}.bpe\n"
            for s in Stage))
    return d


def test_train_writes_curve(trained):
    assert len(read_lines(trained / "combined.curve")) == 20


def test_translate_cli(trained, tmp_path, capsys):
    write_lines(tmp_path / "in", ["the 5kg bag.", " ".join(["7"] * 30), ""])
    code, out, _ = run(capsys, "translate", "--config", trained / "fe.conf",
                       "--mode", "single", "--input", tmp_path / "in",
                       "--output", tmp_path / "out")
    assert code == 0 and "model_calls" in out and "spliced 1" in out
    assert len(read_lines(tmp_path / "out")) == 3


def test_translate_missing_model(trained, tmp_path, capsys):
    write_lines(tmp_path / "in", ["x"])
    code, _, err = run(capsys, "translate", "--mode", "single", "--combined-model",
                       tmp_path / "nope.ckpt", "--combined-codec", trained / "combined.bpe",
                       "--input", tmp_path / "in", "--output", tmp_path / "out")
    assert code == 1 and "error" in err


def test_eval_cli_is_deterministic(trained, capsys):
    args = ["eval", "--config", trained / "fe.conf", "--src", trained / "combined.src",
            "--tgt", trained / "combined.tgt", "--normalized-refs",
            trained / "normalization.tgt", "--compare-splicing"]
    run(capsys, *args, "--report", trained / "r1", "--tsv", trained / "t1")
    run(capsys, *args, "--report", trained / "r2", "--tsv", trained / "t2")
    assert (trained / "r1").read_bytes() == (trained / "r2").read_bytes()
    assert (trained / "t1").read_bytes() == (trained / "t2").read_bytes()
    text = (trained / "r1").read_text()
    assert "normalization" in text and "combined" in text
