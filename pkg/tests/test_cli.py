import json

import pytest

from replayprior import cli
from replayprior.prior import load_prior


def run(capsys, *argv):
    try:
        code = cli.main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus(tmp_path, capsys):
    path = tmp_path / "train.txt"
    code, _, _ = run(capsys, "generate", "--family", "kakuro", "--n", 5, "--count", 40, "--seed", 1, "--out", path)
    assert code == 0
    return path


def test_generate_byte_identical(tmp_path, capsys, corpus):
    again = tmp_path / "again.txt"
    run(capsys, "generate", "--family", "kakuro", "--n", 5, "--count", 40, "--seed", 1, "--out", again)
    assert again.read_bytes() == corpus.read_bytes()
    assert corpus.read_text().startswith("#seed ")
    code, out, err = run(capsys, "generate", "--family", "lsc", "--n", 5, "--count", 0)
    assert code == 0 and out == "" and "0 lsc pairs" in err


def test_generate_test_stream_differs(tmp_path, capsys, corpus):
    other = tmp_path / "test.txt"
    run(capsys, "generate", "--family", "kakuro", "--n", 5, "--count", 40, "--seed", 1, "--test", "--out", other)
    assert other.read_text() != corpus.read_text()


def test_learn_prior_and_histogram(tmp_path, capsys, corpus):
    prior = tmp_path / "k.prior"
    code, out, _ = run(capsys, "learn-prior", corpus, "--family", "kakuro", "--out", prior)
    assert code == 0 and "40 instances" in out
    table = load_prior(prior)
    assert table.family == "kakuro" and table.tau == 4.0 and table.instances == 40
    code, out, _ = run(capsys, "histogram", prior, "--width", 0.25)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "lo,hi,count" and len(lines) == 6
    assert sum(int(line.split(",")[2]) for line in lines[1:]) == len(table)


def test_learn_prior_too_many_skips(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("(...)\nGAAAC\n\n(...)\nGAAAA\n")
    code, _, err = run(capsys, "learn-prior", path, "--family", "rna")
    assert code == 2 and "more than 1%" in err and "skipped: line 5" in err


def test_solve_json(tmp_path, capsys, corpus):
    prior = tmp_path / "k.prior"
    run(capsys, "learn-prior", corpus, "--family", "kakuro", "--out", prior)
    inst = tmp_path / "one.txt"
    inst.write_text(corpus.read_text().split("\n\n")[0] + "\n")
    code, out, _ = run(capsys, "solve", inst, "--family", "kakuro", "--algorithm", "sampling+prior",
                       "--prior", prior, "--budget", 64, "--seed", 2)
    rec = json.loads(out)
    assert code == 0 and set(rec) == {"solved", "score", "playouts_used", "wall_time", "seed"}
    assert rec["seed"] == 2 and rec["playouts_used"] <= 64


def test_solve_usage_errors(tmp_path, capsys, corpus):
    inst = tmp_path / "one.txt"
    inst.write_text(corpus.read_text().split("\n\n")[0] + "\n")
    assert run(capsys, "solve", inst, "--family", "kakuro", "--algorithm", "gnrpa+prior", "--budget", 5)[0] == 1
    assert run(capsys, "solve", inst, "--family", "kakuro", "--algorithm", "nrpa")[0] == 1
    assert run(capsys, "solve", inst, "--algorithm", "nrpa", "--budget", 5)[0] == 1
    code, _, err = run(capsys, "solve", tmp_path / "missing.txt", "--family", "kakuro", "--algorithm", "nrpa",
                       "--budget", 5)
    assert code == 2 and "data error" in err


def test_solve_bad_instance_file(tmp_path, capsys):
    inst = tmp_path / "bad.txt"
    inst.write_text("3\n1 2 3\n")
    code, _, err = run(capsys, "solve", inst, "--family", "lsc", "--algorithm", "sampling", "--budget", 5)
    assert code == 2 and "line" in err


def test_solve_oracle_error(tmp_path, capsys):
    inst = tmp_path / "p.txt"
    inst.write_text("((....))\n")
    code, _, err = run(capsys, "solve", inst, "--family", "rna", "--algorithm", "sampling", "--budget", 5,
                       "--fold-cmd", "/nonexistent/fold-binary")
    assert code == 3 and "oracle" in err


def test_bench_csv_and_files(tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("family = lsc\nn = 6\nfraction = 0.5\ntrain = 20\ntest = 4\nworkers = 1\n")
    out = tmp_path / "res" / "b.csv"
    args = ["bench", "--config", cfg, "--budget", "8,32", "--set", "seed=4", "--out", out]
    code, stdout, _ = run(capsys, *args)
    assert code == 0 and stdout == out.read_text()
    assert stdout.splitlines()[0] == "algorithm,budget,solved,total" and len(stdout.splitlines()) == 9
    first = out.read_bytes()
    run(capsys, *args)
    assert out.read_bytes() == first
    assert "seed = 4" in out.with_suffix(".config").read_text()


def test_bench_usage_errors(tmp_path, capsys):
    assert run(capsys, "bench", "--family", "lsc", "--budget", "8,4")[0] == 1
    assert run(capsys, "bench", "--family", "lsc", "--set", "nonsense")[0] == 1
    assert run(capsys, "bench", "--family", "lsc", "--budget", "x")[0] == 1
    cfg = tmp_path / "b.cfg"
    cfg.write_text("family = lsc\nbogus = 1\n")
    code, _, err = run(capsys, "bench", "--config", cfg)
    assert code == 2 and "line 2" in err


def test_phase_sweep(tmp_path, capsys):
    code, out, err = run(capsys, "phase-sweep", "--n", 6, "--fractions", "0.0,0.5", "--count", 3, "--budget", 30)
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("fraction,median_playouts") and len(lines) == 3
    assert lines[1].startswith("0.0,1.0")
    assert "peak at" in err


def test_no_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
