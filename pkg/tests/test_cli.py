import csv

import numpy as np
import pytest

from airship.bench import CSV_HEADER
from airship.cli import EXIT_CHECKSUM, EXIT_CONFIG, EXIT_OK, main
from airship.dataset import Dataset, gaussian_blobs, load_labels, save_fvecs
from airship.graph import load_graph


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Runs every file-producing subcommand once on a small blob dataset."""
    d = tmp_path_factory.mktemp("cli")
    X, _, _ = gaussian_blobs(430, 8, 5, spread=2.0, seed=3)
    save_fvecs(Dataset(X[:400]), d / "base.fvecs")
    save_fvecs(Dataset(X[400:]), d / "q.fvecs")
    steps = [
        ["build", "--data", d / "base.fvecs", "--out", d / "g.idx", "--degree", "8",
         "--ef", "32", "--sample", "100", "--seed", "7"],
        ["labels", "--data", d / "base.fvecs", "--out", d / "labels.txt", "--k", "5",
         "--seed", "7", "--queries", d / "q.fvecs", "--query-out", d / "qlabels.txt"],
        ["constraints", "--query-labels", d / "qlabels.txt", "--labels", d / "labels.txt",
         "--family", "unequal", "--pct", "40", "--out", d / "cons.txt"],
        ["groundtruth", "--data", d / "base.fvecs", "--labels", d / "labels.txt",
         "--queries", d / "q.fvecs", "--constraints", d / "cons.txt", "--K", "10",
         "--out", d / "gt.ivecs"],
    ]
    for argv in steps:
        assert main([str(a) for a in argv]) == EXIT_OK
    return d


def bench_argv(d, out, *extra):
    return [str(a) for a in [
        "bench", "--data", d / "base.fvecs", "--labels", d / "labels.txt", "--index",
        d / "g.idx", "--queries", d / "q.fvecs", "--constraints", d / "cons.txt",
        "--groundtruth", d / "gt.ivecs", "--K", "1,10", "--repetitions", "1",
        "--out", out, *extra]]


def test_artifacts_written(workdir):
    assert load_graph(workdir / "g.idx").n == 400
    assert load_labels(workdir / "labels.txt").size == 400
    assert load_labels(workdir / "qlabels.txt").size == 30
    lines = (workdir / "cons.txt").read_text().splitlines()
    assert len(lines) == 30 and all(len(x.split(",")) == 2 for x in lines)


def test_bench_grid_and_header(workdir):
    out = workdir / "bench.csv"
    assert main(bench_argv(workdir, out, "--K", "1,10")) == EXIT_OK
    with open(out, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == CSV_HEADER
    body = rows[1:]
    # 4 variants x 2 Ks x 6 ratio settings
    assert len(body) == 48
    ratios = {r[2] for r in body}
    assert ratios == {"0.2", "0.4", "0.6", "0.8", "1.0", "est"}
    for ratio in ratios:
        assert sum(r[2] == ratio for r in body) == 8
    assert body[5][2] == "est"


def test_bench_is_deterministic(workdir):
    cols = []
    for name in ("a.csv", "b.csv"):
        assert main(bench_argv(workdir, workdir / name, "--ratios", "0.4,est")) == EXIT_OK
        with open(workdir / name, newline="") as f:
            cols.append([(r["recall"], r["dist_comps"]) for r in csv.DictReader(f)])
    assert cols[0] == cols[1]


def test_estimate(workdir, capsys):
    (workdir / "eq.txt").write_text("0\n1\n99\n")
    assert main(["estimate", "--index", str(workdir / "g.idx"), "--labels",
                 str(workdir / "labels.txt"), "--constraints", str(workdir / "eq.txt")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "constraint,ssv,estimate"
    graph = load_graph(workdir / "g.idx")
    labels = load_labels(workdir / "labels.txt")
    for label, row in zip([0, 1], lines[1:3]):
        # direct evaluation: per-start satisfied share of the first 10 neighbors
        ssv = [v for v in graph.sample if labels[v] == label]
        direct = np.mean([np.mean(labels[graph.neighbors(v)[:10]] == label) for v in ssv])
        _, count, est = row.split(",")
        assert int(count) == len(ssv)
        assert float(est) == pytest.approx(max(direct, 0.05), abs=1e-12)
        assert 0.5 < float(est) <= 1.0
    assert lines[3] == "2,0,fallback"


def test_search(workdir, capsys):
    argv = ["search", "--data", workdir / "base.fvecs", "--labels", workdir / "labels.txt",
            "--index", workdir / "g.idx", "--queries", workdir / "q.fvecs", "--allow", "0,1",
            "--K", "3", "--ef", "400"]
    assert main([str(a) for a in argv]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and out[-1].startswith("# dist_comps=")


def test_config_file(workdir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# shared settings\ndata = {workdir / 'base.fvecs'}\ndegree = 8\nef = 16\n"
                   f"sample = 50\n")
    assert main(["--config", str(cfg), "build", "--out", str(tmp_path / "g.idx"),
                 "--ef", "24"]) == EXIT_OK
    meta = load_graph(tmp_path / "g.idx").meta
    assert (meta.max_degree, meta.ef_construction, meta.sample_size) == (8, 24, 50)
    cfg.write_text("bogus = 1\n")
    assert main(["--config", str(cfg), "build"]) == EXIT_CONFIG


def test_missing_flag_is_named(capsys):
    assert main(["build", "--out", "x.idx"]) == EXIT_CONFIG
    assert "--data" in capsys.readouterr().err


def test_empty_variant_list(workdir):
    assert main(bench_argv(workdir, workdir / "x.csv", "--variants", "")) == EXIT_CONFIG


def test_corrupt_index_header(workdir, tmp_path):
    raw = bytearray((workdir / "g.idx").read_bytes())
    raw[0:4] = b"JUNK"
    (tmp_path / "bad.idx").write_bytes(bytes(raw))
    argv = bench_argv(workdir, tmp_path / "x.csv")
    argv[argv.index("--index") + 1] = str(tmp_path / "bad.idx")
    assert main(argv) == EXIT_CONFIG


def test_index_checksum_mismatch(workdir, tmp_path):
    X, _, _ = gaussian_blobs(400, 8, 5, seed=99)
    save_fvecs(Dataset(X), tmp_path / "other.fvecs")
    assert main(["build", "--data", str(tmp_path / "other.fvecs"), "--out",
                 str(tmp_path / "other.idx"), "--degree", "8", "--ef", "32",
                 "--sample", "100"]) == EXIT_OK
    argv = bench_argv(workdir, tmp_path / "x.csv")
    argv[argv.index("--index") + 1] = str(tmp_path / "other.idx")
    assert main(argv) == EXIT_CHECKSUM
    assert not (tmp_path / "x.csv").exists()


def test_groundtruth_checksum_mismatch(workdir, tmp_path):
    lines = (workdir / "cons.txt").read_text().splitlines()
    (tmp_path / "cons.txt").write_text("\n".join(lines[::-1]) + "\n")
    argv = bench_argv(workdir, tmp_path / "x.csv")
    argv[argv.index("--constraints") + 1] = str(tmp_path / "cons.txt")
    assert main(argv) == EXIT_CHECKSUM
