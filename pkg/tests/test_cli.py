"""Command-line interface: full pipeline, output contracts, failure modes."""

import re

import numpy as np
import pytest

from ecgid import cli, gallery as g, partitions


def run(capsys, *argv):
    rc = cli.main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> preprocess -> partition, shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw.csv"
    proc = root / "processed.csv"
    parts = root / "parts"
    assert cli.main(
        ["synth", "--subjects", "60", "--blobs", "3", "--spread", "5.0",
         "--seed", "11", "--out", str(raw)]
    ) == 0
    assert cli.main(
        ["preprocess", "--in", str(raw), "--out", str(proc)]
    ) == 0
    assert cli.main(
        ["partition", "--gallery", str(proc), "--k", "3", "--seed", "7",
         "--out-dir", str(parts)]
    ) == 0
    return root, raw, proc, parts


# --- pipeline plumbing ----------------------------------------------------------


def test_synth_is_byte_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        rc, _, _ = run(capsys, "synth", "--subjects", "30", "--blobs", "2",
                       "--spread", "1.0", "--seed", "5", "--out", str(out))
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_preprocess_writes_gallery_and_stats(pipeline, capsys):
    root, raw, proc, _ = pipeline
    assert proc.is_file()
    stats_path = proc.parent / (proc.name + ".stats.json")
    assert stats_path.is_file()
    records = partitions.load_serial(proc)
    assert len(records) == 60
    # z-scored features: population mean 0, std 1
    _, matrix = g.gallery_matrix(records)
    assert np.allclose(matrix.mean(axis=0), 0.0, atol=1e-9)


def test_partition_layout_and_summary_line(pipeline, capsys):
    root, _, proc, parts = pipeline
    index = partitions.load_index(parts, 3)
    partitions.verify_index(index)
    assert sum(index.sizes) == 60
    rc, out, _ = run(capsys, "partition", "--gallery", str(proc), "--k", "3",
                     "--seed", "7", "--out-dir", str(root / "parts2"))
    assert rc == 0
    assert re.match(r"^k=3 partitions written to .* \(sizes \d+,\d+,\d+\)$",
                    out.strip())


# --- identify -------------------------------------------------------------------


def query_string(proc, idx=0):
    rec = partitions.load_serial(proc)[idx]
    return rec.subject_id, ",".join(format(v, ".17g") for v in rec.vector)


def test_identify_clustered_output_contract(pipeline, capsys):
    _, _, proc, parts = pipeline
    truth, qs = query_string(proc)
    rc, out, err = run(capsys, "identify", "--query", qs,
                       "--partitions", str(parts), "--k", "3")
    assert rc == 0 and err == ""
    line = out.strip()
    assert re.match(
        r"^hit=\S+ prd=[-0-9.e+]+ cc=[-0-9.e+]+ confidence=[-0-9.e+]+$", line
    )
    assert line == f"hit={truth} prd=0 cc=1 confidence=50.5"


def test_identify_serial_matches_clustered(pipeline, capsys):
    _, _, proc, parts = pipeline
    truth, qs = query_string(proc, idx=7)
    rc, out_c, _ = run(capsys, "identify", "--query", qs,
                       "--partitions", str(parts), "--k", "3")
    rc2, out_s, _ = run(capsys, "identify", "--query", qs,
                        "--gallery", str(proc))
    assert rc == rc2 == 0
    assert out_c == out_s
    assert f"hit={truth}" in out_s


def test_identify_accepts_leading_minus_query(pipeline, capsys):
    _, _, proc, _ = pipeline
    # force a vector whose first component is negative
    records = partitions.load_serial(proc)
    rec = next(r for r in records if r.vector[0] < 0)
    qs = ",".join(format(v, ".17g") for v in rec.vector)
    assert qs.startswith("-")
    rc, out, _ = run(capsys, "identify", "--query", qs,
                     "--gallery", str(proc))
    assert rc == 0
    assert f"hit={rec.subject_id}" in out


def test_identify_miss_prints_none(pipeline, capsys):
    _, _, proc, _ = pipeline
    qs = ",".join(["1000.0"] * 9)
    rc, out, _ = run(capsys, "identify", "--query", qs,
                     "--gallery", str(proc))
    assert rc == 0
    assert out.startswith("hit=NONE ")


def test_identify_requires_a_source(pipeline, capsys):
    _, _, proc, parts = pipeline
    _, qs = query_string(proc)
    rc, _, err = run(capsys, "identify", "--query", qs)
    assert rc == 1
    assert err.startswith("error:")
    rc, _, err = run(capsys, "identify", "--query", qs,
                     "--partitions", str(parts))
    assert rc == 1
    assert "--k" in err


def test_identify_rejects_wrong_arity_query(pipeline, capsys):
    _, _, proc, _ = pipeline
    with pytest.raises(SystemExit) as exc:
        cli.main(["identify", "--query", "1,2,3", "--gallery", str(proc)])
    assert exc.value.code == 2


def test_identify_unbuilt_k_fails_cleanly(pipeline, capsys):
    _, _, proc, parts = pipeline
    _, qs = query_string(proc)
    rc, _, err = run(capsys, "identify", "--query", qs,
                     "--partitions", str(parts), "--k", "9")
    assert rc == 1
    assert err.startswith("error:")


# --- select-k -------------------------------------------------------------------


def test_select_k_scores_existing_measurements(tmp_path, capsys):
    table = tmp_path / "measured.csv"
    table.write_text(
        "k,time_reduction,accuracy,silhouette\n"
        "2,18.57,97,0.39\n"
        "3,57.37,100,0.32\n"
        "4,73.10,96,0.35\n"
        "5,79.26,100,0.32\n"
        "6,80.95,94,0.28\n"
        "7,83.43,98,0.29\n"
        "8,82.34,98,0.27\n"
        "9,86.14,97,0.24\n",
        encoding="utf-8",
    )
    out_dir = tmp_path / "out"
    rc, out, _ = run(capsys, "select-k", "--rows-from-file", str(table),
                     "--out-dir", str(out_dir))
    assert rc == 0
    assert out.strip() == "best_k=5"
    assert (out_dir / "decision.csv").is_file()
    scored = (out_dir / "decision.csv").read_text().splitlines()
    assert scored[0] == "k,time_reduction,accuracy,silhouette,score"
    assert len(scored) == 9


def test_select_k_measured_path_end_to_end(pipeline, tmp_path, capsys):
    _, _, proc, _ = pipeline
    out_dir = tmp_path / "sel"
    rc, out, _ = run(capsys, "select-k", "--gallery", str(proc),
                     "--seed", "11", "--k-range", "2:5",
                     "--queries", "6", "--repeats", "1", "--in-memory",
                     "--out-dir", str(out_dir))
    assert rc == 0
    lines = out.strip().splitlines()
    assert re.match(r"^elbow_knee=\d+$", lines[0])
    assert re.match(r"^best_k=\d+$", lines[1])
    assert (out_dir / "elbow.csv").is_file()
    assert (out_dir / "decision.csv").is_file()
    for k in (2, 3, 4):
        partitions.verify_index(
            partitions.load_index(out_dir / "partitions", k)
        )


def test_select_k_measured_path_requires_seed(pipeline, tmp_path, capsys):
    _, _, proc, _ = pipeline
    rc, _, err = run(capsys, "select-k", "--gallery", str(proc),
                     "--out-dir", str(tmp_path / "x"))
    assert rc == 1
    assert err.startswith("error:")
    assert "--seed" in err


# --- bench ----------------------------------------------------------------------


def test_bench_end_to_end(pipeline, tmp_path, capsys):
    _, _, proc, _ = pipeline
    out_dir = tmp_path / "bench"
    rc, out, _ = run(capsys, "bench", "--gallery", str(proc), "--seed", "11",
                     "--k-range", "2:4", "--queries", "5", "--repeats", "1",
                     "--in-memory", "--out-dir", str(out_dir))
    assert rc == 0
    lines = out.strip().splitlines()
    assert re.match(r"^k=2 t_avg_pct=-?\d+\.\d{3} accuracy_pct=\d+\.\d{3}$",
                    lines[0])
    assert re.match(r"^k=3 t_avg_pct=", lines[1])
    assert re.match(r"^best_k=[23]$", lines[2])
    assert (out_dir / "decision.csv").is_file()
    queries_csv = (out_dir / "queries.csv").read_text().splitlines()
    assert queries_csv[0] == ",".join(
        ("query_id", "truth_id", "k", "t_serial_ns", "t_cluster_ns",
         "reduction_pct", "serial_hit", "cluster_hit")
    )
    assert len(queries_csv) == 1 + 2 * 5  # two ks, five queries each


def test_bench_requires_seed(pipeline, tmp_path, capsys):
    _, _, proc, _ = pipeline
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench", "--gallery", str(proc),
                  "--out-dir", str(tmp_path / "b")])
    assert exc.value.code == 2  # argparse: --seed is a required option


# --- common error handling --------------------------------------------------------


def test_missing_input_file_reports_error(tmp_path, capsys):
    rc, _, err = run(capsys, "preprocess", "--in", str(tmp_path / "no.csv"),
                     "--out", str(tmp_path / "o.csv"))
    assert rc == 1
    assert err.startswith("error:")


def test_malformed_gallery_reports_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,rr,pr,qrs,qt,qtc,p_axis,qrs_axis,t_axis,acci\nX,1\n")
    rc, _, err = run(capsys, "preprocess", "--in", str(bad),
                     "--out", str(tmp_path / "o.csv"))
    assert rc == 1
    assert "row 2" in err


def test_bad_k_range_is_an_argparse_error(pipeline, tmp_path):
    _, _, proc, _ = pipeline
    with pytest.raises(SystemExit) as exc:
        cli.main(["bench", "--gallery", str(proc), "--seed", "1",
                  "--k-range", "9:2", "--out-dir", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_help_shows_pinned_defaults(capsys):
    for sub, needles in [
        ("select-k", ["default: 2:10", "default: 0.2", "default: 0.5",
                      "default: 0.3", "default: 100"]),
        ("identify", ["default: 14.0", "default: 0.995"]),
        ("bench", ["default: 5", "default: 0.0001", "default: 300"]),
    ]:
        with pytest.raises(SystemExit) as exc:
            cli.main([sub, "--help"])
        assert exc.value.code == 0
        out = " ".join(capsys.readouterr().out.split())  # unwrap line breaks
        for needle in needles:
            assert needle in out, f"{sub} --help lacks {needle!r}"
