from __future__ import annotations

import math

import numpy as np
import pytest

from ecgid import gallery as g
from oracles import mean_by_subject


def rec(sid: str, *values) -> g.RawRecord:
    return g.RawRecord(sid, tuple(values))


def full(sid: str, fill: float) -> g.RawRecord:
    return g.RawRecord(sid, (fill,) * g.N_FEATURES)


def subj(sid: str, fill: float) -> g.SubjectRecord:
    return g.SubjectRecord(sid, np.full(g.N_FEATURES, fill))


# --- records -----------------------------------------------------------------


def test_raw_record_validates_arity():
    with pytest.raises(ValueError):
        g.RawRecord("A", (1.0, 2.0))


def test_raw_record_rejects_non_finite():
    values = [1.0] * g.N_FEATURES
    values[3] = math.inf
    with pytest.raises(ValueError):
        g.RawRecord("A", tuple(values))


def test_raw_record_rejects_empty_id():
    with pytest.raises(ValueError):
        g.RawRecord("", (1.0,) * g.N_FEATURES)


def test_subject_record_vector_is_immutable():
    r = g.SubjectRecord("A", np.arange(9.0))
    with pytest.raises(ValueError):
        r.vector[0] = 99.0


def test_subject_record_equality_is_by_value():
    a = g.SubjectRecord("A", np.arange(9.0))
    b = g.SubjectRecord("A", np.arange(9.0))
    c = g.SubjectRecord("A", np.arange(9.0) + 1)
    assert a == b
    assert a != c
    assert a != g.SubjectRecord("B", np.arange(9.0))


def test_subject_record_rejects_bad_shape():
    with pytest.raises(ValueError):
        g.SubjectRecord("A", np.arange(4.0))
    with pytest.raises(ValueError):
        g.SubjectRecord("A", np.full(9, np.nan))


# --- fill_missing ------------------------------------------------------------


def test_fill_missing_zeroes_absent_slots():
    r = g.RawRecord("A", (1.0, None, 3.0, None, 5.0, 6.0, 7.0, 8.0, 9.0))
    (filled,) = g.fill_missing([r])
    assert filled.features == (1.0, 0.0, 3.0, 0.0, 5.0, 6.0, 7.0, 8.0, 9.0)


def test_fill_missing_passes_complete_records_through():
    r = full("A", 2.0)
    assert g.fill_missing([r])[0] is r


def test_fill_missing_keeps_order_and_length():
    records = [full("A", 1.0), full("B", 2.0), full("C", 3.0)]
    out = g.fill_missing(records)
    assert [r.subject_id for r in out] == ["A", "B", "C"]


# --- fuse_enrollments --------------------------------------------------------


def test_fuse_averages_repeated_subjects():
    rows = [
        ("A", np.array([72, 160, 90, 400, 420, 60, 30, 45, 1.0])),
        ("A", np.array([74, 162, 92, 404, 424, 62, 34, 47, 3.0])),
        ("B", np.array([80, 150, 88, 390, 410, 55, 20, 40, 2.0])),
    ]
    records = [g.RawRecord(sid, tuple(float(v) for v in vec)) for sid, vec in rows]
    fused = g.fuse_enrollments(records)
    expected = mean_by_subject(rows)
    assert [r.subject_id for r in fused] == [sid for sid, _ in expected]
    for got, (_, want) in zip(fused, expected):
        assert np.allclose(got.vector, want, atol=0, rtol=0)


def test_fuse_keeps_first_appearance_order():
    records = [full("B", 1.0), full("A", 2.0), full("B", 3.0), full("C", 4.0)]
    fused = g.fuse_enrollments(records)
    assert [r.subject_id for r in fused] == ["B", "A", "C"]
    assert fused[0].vector[0] == 2.0  # mean of 1 and 3


def test_fuse_single_enrollment_is_unchanged():
    (fused,) = g.fuse_enrollments([full("A", 7.0)])
    assert np.array_equal(fused.vector, np.full(9, 7.0))


def test_fuse_rejects_absent_slots():
    r = g.RawRecord("A", (1.0, None) + (2.0,) * 7)
    with pytest.raises(ValueError, match="fill_missing"):
        g.fuse_enrollments([r])


# --- round_features ----------------------------------------------------------


def test_rounding_halves_go_away_from_zero():
    vec = np.array([0.5, -0.5, 2.5, -2.5, 1.4, -1.4, 1.6, -1.6, 0.0])
    (out,) = g.round_features([g.SubjectRecord("A", vec)])
    assert np.array_equal(out.vector, [1, -1, 3, -3, 1, -1, 2, -2, 0])


def test_rounding_differs_from_bankers():
    # np.round would send 2.5 to 2; the pipeline requires 3.
    vec = np.full(9, 2.5)
    (out,) = g.round_features([g.SubjectRecord("A", vec)])
    assert out.vector[0] == 3.0
    assert np.round(2.5) == 2.0


def test_rounding_never_produces_negative_zero():
    vec = np.full(9, -0.2)
    (out,) = g.round_features([g.SubjectRecord("A", vec)])
    assert np.array_equal(out.vector, np.zeros(9))
    assert all(math.copysign(1.0, v) == 1.0 for v in out.vector)


# --- z-scoring ---------------------------------------------------------------


def test_zscore_uses_population_stddev():
    """Column {1,2,3}: population sigma is sqrt(2/3), so z(3)=sqrt(3/2)."""
    records = [subj("A", 1.0), subj("B", 2.0), subj("C", 3.0)]
    stats = g.zscore_fit(records)
    assert np.allclose(stats.mean, 2.0, atol=1e-15)
    assert np.allclose(stats.stddev, 0.816496580927726, atol=1e-12)
    z = g.zscore_apply(np.full(9, 3.0), stats)
    assert np.allclose(z, 1.224744871391589, atol=1e-12)


def test_zscore_constant_feature_maps_to_zero():
    records = [subj("A", 5.0), subj("B", 5.0)]
    stats = g.zscore_fit(records)
    assert np.all(stats.stddev == 0.0)
    z = g.zscore_apply(np.full(9, 123.0), stats)
    assert np.array_equal(z, np.zeros(9))


def test_zscore_fit_rejects_empty_gallery():
    with pytest.raises(g.EmptyGalleryError):
        g.zscore_fit([])


def test_zscore_probe_reuses_gallery_stats():
    """Probes must be scaled with the gallery's stats, not refit."""
    records = [subj("A", 0.0), subj("B", 10.0)]
    stats = g.zscore_fit(records)  # mean 5, sigma 5
    probe = g.zscore_apply(np.full(9, 10.0), stats)
    assert np.allclose(probe, 1.0, atol=1e-15)


def test_zscored_gallery_has_zero_mean_unit_std():
    rng = np.random.default_rng(7)
    records = [
        g.SubjectRecord(f"S{i}", rng.normal(50, 10, size=9)) for i in range(40)
    ]
    stats = g.zscore_fit(records)
    scaled = g.zscore_apply_records(records, stats)
    _, matrix = g.gallery_matrix(scaled)
    assert np.allclose(matrix.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(matrix.std(axis=0), 1.0, atol=1e-12)


# --- full chain --------------------------------------------------------------


def test_chain_rounds_after_fusion():
    """Averaging 0.2 and 0.6 then rounding gives 0; rounding first would
    give round(mean(0, 1)) = 1.  The chain order is observable."""
    records = [full("A", 0.2), full("A", 0.6), full("B", 3.0)]
    fused = g.fuse_enrollments(g.fill_missing(records))
    rounded = g.round_features(fused)
    assert rounded[0].vector[0] == 0.0


def test_preprocess_gallery_matches_stagewise_oracle():
    rng = np.random.default_rng(11)
    records = []
    for i in range(25):
        sid = f"S{i % 18}"  # some repeats
        values = tuple(
            None if rng.random() < 0.15 else float(rng.normal(100, 30))
            for _ in range(g.N_FEATURES)
        )
        records.append(g.RawRecord(sid, values))
    processed, stats = g.preprocess_gallery(records)

    rounded = g.round_features(
        g.fuse_enrollments(g.fill_missing(records))
    )
    _, matrix = g.gallery_matrix(rounded)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    assert np.allclose(stats.mean, mean, atol=0)
    assert np.allclose(stats.stddev, std, atol=0)
    for out, mid in zip(processed, rounded):
        expected = np.where(std > 0, (mid.vector - mean) / np.where(std > 0, std, 1.0), 0.0)
        assert np.allclose(out.vector, expected, atol=1e-12)
        assert out.subject_id == mid.subject_id


def test_preprocess_is_idempotent_on_subject_count():
    records = [full("A", 1.0), full("A", 2.0), full("B", 4.0)]
    processed, _ = g.preprocess_gallery(records)
    assert [r.subject_id for r in processed] == ["A", "B"]


# --- CSV I/O -----------------------------------------------------------------


def test_csv_round_trip_preserves_raw_records(tmp_path):
    records = [
        g.RawRecord("A", (1.5, None, -3.25, 0.1, 5.0, None, 7.75, 8.0, 9.125)),
        g.RawRecord("B", tuple(float(v) for v in range(9))),
    ]
    path = tmp_path / "raw.csv"
    g.write_gallery_csv(path, records)
    loaded = g.load_gallery_csv(path)
    assert loaded == records


def test_csv_round_trip_is_bit_exact_for_processed_vectors(tmp_path):
    rng = np.random.default_rng(3)
    records = [
        g.SubjectRecord(f"S{i}", rng.normal(0, 1, size=9)) for i in range(10)
    ]
    path = tmp_path / "proc.csv"
    g.write_gallery_csv(path, records)
    loaded = g.as_subject_records(g.load_gallery_csv(path))
    for a, b in zip(records, loaded):
        assert a.subject_id == b.subject_id
        assert np.array_equal(a.vector, b.vector)


def test_csv_save_load_save_is_byte_stable(tmp_path):
    records = [g.RawRecord("A", (0.1, 1 / 3, 2.0, None, 4.0, 5.0, 6.0, 7.0, 8.0))]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    g.write_gallery_csv(p1, records)
    g.write_gallery_csv(p2, g.load_gallery_csv(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_csv_header_line_is_pinned(tmp_path):
    path = tmp_path / "g.csv"
    g.write_gallery_csv(path, [full("A", 1.0)])
    first_line = path.read_text().splitlines()[0]
    assert first_line == "id,rr,pr,qrs,qt,qtc,p_axis,qrs_axis,t_axis,acci"


def test_csv_rejects_wrong_header():
    with pytest.raises(g.HeaderError):
        g.parse_gallery_csv("id,rr,pr\nA,1,2\n")


def test_csv_rejects_empty_file():
    with pytest.raises(g.HeaderError):
        g.parse_gallery_csv("")


def test_csv_rejects_duplicate_header_with_line_number():
    header = ",".join(g.CSV_HEADER)
    text = header + "\nA,1,2,3,4,5,6,7,8,9\n" + header + "\n"
    with pytest.raises(g.DuplicateHeaderError) as err:
        g.parse_gallery_csv(text)
    assert err.value.row == 3


def test_csv_rejects_short_row():
    text = ",".join(g.CSV_HEADER) + "\nA,1,2,3\n"
    with pytest.raises(g.MalformedRowError):
        g.parse_gallery_csv(text)


def test_csv_rejects_non_numeric_cell():
    text = ",".join(g.CSV_HEADER) + "\nA,1,2,three,4,5,6,7,8,9\n"
    with pytest.raises(g.NonNumericCellError) as err:
        g.parse_gallery_csv(text)
    assert err.value.row == 2


def test_csv_rejects_nan_cell():
    text = ",".join(g.CSV_HEADER) + "\nA,1,2,nan,4,5,6,7,8,9\n"
    with pytest.raises(g.NonNumericCellError):
        g.parse_gallery_csv(text)


def test_csv_empty_cells_become_missing():
    text = ",".join(g.CSV_HEADER) + "\nA,1,,3,4,,6,7,8,9\n"
    (record,) = g.parse_gallery_csv(text)
    assert record.features[1] is None
    assert record.features[4] is None


def test_csv_missing_file_raises():
    with pytest.raises(FileNotFoundError):
        g.load_gallery_csv("/nonexistent/gallery.csv")


def test_as_subject_records_rejects_incomplete():
    r = g.RawRecord("A", (1.0, None) + (2.0,) * 7)
    with pytest.raises(ValueError):
        g.as_subject_records([r])


# --- stats sidecar -----------------------------------------------------------


def test_stats_sidecar_round_trip(tmp_path):
    records = [subj("A", 1.0), subj("B", 5.0), subj("C", 9.0)]
    stats = g.zscore_fit(records)
    path = tmp_path / "stats.json"
    g.save_stats(path, stats)
    loaded = g.load_stats(path)
    assert np.array_equal(loaded.mean, stats.mean)
    assert np.array_equal(loaded.stddev, stats.stddev)


def test_stats_sidecar_rejects_malformed(tmp_path):
    path = tmp_path / "stats.json"
    path.write_text('{"mean": {}}')
    with pytest.raises(ValueError):
        g.load_stats(path)
