"""Gallery records, the preprocessing chain, and gallery CSV I/O.

A gallery is the enrolled reference set: one fixed-length feature vector
per subject, built from ECG fiducial measurements.  Raw enrollment data
arrives as CSV rows with possibly-missing cells and possibly-repeated
subjects; the preprocessing chain turns that into a clean, standardized
gallery:

    fill_missing -> fuse_enrollments -> round_features -> zscore_fit/apply

The chain order is fixed: rounding happens after fusion (so averaged
enrollments are rounded once) and standardization is fitted on the rounded
values.  Probe vectors must be scaled with the *gallery's* fitted stats,
never refitted, so the sidecar produced by :func:`save_stats` travels with
the processed gallery.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FEATURE_NAMES: tuple[str, ...] = (
    "rr",
    "pr",
    "qrs",
    "qt",
    "qtc",
    "p_axis",
    "qrs_axis",
    "t_axis",
    "acci",
)
N_FEATURES = len(FEATURE_NAMES)

CSV_HEADER: tuple[str, ...] = ("id",) + FEATURE_NAMES


class GalleryCsvError(ValueError):
    """A gallery CSV file violates the expected schema.

    ``row`` is the 1-based line number in the file (the header is line 1);
    ``None`` when the error is not tied to a specific line.
    """

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class HeaderError(GalleryCsvError):
    """Missing or wrong header line."""


class DuplicateHeaderError(GalleryCsvError):
    """A second header line appeared in the data section."""


class MalformedRowError(GalleryCsvError):
    """A data row has the wrong column count or an empty subject id."""


class NonNumericCellError(GalleryCsvError):
    """A feature cell is neither empty nor a finite number."""


class EmptyGalleryError(ValueError):
    """An operation that needs at least one record got an empty gallery."""


@dataclass(frozen=True)
class RawRecord:
    """One enrollment row: a subject id plus 9 optional feature values.

    ``None`` marks a missing measurement.  Present values must be finite.
    """

    subject_id: str
    features: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if not self.subject_id:
            raise ValueError("subject_id must be non-empty")
        feats = tuple(None if v is None else float(v) for v in self.features)
        if len(feats) != N_FEATURES:
            raise ValueError(
                f"expected {N_FEATURES} feature slots, got {len(feats)}"
            )
        for name, v in zip(FEATURE_NAMES, feats):
            if v is not None and not math.isfinite(v):
                raise ValueError(f"feature {name!r} is not finite: {v!r}")
        object.__setattr__(self, "features", feats)

    def is_complete(self) -> bool:
        return all(v is not None for v in self.features)


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """A fused gallery entry: subject id plus a complete feature vector."""

    subject_id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        if not self.subject_id:
            raise ValueError("subject_id must be non-empty")
        vec = np.array(self.vector, dtype=np.float64)
        if vec.shape != (N_FEATURES,):
            raise ValueError(
                f"expected vector of shape ({N_FEATURES},), got {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError(
                f"vector for {self.subject_id!r} has non-finite components"
            )
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubjectRecord):
            return NotImplemented
        return self.subject_id == other.subject_id and np.array_equal(
            self.vector, other.vector
        )

    def __hash__(self) -> int:
        return hash((self.subject_id, self.vector.tobytes()))


@dataclass(frozen=True, eq=False)
class ScalingStats:
    """Per-feature mean and population standard deviation of a gallery."""

    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64)
        stddev = np.array(self.stddev, dtype=np.float64)
        for name, arr in (("mean", mean), ("stddev", stddev)):
            if arr.shape != (N_FEATURES,):
                raise ValueError(f"{name} must have shape ({N_FEATURES},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite components")
        if np.any(stddev < 0.0):
            raise ValueError("stddev components must be non-negative")
        mean.flags.writeable = False
        stddev.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", stddev)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalingStats):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.stddev, other.stddev
        )


def gallery_matrix(
    records: Sequence[SubjectRecord],
) -> tuple[list[str], np.ndarray]:
    """Split a gallery into (subject ids, n-by-9 float matrix)."""
    ids = [r.subject_id for r in records]
    if not records:
        return ids, np.empty((0, N_FEATURES), dtype=np.float64)
    return ids, np.stack([r.vector for r in records])


def fill_missing(records: Sequence[RawRecord]) -> list[RawRecord]:
    """Replace absent feature slots with 0.0, keeping present values as-is."""
    out: list[RawRecord] = []
    for rec in records:
        if rec.is_complete():
            out.append(rec)
        else:
            filled = tuple(0.0 if v is None else v for v in rec.features)
            out.append(RawRecord(rec.subject_id, filled))
    return out


def fuse_enrollments(records: Sequence[RawRecord]) -> list[SubjectRecord]:
    """Collapse repeated enrollments into one record per subject.

    Multiple rows for the same subject are averaged component-wise; a
    single-row subject passes through unchanged.  Output order is
    first-appearance order of the subject ids.  Every input record must be
    complete — run :func:`fill_missing` first.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for i, rec in enumerate(records):
        if not rec.is_complete():
            raise ValueError(
                f"record {i} ({rec.subject_id!r}) has absent slots; "
                "run fill_missing first"
            )
        vec = np.array(rec.features, dtype=np.float64)
        if rec.subject_id in sums:
            sums[rec.subject_id] += vec
            counts[rec.subject_id] += 1
        else:
            sums[rec.subject_id] = vec
            counts[rec.subject_id] = 1
    return [
        SubjectRecord(sid, sums[sid] / counts[sid]) for sid in sums
    ]


def _round_half_away(values: np.ndarray) -> np.ndarray:
    # np.round rounds halves to even; the pipeline needs schoolbook rounding
    # (halves away from zero), so build it from floor.  The trailing +0.0
    # normalizes -0.0 so downstream serialization is sign-stable.
    return np.copysign(np.floor(np.abs(values) + 0.5), values) + 0.0


def round_features(records: Sequence[SubjectRecord]) -> list[SubjectRecord]:
    """Round every component to the nearest integer, halves away from zero."""
    return [
        SubjectRecord(r.subject_id, _round_half_away(r.vector))
        for r in records
    ]


def zscore_fit(records: Sequence[SubjectRecord]) -> ScalingStats:
    """Fit per-feature mean and population (divide-by-n) std of a gallery."""
    if not records:
        raise EmptyGalleryError("cannot fit scaling stats on an empty gallery")
    _, matrix = gallery_matrix(records)
    return ScalingStats(mean=matrix.mean(axis=0), stddev=matrix.std(axis=0))


def zscore_apply(vector: np.ndarray, stats: ScalingStats) -> np.ndarray:
    """Standard-score one vector; features with zero spread map to 0."""
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != (N_FEATURES,):
        raise ValueError(f"expected vector of shape ({N_FEATURES},)")
    out = np.zeros(N_FEATURES, dtype=np.float64)
    nz = stats.stddev > 0.0
    out[nz] = (v[nz] - stats.mean[nz]) / stats.stddev[nz]
    return out


def zscore_apply_records(
    records: Sequence[SubjectRecord], stats: ScalingStats
) -> list[SubjectRecord]:
    """Standard-score every record in a gallery with pre-fitted stats."""
    return [
        SubjectRecord(r.subject_id, zscore_apply(r.vector, stats))
        for r in records
    ]


def preprocess_gallery(
    records: Sequence[RawRecord],
) -> tuple[list[SubjectRecord], ScalingStats]:
    """Run the full chain: fill -> fuse -> round -> z-score.

    Returns the processed gallery together with the stats fitted on the
    rounded values, so probes can be scaled consistently later.
    """
    fused = fuse_enrollments(fill_missing(records))
    rounded = round_features(fused)
    stats = zscore_fit(rounded)
    return zscore_apply_records(rounded, stats), stats


def as_subject_records(records: Sequence[RawRecord]) -> list[SubjectRecord]:
    """Convert complete raw records to subject records without reprocessing.

    Raises ValueError if any record still has absent slots.
    """
    out = []
    for i, rec in enumerate(records):
        if not rec.is_complete():
            raise ValueError(
                f"record {i} ({rec.subject_id!r}) has absent slots"
            )
        out.append(
            SubjectRecord(rec.subject_id, np.array(rec.features, dtype=np.float64))
        )
    return out


# --- CSV / sidecar serialization -------------------------------------------


def format_value(x: float) -> str:
    """17-significant-digit decimal text: reload-exact for any float64."""
    return format(float(x), ".17g")


def parse_gallery_csv(text: str) -> list[RawRecord]:
    """Parse gallery CSV text into raw records; empty cells become ``None``.

    Schema: header ``id,rr,pr,qrs,qt,qtc,p_axis,qrs_axis,t_axis,acci``
    followed by one row per enrollment.  Violations raise the matching
    :class:`GalleryCsvError` subclass with the 1-based line number.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderError(
            "file is empty; expected header " + ",".join(CSV_HEADER)
        ) from None
    if header != list(CSV_HEADER):
        raise HeaderError(
            f"bad header {header!r}; expected {','.join(CSV_HEADER)}", row=1
        )
    records: list[RawRecord] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue  # tolerate a trailing blank line
        if row == list(CSV_HEADER):
            raise DuplicateHeaderError("duplicate header line", row=lineno)
        if len(row) != len(CSV_HEADER):
            raise MalformedRowError(
                f"expected {len(CSV_HEADER)} columns, got {len(row)}",
                row=lineno,
            )
        subject_id = row[0]
        if not subject_id:
            raise MalformedRowError("empty subject id", row=lineno)
        feats: list[float | None] = []
        for name, cell in zip(FEATURE_NAMES, row[1:]):
            if cell == "":
                feats.append(None)
                continue
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"column {name!r}: non-numeric cell {cell!r}", row=lineno
                ) from None
            if not math.isfinite(value):
                raise NonNumericCellError(
                    f"column {name!r}: non-finite cell {cell!r}", row=lineno
                )
            feats.append(value)
        records.append(RawRecord(subject_id, tuple(feats)))
    return records


def load_gallery_csv(path: str | Path) -> list[RawRecord]:
    """Load raw enrollment rows from a gallery CSV file."""
    return parse_gallery_csv(Path(path).read_text(encoding="utf-8"))


def serialize_gallery_csv(
    records: Iterable[RawRecord | SubjectRecord],
) -> str:
    """Render records (raw or fused) as gallery CSV text.

    Absent slots in raw records become empty cells; subject vectors are
    written at full precision so a reload reproduces them bit-for-bit.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        if isinstance(rec, RawRecord):
            cells = [
                "" if v is None else format_value(v) for v in rec.features
            ]
        else:
            cells = [format_value(v) for v in rec.vector]
        writer.writerow([rec.subject_id, *cells])
    return buf.getvalue()


def write_gallery_csv(
    path: str | Path, records: Iterable[RawRecord | SubjectRecord]
) -> None:
    """Write records to a gallery CSV file (see serialize_gallery_csv)."""
    Path(path).write_text(serialize_gallery_csv(records), encoding="utf-8")


def save_stats(path: str | Path, stats: ScalingStats) -> None:
    """Write the z-score stats sidecar (JSON keyed by feature name)."""
    payload = {
        "features": list(FEATURE_NAMES),
        "mean": {
            name: float(m) for name, m in zip(FEATURE_NAMES, stats.mean)
        },
        "stddev": {
            name: float(s) for name, s in zip(FEATURE_NAMES, stats.stddev)
        },
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_stats(path: str | Path) -> ScalingStats:
    """Load a z-score stats sidecar written by :func:`save_stats`."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        mean = np.array(
            [payload["mean"][name] for name in FEATURE_NAMES], dtype=np.float64
        )
        stddev = np.array(
            [payload["stddev"][name] for name in FEATURE_NAMES],
            dtype=np.float64,
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed stats sidecar {path}: {exc}") from exc
    return ScalingStats(mean=mean, stddev=stddev)
