"""On-disk per-cluster partitions with an integrity manifest.

A fitted model splits the gallery into one CSV file per cluster under
``<root>/k=<K>/cluster_<label>.csv`` so an identification query only has to
read the file its vector lands in.  A JSON manifest makes the layout
self-describing (serialized model, per-file sizes and SHA-256 checksums)
and a ``.incomplete`` marker flags partially-written directories so a
crashed build can never masquerade as a valid partition set.

Rebuilding the same gallery with the same model yields byte-identical
files: rows are sorted by (label, subject id), values are written at full
precision, and the manifest serialization is canonical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .gallery import (
    SubjectRecord,
    as_subject_records,
    gallery_matrix,
    load_gallery_csv,
    parse_gallery_csv,
    serialize_gallery_csv,
)
from .kmeans import ClusterModel, assign_batch

MANIFEST_NAME = "manifest.json"
INCOMPLETE_MARKER = ".incomplete"


class PartitionIntegrityError(RuntimeError):
    """A partition directory is missing, incomplete, or corrupt."""


@dataclass(frozen=True, eq=False)
class PartitionIndex:
    """Handle to one materialized k=<K> partition directory."""

    root_dir: Path
    model: ClusterModel
    sizes: tuple[int, ...]
    checksums: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "root_dir", Path(self.root_dir))
        if len(self.sizes) != self.model.k or len(self.checksums) != self.model.k:
            raise ValueError("sizes/checksums must have one entry per cluster")

    @property
    def k(self) -> int:
        return self.model.k

    @property
    def k_dir(self) -> Path:
        return self.root_dir / f"k={self.model.k}"

    def partition_path(self, label: int) -> Path:
        if not 0 <= label < self.model.k:
            raise ValueError(
                f"label {label} out of range for k={self.model.k}"
            )
        return self.k_dir / f"cluster_{label}.csv"


def partition(
    gallery: Sequence[SubjectRecord],
    model: ClusterModel,
    root_dir: str | Path,
) -> PartitionIndex:
    """Materialize one CSV file per cluster under ``root_dir/k=<k>/``.

    Every record is assigned to its nearest centroid; each cluster's rows
    are sorted by subject id and written in the gallery CSV schema (an
    empty cluster still gets a header-only file).  The manifest is written
    last and the in-progress marker removed only after it lands, so any
    interruption leaves the directory detectably incomplete.
    """
    if not gallery:
        raise ValueError("cannot partition an empty gallery")
    root = Path(root_dir)
    k_dir = root / f"k={model.k}"
    k_dir.mkdir(parents=True, exist_ok=True)
    marker = k_dir / INCOMPLETE_MARKER
    marker.write_text("partition build in progress\n", encoding="utf-8")

    ids, points = gallery_matrix(gallery)
    labels = assign_batch(points, model.centroids)
    buckets: list[list[SubjectRecord]] = [[] for _ in range(model.k)]
    for rec, label in zip(gallery, labels):
        buckets[int(label)].append(rec)
    for bucket in buckets:
        bucket.sort(key=lambda r: r.subject_id)

    sizes: list[int] = []
    checksums: list[str] = []
    for label, bucket in enumerate(buckets):
        data = serialize_gallery_csv(bucket).encode("utf-8")
        (k_dir / f"cluster_{label}.csv").write_bytes(data)
        sizes.append(len(bucket))
        checksums.append(hashlib.sha256(data).hexdigest())

    manifest = {
        "k": model.k,
        "seed": model.seed,
        "tol": model.tol,
        "iterations": model.iterations,
        "ssq": model.ssq,
        "centroids": [[float(v) for v in row] for row in model.centroids],
        "partitions": [
            {
                "label": label,
                "path": f"cluster_{label}.csv",
                "rows": sizes[label],
                "sha256": checksums[label],
            }
            for label in range(model.k)
        ],
    }
    (k_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    marker.unlink()
    return PartitionIndex(
        root_dir=root,
        model=model,
        sizes=tuple(sizes),
        checksums=tuple(checksums),
    )


def load_index(root_dir: str | Path, k: int) -> PartitionIndex:
    """Open an existing partition directory and validate its shape.

    Checks the marker, manifest, and per-file existence; file contents are
    checksum-verified lazily by :func:`load_partition`.  The reloaded
    model carries no SSQ trace (that is a fit artifact, not stored state).
    """
    root = Path(root_dir)
    k_dir = root / f"k={k}"
    if not k_dir.is_dir():
        raise PartitionIntegrityError(f"no partition directory {k_dir}")
    if (k_dir / INCOMPLETE_MARKER).exists():
        raise PartitionIntegrityError(
            f"{k_dir} is marked incomplete (interrupted build)"
        )
    manifest_path = k_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise PartitionIntegrityError(f"{k_dir} has no {MANIFEST_NAME}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PartitionIntegrityError(
            f"{manifest_path} is not valid JSON: {exc}"
        ) from exc
    try:
        if int(manifest["k"]) != k:
            raise PartitionIntegrityError(
                f"{manifest_path} describes k={manifest['k']}, expected k={k}"
            )
        model = ClusterModel(
            k=int(manifest["k"]),
            centroids=np.array(manifest["centroids"], dtype=np.float64),
            ssq=float(manifest["ssq"]),
            iterations=int(manifest["iterations"]),
            seed=int(manifest["seed"]),
            tol=float(manifest["tol"]),
            ssq_trace=None,
        )
        entries = manifest["partitions"]
        if len(entries) != model.k:
            raise PartitionIntegrityError(
                f"{manifest_path} lists {len(entries)} partitions for k={k}"
            )
        sizes = []
        checksums = []
        for label, entry in enumerate(entries):
            if int(entry["label"]) != label:
                raise PartitionIntegrityError(
                    f"{manifest_path}: partition entries out of order"
                )
            sizes.append(int(entry["rows"]))
            checksums.append(str(entry["sha256"]))
            if not (k_dir / str(entry["path"])).is_file():
                raise PartitionIntegrityError(
                    f"missing partition file {entry['path']} in {k_dir}"
                )
    except (KeyError, TypeError, ValueError) as exc:
        raise PartitionIntegrityError(
            f"{manifest_path} is malformed: {exc}"
        ) from exc
    return PartitionIndex(
        root_dir=root,
        model=model,
        sizes=tuple(sizes),
        checksums=tuple(checksums),
    )


def load_partition(index: PartitionIndex, label: int) -> list[SubjectRecord]:
    """Read one cluster's records, verifying the file against its checksum."""
    path = index.partition_path(label)
    try:
        data = path.read_bytes()
    except FileNotFoundError as exc:
        raise PartitionIntegrityError(f"missing partition file {path}") from exc
    digest = hashlib.sha256(data).hexdigest()
    if digest != index.checksums[label]:
        raise PartitionIntegrityError(
            f"checksum mismatch for {path}: file changed since the "
            f"manifest was written"
        )
    records = as_subject_records(parse_gallery_csv(data.decode("utf-8")))
    if len(records) != index.sizes[label]:
        raise PartitionIntegrityError(
            f"{path} holds {len(records)} rows, manifest says "
            f"{index.sizes[label]}"
        )
    return records


def verify_index(index: PartitionIndex) -> None:
    """Checksum-verify every partition file; raises on the first problem."""
    if (index.k_dir / INCOMPLETE_MARKER).exists():
        raise PartitionIntegrityError(
            f"{index.k_dir} is marked incomplete (interrupted build)"
        )
    for label in range(index.k):
        load_partition(index, label)


def load_serial(gallery_path: str | Path) -> list[SubjectRecord]:
    """Load a full processed gallery file for a serial (unpartitioned) scan."""
    return as_subject_records(load_gallery_csv(gallery_path))
