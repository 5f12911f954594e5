#!/usr/bin/env python3
# Materializing a clustered gallery on disk, and what the integrity
# manifest buys you.

import json
import tempfile
from pathlib import Path

from ecgid import gallery, kmeans, partitions, synth

root = Path(tempfile.mkdtemp(prefix="ecgid_demo_"))

raw = synth.synth_gallery(400, 4, blob_spread=15.0, seed=33)
processed, _ = gallery.preprocess_gallery(raw)
gallery.write_gallery_csv(root / "gallery.csv", processed)

model, _ = kmeans.kmeans_fit(processed, k=4, seed=33)
index = partitions.partition(processed, model, root)

print(f"partition layout under {index.k_dir}:")
for p in sorted(index.k_dir.iterdir()):
    print(f"  {p.name:18s} {p.stat().st_size:7d} bytes")
print("cluster sizes:", index.sizes)

manifest = json.loads((index.k_dir / partitions.MANIFEST_NAME).read_text())
print("\nmanifest keys:", sorted(manifest))
print("first partition entry:", manifest["partitions"][0])

# Reload from disk: the manifest carries the centroids, so routing works
# without refitting anything.
reloaded = partitions.load_index(root, 4)
probe = processed[17].vector
label = kmeans.assign(probe, reloaded.model)
members = partitions.load_partition(reloaded, label)
print(f"\nprobe for {processed[17].subject_id} routes to cluster {label} "
      f"({len(members)} records)")

# Every read is checksum-verified.  Flip one byte and the store refuses.
victim = reloaded.partition_path(label)
data = bytearray(victim.read_bytes())
data[len(data) // 2] ^= 0x01
victim.write_bytes(bytes(data))
try:
    partitions.load_partition(reloaded, label)
except partitions.PartitionIntegrityError as exc:
    print(f"\ntampered file rejected:\n  {exc}")
