from __future__ import annotations

import sys
from pathlib import Path

import pytest

import ecgid

sys.path.insert(0, str(Path(__file__).parent))

# Populated by the acceptance tests; echoed after the run so the
# per-criterion verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def blob_gallery():
    """1000-subject, 4-blob processed gallery shared by integration tests."""
    raw = ecgid.synth_gallery(1000, 4, 20.0, seed=501)
    processed, _ = ecgid.preprocess_gallery(raw)
    return processed


@pytest.fixture(scope="session")
def blob_gallery_csv(blob_gallery, tmp_path_factory):
    """The same gallery written to disk, for file-backed paths."""
    path = tmp_path_factory.mktemp("gallery") / "processed.csv"
    ecgid.write_gallery_csv(path, blob_gallery)
    return path
