import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from photoauthor.catalog import Catalog, PhotoRecord  # noqa: E402

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_catalog(counts):
    recs = []
    for author, n in counts.items():
        for i in range(n):
            recs.append(PhotoRecord(f"{author}-{i}", author, f"img/{author}-{i}.png"))
    return Catalog.from_records(recs)


@pytest.fixture(scope="session")
def tiny_synth(tmp_path_factory):
    """3 synthetic authors x 20 images on disk, with manifest."""
    from photoauthor.synth import generate_dataset

    root = tmp_path_factory.mktemp("tiny")
    generate_dataset(root, n_authors=3, per_author=20, seed=3)
    return root
