"""Photographer manifest loading, validation and train/validation/test splits."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DuplicatePhotoId, EmptyManifest, MalformedLine, TooFewRecords

# Number of photos per photographer in the full 181,948-image collection.
PHOTOGRAPHER_COUNTS = {
    "Adams": 245, "Brumfield": 1138, "Capa": 2389, "Bresson": 4693,
    "Cunningham": 406, "Curtis": 1069, "Delano": 14484, "Duryea": 152,
    "Erwitt": 5173, "Fenton": 262, "Gall": 656, "Genthe": 4140,
    "Glinn": 4529, "Gottscho": 4009, "Grabill": 189, "Griffiths": 2000,
    "Halsman": 1310, "Hartmann": 2784, "Highsmith": 28475, "Hine": 5116,
    "Horydczak": 14317, "Hurley": 126, "Jackson": 881, "Johnston": 6962,
    "Kandell": 311, "Korab": 764, "Lange": 3913, "List": 2278,
    "McCurry": 6705, "Meiselas": 3051, "Mydans": 2461, "O'Sullivan": 573,
    "Parr": 20635, "Prokudin-Gorsky": 2605, "Rodger": 1204,
    "Rothstein": 12517, "Seymour": 1543, "Stock": 3416, "Sweet": 909,
    "Van Vechten": 1385, "Wolcott": 12173,
}

REQUIRED_KEYS = ("photo_id", "author_id", "path")
OPTIONAL_KEYS = ("source_url", "title", "summary", "subject", "width", "height")

TRAIN, VALIDATION, TEST = "train", "validation", "test"


@dataclass(frozen=True)
class PhotoRecord:
    photo_id: str
    author_id: str
    path: str
    source_url: str | None = None
    title: str | None = None
    summary: str | None = None
    subject: str | None = None
    width: int | None = None
    height: int | None = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class Catalog:
    records: tuple[PhotoRecord, ...]
    author_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        counts = Counter(r.author_id for r in self.records)
        if not self.author_counts:
            object.__setattr__(self, "author_counts", dict(sorted(counts.items())))
        elif dict(counts) != dict(self.author_counts):
            raise ValueError("author counts do not match records")
        if any(c <= 0 for c in self.author_counts.values()):
            raise ValueError("authors with zero records are not allowed")
        seen = set()
        for r in self.records:
            if r.photo_id in seen:
                raise DuplicatePhotoId(r.photo_id)
            seen.add(r.photo_id)

    @classmethod
    def from_records(cls, records):
        return cls(tuple(records))

    @property
    def authors(self):
        return list(self.author_counts)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self):
        """Map photo_id -> author_id."""
        return {r.photo_id: r.author_id for r in self.records}

    def by_id(self):
        return {r.photo_id: r for r in self.records}

    def photos_of(self, author_id):
        return [r.photo_id for r in self.records if r.author_id == author_id]


def _parse_record(obj, lineno):
    if not isinstance(obj, dict):
        raise MalformedLine(lineno, "record is not a key-value object")
    for key in REQUIRED_KEYS:
        if not isinstance(obj.get(key), str) or not obj[key]:
            raise MalformedLine(lineno, f"missing or empty required key {key!r}")
    unknown = set(obj) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise MalformedLine(lineno, f"unknown keys {sorted(unknown)}")
    kwargs = {k: obj[k] for k in REQUIRED_KEYS}
    for key in ("source_url", "title", "summary", "subject"):
        val = obj.get(key)
        if val is not None and not isinstance(val, str):
            raise MalformedLine(lineno, f"{key!r} must be a string")
        kwargs[key] = val
    for key in ("width", "height"):
        val = obj.get(key)
        if val is not None:
            if isinstance(val, bool) or not isinstance(val, int) or val < 1:
                raise MalformedLine(lineno, f"{key!r} must be an integer >= 1")
        kwargs[key] = val
    return PhotoRecord(**kwargs)


def load_manifest(path) -> Catalog:
    """Read a JSON-lines manifest into a validated :class:`Catalog`.

    Blank lines are skipped. Line numbers in errors are 1-based.
    """
    records = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(lineno, exc.msg) from None
            rec = _parse_record(obj, lineno)
            if rec.photo_id in seen:
                raise DuplicatePhotoId(
                    f"photo_id {rec.photo_id!r} on line {lineno} already used on line {seen[rec.photo_id]}"
                )
            seen[rec.photo_id] = lineno
            records.append(rec)
    if not records:
        raise EmptyManifest(f"{path} contains no records")
    return Catalog.from_records(records)


def write_manifest(catalog: Catalog, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in catalog.records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


@dataclass
class TableReport:
    rows: list[tuple[str, int, int]]  # (author, expected, found)

    @property
    def mismatches(self):
        return [r for r in self.rows if r[1] != r[2]]

    @property
    def passed(self):
        return not self.mismatches

    def __str__(self):
        lines = [f"{a}\texpected={e}\tfound={f}\t{'ok' if e == f else 'MISMATCH'}"
                 for a, e, f in self.rows]
        lines.append("PASS" if self.passed else f"FAIL ({len(self.mismatches)} mismatches)")
        return "\n".join(lines)


def validate_against_table(catalog: Catalog, expected: Mapping[str, int]) -> TableReport:
    """Compare per-author counts with an expected table (report only, never raises)."""
    counts = catalog.author_counts
    return TableReport([(a, int(n), counts.get(a, 0)) for a, n in expected.items()])


@dataclass(frozen=True)
class SplitAssignment:
    """photo_id -> train/validation/test. ``labels`` (photo_id -> author) is
    optional and is written as a third column so a split file is self-contained."""

    assignment: dict[str, str]
    seed: int
    labels: dict[str, str] | None = field(default=None, compare=False)

    def ids(self, which):
        return [pid for pid, s in self.assignment.items() if s == which]

    @property
    def train(self):
        return self.ids(TRAIN)

    @property
    def validation(self):
        return self.ids(VALIDATION)

    @property
    def test(self):
        return self.ids(TEST)

    def training_ids(self, exclude_validation=False):
        """Ids used to fit a model; validation is folded in unless excluded."""
        keep = {TRAIN} if exclude_validation else {TRAIN, VALIDATION}
        return [pid for pid, s in self.assignment.items() if s in keep]

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#seed\t{self.seed}\n")
            for pid, s in self.assignment.items():
                if self.labels is not None:
                    fh.write(f"{pid}\t{s}\t{self.labels[pid]}\n")
                else:
                    fh.write(f"{pid}\t{s}\n")

    @classmethod
    def load(cls, path):
        seed = 0
        assignment = {}
        labels = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if parts[0] == "#seed" and len(parts) == 2:
                    seed = int(parts[1])
                    continue
                if len(parts) not in (2, 3):
                    raise MalformedLine(lineno, "expected 'photo_id<TAB>split[<TAB>author_id]'")
                if parts[1] not in (TRAIN, VALIDATION, TEST):
                    raise MalformedLine(lineno, f"unknown split {parts[1]!r}")
                assignment[parts[0]] = parts[1]
                if len(parts) == 3:
                    labels[parts[0]] = parts[2]
        if labels and len(labels) != len(assignment):
            raise MalformedLine(0, "author column must be present on every line or none")
        return cls(assignment, seed, labels or None)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def make_splits(catalog: Catalog, seed: int) -> SplitAssignment:
    """Uniform per-photo 90/10 train/test split with 10% of train held out for validation.

    test = round(0.1 N); validation = round(0.1 (N - test)); the rest is train.
    """
    n = len(catalog)
    if n < 10:
        raise TooFewRecords(f"need at least 10 records, got {n}")
    if seed < 0:
        raise ValueError("seed must be unsigned")
    n_test = _round_half_up(0.1 * n)
    n_val = _round_half_up(0.1 * (n - n_test))
    order = np.random.default_rng(seed).permutation(n)
    labels = np.full(n, TRAIN, dtype=object)
    labels[order[:n_test]] = TEST
    labels[order[n_test:n_test + n_val]] = VALIDATION
    assignment = {rec.photo_id: str(lab) for rec, lab in zip(catalog.records, labels)}
    return SplitAssignment(assignment, seed, catalog.labels())
