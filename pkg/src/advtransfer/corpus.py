"""Labeled text corpora: tokenization, coarse POS tagging, train/test splits."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

NOUN, VERB, ADJ, ADV, OTHER = "NOUN", "VERB", "ADJ", "ADV", "OTHER"
POS_TAGS = (NOUN, VERB, ADJ, ADV, OTHER)
# Priority used when a word carries several lexicon tags.
_POS_PRIORITY = {NOUN: 0, VERB: 1, ADJ: 2, ADV: 3, OTHER: 4}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class CorpusError(ValueError):
    """Raised for malformed or empty corpus files."""


class Token(NamedTuple):
    surface: str
    pos: str
    position: int

    @property
    def substitutable(self) -> bool:
        return self.pos != OTHER


@dataclass(frozen=True)
class Example:
    id: int
    tokens: tuple[Token, ...]
    label: int

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Dataset:
    name: str
    labels: tuple[str, ...]
    train: tuple[Example, ...]
    test: tuple[Example, ...] = ()

    def __post_init__(self):
        if len(self.labels) < 2:
            raise CorpusError(f"dataset {self.name!r} needs at least 2 labels, got {len(self.labels)}")
        n = len(self.labels)
        for ex in (*self.train, *self.test):
            if not 0 <= ex.label < n:
                raise CorpusError(f"example {ex.id} has label {ex.label} outside [0, {n})")
        overlap = {e.id for e in self.train} & {e.id for e in self.test}
        if overlap:
            raise CorpusError(f"train and test share ids: {sorted(overlap)[:5]}")

    @property
    def num_labels(self) -> int:
        return len(self.labels)


def read_pos_lexicon(path: str | Path) -> dict[str, str]:
    """Read a ``word<TAB>TAG`` file, resolving multi-tag words by NOUN > VERB > ADJ > ADV."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in _POS_PRIORITY:
                raise CorpusError(f"{path}:{lineno}: expected word<TAB>TAG, got {line!r}")
            word, tag = parts[0].strip().lower(), parts[1]
            old = table.get(word)
            if old is None or _POS_PRIORITY[tag] < _POS_PRIORITY[old]:
                table[word] = tag
    return table


@lru_cache(maxsize=1)
def default_pos_lexicon() -> Mapping[str, str]:
    ref = resources.files("advtransfer.data").joinpath("pos_lexicon.tsv")
    with resources.as_file(ref) as path:
        return read_pos_lexicon(path)


def assign_pos(surface: str, pos_lexicon: Mapping[str, str] | None = None) -> str:
    if pos_lexicon is None:
        pos_lexicon = default_pos_lexicon()
    return pos_lexicon.get(surface, OTHER)


def tokenize(text: str, pos_lexicon: Mapping[str, str] | None = None) -> list[Token]:
    """Lowercase, split on whitespace and punctuation, and tag each token.

    Punctuation tokens are always tagged OTHER.
    """
    if pos_lexicon is None:
        pos_lexicon = default_pos_lexicon()
    out = []
    for i, surface in enumerate(_TOKEN_RE.findall(text.lower())):
        if surface[0].isalnum() or surface[0] == "_":
            pos = pos_lexicon.get(surface, OTHER)
        else:
            pos = OTHER
        out.append(Token(surface, pos, i))
    return out


def _read_labels(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        labels = [ln.strip() for ln in fh if ln.strip()]
    if len(set(labels)) != len(labels):
        raise CorpusError(f"{path}: duplicate label names")
    return labels


def _read_records(path: Path) -> list[tuple[int, str, str]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            label, sep, text = line.partition("\t")
            if not sep or not label.strip() or not text.strip():
                raise CorpusError(f"{path}:{lineno}: malformed line, expected label<TAB>text")
            records.append((lineno, label.strip(), text))
    return records


def _build_examples(records, label_index, path, start_id, pos_lexicon):
    examples = []
    for offset, (lineno, label, text) in enumerate(records):
        if label not in label_index:
            raise CorpusError(f"{path}:{lineno}: unknown label {label!r}")
        tokens = tokenize(text, pos_lexicon)
        if not tokens:
            raise CorpusError(f"{path}:{lineno}: text has no tokens")
        examples.append(Example(start_id + offset, tuple(tokens), label_index[label]))
    return examples


def load_dataset(
    path: str | Path,
    format: str = "tsv",
    *,
    labels_path: str | Path | None = None,
    name: str | None = None,
    pos_lexicon: Mapping[str, str] | None = None,
) -> Dataset:
    """Load a corpus.

    ``format="tsv"``: a single ``label<TAB>text`` file; all records land in ``train``.
    ``format="tsv-dir"``: a directory holding ``train.tsv``, ``test.tsv`` and optionally
    ``labels.txt``.

    Labels come from ``labels_path`` (or ``<file>.labels`` / ``labels.txt`` next to the data)
    when present, otherwise in order of first appearance. Ids are sequential, train first.
    """
    path = Path(path)
    if format == "tsv":
        parts = {"train": path}
        sidecar = path.with_name(path.name + ".labels")
    elif format == "tsv-dir":
        parts = {"train": path / "train.tsv", "test": path / "test.tsv"}
        sidecar = path / "labels.txt"
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    for p in parts.values():
        if not p.is_file():
            raise FileNotFoundError(p)

    records = {split: _read_records(p) for split, p in parts.items()}
    if not any(records.values()):
        raise CorpusError(f"{path}: empty corpus")

    if labels_path is not None:
        labels = _read_labels(Path(labels_path))
    elif sidecar.is_file():
        labels = _read_labels(sidecar)
    else:
        labels = []
        for split in parts:
            for _, lab, _ in records[split]:
                if lab not in labels:
                    labels.append(lab)
    label_index = {lab: i for i, lab in enumerate(labels)}

    train = _build_examples(records["train"], label_index, parts["train"], 0, pos_lexicon)
    test = []
    if "test" in parts:
        test = _build_examples(records["test"], label_index, parts["test"], len(train), pos_lexicon)
    return Dataset(name or path.stem, tuple(labels), tuple(train), tuple(test))


def train_test_split(data: Dataset, test_fraction: float, seed: int) -> Dataset:
    """Move a seeded random fraction of ``train`` into ``test`` (ids are kept)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    pool = list(data.train) + list(data.test)
    rng = np.random.default_rng(seed)
    n_test = int(round(test_fraction * len(pool)))
    test_idx = set(rng.permutation(len(pool))[:n_test].tolist())
    train = tuple(ex for i, ex in enumerate(pool) if i not in test_idx)
    test = tuple(ex for i, ex in enumerate(pool) if i in test_idx)
    return Dataset(data.name, data.labels, train, test)


def make_example(text: str, label: int, id: int = 0, pos_lexicon=None) -> Example:
    return Example(id, tuple(tokenize(text, pos_lexicon)), label)


def retag(tokens: Iterable[Token], surfaces: Sequence[str]) -> tuple[Token, ...]:
    """Swap surfaces while keeping each token's POS and position."""
    return tuple(Token(s, t.pos, t.position) for t, s in zip(tokens, surfaces, strict=True))
