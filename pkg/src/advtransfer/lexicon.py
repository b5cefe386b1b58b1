"""POS-constrained synonym lexicon."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator

from .corpus import POS_TAGS, Token, _TOKEN_RE

log = logging.getLogger(__name__)


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class SynonymEntry:
    word: str
    pos: str
    candidates: tuple[str, ...]


class Lexicon(Mapping):
    """Read-only map from ``(word, pos)`` to :class:`SynonymEntry`."""

    def __init__(self, entries: dict[tuple[str, str], SynonymEntry], skipped: int = 0):
        self._entries = dict(entries)
        self.skipped = skipped

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def candidates(self, surface: str, pos: str) -> tuple[str, ...]:
        entry = self._entries.get((surface, pos))
        return entry.candidates if entry is not None else ()

    def pos_table(self) -> dict[str, set[str]]:
        """Every tag each word (head or candidate) appears under."""
        table: dict[str, set[str]] = {}
        for entry in self._entries.values():
            for w in (entry.word, *entry.candidates):
                table.setdefault(w, set()).add(entry.pos)
        return table


def _single_token(word: str) -> bool:
    return bool(word) and _TOKEN_RE.fullmatch(word) is not None and word[0].isalnum()


def parse_lexicon(lines, source: str = "<lexicon>") -> Lexicon:
    merged: dict[tuple[str, str], list[str]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise LexiconError(f"{source}:{lineno}: expected word<TAB>POS<TAB>candidates")
        word, pos, cands = parts[0].strip().lower(), parts[1].strip(), parts[2]
        if pos not in POS_TAGS or not word:
            raise LexiconError(f"{source}:{lineno}: bad word or POS tag {pos!r}")
        bucket = merged.setdefault((word, pos), [])
        for c in cands.split(","):
            c = c.strip().lower()
            # multi-word synonyms (spaces or wordnet-style underscores) are dropped
            if c == word or not _single_token(c) or "_" in c or c in bucket:
                continue
            bucket.append(c)

    entries, skipped = {}, 0
    for key, cands in merged.items():
        if not cands:
            skipped += 1
            continue
        entries[key] = SynonymEntry(key[0], key[1], tuple(cands))
    if skipped:
        log.warning("%s: skipped %d entries with no usable candidates", source, skipped)
    return Lexicon(entries, skipped)


def load_lexicon(path: str | Path) -> Lexicon:
    """Load ``word<TAB>POS<TAB>c1,c2,...``; duplicate keys merge in first-seen order."""
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh, str(path))


def default_lexicon_path() -> Path:
    return Path(str(resources.files("advtransfer.data").joinpath("lexicon.tsv")))


def candidates_for(token: Token, lexicon: Lexicon) -> list[str]:
    return list(lexicon.candidates(token.surface, token.pos))


def write_pos_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, tags in sorted(lexicon.pos_table().items()):
            for tag in sorted(tags):
                fh.write(f"{word}\t{tag}\n")
