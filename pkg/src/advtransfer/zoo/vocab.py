"""Input-form vocabularies and batch encoding."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .spec import CHAR_NGRAM, WORD

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


def char_trigrams(word: str) -> list[str]:
    w = f"<{word}>"
    return [w[i : i + 3] for i in range(len(w) - 2)]


@dataclass
class Batch:
    """Right-padded encoding of a list of token sequences.

    ``pool`` is a sparse (B*T, |V|) matrix whose row for token (b, t) averages the rows the
    token pools over (a one-hot row for words); padded positions have empty rows.
    ``mask`` marks real token positions.
    """

    pool: sparse.csr_matrix
    mask: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(int)


class Vocab:
    """Index over words (WORD) or character trigrams (CHAR_NGRAM).

    Rows 0 and 1 are the padding and UNK symbols in both forms.
    """

    def __init__(self, form: str, itos: Sequence[str]):
        if form not in (WORD, CHAR_NGRAM):
            raise ValueError(form)
        if list(itos[:2]) != [PAD, UNK]:
            raise ValueError("vocabulary must start with <pad>, <unk>")
        self.form = form
        self.itos = list(itos)
        self.stoi = {s: i for i, s in enumerate(self.itos)}
        self._word_cache: dict[str, tuple[int, ...]] = {}

    @classmethod
    def build(cls, form: str, sentences: Iterable[Sequence[str]], min_count: int = 1) -> "Vocab":
        counts: Counter[str] = Counter()
        for sent in sentences:
            for w in sent:
                if form == WORD:
                    counts[w] += 1
                else:
                    counts.update(char_trigrams(w))
        kept = sorted((s for s, c in counts.items() if c >= min_count), key=lambda s: (-counts[s], s))
        return cls(form, [PAD, UNK, *[s for s in kept if s not in (PAD, UNK)]])

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.form == other.form and self.itos == other.itos

    def word_units(self, word: str) -> tuple[int, ...]:
        """Row indices a word pools over: one for WORD, its known trigrams for CHAR_NGRAM."""
        hit = self._word_cache.get(word)
        if hit is not None:
            return hit
        if word == PAD:
            units = (PAD_ID,)
        elif word == UNK:
            units = (UNK_ID,)
        elif self.form == WORD:
            units = (self.stoi.get(word, UNK_ID),)
        else:
            units = tuple(self.stoi[g] for g in char_trigrams(word) if g in self.stoi) or (UNK_ID,)
        self._word_cache[word] = units
        return units

    def encode(self, sentences: Sequence[Sequence[str]]) -> Batch:
        sents = [list(s) if len(s) else [PAD] for s in sentences]
        B, T = len(sents), max(len(s) for s in sents)
        mask = np.zeros((B, T))
        cols: list[int] = []
        vals: list[float] = []
        counts = np.zeros(B * T, dtype=np.int64)
        for b, s in enumerate(sents):
            mask[b, : len(s)] = 1.0
            for t, w in enumerate(s):
                u = self.word_units(w)
                cols.extend(u)
                vals.extend([1.0 / len(u)] * len(u))
                counts[b * T + t] = len(u)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        pool = sparse.csr_matrix((np.array(vals), np.array(cols, dtype=np.int64), indptr),
                                 shape=(B * T, len(self.itos)))
        return Batch(pool, mask)
