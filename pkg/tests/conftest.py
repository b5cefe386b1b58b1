from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from advtransfer.corpus import Example, Token, make_example
from advtransfer.lexicon import Lexicon, load_lexicon

FIXTURES = Path(__file__).parent / "fixtures"
SMALL_LEXICON = FIXTURES / "lexicon_small.tsv"

_PRIORITY = ("NOUN", "VERB", "ADJ", "ADV")


def pos_map(lexicon: Lexicon) -> dict[str, str]:
    """Word -> tag under the NOUN > VERB > ADJ > ADV priority, from a lexicon's own tags."""
    return {w: min(tags, key=_PRIORITY.index) for w, tags in lexicon.pos_table().items()}


@pytest.fixture(scope="session")
def small_lexicon() -> Lexicon:
    return load_lexicon(SMALL_LEXICON)


@pytest.fixture(scope="session")
def small_pos(small_lexicon) -> dict[str, str]:
    return pos_map(small_lexicon)


def example(text: str, label: int, lexicon: Lexicon, id: int = 0) -> Example:
    return make_example(text, label, id, pos_map(lexicon))


def tagged(words, tags, label=0, id=0) -> Example:
    return Example(id, tuple(Token(w, t, i) for i, (w, t) in enumerate(zip(words, tags))), label)


class ConstantVictim:
    def __init__(self, logits):
        self.out = np.asarray(logits, float)
        self.id = "constant"

    def __call__(self, batch):
        return np.tile(self.out, (len(batch), 1))


class WeightVictim:
    """Summed per-word weight rows; unknown words contribute nothing."""

    def __init__(self, weights: dict[str, np.ndarray], n_labels: int = 2, bias=None):
        self.w = {k: np.asarray(v, float) for k, v in weights.items()}
        self.b = np.zeros(n_labels) if bias is None else np.asarray(bias, float)
        self.id = "weights"

    def __call__(self, batch):
        out = np.tile(self.b, (len(batch), 1))
        for i, sent in enumerate(batch):
            for w in sent:
                if w in self.w:
                    out[i] += self.w[w]
        return out


# -- acceptance reporting ----------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
