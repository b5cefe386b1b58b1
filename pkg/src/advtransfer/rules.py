"""Universal word-replacement rules: mining from ensemble logits, PMI baseline, application.

Mining accumulates, for every training instance (x, y), position i and candidate w_i -> w',
the logit change  [f(x; y) - f(x'; y)] + sum_{z != y} [f(x'; z) - f(x; z)]  into the
rule (y, w_i -> w') and divides by the number of contributing events.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .attacks import AdversarialResult, Substitution, apply_substitutions, substitutable_count
from .corpus import Dataset, Example
from .lexicon import Lexicon
from .zoo import CHAR_NGRAM, WORD


@dataclass(frozen=True)
class ReplacementRule:
    label: int
    original: str
    replacement: str
    salience: float
    support: int

    def __post_init__(self):
        if self.original == self.replacement:
            raise ValueError("a rule must change the word")


def _rank_key(rule: ReplacementRule):
    return (-rule.salience, rule.replacement)


class RuleSet:
    """Rules plus an index from (label, original) to rules by descending salience."""

    def __init__(self, rules: Iterable[ReplacementRule]):
        rules = list(rules)
        keys = [(r.label, r.original, r.replacement) for r in rules]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (label, original, replacement) rule")
        self.rules = sorted(rules, key=lambda r: (r.label, -r.salience, r.original, r.replacement))
        index: dict[tuple[int, str], list[ReplacementRule]] = defaultdict(list)
        for r in self.rules:
            index[(r.label, r.original)].append(r)
        self.index = {k: sorted(v, key=_rank_key) for k, v in index.items()}

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __eq__(self, other) -> bool:
        return isinstance(other, RuleSet) and self.rules == other.rules

    def best(self, label: int, original: str) -> ReplacementRule | None:
        hits = self.index.get((label, original))
        return hits[0] if hits else None

    def filter(self, min_support: int = 1) -> "RuleSet":
        return RuleSet(r for r in self.rules if r.support >= min_support)

    def top(self, label: int, k: int) -> list[ReplacementRule]:
        return [r for r in self.rules if r.label == label][:k]

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.rules:
                fh.write(f"{r.label}\t{r.original}\t{r.replacement}\t{r.salience:.9f}\t{r.support}\n")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "RuleSet":
        rules = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 5:
                    raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields")
                rules.append(ReplacementRule(int(parts[0]), parts[1], parts[2], float(parts[3]), int(parts[4])))
        return cls(rules)


class _Accumulator:
    """Per-rule contribution lists; ``math.fsum`` makes the merge order-independent."""

    def __init__(self):
        self.terms: dict[tuple[int, str, str], list[float]] = defaultdict(list)

    def add(self, key, value: float) -> None:
        self.terms[key].append(value)

    def merge(self, other: "_Accumulator") -> "_Accumulator":
        for k, v in other.terms.items():
            self.terms[k].extend(v)
        return self

    def rules(self, min_support: int = 1) -> RuleSet:
        out = []
        for (y, w, w_hat), vals in self.terms.items():
            if len(vals) >= min_support:
                out.append(ReplacementRule(y, w, w_hat, math.fsum(vals) / len(vals), len(vals)))
        return RuleSet(out)


def _replacement_events(example: Example, lexicon: Lexicon):
    words = list(example.surfaces)
    for i, tok in enumerate(example.tokens):
        for c in lexicon.candidates(tok.surface, tok.pos):
            yield i, tok.surface, c, words[:i] + [c] + words[i + 1:]


def mine_partial(ensemble: Callable, examples: Sequence[Example], lexicon: Lexicon) -> _Accumulator:
    acc = _Accumulator()
    for ex in examples:
        events = list(_replacement_events(ex, lexicon))
        if not events:
            continue
        out = ensemble([list(ex.surfaces)] + [e[3] for e in events])
        base, variants = out[0], out[1:]
        y = ex.label
        for (i, w, c, _), f_hat in zip(events, variants):
            diff = f_hat - base  # f(x'; z) - f(x; z)
            h = -diff[y] + (diff.sum() - diff[y])
            acc.add((y, w, c), float(h))
    return acc


def mine_uawr(ensemble: Callable, data: Dataset | Sequence[Example], lexicon: Lexicon,
              min_support: int = 1) -> RuleSet:
    examples = data.train if isinstance(data, Dataset) else data
    return mine_partial(ensemble, examples, lexicon).rules(min_support)


# -- PMI -----------------------------------------------------------------------


@dataclass
class PmiTable:
    p_label: np.ndarray
    p_word: dict[str, float]
    p_joint: dict[tuple[str, int], float]
    pmi: dict[tuple[str, int], float] = field(default_factory=dict)

    def value(self, word: str, label: int) -> float:
        return self.pmi.get((word, label), 0.0)

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (w, z) in sorted(self.pmi):
                fh.write(f"{w}\t{z}\t{self.pmi[(w, z)]:.9f}\n")


def pmi_table(data: Dataset | Sequence[Example], num_labels: int | None = None) -> PmiTable:
    """Ratio-form PMI p(w, z) / (p(w) p(z)) with document-level word occurrence."""
    examples = data.train if isinstance(data, Dataset) else list(data)
    if not examples:
        raise ValueError("PMI needs a non-empty training set")
    if num_labels is None:
        num_labels = data.num_labels if isinstance(data, Dataset) else max(e.label for e in examples) + 1
    n = len(examples)
    label_counts = np.bincount([e.label for e in examples], minlength=num_labels)
    word_counts: dict[str, int] = defaultdict(int)
    joint_counts: dict[tuple[str, int], int] = defaultdict(int)
    for e in examples:
        for w in set(e.surfaces):
            word_counts[w] += 1
            joint_counts[(w, e.label)] += 1
    p_label = label_counts / n
    p_word = {w: c / n for w, c in word_counts.items()}
    p_joint = {k: c / n for k, c in joint_counts.items()}
    pmi = {}
    for w, pw in p_word.items():
        for z in range(num_labels):
            pj = p_joint.get((w, z), 0.0)
            pmi[(w, z)] = pj / (pw * p_label[z]) if pj > 0 else 0.0
    return PmiTable(p_label, p_word, p_joint, pmi)


def pmi_salience(table: PmiTable, label: int, word: str, replacement: str) -> float:
    h = table.value(word, label) - table.value(replacement, label)
    for z in range(len(table.p_label)):
        if z != label:
            h += table.value(replacement, z) - table.value(word, z)
    return h


def pmi_rules(data: Dataset, lexicon: Lexicon, min_support: int = 1, table: PmiTable | None = None) -> RuleSet:
    """Rules over the same (label, w -> w') events mining sees, scored by PMI salience."""
    table = table or pmi_table(data)
    support: dict[tuple[int, str, str], int] = defaultdict(int)
    for ex in data.train:
        for _, w, c, _ in _replacement_events(ex, lexicon):
            support[(ex.label, w, c)] += 1
    return RuleSet(ReplacementRule(y, w, c, pmi_salience(table, y, w, c), n)
                   for (y, w, c), n in support.items() if n >= min_support)


# -- applying rules ------------------------------------------------------------


def word_budget(example: Example, rho: float) -> int:
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    # the epsilon absorbs products such as 0.58 * 50 = 28.999999999999996
    return int(math.floor(rho * substitutable_count(example.tokens) + 1e-9))


def rule_attack(example: Example, rules: RuleSet, rho: float) -> AdversarialResult:
    """Model-free greedy rewrite: apply the highest-salience matching rule per step.

    Only rules with positive salience are used; ties go to the lower position and then the
    lexicographically smaller replacement.
    """
    limit = word_budget(example, rho)
    options = []
    for tok in example.tokens:
        best = rules.best(example.label, tok.surface)
        if best is not None and best.salience > 0:
            options.append((-best.salience, tok.position, best.replacement))
    options.sort()
    subs = [Substitution(pos, example.tokens[pos].surface, rep) for _, pos, rep in options[:limit]]
    subs.sort(key=lambda s: s.position)
    return AdversarialResult(
        example.id, example.label, apply_substitutions(example, subs), subs, None, 0,
        len(subs) / max(substitutable_count(example.tokens), 1),
    )


@dataclass
class VictimScore:
    victim: str
    group: str
    attacked: int
    succ: float
    word: float


def evaluate_rules(rules: RuleSet, victims: Sequence, test: Sequence[Example], rho: float,
                   group_of: Callable[[object], str] | None = None) -> dict:
    """Succ% and Word% per victim over the examples it classifies correctly when clean.

    Returns ``{"victims": [VictimScore...], "groups": {group: (succ, word)}}`` with
    percentages in [0, 100].
    """
    if group_of is None:
        group_of = lambda v: v.spec.input_form  # noqa: E731
    attacked = [rule_attack(ex, rules, rho) for ex in test]
    gold = np.array([ex.label for ex in test])
    clean_in = [list(ex.surfaces) for ex in test]
    adv_in = [r.surfaces for r in attacked]
    frac = np.array([r.word_modified_fraction for r in attacked])
    scores = []
    for v in victims:
        correct = v(clean_in).argmax(axis=1) == gold
        if not correct.any():
            scores.append(VictimScore(v.id, group_of(v), 0, 0.0, 0.0))
            continue
        flipped = v(adv_in).argmax(axis=1) != gold
        scores.append(VictimScore(v.id, group_of(v), int(correct.sum()),
                                  100.0 * float(flipped[correct].mean()), 100.0 * float(frac[correct].mean())))
    groups: dict[str, list[VictimScore]] = defaultdict(list)
    for s in scores:
        groups[s.group].append(s)
        groups["ALL"].append(s)
    agg = {g: (float(np.mean([s.succ for s in ss])), float(np.mean([s.word for s in ss])))
           for g, ss in groups.items()}
    return {"victims": scores, "groups": agg}


def input_form_group(v) -> str:
    return {WORD: "WORD", CHAR_NGRAM: "CHAR"}[v.spec.input_form]
