"""Word-substitution attacks: PWWS (greedy) and a genetic population search.

A *victim* is any callable mapping a batch of surface sequences to a ``(B, |Z|)`` logit
array. ``queries`` on a result counts the sequences the victim was asked to score.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import OTHER, Example, Token
from .lexicon import Lexicon
from .zoo.networks import softmax
from .zoo.vocab import UNK

log = logging.getLogger(__name__)

Victim = Callable[[Sequence[Sequence[str]]], np.ndarray]


@dataclass(frozen=True)
class Substitution:
    position: int
    original: str
    replacement: str

    def __post_init__(self):
        if self.replacement == self.original:
            raise ValueError(f"substitution at {self.position} does not change {self.original!r}")


@dataclass
class AdversarialResult:
    example_id: int
    label: int
    perturbed: tuple[Token, ...]
    substitutions: list[Substitution]
    success: bool | None
    queries: int
    word_modified_fraction: float
    clean_correct: bool | None = None

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.perturbed]

    def to_record(self) -> dict:
        return {
            "id": self.example_id,
            "substitutions": [[s.position, s.original, s.replacement] for s in self.substitutions],
            "success": self.success,
            "queries": self.queries,
            "word_modified_fraction": round(self.word_modified_fraction, 6),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


class CountingVictim:
    """Wraps a victim and counts every scored sequence."""

    def __init__(self, victim: Victim):
        self.victim = victim
        self.count = 0
        self.calls = 0

    def __call__(self, batch):
        self.count += len(batch)
        self.calls += 1
        return self.victim(batch)


def substitutable_count(tokens: Sequence[Token]) -> int:
    return sum(1 for t in tokens if t.pos != OTHER)


def modified_fraction(tokens: Sequence[Token], n_subs: int) -> float:
    n = substitutable_count(tokens)
    return n_subs / n if n else 0.0


def apply_substitutions(example: Example, subs: Sequence[Substitution]) -> tuple[Token, ...]:
    """Replace surfaces at the given positions; POS tags and positions are kept."""
    tokens = list(example.tokens)
    seen = set()
    for s in subs:
        if not 0 <= s.position < len(tokens):
            raise IndexError(f"substitution position {s.position} out of range")
        if s.position in seen:
            raise ValueError(f"duplicate substitution position {s.position}")
        seen.add(s.position)
        old = tokens[s.position]
        tokens[s.position] = Token(s.replacement, old.pos, old.position)
    return tuple(tokens)


def _result(example, subs, success, queries, clean_correct):
    perturbed = apply_substitutions(example, subs)
    return AdversarialResult(
        example.id, example.label, perturbed, list(subs), success, queries,
        modified_fraction(example.tokens, len(subs)), clean_correct,
    )


def _argmax(logits):
    # np.argmax already breaks ties towards the lowest index
    return int(np.argmax(logits))


def pwws_attack(victim: Victim, example: Example, lexicon: Lexicon) -> AdversarialResult:
    """Probability-weighted word saliency greedy attack.

    Positions are ranked by softmax(saliency) * best probability drop; positions whose best
    substitute does not lower the gold probability are skipped.
    """
    victim = CountingVictim(victim)
    gold = example.label
    words = list(example.surfaces)
    clean = victim([words])[0]
    if _argmax(clean) != gold:
        return _result(example, [], True, victim.count, False)

    n = len(words)
    cands = [lexicon.candidates(t.surface, t.pos) for t in example.tokens]
    if not any(cands):
        return _result(example, [], False, victim.count, True)

    p_gold = softmax(clean)[gold]
    unk_variants = [words[:i] + [UNK] + words[i + 1:] for i in range(n)]
    saliency = p_gold - softmax(victim(unk_variants))[:, gold]
    weights = softmax(saliency)

    variants = [words[:i] + [c] + words[i + 1:] for i, cs in enumerate(cands) for c in cs]
    drops = p_gold - softmax(victim(variants))[:, gold]

    best: dict[int, tuple[float, str]] = {}
    k = 0
    for i, cs in enumerate(cands):
        for c in cs:
            d = drops[k]
            # strict > keeps the earliest candidate on ties
            if i not in best or d > best[i][0]:
                best[i] = (d, c)
            k += 1

    ranked = []
    for i, (delta, c) in best.items():
        if delta <= 0:
            log.debug("example %d: position %d skipped, best drop %.3g <= 0", example.id, i, delta)
            continue
        ranked.append((-weights[i] * delta, i, c))
    ranked.sort()

    current = words.copy()
    subs: list[Substitution] = []
    for _, i, c in ranked:
        current[i] = c
        subs.append(Substitution(i, words[i], c))
        if _argmax(victim([current])[0]) != gold:
            return _result(example, subs, True, victim.count, True)
    return _result(example, subs, False, victim.count, True)


@dataclass(frozen=True)
class GAConfig:
    population: int = 20
    generations: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("GA population must be >= 2")
        if self.generations < 1:
            raise ValueError("GA generations must be >= 1")


def ga_attack(victim: Victim, example: Example, lexicon: Lexicon, config: GAConfig = GAConfig(),
              history: list[float] | None = None) -> AdversarialResult:
    """Population-based attack without a language-model filter.

    Fitness is the largest non-gold class probability. Each generation keeps the best
    member, draws parent pairs by roulette selection, mixes them position-wise, and
    mutates every child with one random substitution. ``history`` (if given) receives
    the best population fitness of every evaluated generation.
    """
    victim = CountingVictim(victim)
    gold = example.label
    words = list(example.surfaces)
    clean = victim([words])[0]
    if _argmax(clean) != gold:
        return _result(example, [], True, victim.count, False)

    slots = [i for i, t in enumerate(example.tokens) if lexicon.candidates(t.surface, t.pos)]
    if not slots:
        return _result(example, [], False, victim.count, True)
    cands = {i: lexicon.candidates(example.tokens[i].surface, example.tokens[i].pos) for i in slots}
    rng = np.random.default_rng([config.seed, example.id])

    def mutate(member):
        i = slots[rng.integers(len(slots))]
        cs = cands[i]
        out = list(member)
        out[i] = cs[rng.integers(len(cs))]
        return out

    def to_subs(member):
        return [Substitution(i, words[i], member[i]) for i in range(len(words)) if member[i] != words[i]]

    pop = [mutate(words) for _ in range(config.population)]
    best_member, best_fit = None, -np.inf
    for gen in range(config.generations + 1):
        logits = victim(pop)
        probs = softmax(logits)
        fit = np.delete(probs, gold, axis=1).max(axis=1)
        elite = int(np.argmax(fit))
        if history is not None:
            history.append(float(fit[elite]))
        # decide on logits: near-equal logits can tie exactly once softmaxed
        fooled = np.flatnonzero(logits.argmax(axis=1) != gold)
        if len(fooled):
            return _result(example, to_subs(pop[fooled[0]]), True, victim.count, True)
        if fit[elite] > best_fit:
            best_member, best_fit = pop[elite], float(fit[elite])
        if gen == config.generations:
            break
        total = fit.sum()
        sel = fit / total if total > 0 else np.full(len(pop), 1.0 / len(pop))
        children = [pop[elite]]
        while len(children) < config.population:
            a, b = rng.choice(len(pop), size=2, p=sel)
            pick = rng.random(len(words)) < 0.5
            child = [pop[a][i] if pick[i] else pop[b][i] for i in range(len(words))]
            children.append(mutate(child))
        pop = children
    return _result(example, to_subs(best_member), False, victim.count, True)


def attack_by_name(name: str, **params) -> Callable[[Victim, Example, Lexicon], AdversarialResult]:
    name = name.upper()
    if name == "PWWS":
        return pwws_attack
    if name == "GA":
        cfg = GAConfig(**params)
        return _GA(cfg)
    raise ValueError(f"unknown attack {name!r}")


@dataclass(frozen=True)
class _GA:
    config: GAConfig = field(default_factory=GAConfig)

    def __call__(self, victim, example, lexicon):
        return ga_attack(victim, example, lexicon, self.config)
