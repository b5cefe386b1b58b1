"""Logit-averaging ensembles and the search for a strongly transferring member set."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .transfer import TransferMatrix
from .zoo import ModelSpec


class EnsembleModel:
    """Victim whose logits are the elementwise mean of its members' logits."""

    def __init__(self, members: Sequence):
        if not members:
            raise ValueError("an ensemble needs at least one member")
        ids = [m.id for m in members]
        if len(set(ids)) != len(ids):
            raise ValueError("ensemble members must be distinct")
        self.members = list(members)

    @property
    def id(self) -> str:
        return "+".join(m.id for m in self.members)

    @property
    def label_count(self) -> int:
        return self.members[0].label_count

    def __call__(self, batch) -> np.ndarray:
        return ensemble_logits(self, batch)

    def logits(self, tokens) -> np.ndarray:
        return self([[t if isinstance(t, str) else t.surface for t in tokens]])[0]


def ensemble_logits(ensemble: EnsembleModel, batch) -> np.ndarray:
    total = None
    for m in ensemble.members:
        out = m(batch)
        total = out.copy() if total is None else total + out
    return total / len(ensemble.members)


@dataclass(frozen=True)
class EnsembleCandidate:
    members: tuple[str, ...]
    fitness: float

    def to_record(self, config: "SearchConfig | None" = None) -> dict:
        rec = {"members": list(self.members), "fitness": round(self.fitness, 9)}
        if config is not None:
            rec["config"] = asdict(config)
            rec["seed"] = config.seed
        return rec


@dataclass(frozen=True)
class SearchConfig:
    population: int = 20
    generations: int = 50
    size: int = 3
    mutation_prob: float = 0.3
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism count must be < population")
        if self.size < 1 or self.generations < 1:
            raise ValueError("size and generations must be >= 1")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")


def fitness(members: Sequence[str], matrix: TransferMatrix, pool: Sequence[str] | None = None) -> float:
    """Mean over targets in ``pool`` of the best member-to-target rate."""
    pool = list(matrix.model_ids if pool is None else pool)
    total = 0.0
    for t in pool:
        best = max(matrix.r(s, t) for s in members)
        if np.isnan(best) or any(np.isnan(matrix.r(s, t)) for s in members):
            raise ValueError(f"missing transfer rate for a member against target {t}")
        total += best
    return total / len(pool)


class _Scorer:
    """Memoized fitness over index tuples into the pool."""

    def __init__(self, matrix: TransferMatrix, pool: Sequence[str]):
        idx = [matrix.index(p) for p in pool]
        self.sub = matrix.rates[np.ix_(idx, idx)]
        if np.isnan(self.sub).any():
            raise ValueError("transfer matrix has missing entries inside the pool")
        self.cache: dict[tuple[int, ...], float] = {}

    def __call__(self, cand: tuple[int, ...]) -> float:
        hit = self.cache.get(cand)
        if hit is None:
            col_max = self.sub[list(cand)].max(axis=0)
            total = 0.0
            for v in col_max.tolist():
                total += v
            hit = self.cache[cand] = total / len(col_max)
        return hit


@dataclass
class SearchLog:
    generations: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def best_trace(self) -> list[float]:
        return [b for _, b, _ in self.generations]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best_fitness", "mean_fitness"])
            for g, b, m in self.generations:
                w.writerow([g, f"{b:.9f}", f"{m:.9f}"])


def _wheel(fits):
    """Cumulative selection probabilities, proportional to fitness (uniform if all zero)."""
    total = fits.sum()
    p = fits / total if total > 0 else np.full(len(fits), 1.0 / len(fits))
    cdf = np.cumsum(p)
    return cdf / cdf[-1]


def _spin(rng, cdf) -> int:
    # draws exactly as Generator.choice(n, p=p) does, without re-validating p per draw
    return int(cdf.searchsorted(rng.random(), side="right"))


def crossover(rng, a: tuple[int, ...], b: tuple[int, ...], size: int) -> tuple[int, ...]:
    """Child of two parents: ``size`` distinct members drawn from their union."""
    union = sorted(set(a) | set(b))
    return tuple(sorted(int(x) for x in rng.choice(union, size, replace=False)))


def mutate(rng, cand: tuple[int, ...], n_pool: int, prob: float) -> tuple[int, ...]:
    """With probability ``prob`` swap one member for a pool model outside the candidate."""
    if rng.random() >= prob:
        return cand
    outside = [i for i in range(n_pool) if i not in cand]
    if not outside:
        return cand
    out = list(cand)
    out[rng.integers(len(cand))] = outside[rng.integers(len(outside))]
    return tuple(sorted(out))


def genetic_search(pool: Sequence[str], matrix: TransferMatrix, config: SearchConfig = SearchConfig(),
                   log: SearchLog | None = None) -> EnsembleCandidate:
    """Genetic search over size-m member sets; returns the best candidate ever evaluated."""
    pool = list(pool)
    m, n_pool = config.size, len(pool)
    if m > n_pool:
        raise ValueError(f"ensemble size {m} exceeds pool size {n_pool}")
    score = _Scorer(matrix, pool)
    rng = np.random.default_rng(config.seed)

    pop = [tuple(sorted(int(x) for x in rng.choice(n_pool, m, replace=False))) for _ in range(config.population)]
    best, best_fit = None, -np.inf
    for gen in range(config.generations):
        fits = np.array([score(c) for c in pop])
        top = int(np.argmax(fits))
        if fits[top] > best_fit:
            best, best_fit = pop[top], float(fits[top])
        if log is not None:
            log.generations.append((gen, best_fit, float(fits.mean())))
        if gen == config.generations - 1:
            break
        order = np.argsort(-fits, kind="stable")
        nxt = [pop[i] for i in order[: config.elitism]]
        wheel = _wheel(fits)
        while len(nxt) < config.population:
            a, b = pop[_spin(rng, wheel)], pop[_spin(rng, wheel)]
            for _ in range(2):
                nxt.append(mutate(rng, crossover(rng, a, b, m), n_pool, config.mutation_prob))
        pop = nxt[: config.population]
    return EnsembleCandidate(tuple(pool[i] for i in best), best_fit)


def _diversity_key(cand_spec, member_specs):
    if cand_spec is None or any(s is None for s in member_specs):
        return (0, 0, 0)
    return tuple(int(all(getattr(cand_spec, a) != getattr(s, a) for s in member_specs))
                 for a in ("input_form", "architecture", "embedding_init"))


def _try_parse(model_id):
    try:
        return ModelSpec.parse(model_id)
    except (ValueError, TypeError):
        return None


def greedy_expert_baseline(pool: Sequence[str], matrix: TransferMatrix, size: int) -> EnsembleCandidate:
    """Start from the model with the highest mean outgoing rate, then add the member with the
    largest fitness gain, preferring (among ties) one that differs from every current member
    in input form, then architecture, then embedding init."""
    pool = list(pool)
    if size > len(pool):
        raise ValueError(f"ensemble size {size} exceeds pool size {len(pool)}")
    specs = {p: _try_parse(p) for p in pool}
    row_means = [np.mean([matrix.r(s, t) for t in pool]) for s in pool]
    chosen = [pool[int(np.argmax(row_means))]]
    current = fitness(chosen, matrix, pool)
    while len(chosen) < size:
        gains = [(p, fitness(chosen + [p], matrix, pool) - current) for p in pool if p not in chosen]
        top = max(g for _, g in gains)
        tied = [p for p, g in gains if g >= top - 1e-9]
        member_specs = [specs[c] for c in chosen]
        pick = max(tied, key=lambda p: (_diversity_key(specs[p], member_specs), -pool.index(p)))
        chosen.append(pick)
        current = fitness(chosen, matrix, pool)
    return EnsembleCandidate(tuple(chosen), current)


def write_candidate(cand: EnsembleCandidate, path: str | Path, config: SearchConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cand.to_record(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
