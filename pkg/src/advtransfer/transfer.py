"""Cross-model transfer rates, base (twin) rates, factor significance, class-level tables."""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ._parallel import parallel_map
from .attacks import AdversarialResult
from .corpus import Dataset, Example
from .lexicon import Lexicon
from .zoo import Classifier, ModelSpec, TrainConfig, train
from .zoo.spec import FACTOR_AXES

AdvSet = list[tuple[tuple[str, ...], int]]
Attack = Callable[..., AdversarialResult]


@dataclass(frozen=True)
class Budget:
    attacked: int = 200
    transferred: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.transferred > self.attacked:
            raise ValueError("budget.transferred must not exceed budget.attacked")
        if self.attacked < 1 or self.transferred < 1:
            raise ValueError("budgets must be positive")


def transfer_rate(adv_set: AdvSet, target) -> float:
    """Fraction of adversarial inputs the target misclassifies."""
    if not adv_set:
        raise ValueError("empty adversarial set")
    preds = target([s for s, _ in adv_set]).argmax(axis=1)
    gold = np.array([y for _, y in adv_set])
    return float(np.mean(preds != gold))


def attack_pool(data: Dataset, budget: Budget) -> list[Example]:
    """The seed-sampled test examples every source attacks."""
    n = min(budget.attacked, len(data.test))
    idx = np.random.default_rng(budget.seed).choice(len(data.test), size=n, replace=False)
    return [data.test[i] for i in idx]


def _source_rng(budget: Budget, model_id: str) -> np.random.Generator:
    return np.random.default_rng([budget.seed, zlib.crc32(model_id.encode())])


def select_transfer_set(results: Sequence[AdversarialResult], budget: Budget, model_id: str) -> AdvSet:
    """Sample up to ``budget.transferred`` genuine successes (clean-correct, now fooled)."""
    wins = [r for r in results if r.success and r.clean_correct]
    if len(wins) > budget.transferred:
        keep = np.sort(_source_rng(budget, model_id).choice(len(wins), budget.transferred, replace=False))
        wins = [wins[i] for i in keep]
    return [(tuple(r.surfaces), r.label) for r in wins]


def attack_source(model, attack: Attack, examples: Sequence[Example], lexicon: Lexicon) -> list[AdversarialResult]:
    return [attack(model, ex, lexicon) for ex in examples]


def _source_job(model, attack, examples, lexicon, budget):
    results = attack_source(model, attack, examples, lexicon)
    return select_transfer_set(results, budget, model.id), results


def adversarial_sets(models: Sequence[Classifier], attack: Attack, data: Dataset, lexicon: Lexicon,
                     budget: Budget, workers: int = 1) -> dict[str, AdvSet]:
    pool = attack_pool(data, budget)
    out = parallel_map(partial(_source_job, attack=attack, examples=pool, lexicon=lexicon, budget=budget),
                       models, workers)
    return {m.id: adv for m, (adv, _) in zip(models, out)}


@dataclass
class TransferMatrix:
    model_ids: list[str]
    rates: np.ndarray
    sample_size: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        n = len(self.model_ids)
        if self.rates.shape != (n, n):
            raise ValueError(f"rates must be {n}x{n}")
        ok = np.isnan(self.rates) | ((self.rates >= 0) & (self.rates <= 1))
        if not ok.all():
            raise ValueError("transfer rates must lie in [0, 1]")
        self.sample_size = np.asarray(self.sample_size, dtype=int)
        self._index = {m: i for i, m in enumerate(self.model_ids)}

    def index(self, model_id: str) -> int:
        return self._index[model_id]

    def r(self, source: str, target: str) -> float:
        return float(self.rates[self._index[source], self._index[target]])

    def defined(self, source: str) -> bool:
        return not np.isnan(self.rates[self._index[source]]).all()

    def subset(self, ids: Sequence[str]) -> "TransferMatrix":
        idx = [self._index[i] for i in ids]
        return TransferMatrix(list(ids), self.rates[np.ix_(idx, idx)], self.sample_size[idx])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source\\target", *self.model_ids, "n"])
            for i, s in enumerate(self.model_ids):
                cells = ["NA" if np.isnan(v) else f"{v:.6f}" for v in self.rates[i]]
                w.writerow([s, *cells, int(self.sample_size[i])])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TransferMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        ids = rows[0][1:-1]
        rates = [[np.nan if c == "NA" else float(c) for c in row[1:-1]] for row in rows[1:]]
        sizes = [int(row[-1]) for row in rows[1:]]
        return cls(ids, np.array(rates), np.array(sizes))


def matrix_from_sets(sets: Mapping[str, AdvSet], targets: Sequence[Classifier], workers: int = 1) -> TransferMatrix:
    """Evaluate each source's adversarial set on every target; empty sets give NA rows."""
    ids = [t.id for t in targets]
    rates = np.full((len(ids), len(ids)), np.nan)
    sizes = np.zeros(len(ids), dtype=int)
    rows = parallel_map(partial(_row_job, targets=targets), [sets[i] for i in ids], workers)
    for i, row in enumerate(rows):
        sizes[i] = len(sets[ids[i]])
        if row is not None:
            rates[i] = row
    return TransferMatrix(ids, rates, sizes)


def _row_job(adv, targets):
    if not adv:
        return None
    return [transfer_rate(adv, t) for t in targets]


def build_transfer_matrix(models: Sequence[Classifier], attack: Attack, data: Dataset, lexicon: Lexicon,
                          budget: Budget = Budget(), workers: int = 1) -> TransferMatrix:
    sets = adversarial_sets(models, attack, data, lexicon, budget, workers)
    return matrix_from_sets(sets, models, workers)


def twin_rate(adv_set: AdvSet, twin) -> float:
    """Base rate: adversarial examples of one twin evaluated on the other (NaN if none)."""
    return transfer_rate(adv_set, twin) if adv_set else float("nan")


def base_transfer_rate(spec: ModelSpec, data: Dataset, lexicon: Lexicon, attack: Attack,
                       budget: Budget = Budget(), hyper: TrainConfig = TrainConfig()) -> float:
    """Train seed and seed+1 instances, attack the first, evaluate on the second."""
    a = train(spec, data, hyper)
    b = train(spec.with_seed(spec.seed + 1), data, hyper)
    adv = adversarial_sets([a], attack, data, lexicon, budget)[a.id]
    return twin_rate(adv, b)


# -- aggregates ----------------------------------------------------------------


def variant_pairs(matrix: TransferMatrix, axis: str) -> list[tuple[str, str]]:
    """(source, target) pairs whose specs differ in exactly ``axis``."""
    if axis not in FACTOR_AXES:
        raise ValueError(f"unknown factor axis {axis!r}")
    specs = {m: ModelSpec.parse(m) for m in matrix.model_ids}
    return [(s, t) for t in matrix.model_ids for s in matrix.model_ids
            if s != t and specs[s].differs_only_in(specs[t]) == axis]


def factor_significance(matrix: TransferMatrix, base_rates: Mapping[str, float], axis: str) -> float:
    """Mean of |r(source, target) - base(target)| over single-axis variant pairs."""
    vals = []
    for s, t in variant_pairs(matrix, axis):
        r = matrix.r(s, t)
        base = base_rates.get(t, np.nan)
        if np.isnan(r) or np.isnan(base):
            continue
        vals.append(abs(r - base))
    if not vals:
        raise ValueError(f"no qualifying model pairs for factor {axis!r}")
    return float(np.mean(vals))


@dataclass
class FactorReport:
    scores: dict[str, float]
    base_rates: dict[str, float]
    pair_counts: dict[str, int] = field(default_factory=dict)

    def ranking(self) -> list[str]:
        return sorted(self.scores, key=lambda a: -self.scores[a])

    def to_json(self) -> str:
        return json.dumps({
            "factors": [{"factor": a, "score": round(self.scores[a], 6), "pairs": self.pair_counts.get(a, 0)}
                        for a in self.ranking()],
            "base_rates": {k: (None if np.isnan(v) else round(v, 6)) for k, v in sorted(self.base_rates.items())},
        }, indent=2)


def factor_report(matrix: TransferMatrix, base_rates: Mapping[str, float],
                  axes: Sequence[str] = FACTOR_AXES) -> FactorReport:
    scores = {a: factor_significance(matrix, base_rates, a) for a in axes}
    counts = {a: len(variant_pairs(matrix, a)) for a in axes}
    return FactorReport(scores, dict(base_rates), counts)


def class_level_matrix(matrix: TransferMatrix, grouping: Mapping[str, str],
                       classes: Sequence[str] | None = None) -> tuple[list[str], np.ndarray]:
    """Mean r(s, t) over s in class i and t in class j, skipping s == t and NA rows."""
    missing = [m for m in matrix.model_ids if m not in grouping]
    if missing:
        raise ValueError(f"models without a class: {missing}")
    if classes is None:
        classes = list(dict.fromkeys(grouping[m] for m in matrix.model_ids))
    members = {c: [m for m in matrix.model_ids if grouping[m] == c] for c in classes}
    for c, ms in members.items():
        if not ms:
            raise ValueError(f"empty class {c!r}")
    out = np.full((len(classes), len(classes)), np.nan)
    for i, ci in enumerate(classes):
        for j, cj in enumerate(classes):
            vals = [matrix.r(s, t) for s in members[ci] for t in members[cj] if s != t]
            vals = [v for v in vals if not np.isnan(v)]
            if vals:
                out[i, j] = float(np.mean(vals))
    return list(classes), out


def incoming_inter_rate(matrix: TransferMatrix, target: str) -> float:
    """Mean rate at which other models' adversarial examples fool ``target``."""
    vals = [matrix.r(s, target) for s in matrix.model_ids if s != target]
    vals = [v for v in vals if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")
