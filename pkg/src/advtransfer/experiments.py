"""End-to-end pipelines behind the CLI: zoo training, transfer matrices, factor study,
ensemble sweep and rule mining/evaluation.

Expensive artifacts are cached under the output directory by content hash: a model by
(spec, data hash, training config), an adversarial set by (model key, attack, budget,
lexicon hash). Every file a pipeline writes is recorded in ``manifest.json``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plotting
from ._parallel import parallel_map
from .attacks import AdversarialResult, Substitution, apply_substitutions, attack_by_name, modified_fraction
from .config import ConfigError, ExperimentConfig
from .corpus import Dataset, load_dataset, read_pos_lexicon, train_test_split
from .ensemble import EnsembleModel, SearchLog, fitness, genetic_search, greedy_expert_baseline, write_candidate
from .lexicon import Lexicon, load_lexicon
from .rules import RuleSet, evaluate_rules, input_form_group, mine_partial, pmi_rules, pmi_table
from .transfer import (
    AdvSet,
    TransferMatrix,
    attack_pool,
    class_level_matrix,
    factor_report,
    incoming_inter_rate,
    matrix_from_sets,
    select_transfer_set,
    transfer_rate,
    variant_pairs,
)
from .zoo import FACTOR_AXES, Classifier, ModelSpec, load_classifier, save_classifier, train

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    """A pipeline could not produce its result; maps to exit code 2."""


# -- bookkeeping -----------------------------------------------------------------


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Every artifact written under the output root, with its content hash."""

    def __init__(self, root: Path, config_hash: str):
        self.root = Path(root)
        self.config_hash = config_hash
        self.path = self.root / "manifest.json"
        self.entries: dict[str, dict] = {}
        if self.path.exists():
            try:
                self.entries = json.loads(self.path.read_text(encoding="utf-8")).get("artifacts", {})
            except (json.JSONDecodeError, AttributeError):
                self.entries = {}

    def add(self, path: Path) -> Path:
        rel = Path(path).resolve().relative_to(self.root.resolve()).as_posix()
        self.entries[rel] = {"sha256": sha256_file(path), "config_hash": self.config_hash}
        return path

    def write(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        for rel in [r for r in self.entries if not (self.root / r).exists()]:
            del self.entries[rel]
        body = {"config_hash": self.config_hash, "artifacts": dict(sorted(self.entries.items()))}
        self.path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
        return self.path


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], manifest: Manifest) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return manifest.add(path)


def _fmt(x: float, nd: int = 6) -> str:
    return "NA" if x is None or np.isnan(x) else f"{x:.{nd}f}"


def data_digest(data: Dataset) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(data.labels).encode())
    for split in (data.train, data.test):
        for ex in split:
            h.update(f"{ex.id}\t{ex.label}\t{' '.join(ex.surfaces)}\t{' '.join(t.pos for t in ex.tokens)}\n".encode())
        h.update(b"--split--")
    return h.hexdigest()


def lexicon_digest(lexicon: Lexicon) -> str:
    h = hashlib.sha256()
    for key in sorted(lexicon):
        h.update(f"{key[0]}\t{key[1]}\t{','.join(lexicon[key].candidates)}\n".encode())
    return h.hexdigest()


# -- the lab: resources shared by every pipeline ------------------------------------


@dataclass
class Lab:
    cfg: ExperimentConfig
    data: Dataset
    lexicon: Lexicon
    manifest: Manifest
    models: dict[str, Classifier] = field(default_factory=dict)

    @property
    def out(self) -> Path:
        return self.cfg.out_dir

    @property
    def data_hash(self) -> str:
        return self._data_hash

    def __post_init__(self):
        self._data_hash = data_digest(self.data)
        self._lex_hash = lexicon_digest(self.lexicon)

    def model_key(self, spec: ModelSpec) -> str:
        hyper = self.cfg.hyper(spec)
        # the vectors file enters by content, not location, so a moved run directory still hits
        key = replace(hyper, embeddings_path=None).key()
        if spec.embedding_init != "RANDOM" and hyper.embeddings_path:
            key = hashlib.sha256((key + sha256_file(Path(hyper.embeddings_path))).encode()).hexdigest()[:16]
        return f"{spec.id}__{self._data_hash[:12]}__{key}"

    def finish(self) -> Path:
        return self.manifest.write()


def open_lab(cfg: ExperimentConfig) -> Lab:
    pos = read_pos_lexicon(cfg.path("pos_lexicon")) if cfg.path("pos_lexicon") else None
    data = load_dataset(cfg.path("corpus"), cfg.raw["data"]["format"], pos_lexicon=pos)
    if not data.test:
        data = train_test_split(data, 0.1, cfg.seed)
    lexicon = load_lexicon(cfg.path("lexicon"))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return Lab(cfg, data, lexicon, Manifest(cfg.out_dir, cfg.digest()))


# -- zoo -----------------------------------------------------------------------------


def _train_job(spec: ModelSpec, data: Dataset, hyper, path: str) -> str:
    model = train(spec, data, hyper)
    save_classifier(model, path)
    return path


def get_models(lab: Lab, specs: Sequence[ModelSpec]) -> list[Classifier]:
    """Load cached models, train (in parallel) whatever is missing."""
    model_dir = lab.out / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    paths = {s.id: model_dir / f"{lab.model_key(s)}.npz" for s in specs}
    todo = [s for s in specs if s.id not in lab.models and not paths[s.id].exists()]
    if todo:
        log.info("training %d models (%d cached)", len(todo), len(specs) - len(todo))
        jobs = [(s, str(paths[s.id])) for s in todo]
        parallel_map(partial(_train_pair, data=lab.data, cfg=lab.cfg), jobs, lab.cfg.workers)
    out = []
    for s in specs:
        if s.id not in lab.models:
            lab.models[s.id] = load_classifier(paths[s.id])
        lab.manifest.add(paths[s.id])
        out.append(lab.models[s.id])
    return out


def _train_pair(job, data, cfg):
    spec, path = job
    t0 = time.perf_counter()
    _train_job(spec, data, cfg.hyper(spec), path)
    log.info("trained %s in %.1fs", spec.id, time.perf_counter() - t0)


@dataclass
class ZooResult:
    models: list[Classifier]
    admitted: list[Classifier]
    rejected: list[Classifier]


def train_zoo(lab: Lab) -> ZooResult:
    models = get_models(lab, lab.cfg.specs)
    floor = lab.cfg.admission_floor
    admitted = [m for m in models if m.report.test_accuracy is not None and m.report.test_accuracy >= floor]
    rejected = [m for m in models if m not in admitted]
    for m in rejected:
        log.warning("zoo admission: %s excluded (test accuracy %.3f < %.2f)", m.id, m.report.test_accuracy, floor)
    rows = [[m.id, m.spec.architecture, m.spec.input_form, m.spec.embedding_init, m.spec.depth, m.spec.seed,
             _fmt(m.report.train_accuracy, 4), _fmt(m.report.test_accuracy, 4), int(m in admitted)] for m in models]
    _write_csv(lab.out / "zoo.csv", ["model", "architecture", "input_form", "embedding_init", "depth", "seed",
                                     "train_accuracy", "test_accuracy", "admitted"], rows, lab.manifest)
    return ZooResult(models, admitted, rejected)


def twins_of(lab: Lab, models: Sequence[Classifier]) -> dict[str, Classifier]:
    """Same-spec seed+1 twin of every model, keyed by the original's id."""
    specs = [m.spec.with_seed(m.spec.seed + 1) for m in models]
    twins = get_models(lab, specs)
    return {m.id: t for m, t in zip(models, twins)}


# -- attacks and matrices ----------------------------------------------------------


def _attack_fn(lab: Lab, engine: str):
    return attack_by_name(engine, **lab.cfg.attack_params(engine))


def _attack_key(lab: Lab, engine: str, model: Classifier) -> str:
    payload = json.dumps({"model": lab.model_key(model.spec), "engine": engine,
                          "params": lab.cfg.attack_params(engine), "budget": vars(lab.cfg.budget),
                          "lexicon": lab._lex_hash}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _attack_job(model, attack, examples, lexicon):
    return [attack(model, ex, lexicon) for ex in examples]


def _save_results(path: Path, results: Sequence[AdversarialResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            rec = r.to_record()
            rec.update(label=r.label, clean_correct=r.clean_correct)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _load_results(path: Path, examples: dict) -> list[AdversarialResult]:
    """Rebuild cached results against their source examples."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            ex = examples[rec["id"]]
            subs = [Substitution(int(p), o, w) for p, o, w in rec["substitutions"]]
            out.append(AdversarialResult(ex.id, ex.label, apply_substitutions(ex, subs), subs, rec["success"],
                                         rec["queries"], modified_fraction(ex.tokens, len(subs)),
                                         rec["clean_correct"]))
    return out


def attack_results(lab: Lab, engine: str, models: Sequence[Classifier]) -> dict[str, list[AdversarialResult]]:
    """Per-source attack results on the shared attack pool, cached as JSONL."""
    adv_dir = lab.out / "attacks" / engine
    adv_dir.mkdir(parents=True, exist_ok=True)
    pool = attack_pool(lab.data, lab.cfg.budget)
    paths = {m.id: adv_dir / f"{m.id}__{_attack_key(lab, engine, m)}.jsonl" for m in models}
    todo = [m for m in models if not paths[m.id].exists()]
    if todo:
        log.info("%s: attacking %d sources on %d examples", engine, len(todo), len(pool))
        fresh = parallel_map(partial(_attack_job, attack=_attack_fn(lab, engine), examples=pool,
                                     lexicon=lab.lexicon), todo, lab.cfg.workers)
        for m, res in zip(todo, fresh):
            _save_results(paths[m.id], res)
    by_id = {ex.id: ex for ex in pool}
    out = {}
    for m in models:
        lab.manifest.add(paths[m.id])
        out[m.id] = _load_results(paths[m.id], by_id)
    return out


def adversarial_sets_for(lab: Lab, engine: str, models: Sequence[Classifier]) -> dict[str, AdvSet]:
    results = attack_results(lab, engine, models)
    return {m.id: select_transfer_set(results[m.id], lab.cfg.budget, m.id) for m in models}


def transfer_matrix(lab: Lab, engine: str, models: Sequence[Classifier]) -> tuple[TransferMatrix, dict[str, AdvSet]]:
    sets = adversarial_sets_for(lab, engine, models)
    matrix = matrix_from_sets(sets, models)
    path = lab.out / f"transfer_{engine}.csv"
    matrix.to_csv(path)
    lab.manifest.add(path)
    for mid, adv in sets.items():
        if not adv:
            log.warning("%s: source %s produced no successful adversarial examples; row is NA", engine, mid)
    return matrix, sets


def base_rates(sets: dict[str, AdvSet], twins: dict[str, Classifier]) -> dict[str, float]:
    """Each model's own adversarial set evaluated on its seed+1 twin."""
    return {mid: (transfer_rate(adv, twins[mid]) if adv else float("nan")) for mid, adv in sets.items()}


def run_transfer_matrix(cfg: ExperimentConfig) -> dict[str, TransferMatrix]:
    lab = open_lab(cfg)
    zoo = train_zoo(lab)
    out = {engine: transfer_matrix(lab, engine, zoo.admitted)[0] for engine in cfg.engines}
    lab.finish()
    return out


def run_attack(cfg: ExperimentConfig, model_id: str, engine: str) -> Path:
    lab = open_lab(cfg)
    try:
        spec = ModelSpec.parse(model_id)
    except (ValueError, TypeError):
        raise ConfigError(f"bad model id {model_id!r}") from None
    model = get_models(lab, [spec])[0]
    results = attack_results(lab, engine, [model])[model.id]
    path = lab.out / f"attack_{engine}_{model.id}.jsonl"
    _save_results(path, results)
    lab.manifest.add(path)
    ok = [r for r in results if r.clean_correct]
    rows = [[model.id, engine, len(results), len(ok), sum(r.success for r in ok),
             _fmt(np.mean([r.success for r in ok]) if ok else float("nan"), 4),
             _fmt(np.mean([r.word_modified_fraction for r in ok]) if ok else float("nan"), 4),
             _fmt(np.mean([r.queries for r in results]), 1)]]
    _write_csv(lab.out / f"attack_{engine}_{model.id}.csv",
               ["model", "attack", "attacked", "clean_correct", "successes", "success_rate", "word_fraction",
                "mean_queries"], rows, lab.manifest)
    lab.finish()
    return path


# -- factor study --------------------------------------------------------------------


def missing_axes(specs: Sequence[ModelSpec]) -> list[str]:
    """Factor axes with no same-seed pair of specs differing in exactly that axis."""
    have = set()
    for a in specs:
        for b in specs:
            axis = a.differs_only_in(b)
            if axis:
                have.add(axis)
    return [a for a in FACTOR_AXES if a not in have]


_AXIS_CLASS = {
    "input_form": lambda s: s.input_form,
    "architecture": lambda s: s.architecture,
    "embedding_init": lambda s: s.embedding_init,
    "depth": lambda s: f"depth{s.depth}",
}


@dataclass
class FactorStudy:
    scores: dict[str, dict[str, float]]  # engine -> axis -> score
    base: dict[str, dict[str, float]]  # engine -> model -> base rate
    incoming: dict[str, dict[str, float]]  # engine -> model -> mean inter-model incoming rate
    matrices: dict[str, TransferMatrix]


def run_factor_study(cfg: ExperimentConfig) -> FactorStudy:
    gaps = missing_axes(cfg.specs)
    if gaps:
        raise ConfigError(f"zoo grid has no single-factor contrast for axis: {', '.join(gaps)}")
    lab = open_lab(cfg)
    zoo = train_zoo(lab)
    gaps = missing_axes([m.spec for m in zoo.admitted])
    if gaps:
        raise ExperimentError(f"zoo admission removed every contrast for axis: {', '.join(gaps)}")
    twins = twins_of(lab, zoo.admitted)
    scores, bases, incoming, matrices = {}, {}, {}, {}
    for engine in cfg.engines:
        matrix, sets = transfer_matrix(lab, engine, zoo.admitted)
        base = base_rates(sets, twins)
        try:
            report = factor_report(matrix, base)
        except ValueError as exc:
            raise ExperimentError(f"{engine}: {exc}") from None
        matrices[engine], scores[engine], bases[engine] = matrix, report.scores, base
        incoming[engine] = {m: incoming_inter_rate(matrix, m) for m in matrix.model_ids}
        path = lab.out / f"factor_report_{engine}.json"
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        lab.manifest.add(path)
        for axis in FACTOR_AXES:
            grouping = {m.id: _AXIS_CLASS[axis](m.spec) for m in zoo.admitted}
            classes, table = class_level_matrix(matrix, grouping)
            _write_csv(lab.out / f"class_{axis}_{engine}.csv", ["source\\target", *classes],
                       [[c, *[_fmt(v) for v in row]] for c, row in zip(classes, table)], lab.manifest)

    engines = cfg.engines
    rows = []
    for axis in FACTOR_AXES:
        pairs = len(variant_pairs(matrices[engines[0]], axis))
        rows.append([axis, *[_fmt(scores[e][axis]) for e in engines], pairs])
    _write_csv(lab.out / "factor_table.csv", ["factor", *engines, "pairs"], rows, lab.manifest)
    rows = [[mid, e, _fmt(bases[e][mid]), _fmt(incoming[e][mid]),
             int(bases[e][mid] > incoming[e][mid]) if not np.isnan(bases[e][mid]) else "NA"]
            for e in engines for mid in matrices[e].model_ids]
    _write_csv(lab.out / "base_rates.csv", ["model", "attack", "base_rate", "incoming_inter_rate", "intra_gt_inter"],
               rows, lab.manifest)
    path = plotting.emit_bars(list(FACTOR_AXES), {e.upper(): [scores[e][a] for a in FACTOR_AXES] for e in engines},
                              lab.out / "factor_study.svg", title="Factor significance",
                              ylabel="mean |r - base|")
    lab.manifest.add(path)
    lab.finish()
    return FactorStudy(scores, bases, incoming, matrices)


# -- ensemble sweep ------------------------------------------------------------------


def held_out_examples(lab: Lab, n: int) -> list:
    """Seed-sampled test examples outside the matrix attack pool."""
    used = {ex.id for ex in attack_pool(lab.data, lab.cfg.budget)}
    rest = [ex for ex in lab.data.test if ex.id not in used]
    if not rest:
        rest = list(lab.data.test)
    rng = np.random.default_rng([lab.cfg.seed, 1])
    idx = np.sort(rng.choice(len(rest), size=min(n, len(rest)), replace=False))
    return [rest[i] for i in idx]


def realized_transfer(lab: Lab, members: Sequence[Classifier], targets: Sequence[Classifier], examples,
                      engine: str) -> float:
    """Attack ``examples`` with the logit-averaged ensemble; mean transfer rate over targets."""
    victim = EnsembleModel(members) if len(members) > 1 else members[0]
    attack = _attack_fn(lab, engine)
    results = [attack(victim, ex, lab.lexicon) for ex in examples]
    adv = [(tuple(r.surfaces), r.label) for r in results if r.success and r.clean_correct]
    if not adv or not targets:
        return float("nan")
    return float(np.mean([transfer_rate(adv, t) for t in targets]))


@dataclass
class SweepPoint:
    size: int
    genetic: tuple[str, ...]
    genetic_fitness: float
    genetic_fitness_mean: float
    greedy: tuple[str, ...]
    greedy_fitness: float
    genetic_realized: float
    greedy_realized: float
    single_realized: float
    genetic_realized_own: float
    greedy_realized_own: float


def ensemble_engine(cfg: ExperimentConfig) -> str:
    return cfg.engines[0]


def search_ensemble(lab: Lab, matrix: TransferMatrix, pool: Sequence[str], size: int,
                    seeds: Sequence[int]) -> tuple[tuple[str, ...], float, float]:
    """Best candidate over search seeds (first wins ties), plus the mean best fitness."""
    exclude = bool(lab.cfg.raw["ensemble"]["exclude_members_from_fitness"])
    best, best_fit, fits = None, -np.inf, []
    for seed in seeds:
        conf = lab.cfg.search_config(size, seed)
        slog = SearchLog()
        cand = genetic_search(pool, matrix, conf, slog)
        fit = cand.fitness
        if exclude:
            fit = fitness(cand.members, matrix, [p for p in pool if p not in cand.members])
        fits.append(fit)
        search_dir = lab.out / "ensemble" / "search"
        search_dir.mkdir(parents=True, exist_ok=True)
        slog.to_csv(search_dir / f"m{size}_seed{seed}.csv")
        lab.manifest.add(search_dir / f"m{size}_seed{seed}.csv")
        write_candidate(cand, search_dir / f"m{size}_seed{seed}.json", conf)
        lab.manifest.add(search_dir / f"m{size}_seed{seed}.json")
        if fit > best_fit:
            best, best_fit = cand.members, fit
    return best, best_fit, float(np.mean(fits))


def run_ensemble_sweep(cfg: ExperimentConfig) -> list[SweepPoint]:
    lab = open_lab(cfg)
    zoo = train_zoo(lab)
    engine = ensemble_engine(cfg)
    matrix, sets = transfer_matrix(lab, engine, zoo.admitted)
    pool = [m for m in matrix.model_ids if matrix.defined(m)]
    sizes = [int(m) for m in cfg.raw["ensemble"]["sizes"]]
    too_big = [m for m in sizes if m > len(pool)]
    if too_big:
        raise ConfigError(f"ensemble size {max(too_big)} exceeds the pool of {len(pool)} usable models")
    twins = twins_of(lab, [lab.models[p] for p in pool])
    base = base_rates({p: sets[p] for p in pool}, twins)
    sub = matrix.subset(pool)
    off = sub.rates[~np.eye(len(pool), dtype=bool)]
    mean_base = float(np.nanmean(list(base.values())))
    mean_pairs = float(np.nanmean(off))
    held = held_out_examples(lab, int(cfg.raw["ensemble"]["held_out"]))
    single = greedy_expert_baseline(pool, matrix, 1).members
    seeds = [int(s) for s in cfg.raw["ensemble"]["search_seeds"]] or [cfg.seed]

    points = []
    for size in sizes:
        gen, gen_fit, gen_mean = search_ensemble(lab, matrix, pool, size, seeds)
        greedy = greedy_expert_baseline(pool, matrix, size)
        used = set(gen) | set(greedy.members) | set(single)
        common = [lab.models[p] for p in pool if p not in used]

        def realized(members, targets):
            return realized_transfer(lab, [lab.models[m] for m in members], targets, held, engine)

        own = lambda members: [lab.models[p] for p in pool if p not in members]  # noqa: E731
        points.append(SweepPoint(
            size, gen, gen_fit, gen_mean, greedy.members, greedy.fitness,
            realized(gen, common), realized(greedy.members, common), realized(single, common),
            realized(gen, own(gen)), realized(greedy.members, own(greedy.members)),
        ))
        log.info("m=%d genetic %.3f greedy %.3f single %.3f", size, points[-1].genetic_realized,
                 points[-1].greedy_realized, points[-1].single_realized)

    rows = [[p.size, _fmt(p.genetic_fitness), _fmt(p.genetic_fitness_mean), _fmt(p.greedy_fitness),
             _fmt(p.genetic_realized), _fmt(p.greedy_realized), _fmt(p.single_realized),
             _fmt(p.genetic_realized_own), _fmt(p.greedy_realized_own), "+".join(p.genetic), "+".join(p.greedy)]
            for p in points]
    _write_csv(lab.out / "ensemble_sweep.csv",
               ["m", "genetic_fitness_best", "genetic_fitness_mean", "greedy_fitness", "genetic_realized",
                "greedy_realized", "single_realized", "genetic_realized_nonmembers", "greedy_realized_nonmembers",
                "genetic_members", "greedy_members"], rows, lab.manifest)
    _write_csv(lab.out / "ensemble_reference.csv", ["line", "value"],
               [["mean_base_rate", _fmt(mean_base)], ["mean_all_pairs_rate", _fmt(mean_pairs)],
                ["best_single_model", single[0]]], lab.manifest)
    xs = [p.size for p in points]
    path = plotting.emit_plot(
        [plotting.Series("genetic search", xs, [p.genetic_realized for p in points]),
         plotting.Series("expert greedy", xs, [p.greedy_realized for p in points], marker="s")],
        [plotting.ReferenceLine("mean base rate", mean_base, ":"),
         plotting.ReferenceLine("mean all-pairs rate", mean_pairs, "--")],
        lab.out / "ensemble_sweep.svg", title="Transfer of ensemble attacks",
        xlabel="ensemble size m", ylabel="transfer rate")
    lab.manifest.add(path)
    lab.finish()
    return points


# -- rules ---------------------------------------------------------------------------


def _mine_job(chunk, ensemble, lexicon):
    return mine_partial(ensemble, chunk, lexicon)


def mine_rules(lab: Lab, ensemble) -> RuleSet:
    """UAWR mining in example chunks; the fsum-based merge is partition-independent."""
    train_set = list(lab.data.train)
    n = max(1, lab.cfg.workers * 4)
    chunks = [train_set[i::n] for i in range(n)]
    parts = parallel_map(partial(_mine_job, ensemble=ensemble, lexicon=lab.lexicon), chunks, lab.cfg.workers)
    acc = parts[0]
    for p in parts[1:]:
        acc.merge(p)
    return acc.rules(int(lab.cfg.raw["rules"]["min_support"]))


def rule_ensemble(lab: Lab, pool_models: Sequence[Classifier]) -> tuple[str, ...]:
    ids = lab.cfg.raw["rules"]["ensemble"]
    if ids:
        known = {m.id for m in pool_models}
        bad = [i for i in ids if i not in known]
        if bad:
            raise ConfigError(f"rules.ensemble names models outside the admitted zoo: {bad}")
        return tuple(ids)
    engine = ensemble_engine(lab.cfg)
    matrix, _ = transfer_matrix(lab, engine, pool_models)
    pool = [m for m in matrix.model_ids if matrix.defined(m)]
    size = int(lab.cfg.raw["rules"]["ensemble_size"])
    if size > len(pool):
        raise ConfigError(f"rules.ensemble_size {size} exceeds the pool of {len(pool)} usable models")
    members, _, _ = search_ensemble(lab, matrix, pool, size, [lab.cfg.seed])
    return members


def _rules_paths(lab: Lab) -> dict[str, Path]:
    d = lab.out / "rules"
    return {"uawr": d / "rules_uawr.tsv", "pmi": d / "rules_pmi.tsv", "table": d / "pmi_table.tsv",
            "ensemble": d / "ensemble.json"}


def run_mine_rules(cfg: ExperimentConfig, lab: Lab | None = None) -> tuple[RuleSet, RuleSet, tuple[str, ...]]:
    own = lab is None
    lab = lab or open_lab(cfg)
    zoo = train_zoo(lab)
    members = rule_ensemble(lab, zoo.admitted)
    ensemble = EnsembleModel([lab.models[m] for m in members])
    uawr = mine_rules(lab, ensemble)
    table = pmi_table(lab.data)
    pmi = pmi_rules(lab.data, lab.lexicon, int(cfg.raw["rules"]["min_support"]), table)
    if not len(uawr) or not len(pmi):
        raise ExperimentError("rule set is empty after support filtering")
    paths = _rules_paths(lab)
    paths["uawr"].parent.mkdir(parents=True, exist_ok=True)
    uawr.to_tsv(paths["uawr"])
    pmi.to_tsv(paths["pmi"])
    table.to_tsv(paths["table"])
    paths["ensemble"].write_text(json.dumps({"members": list(members)}, indent=2) + "\n", encoding="utf-8")
    for p in paths.values():
        lab.manifest.add(p)
    _write_top_rules(lab, uawr, table)
    if own:
        lab.finish()
    return uawr, pmi, members


def _write_top_rules(lab: Lab, rules: RuleSet, table) -> None:
    labels = lab.data.labels
    k = int(lab.cfg.raw["rules"]["top"])
    header = ["label", "rule", "salience", "support"]
    for name in labels:
        header += [f"pmi_before_{name}", f"pmi_after_{name}"]
    rows = []
    for y, name in enumerate(labels):
        for r in rules.top(y, k):
            row = [name, f"{r.original} -> {r.replacement}", f"{r.salience:.6f}", r.support]
            for z in range(len(labels)):
                row += [f"{table.value(r.original, z):.6f}", f"{table.value(r.replacement, z):.6f}"]
            rows.append(row)
    _write_csv(lab.out / "rules" / "top_rules.csv", header, rows, lab.manifest)


@dataclass
class RuleEvaluation:
    rhos: list[float]
    groups: list[str]
    uawr: dict[float, dict[str, tuple[float, float]]]
    pmi: dict[float, dict[str, tuple[float, float]]]
    victims: list[str]


def _eval_job(rho, rules, victims, test):
    return evaluate_rules(rules, victims, test, rho, group_of=input_form_group)


def run_eval_rules(cfg: ExperimentConfig, lab: Lab | None = None) -> RuleEvaluation:
    own = lab is None
    lab = lab or open_lab(cfg)
    paths = _rules_paths(lab)
    if not paths["uawr"].exists() or not paths["pmi"].exists():
        raise ExperimentError("no mined rules found; run mine-rules first")
    uawr, pmi = RuleSet.from_tsv(paths["uawr"]), RuleSet.from_tsv(paths["pmi"])
    members = set(json.loads(paths["ensemble"].read_text(encoding="utf-8"))["members"])
    zoo = train_zoo(lab)
    victims = [m for m in zoo.admitted if m.id not in members]
    if not victims:
        raise ExperimentError("no victims left once ensemble members are excluded")
    rhos = [float(r) for r in cfg.raw["rules"]["rhos"]]
    test = list(lab.data.test)
    res_u = parallel_map(partial(_eval_job, rules=uawr, victims=victims, test=test), rhos, cfg.workers)
    res_p = parallel_map(partial(_eval_job, rules=pmi, victims=victims, test=test), rhos, cfg.workers)
    groups = [g for g in ("WORD", "CHAR", "ALL") if g in res_u[0]["groups"]]

    rows = []
    for rho, ru, rp in zip(rhos, res_u, res_p):
        for su, sp in zip(ru["victims"], rp["victims"]):
            rows.append([f"{rho:.2f}", su.victim, su.group, su.attacked, f"{su.succ:.2f}", f"{su.word:.2f}",
                         f"{sp.succ:.2f}", f"{sp.word:.2f}"])
    _write_csv(lab.out / "rules" / "rule_victims.csv",
               ["rho", "victim", "group", "attacked", "uawr_succ", "uawr_word", "pmi_succ", "pmi_word"], rows,
               lab.manifest)
    head = 0.30 if any(abs(r - 0.30) < 1e-12 for r in rhos) else max(rhos)
    i = min(range(len(rhos)), key=lambda k: abs(rhos[k] - head))
    rows = [[g, f"{res_u[i]['groups'][g][0]:.2f}", f"{res_u[i]['groups'][g][1]:.2f}",
             f"{res_p[i]['groups'][g][0]:.2f}", f"{res_p[i]['groups'][g][1]:.2f}"] for g in groups]
    _write_csv(lab.out / "rules" / "rule_eval.csv",
               ["group", "uawr_succ", "uawr_word", "pmi_succ", "pmi_word"], rows, lab.manifest)
    rows = [[f"{rho:.2f}", *[f"{ru['groups'][g][0]:.2f}" for g in groups],
             *[f"{rp['groups'][g][0]:.2f}" for g in groups]] for rho, ru, rp in zip(rhos, res_u, res_p)]
    _write_csv(lab.out / "rules" / "rule_budget.csv",
               ["rho", *[f"uawr_{g}" for g in groups], *[f"pmi_{g}" for g in groups]], rows, lab.manifest)
    series = [plotting.Series(f"UAWR {g}", rhos, [ru["groups"][g][0] for ru in res_u]) for g in groups]
    series.append(plotting.Series("PMI ALL", rhos, [rp["groups"]["ALL"][0] for rp in res_p], marker="s"))
    lab.manifest.add(plotting.emit_plot(series, [], lab.out / "rules" / "rule_budget.svg",
                                        title="Rule attack success vs budget", xlabel="max fraction of words",
                                        ylabel="Succ%"))
    if own:
        lab.finish()
    return RuleEvaluation(rhos, groups, {r: x["groups"] for r, x in zip(rhos, res_u)},
                          {r: x["groups"] for r, x in zip(rhos, res_p)}, [v.id for v in victims])


def run_rule_pipeline(cfg: ExperimentConfig) -> RuleEvaluation:
    lab = open_lab(cfg)
    run_mine_rules(cfg, lab)
    out = run_eval_rules(cfg, lab)
    lab.finish()
    return out


# -- report --------------------------------------------------------------------------


def run_report(cfg: ExperimentConfig) -> Path:
    """Summarize whatever tables exist under the output root into ``summary.json``."""
    out = cfg.out_dir
    if not out.exists():
        raise ExperimentError(f"nothing to report: {out} does not exist")
    manifest = Manifest(out, cfg.digest())
    summary: dict = {"config_hash": cfg.digest()}

    def read(name):
        p = out / name
        if not p.exists():
            return None
        with open(p, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))

    if (rows := read("zoo.csv")) is not None:
        summary["zoo"] = {"models": len(rows), "admitted": sum(int(r["admitted"]) for r in rows)}
    if (rows := read("factor_table.csv")) is not None:
        engines = [k for k in rows[0] if k not in ("factor", "pairs")]
        summary["factor_ranking"] = {
            e: [r["factor"] for r in sorted(rows, key=lambda r: -float(r[e]) if r[e] != "NA" else 0.0)]
            for e in engines}
    if (rows := read("base_rates.csv")) is not None:
        by_engine: dict[str, list[int]] = {}
        for r in rows:
            if r["intra_gt_inter"] != "NA":
                by_engine.setdefault(r["attack"], []).append(int(r["intra_gt_inter"]))
        summary["intra_gt_inter_share"] = {e: round(float(np.mean(v)), 4) for e, v in by_engine.items()}
    if (rows := read("ensemble_sweep.csv")) is not None:
        summary["ensemble_sweep"] = [{k: r[k] for k in ("m", "genetic_realized", "greedy_realized",
                                                        "single_realized")} for r in rows]
    if (rows := read("rules/rule_eval.csv")) is not None:
        summary["rules"] = rows
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest.add(path)
    manifest.write()
    return path
