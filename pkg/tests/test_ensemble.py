from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advtransfer.ensemble import (
    EnsembleModel,
    SearchConfig,
    SearchLog,
    crossover,
    fitness,
    genetic_search,
    greedy_expert_baseline,
    mutate,
    write_candidate,
)
from advtransfer.transfer import TransferMatrix

from .conftest import ConstantVictim
from .oracles import direct_fitness, exhaustive_best


class Member(ConstantVictim):
    def __init__(self, logits, id):
        super().__init__(logits)
        self.id = id


def random_matrix(n, seed):
    rng = np.random.default_rng(seed)
    rates = rng.uniform(0, 1, size=(n, n))
    np.fill_diagonal(rates, 1.0)
    ids = [f"m{i}" for i in range(n)]
    return TransferMatrix(ids, rates, np.full(n, 10)), ids, rates.tolist()


# -- logit averaging ---------------------------------------------------------------------


def test_single_member_is_identity():
    m = Member([0.3, -1.0], "a")
    assert np.array_equal(EnsembleModel([m])([["x"]]), m([["x"]]))


def test_logit_mean():
    e = EnsembleModel([Member([1.0, 0.0], "a"), Member([0.0, 1.0], "b")])
    assert np.allclose(e([["x"]]), [[0.5, 0.5]])
    e = EnsembleModel([Member([2.0, 0.0], "a"), Member([0.0, 4.0], "b")])
    assert np.allclose(e([["x"]]), [[1.0, 2.0]])
    # logit and probability averaging can disagree: two mild votes for class 1 against one
    # confident vote for class 0
    e3 = EnsembleModel([Member([0.0, 2.0], "a"), Member([0.0, 2.0], "b"), Member([10.0, 0.0], "c")])
    assert np.allclose(e3([["x"]]), [[10 / 3, 4 / 3]])
    probs = sum(np.exp(v) / np.exp(v).sum() for v in ([0.0, 2.0], [0.0, 2.0], [10.0, 0.0])) / 3
    assert np.argmax(e3([["x"]])[0]) == 0 and np.argmax(probs) == 1
    assert e.id == "a+b"


def test_ensemble_contract():
    with pytest.raises(ValueError):
        EnsembleModel([])
    with pytest.raises(ValueError):
        EnsembleModel([Member([0, 1], "a"), Member([1, 0], "a")])


# -- fitness -------------------------------------------------------------------------------


def test_fitness_hand_examples():
    m = TransferMatrix(["s", "t1", "t2"], np.array([[1.0, 0.3, 0.1], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
                       np.array([1, 1, 1]))
    assert fitness(["s"], m) == pytest.approx((1.0 + 0.3 + 0.1) / 3)
    m = TransferMatrix(["s1", "s2", "t"], np.array([[0.5, 0.1, 0.6], [0.2, 0.4, 0.3], [0, 0, 1.0]]),
                       np.array([1, 1, 1]))
    # per-target maxima over {s1, s2}: 0.5, 0.4, 0.6
    assert fitness(["s1", "s2"], m) == pytest.approx(0.5)


def test_fitness_rejects_missing_rates():
    m = TransferMatrix(["a", "b"], np.array([[1.0, 0.2], [np.nan, np.nan]]), np.array([1, 0]))
    with pytest.raises(ValueError, match="missing"):
        fitness(["a", "b"], m)
    assert fitness(["a"], m) == pytest.approx(0.6)


def test_exhaustive_optimum_six_models():
    m, ids, rates = random_matrix(6, 3)
    best_f, best = exhaustive_best(rates, ids, 2)
    cand = genetic_search(ids, m, SearchConfig(population=20, generations=50, size=2, seed=0))
    assert cand.fitness == pytest.approx(best_f, abs=1e-12)
    assert fitness(best, m) == pytest.approx(best_f, abs=1e-12)


# -- genetic search ------------------------------------------------------------------------


def test_degenerate_search_space():
    m, ids, _ = random_matrix(3, 0)
    cand = genetic_search(ids, m, SearchConfig(population=4, generations=3, size=3))
    assert set(cand.members) == set(ids)
    assert cand.fitness == fitness(ids, m)
    with pytest.raises(ValueError, match="exceeds"):
        genetic_search(ids, m, SearchConfig(size=4))


def test_search_config_contract():
    with pytest.raises(ValueError):
        SearchConfig(population=1)
    with pytest.raises(ValueError):
        SearchConfig(elitism=20, population=20)
    with pytest.raises(ValueError):
        SearchConfig(mutation_prob=1.5)
    with pytest.raises(ValueError):
        SearchConfig(generations=0)


def test_eight_models_ten_seeds():
    m, ids, rates = random_matrix(8, 11)
    best_f, _ = exhaustive_best(rates, ids, 2)
    hits = sum(genetic_search(ids, m, SearchConfig(20, 50, 2, seed=s)).fitness >= 0.95 * best_f for s in range(10))
    assert hits >= 9


def test_search_log_and_reproducibility(tmp_path):
    m, ids, _ = random_matrix(8, 5)
    log_a, log_b = SearchLog(), SearchLog()
    cfg = SearchConfig(population=10, generations=20, size=3, seed=9)
    a, b = genetic_search(ids, m, cfg, log_a), genetic_search(ids, m, cfg, log_b)
    assert a == b and log_a == log_b
    trace = log_a.best_trace
    assert len(trace) == 20
    assert all(y >= x for x, y in zip(trace, trace[1:]))
    assert trace[-1] == a.fitness
    log_a.to_csv(tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text().splitlines()[0] == "generation,best_fitness,mean_fitness"
    write_candidate(a, tmp_path / "c.json", cfg)
    rec = json.loads((tmp_path / "c.json").read_text())
    assert rec["members"] == list(a.members) and rec["seed"] == 9


# -- greedy baseline -------------------------------------------------------------------------


def test_greedy_single_member_is_best_row_mean():
    m, ids, rates = random_matrix(6, 2)
    means = [np.mean(r) for r in rates]
    assert greedy_expert_baseline(ids, m, 1).members == (ids[int(np.argmax(means))],)


def test_greedy_picks_dominant_model_first():
    rates = np.full((4, 4), 0.2)
    rates[2] = 0.9
    np.fill_diagonal(rates, 1.0)
    ids = ["a", "b", "c", "d"]
    cand = greedy_expert_baseline(ids, TransferMatrix(ids, rates, np.ones(4)), 2)
    assert cand.members[0] == "c"


def test_greedy_tie_prefers_different_input_form():
    from advtransfer.zoo import ModelSpec

    ids = [ModelSpec("CONV_1D", "WORD", "RANDOM", 1, 0).id, ModelSpec("CONV_1D", "WORD", "RANDOM", 2, 0).id,
           ModelSpec("CONV_1D", "CHAR_NGRAM", "RANDOM", 1, 0).id]
    rates = np.array([[1.0, 0.9, 0.9], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]])
    cand = greedy_expert_baseline(ids, TransferMatrix(ids, rates, np.ones(3)), 2)
    # adding either remaining model gives the same gain; the character model wins the tie
    assert cand.members == (ids[0], ids[2])


def test_greedy_not_better_than_genetic_on_eight():
    m, ids, _ = random_matrix(8, 21)
    g = genetic_search(ids, m, SearchConfig(20, 50, 3, seed=0))
    assert greedy_expert_baseline(ids, m, 3).fitness <= g.fitness + 1e-12


# -- properties ----------------------------------------------------------------------------


@st.composite
def matrix_case(draw):
    n = draw(st.integers(3, 7))
    vals = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=n * n, max_size=n * n))
    ids = [f"m{i}" for i in range(n)]
    rates = np.array(vals).reshape(n, n)
    members = draw(st.lists(st.sampled_from(ids), min_size=1, max_size=n, unique=True))
    return TransferMatrix(ids, rates, np.full(n, 3)), ids, rates.tolist(), members


@settings(max_examples=200, deadline=None)
@given(matrix_case(), st.data())
def test_fitness_properties(case, data):
    m, ids, rates, members = case
    f = fitness(members, m)
    assert f == direct_fitness(members, rates, ids)
    assert f >= max(fitness([s], m) for s in members) - 1e-15
    extra = [i for i in ids if i not in members]
    if extra:
        bigger = members + [data.draw(st.sampled_from(extra))]
        assert fitness(bigger, m) >= f


@settings(max_examples=100, deadline=None)
@given(matrix_case(), st.integers(1, 3), st.integers(0, 10_000))
def test_search_result_matches_direct_fitness(case, size, seed):
    m, ids, rates, _ = case
    log = SearchLog()
    cand = genetic_search(ids, m, SearchConfig(population=6, generations=6, size=size, seed=seed), log)
    assert len(set(cand.members)) == size and set(cand.members) <= set(ids)
    assert cand.fitness == direct_fitness(cand.members, rates, ids)
    assert cand.fitness <= exhaustive_best(rates, ids, size)[0] + 1e-15
    assert all(y >= x for x, y in zip(log.best_trace, log.best_trace[1:]))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 9), st.integers(1, 4), st.integers(0, 10_000))
def test_crossover_stays_in_parent_union(n, size, seed):
    rng = np.random.default_rng(seed)
    size = min(size, n)
    a = tuple(sorted(rng.choice(n, size, replace=False).tolist()))
    b = tuple(sorted(rng.choice(n, size, replace=False).tolist()))
    child = crossover(rng, a, b, size)
    assert len(child) == size == len(set(child))
    assert set(child) <= set(a) | set(b)
    assert list(child) == sorted(child)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 9), st.integers(1, 4), st.integers(0, 10_000), st.floats(0, 1))
def test_mutation_changes_at_most_one_member(n, size, seed, prob):
    rng = np.random.default_rng(seed)
    size = min(size, n)
    cand = tuple(sorted(rng.choice(n, size, replace=False).tolist()))
    out = mutate(rng, cand, n, prob)
    assert len(out) == size == len(set(out))
    assert len(set(cand) ^ set(out)) <= 2
    assert all(0 <= i < n for i in out)
    assert mutate(rng, cand, n, 0.0) == cand
