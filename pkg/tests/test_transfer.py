from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advtransfer.attacks import AdversarialResult, pwws_attack
from advtransfer.corpus import Dataset, Token
from advtransfer.transfer import (
    Budget,
    TransferMatrix,
    adversarial_sets,
    attack_pool,
    base_transfer_rate,
    build_transfer_matrix,
    class_level_matrix,
    factor_report,
    factor_significance,
    incoming_inter_rate,
    matrix_from_sets,
    select_transfer_set,
    transfer_rate,
    twin_rate,
    variant_pairs,
)
from advtransfer.zoo import ModelSpec, TrainConfig, build_zoo, train
from advtransfer.zoo.spec import FACTOR_AXES

from .conftest import ConstantVictim, WeightVictim, example


class Named:
    def __init__(self, victim, id):
        self.victim, self.id = victim, id

    def __call__(self, batch):
        return self.victim(batch)


def toy_dataset(lex):
    rows = [("a fine film", 0), ("fine plot", 0), ("a dull film", 1), ("dull plot", 1), ("a great story", 0),
            ("great film", 0), ("a nice day", 0)]
    test = [("dull movie", 1), ("dull", 1), ("fine", 0), ("great", 0)]
    train_set = tuple(example(t, y, lex, i) for i, (t, y) in enumerate(rows))
    test_set = tuple(example(t, y, lex, 100 + i) for i, (t, y) in enumerate(test))
    return Dataset("toy", ("pos", "neg"), train_set, test_set)


# -- rates ---------------------------------------------------------------------------------


def test_transfer_rate_counts():
    adv = [(("x",), 0)] * 4
    assert transfer_rate(adv, ConstantVictim([0.0, 1.0])) == 1.0
    v = WeightVictim({"ok": (5.0, 0.0)}, 2, (0.0, 1.0))
    adv = [(("a",), 0), (("b",), 0), (("c",), 0), (("ok",), 0)]
    assert transfer_rate(adv, v) == 0.75
    with pytest.raises(ValueError, match="empty"):
        transfer_rate([], v)


def test_budget_contract():
    with pytest.raises(ValueError):
        Budget(attacked=10, transferred=20)
    with pytest.raises(ValueError):
        Budget(attacked=0, transferred=0)


def _result(i, success, clean_correct):
    toks = (Token(f"w{i}", "NOUN", 0),)
    return AdversarialResult(i, 0, toks, [], success, 1, 0.0, clean_correct)


def test_select_transfer_set_keeps_genuine_successes():
    results = [_result(0, True, False), _result(1, True, True), _result(2, False, True), _result(3, True, True)]
    adv = select_transfer_set(results, Budget(10, 5), "m")
    assert adv == [(("w1",), 0), (("w3",), 0)]


def test_select_transfer_set_samples_deterministically():
    results = [_result(i, True, True) for i in range(30)]
    a = select_transfer_set(results, Budget(30, 10, seed=4), "m")
    assert len(a) == 10
    assert a == select_transfer_set(results, Budget(30, 10, seed=4), "m")
    assert a != select_transfer_set(results, Budget(30, 10, seed=4), "other")
    # record order is preserved in the sample
    idx = [int(s[0][0][1:]) for s in a]
    assert idx == sorted(idx)


def test_attack_pool_is_seeded(small_lexicon):
    d = toy_dataset(small_lexicon)
    assert [e.id for e in attack_pool(d, Budget(3, 1, seed=2))] == [e.id for e in attack_pool(d, Budget(3, 1, seed=2))]
    assert len(attack_pool(d, Budget(50, 1))) == len(d.test)


# -- matrices ----------------------------------------------------------------------------------


def _victim():
    return WeightVictim({"dull": (0.0, 2.0), "fine": (2.0, 0.0), "great": (2.0, 0.0)}, 2, (0.5, 0.0))


def test_identical_models_transfer_fully(small_lexicon):
    d = toy_dataset(small_lexicon)
    models = [Named(_victim(), "a"), Named(_victim(), "b")]
    m = build_transfer_matrix(models, pwws_attack, d, small_lexicon, Budget(4, 4))
    assert m.model_ids == ["a", "b"]
    assert np.array_equal(m.rates, np.ones((2, 2)))
    single = build_transfer_matrix(models[:1], pwws_attack, d, small_lexicon, Budget(4, 4))
    assert single.rates.shape == (1, 1) and single.rates[0, 0] == 1.0


def test_zero_success_row_is_missing(tmp_path, small_lexicon):
    d = toy_dataset(small_lexicon)
    # a victim no substitution can move: its row is NA, not zero
    stubborn = Named(WeightVictim({"dull": (0.0, 9.0), "boring": (0.0, 9.0), "tedious": (0.0, 9.0),
                                   "slow": (0.0, 9.0)}, 2, (1.0, 0.0)), "stubborn")
    weak = Named(_victim(), "weak")
    sets = adversarial_sets([stubborn, weak], pwws_attack, d, small_lexicon, Budget(4, 4))
    m = matrix_from_sets(sets, [stubborn, weak])
    assert sets["stubborn"] == []
    assert np.isnan(m.rates[0]).all() and not m.defined("stubborn")
    assert m.sample_size[0] == 0
    m.to_csv(tmp_path / "t.csv")
    assert "NA" in (tmp_path / "t.csv").read_text()
    back = TransferMatrix.from_csv(tmp_path / "t.csv")
    assert np.isnan(back.rates[0]).all()
    assert np.allclose(back.rates[1], m.rates[1])
    assert incoming_inter_rate(m, "stubborn") == m.r("weak", "stubborn")


def test_rates_must_be_probabilities():
    with pytest.raises(ValueError):
        TransferMatrix(["a", "b"], np.array([[1.0, 1.2], [0.0, 1.0]]), np.array([1, 1]))
    with pytest.raises(ValueError):
        TransferMatrix(["a", "b"], np.ones((3, 3)), np.array([1, 1]))


def test_base_rate_twin_identity():
    adv = [(("fine",), 0), (("dull",), 1)]
    v = _victim()
    assert twin_rate(adv, ConstantVictim([0.0, 1.0])) == 0.5
    assert np.isnan(twin_rate([], v))


def test_base_rate_trains_seed_twins(small_lexicon):
    d = toy_dataset(small_lexicon)
    spec = ModelSpec("LINEAR_BOW", "WORD", "RANDOM", 1, 0)
    hyper = TrainConfig(epochs=30, batch_size=64, unk_dropout=0.0)
    budget = Budget(4, 4)
    got = base_transfer_rate(spec, d, small_lexicon, pwws_attack, budget, hyper)
    a, b = train(spec, d, hyper), train(spec.with_seed(1), d, hyper)
    adv = adversarial_sets([a], pwws_attack, d, small_lexicon, budget)[a.id]
    assert adv
    assert got == transfer_rate(adv, b)
    assert 0.0 <= got <= 1.0


# -- factor significance -------------------------------------------------------------------


def _grid_matrix(rates_fn, specs=None):
    specs = specs or build_zoo(["LINEAR_BOW", "CONV_1D"], ["WORD", "CHAR_NGRAM"], ["RANDOM"], [1, 2])
    ids = [s.id for s in specs]
    rates = np.array([[rates_fn(s, t) for t in specs] for s in specs])
    return TransferMatrix(ids, rates, np.full(len(ids), 10))


def test_factor_significance_zero_when_rates_equal_base():
    m = _grid_matrix(lambda s, t: 0.4 if s != t else 1.0)
    base = {i: 0.4 for i in m.model_ids}
    for axis in ("input_form", "architecture", "depth"):
        assert factor_significance(m, base, axis) == 0.0
    with pytest.raises(ValueError, match="no qualifying"):
        factor_significance(m, base, "embedding_init")


def test_factor_significance_two_pairs():
    specs = [ModelSpec("CONV_1D", "WORD", "RANDOM", 1, 0), ModelSpec("CONV_1D", "CHAR_NGRAM", "RANDOM", 1, 0)]
    ids = [s.id for s in specs]
    m = TransferMatrix(ids, np.array([[1.0, 0.6], [0.2, 1.0]]), np.array([5, 5]))
    # subtracted values: |0.6 - 0.5| = 0.1 and |0.2 - 0.5| = 0.3
    assert factor_significance(m, {ids[0]: 0.5, ids[1]: 0.5}, "input_form") == pytest.approx(0.2, abs=1e-12)


def test_factor_significance_skips_missing():
    specs = [ModelSpec("CONV_1D", "WORD", "RANDOM", 1, 0), ModelSpec("CONV_1D", "WORD", "RANDOM", 2, 0)]
    ids = [s.id for s in specs]
    m = TransferMatrix(ids, np.array([[1.0, 0.6], [np.nan, np.nan]]), np.array([5, 0]))
    assert factor_significance(m, {ids[0]: 0.5, ids[1]: 0.3}, "depth") == pytest.approx(0.3)


def test_variant_pairs_single_axis():
    m = _grid_matrix(lambda s, t: 0.5)
    pairs = variant_pairs(m, "input_form")
    assert len(pairs) == 8
    for s, t in pairs:
        assert ModelSpec.parse(s).differs_only_in(ModelSpec.parse(t)) == "input_form"
    with pytest.raises(ValueError):
        variant_pairs(m, "colour")


def test_factor_report_json():
    m = _grid_matrix(lambda s, t: 0.9 if s.input_form == t.input_form else 0.1)
    rep = factor_report(m, {i: 0.9 for i in m.model_ids}, ["input_form", "architecture", "depth"])
    assert rep.ranking()[0] == "input_form"
    assert rep.scores["input_form"] == pytest.approx(0.8)
    assert '"factor": "input_form"' in rep.to_json()


# -- class level ---------------------------------------------------------------------------


def test_class_level_examples():
    m = TransferMatrix(["s1", "t1"], np.array([[1.0, 0.4], [0.3, 1.0]]), np.array([1, 1]))
    classes, cells = class_level_matrix(m, {"s1": "A", "t1": "B"})
    assert classes == ["A", "B"] and cells[0, 1] == pytest.approx(0.4)
    assert np.isnan(cells[0, 0])
    m = TransferMatrix(["s1", "s2", "t"], np.array([[1, 0.5, 0.4], [0.5, 1, 0.2], [0.1, 0.1, 1]]),
                       np.array([1, 1, 1]))
    _, cells = class_level_matrix(m, {"s1": "A", "s2": "A", "t": "B"})
    assert cells[0, 1] == pytest.approx(0.3)
    assert cells[0, 0] == pytest.approx(0.5)
    with pytest.raises(ValueError, match="empty class"):
        class_level_matrix(m, {"s1": "A", "s2": "A", "t": "B"}, ["A", "B", "C"])
    with pytest.raises(ValueError):
        class_level_matrix(m, {"s1": "A"})


# -- properties ----------------------------------------------------------------------------

_ZOO = build_zoo(["LINEAR_BOW", "CONV_1D"], ["WORD", "CHAR_NGRAM"], ["RANDOM"], [1, 2])
_N = len(_ZOO)


@st.composite
def zoo_matrix(draw):
    vals = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=_N * _N, max_size=_N * _N))
    rates = np.array(vals).reshape(_N, _N)
    base = draw(st.lists(st.floats(0, 1), min_size=_N, max_size=_N))
    perm = draw(st.permutations(range(_N)))
    ids = [s.id for s in _ZOO]
    return TransferMatrix(ids, rates, np.full(_N, 7)), dict(zip(ids, base)), list(perm)


@settings(max_examples=150, deadline=None)
@given(zoo_matrix())
def test_aggregates_are_permutation_invariant(case):
    m, base, perm = case
    ids = [m.model_ids[i] for i in perm]
    p = m.subset(ids)
    for axis in ("input_form", "architecture", "depth"):
        assert factor_significance(p, base, axis) == pytest.approx(factor_significance(m, base, axis), abs=1e-12)
    grouping = {i: ModelSpec.parse(i).architecture for i in m.model_ids}
    c1, g1 = class_level_matrix(m, grouping, ["LINEAR_BOW", "CONV_1D"])
    c2, g2 = class_level_matrix(p, grouping, ["LINEAR_BOW", "CONV_1D"])
    assert np.allclose(g1, g2, atol=1e-12)
    for i in ids:
        assert incoming_inter_rate(p, i) == pytest.approx(incoming_inter_rate(m, i), abs=1e-12)
        assert p.r(i, ids[0]) == m.r(i, ids[0])


@settings(max_examples=150, deadline=None)
@given(zoo_matrix())
def test_asymmetric_matrices_are_well_formed(tmp_path_factory, case):
    m, base, _ = case
    path = tmp_path_factory.mktemp("m") / "m.csv"
    m.to_csv(path)
    back = TransferMatrix.from_csv(path)
    assert back.model_ids == m.model_ids
    assert np.allclose(back.rates, m.rates, atol=5e-7)
    rep = factor_report(m, base, ["input_form", "architecture", "depth"])
    assert all(v >= 0 for v in rep.scores.values())
    assert all(0 <= v <= 1 for v in rep.scores.values())
    assert set(FACTOR_AXES) >= set(rep.scores)
