from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from advtransfer.config import DEFAULTS, OUT_ENV, ConfigError, load_config
from advtransfer.zoo import ModelSpec


@pytest.fixture()
def assets(tmp_path):
    (tmp_path / "corpus.tsv").write_text("pos\tgood film\nneg\tbad film\n", encoding="utf-8")
    (tmp_path / "lex.tsv").write_text("good\tADJ\tfine\n", encoding="utf-8")
    (tmp_path / "vec.txt").write_text("good 0.1 0.2\n", encoding="utf-8")
    return tmp_path


def write(dirpath: Path, body: dict, name="exp.yaml") -> Path:
    base = {"data": {"corpus": "corpus.tsv", "format": "tsv", "lexicon": "lex.tsv", "embeddings": "vec.txt"}}
    for k, v in body.items():
        if isinstance(v, dict) and k in base:
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    p = dirpath / name
    p.write_text(yaml.safe_dump(base), encoding="utf-8")
    return p


def test_defaults_fill_missing_sections(assets):
    cfg = load_config(write(assets, {}), env={})
    assert cfg.engines == ["pwws", "ga"]
    assert cfg.raw["rules"]["rhos"] == DEFAULTS["rules"]["rhos"]
    # char models take no pretrained file: 4 architectures x 3 input/init pairs x 2 depths
    assert len(cfg.specs) == 4 * 3 * 2
    assert cfg.path("corpus") == assets / "corpus.tsv"


def test_output_dir_precedence(assets, monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    path = write(assets, {"output_dir": "from_config"})
    assert load_config(path, out="flag", env={OUT_ENV: "envdir"}).out_dir == Path("flag")
    assert load_config(path, env={OUT_ENV: "envdir"}).out_dir == Path("envdir")
    assert load_config(path, env={}).out_dir == assets / "from_config"
    bare = write(assets, {}, "bare.yaml")
    assert load_config(bare, env={}).out_dir == Path("runs")


def test_cli_overrides_beat_file(assets):
    path = write(assets, {"seed": 3, "workers": 2})
    cfg = load_config(path, {"seed": 9, "workers": None}, env={})
    assert cfg.seed == 9 and cfg.workers == 2
    assert cfg.budget.seed == 9


@pytest.mark.parametrize("body, match", [
    ({"bogus": 1}, "unknown config key bogus"),
    ({"zoo": {"colour": "red"}}, "unknown config key zoo.colour"),
    ({"data": {"lexicon": "nope.tsv"}}, "does not exist"),
    ({"data": {"format": "csv"}}, "data.format"),
    ({"zoo": {"seeds": []}}, "zoo.seeds"),
    ({"zoo": {"seeds": [0.5]}}, "zoo.seeds"),
    ({"seed": "now"}, "explicit integer"),
    ({"attack": {"engines": ["fgsm"]}}, "attack.engines"),
    ({"budget": {"attacked": 5, "transferred": 10}}, "transferred"),
    ({"rules": {"rhos": [1.5]}}, "rules.rhos"),
    ({"workers": 0}, "workers"),
    ({"ensemble": {"population": 1}}, "population"),
    ({"train": {"defaults": {"epochz": 3}}}, "bad training parameter"),
    ({"zoo": {"architectures": ["TRANSFORMER"]}}, "zoo"),
])
def test_validation_errors(assets, body, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(assets, body), env={})


def test_pretrained_needs_embeddings(assets):
    body = {"data": {"embeddings": None}}
    with pytest.raises(ConfigError, match="PRETRAINED_FILE"):
        load_config(write(assets, body), env={})
    cfg = load_config(write(assets, {**body, "zoo": {"embedding_inits": ["RANDOM"]}}), env={})
    assert all(s.embedding_init == "RANDOM" for s in cfg.specs)


def test_missing_and_malformed_files(assets):
    with pytest.raises(ConfigError, match="not found"):
        load_config(assets / "absent.yaml", env={})
    bad = assets / "bad.yaml"
    bad.write_text("data: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad, env={})
    scalar = assets / "scalar.yaml"
    scalar.write_text("42\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(scalar, env={})


def test_hyper_overrides_apply_in_order(assets):
    body = {"train": {"defaults": {"dim": 8, "epochs": 2}, "overrides": [
        {"match": {"architecture": "CONV_1D"}, "set": {"epochs": 5, "learning_rate": 0.2}},
        {"match": {"architecture": "CONV_1D", "depth": 2}, "set": {"epochs": 7}},
    ]}}
    cfg = load_config(write(assets, body), env={})
    conv1 = cfg.hyper(ModelSpec("CONV_1D", "WORD", "RANDOM", 1, 0))
    conv2 = cfg.hyper(ModelSpec("CONV_1D", "WORD", "RANDOM", 2, 0))
    lin = cfg.hyper(ModelSpec("LINEAR_BOW", "WORD", "RANDOM", 1, 0))
    assert (conv1.epochs, conv1.learning_rate, conv1.dim) == (5, 0.2, 8)
    assert conv2.epochs == 7 and conv2.learning_rate == 0.2
    assert lin.epochs == 2
    assert conv1.embeddings_path == str(assets / "vec.txt")


def test_digest_tracks_content(assets):
    a = load_config(write(assets, {"seed": 1}, "a.yaml"), env={})
    b = load_config(write(assets, {"seed": 1}, "b.yaml"), env={})
    c = load_config(write(assets, {"seed": 2}, "c.yaml"), env={})
    assert a.digest() == b.digest() != c.digest()


def test_search_config_and_attack_params(assets):
    cfg = load_config(write(assets, {"seed": 4, "attack": {"ga": {"population": 6, "generations": 3}}}), env={})
    assert cfg.attack_params("ga") == {"population": 6, "generations": 3, "seed": 4}
    assert cfg.attack_params("pwws") == {}
    sc = cfg.search_config(3, 7)
    assert (sc.size, sc.seed, sc.population) == (3, 7, 20)
