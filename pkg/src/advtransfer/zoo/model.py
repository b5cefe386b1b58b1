"""Trained classifiers: inference, word importance, training, and persistence."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import Dataset, Example
from . import networks
from .spec import WORD, ModelSpec
from .vocab import UNK, Vocab

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 8
    batch_size: int = 32
    learning_rate: float = 0.5
    dim: int = 24
    unk_dropout: float = 0.01
    min_count: int = 1
    zero_init: bool = False
    clip_norm: float | None = None
    lr_decay: float = 0.0
    embeddings_path: str | None = None

    def key(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TrainReport:
    train_accuracy: float
    test_accuracy: float | None
    loss_curve: list[float] = field(default_factory=list)


class Classifier:
    """A trained member of the zoo. Calling it on a batch of surface sequences returns
    a ``(B, |Z|)`` logit array, which is the victim interface the attacks use."""

    def __init__(self, spec: ModelSpec, params: dict[str, np.ndarray], vocab: Vocab, labels: Sequence[str],
                 report: TrainReport | None = None):
        self.spec = spec
        self.params = params
        self.vocab = vocab
        self.labels = tuple(labels)
        self.report = report
        for v in self.params.values():
            v.setflags(write=False)

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def label_count(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"Classifier({self.id})"

    def __call__(self, batch: Sequence[Sequence[str]]) -> np.ndarray:
        return self.batch_logits(batch)

    def batch_logits(self, batch: Sequence[Sequence[str]], chunk: int = 256) -> np.ndarray:
        if len(batch) == 0:
            return np.zeros((0, self.label_count))
        out = []
        for i in range(0, len(batch), chunk):
            enc = self.vocab.encode(batch[i : i + chunk])
            out.append(networks.forward(self.params, self.spec, enc)[0])
        return np.concatenate(out)

    def logits(self, tokens) -> np.ndarray:
        return self.batch_logits([_surfaces(tokens)])[0]

    def predict(self, batch) -> np.ndarray:
        return self.batch_logits([_surfaces(t) for t in batch]).argmax(axis=1)


def _surfaces(tokens) -> list[str]:
    return [t if isinstance(t, str) else t.surface for t in tokens]


def _gold_logprob(model, sents, gold) -> np.ndarray:
    return networks.log_softmax(model(sents))[:, gold]


def word_importance(model, example: Example) -> np.ndarray:
    """Per-position drop in gold log-probability when the token becomes UNK."""
    base = list(example.surfaces)
    sents = [base] + [base[:i] + [UNK] + base[i + 1 :] for i in range(len(base))]
    lp = _gold_logprob(model, sents, example.label)
    return lp[0] - lp[1:]


def substitute_importance(model, example: Example, position: int, substitute: str) -> float:
    if not 0 <= position < len(example.tokens):
        raise IndexError(position)
    base = list(example.surfaces)
    alt = base.copy()
    alt[position] = substitute
    lp = _gold_logprob(model, [base, alt], example.label)
    return float(lp[0] - lp[1])


# -- training ------------------------------------------------------------------


def read_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Text vectors: a word followed by space-separated floats on each line."""
    table: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            vec = np.array([float(x) for x in parts[1:]])
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            table.setdefault(parts[0].lower(), vec)
    return table


def _pretrained_rows(vocab: Vocab, table: dict[str, np.ndarray], dim: int) -> np.ndarray:
    rows = np.full((len(vocab), dim), np.nan)
    for i, w in enumerate(vocab.itos):
        v = table.get(w)
        if v is not None:
            if len(v) != dim:
                raise ValueError(f"pretrained vectors have dim {len(v)}, model dim is {dim}")
            rows[i] = v
    return rows


def _spec_seed(spec: ModelSpec) -> list[int]:
    return [spec.seed & 0xFFFFFFFF, spec.seed >> 32]


def train(spec: ModelSpec, data: Dataset, hyper: TrainConfig = TrainConfig()) -> Classifier:
    """Deterministic mini-batch gradient descent on mean cross-entropy."""
    if data.num_labels < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(_spec_seed(spec))
    sents = [list(ex.surfaces) for ex in data.train]
    y = np.array([ex.label for ex in data.train])
    vocab = Vocab.build(spec.input_form, sents, hyper.min_count)

    pretrained = None
    if spec.embedding_init != "RANDOM":
        if not hyper.embeddings_path:
            raise ValueError(f"{spec.id} needs TrainConfig.embeddings_path")
        pretrained = _pretrained_rows(vocab, read_embeddings(hyper.embeddings_path), hyper.dim)
    params = networks.init_params(spec, len(vocab), hyper.dim, data.num_labels, rng, pretrained,
                                  zero=hyper.zero_init)

    n = len(sents)
    losses = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            batch_sents = [sents[i] for i in idx]
            if hyper.unk_dropout > 0:
                batch_sents = _drop_to_unk(batch_sents, rng, hyper.unk_dropout)
            enc = vocab.encode(batch_sents)
            loss, _, grads = networks.loss_and_grads(params, spec, enc, y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"{spec.id}: non-finite loss at epoch {epoch} batch {start // hyper.batch_size} "
                    f"(lr={hyper.learning_rate}, last finite losses={losses[-3:]})"
                )
            scale = hyper.learning_rate / (1.0 + hyper.lr_decay * epoch)
            if hyper.clip_norm is not None:
                norm = np.sqrt(sum(float((gk * gk).sum()) for gk in grads.values()))
                if norm > hyper.clip_norm:
                    scale *= hyper.clip_norm / norm
            for k, gk in grads.items():
                params[k] -= scale * gk
            total += loss * len(idx)
        losses.append(total / n)
        log.debug("%s epoch %d loss %.4f", spec.id, epoch, losses[-1])

    model = Classifier(spec, params, vocab, data.labels)
    train_acc = accuracy(model, data.train)
    test_acc = accuracy(model, data.test) if data.test else None
    model.report = TrainReport(train_acc, test_acc, losses)
    return model


def _drop_to_unk(sents, rng, p):
    out = []
    for s in sents:
        drop = rng.random(len(s)) < p
        out.append([UNK if d else w for w, d in zip(s, drop)] if drop.any() else s)
    return out


def accuracy(model: Classifier, examples: Sequence[Example]) -> float:
    if not examples:
        return float("nan")
    pred = model.batch_logits([ex.surfaces for ex in examples]).argmax(axis=1)
    return float(np.mean(pred == np.array([ex.label for ex in examples])))


# -- persistence ---------------------------------------------------------------


def save_classifier(model: Classifier, path: str | Path) -> None:
    path = Path(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "spec": model.id,
        "labels": list(model.labels),
        "vocab_form": model.vocab.form,
        "vocab": model.vocab.itos,
        "report": asdict(model.report) if model.report else None,
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **model.params)


def load_classifier(path: str | Path) -> Classifier:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta["format_version"] != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format {meta['format_version']}")
        params = {k: z[k].copy() for k in z.files if k != "__meta__"}
    report = TrainReport(**meta["report"]) if meta["report"] else None
    return Classifier(ModelSpec.parse(meta["spec"]), params, Vocab(meta["vocab_form"], meta["vocab"]),
                      meta["labels"], report)


def write_report(model: Classifier, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"spec": model.id, **asdict(model.report)}, fh, indent=2, sort_keys=True)


def linear_bow_from_weights(word_weights: dict[str, Sequence[float]], labels: Sequence[str],
                            bias: Sequence[float] | None = None, form: str = WORD) -> Classifier:
    """Hand-set bag-of-words linear classifier: logits = sum of per-word weight rows + bias.

    Unlisted words (and UNK) carry zero weight.
    """
    z = len(labels)
    vocab = Vocab(form, ["<pad>", UNK, *word_weights])
    emb = np.zeros((len(vocab), z))
    for i, w in enumerate(word_weights, start=2):
        emb[i] = word_weights[w]
    params = {"emb": emb, "out_w": np.eye(z), "out_b": np.zeros(z) if bias is None else np.asarray(bias, float)}
    return Classifier(ModelSpec("LINEAR_BOW", form, "RANDOM", 1, 0), params, vocab, labels)
