from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

LINEAR_BOW, AVG_EMB_MLP, CONV_1D, RECURRENT = "LINEAR_BOW", "AVG_EMB_MLP", "CONV_1D", "RECURRENT"
ARCHITECTURES = (LINEAR_BOW, AVG_EMB_MLP, CONV_1D, RECURRENT)
WORD, CHAR_NGRAM = "WORD", "CHAR_NGRAM"
INPUT_FORMS = (WORD, CHAR_NGRAM)
RANDOM, PRETRAINED_FILE = "RANDOM", "PRETRAINED_FILE"
EMBEDDING_INITS = (RANDOM, PRETRAINED_FILE)

# The four axes a factor study varies one at a time.
FACTOR_AXES = ("input_form", "architecture", "embedding_init", "depth")


@dataclass(frozen=True, order=True)
class ModelSpec:
    architecture: str
    input_form: str
    embedding_init: str
    depth: int
    seed: int = 0
    id: str = field(init=False, compare=False)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.input_form not in INPUT_FORMS:
            raise ValueError(f"unknown input form {self.input_form!r}")
        if self.embedding_init not in EMBEDDING_INITS:
            raise ValueError(f"unknown embedding init {self.embedding_init!r}")
        if self.input_form == CHAR_NGRAM and self.embedding_init != RANDOM:
            raise ValueError("CHAR_NGRAM models only support RANDOM embedding init")
        if int(self.depth) < 1:
            raise ValueError("depth must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        object.__setattr__(
            self,
            "id",
            f"{self.architecture}-{self.input_form}-{self.embedding_init}-{self.depth}-{self.seed}",
        )

    @classmethod
    def parse(cls, spec_id: str) -> "ModelSpec":
        arch, form, emb, depth, seed = spec_id.split("-", 4)
        return cls(arch, form, emb, int(depth), int(seed))

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, seed=seed)

    @property
    def family(self) -> str:
        """Id with the seed stripped; twins share a family."""
        return self.id.rsplit("-", 1)[0]

    def differs_only_in(self, other: "ModelSpec") -> str | None:
        """Name of the single factor axis separating two same-seed specs, else None."""
        if self.seed != other.seed:
            return None
        diffs = [a for a in FACTOR_AXES if getattr(self, a) != getattr(other, a)]
        return diffs[0] if len(diffs) == 1 else None


def build_zoo(
    architectures: Sequence[str] = ARCHITECTURES,
    input_forms: Sequence[str] = INPUT_FORMS,
    embedding_inits: Sequence[str] = EMBEDDING_INITS,
    depths: Sequence[int] = (1, 2),
    seeds: Iterable[int] = (0,),
) -> list[ModelSpec]:
    """Cartesian product of the factor grid; CHAR_NGRAM x PRETRAINED_FILE is dropped."""
    seeds = list(seeds)
    axes = [architectures, input_forms, embedding_inits, depths, seeds]
    if any(len(a) == 0 for a in axes):
        raise ValueError("empty grid: every axis needs at least one level")
    specs = []
    for arch, form, emb, depth, seed in itertools.product(*axes):
        if form == CHAR_NGRAM and emb != RANDOM:
            continue
        specs.append(ModelSpec(arch, form, emb, int(depth), int(seed)))
    return specs
