"""Factor-structured classifier zoo."""

from .model import (
    Classifier,
    TrainConfig,
    TrainReport,
    TrainingDiverged,
    accuracy,
    linear_bow_from_weights,
    load_classifier,
    save_classifier,
    substitute_importance,
    train,
    word_importance,
    write_report,
)
from .spec import (
    ARCHITECTURES,
    AVG_EMB_MLP,
    CHAR_NGRAM,
    CONV_1D,
    EMBEDDING_INITS,
    FACTOR_AXES,
    INPUT_FORMS,
    LINEAR_BOW,
    PRETRAINED_FILE,
    RANDOM,
    RECURRENT,
    WORD,
    ModelSpec,
    build_zoo,
)
from .vocab import UNK, Vocab
