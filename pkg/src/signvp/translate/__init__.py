from .decoding import BeamHypothesis, beam_search, greedy_decode
from .model import TranslationConfig, TranslationModel, label_smoothed_ce
from .tokenizer import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    TokenizerModel,
    VocabSizeError,
    build_truecase_table,
    train_tokenizer,
)
from .train import (
    FinetuneResult,
    FinetuneSchedule,
    finetune_slt,
    large_schedule,
    load_translator,
    select_best,
    small_schedule,
    translate_ids,
)

__all__ = [
    "BOS_ID",
    "BeamHypothesis",
    "EOS_ID",
    "FinetuneResult",
    "FinetuneSchedule",
    "PAD_ID",
    "TokenizerModel",
    "TranslationConfig",
    "TranslationModel",
    "UNK_ID",
    "VocabSizeError",
    "beam_search",
    "build_truecase_table",
    "finetune_slt",
    "greedy_decode",
    "label_smoothed_ce",
    "large_schedule",
    "load_translator",
    "select_best",
    "small_schedule",
    "train_tokenizer",
    "translate_ids",
]
