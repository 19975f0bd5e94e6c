"""Synthetic language: lexicon with homophones, bigram sentence generation,
frame rendering, tokenization, grapheme-to-syllable mapping, hotword lists,
and the corpus file formats."""

from cifbias.corpus.lexicon import Lexicon, g2p, gen_lexicon, homophones, tokenize
from cifbias.corpus.generate import (
    CorpusSplits,
    RareEntitySpec,
    Utterance,
    gen_corpus,
    render_frames,
)
from cifbias.corpus.hotwords import HotwordList, find_occurrences, ngram_hotwords
from cifbias.corpus.io import (
    attach_frames,
    load_frames,
    load_hotwords,
    load_lexicon,
    load_metadata,
    save_frames,
    save_hotwords,
    save_lexicon,
    save_metadata,
)

__all__ = [
    "CorpusSplits",
    "HotwordList",
    "Lexicon",
    "RareEntitySpec",
    "Utterance",
    "attach_frames",
    "find_occurrences",
    "g2p",
    "gen_corpus",
    "gen_lexicon",
    "homophones",
    "load_frames",
    "load_hotwords",
    "load_lexicon",
    "load_metadata",
    "ngram_hotwords",
    "render_frames",
    "save_frames",
    "save_hotwords",
    "save_lexicon",
    "save_metadata",
    "tokenize",
]
