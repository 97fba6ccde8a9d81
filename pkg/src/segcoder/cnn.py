"""Convolutional baseline encoder: word embeddings + one same-padded 1-D
convolution with tanh, producing per-word vectors for the same label
attention head the transformer feeds.

The word vocabulary is built from the training corpus (whitespace words,
minimum frequency 3) with embeddings trained from scratch.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, concat_rows, embedding_gather, matmul, reshape, tanh
from .tokenizer import PAD_TOKEN, UNK_TOKEN, TokenSequence, Vocab
from .transformer import truncated_normal

WORD_MIN_FREQ = 3


@dataclass
class CnnConfig:
    embed_dim: int = 100
    filters: int = 256        # must equal the label-attention dimension
    kernel: int = 9
    max_words: int = 2500
    vocab_size: int = 0       # filled in once the word vocabulary is built

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ValueError(f"kernel width must be odd for same padding, got {self.kernel}")


class CnnParams:
    def __init__(self, config, rng, dtype=np.float32):
        if config.vocab_size < 2:
            raise ValueError("word vocabulary must be set before allocating parameters")
        self.config = config
        self.word_emb = Tensor(
            truncated_normal(rng, (config.vocab_size, config.embed_dim), dtype=dtype),
            requires_grad=True,
        )
        self.conv_w = Tensor(
            truncated_normal(rng, (config.kernel * config.embed_dim, config.filters), dtype=dtype),
            requires_grad=True,
        )
        self.conv_b = Tensor(np.zeros(config.filters, dtype=dtype), requires_grad=True)

    def named(self):
        return [
            ("cnn.word_emb", self.word_emb),
            ("cnn.conv_w", self.conv_w),
            ("cnn.conv_b", self.conv_b),
        ]

    def tensors(self):
        return [t for _, t in self.named()]

    def scalar_count(self):
        return sum(t.data.size for t in self.tensors())


def build_word_vocab(texts, min_freq=WORD_MIN_FREQ):
    """Word vocabulary from training texts: [PAD], [UNK], then all
    lowercase whitespace words with count >= min_freq, lexicographic."""
    counts = Counter()
    for text in texts:
        counts.update(text.lower().split())
    kept = sorted(w for w, c in counts.items() if c >= min_freq)
    return Vocab([PAD_TOKEN, UNK_TOKEN] + kept)


def word_ids(text, vocab):
    """Whole-word lookup (no subword splitting); OOV words map to UNK."""
    ids = [vocab.token_to_id.get(w, vocab.unk_id) for w in text.lower().split()]
    return TokenSequence(ids=np.asarray(ids, dtype=np.int64), s=len(ids))


def encode_cnn(params, config, word_ids_arr):
    """Per-word representations [n, filters] via embedding lookup, a
    same-padded width-k convolution, and tanh."""
    ids = np.asarray(word_ids_arr, dtype=np.int64)
    if ids.ndim != 1 or ids.size < 1:
        raise ValueError("encode_cnn needs a non-empty 1-D id sequence")
    n, k, de = ids.size, config.kernel, config.embed_dim
    emb = embedding_gather(params.word_emb, ids)            # [n, de]
    half = k // 2
    if half:
        zero = Tensor(np.zeros((half, de), dtype=emb.data.dtype))
        padded = concat_rows([zero, emb, zero])             # [n + k - 1, de]
    else:
        padded = emb
    windows = np.arange(n)[:, None] + np.arange(k)[None, :]
    patches = reshape(embedding_gather(padded, windows), (n, k * de))
    return tanh(add(matmul(patches, params.conv_w), params.conv_b))
