"""End-to-end coding model: tokenizer + document encoder + per-class
attention head, with directory-based save/load.

Two encoder kinds share the identical head and downstream pipeline:
``transformer`` (subword ids, segmented long-document encoding) and ``cnn``
(whole-word ids, single same-padded convolution).
"""

import dataclasses
import json
import os

import numpy as np

from . import checkpoint
from .cnn import CnnConfig, CnnParams, encode_cnn, word_ids
from .corpus import LabelSet
from .label_attention import LabelHeadParams, predict
from .segments import encode_long, plan_segments
from .tensor import no_grad
from .tokenizer import Vocab, pad_to_multiple, tokenize, truncate
from .transformer import EncoderConfig, EncoderParams, encode_segment

CONFIG_NAME = "config.json"
VOCAB_NAME = "vocab.txt"
CODES_NAME = "codes.txt"
KINDS = ("transformer", "cnn")


class CodingModel:
    def __init__(self, kind, enc_config, enc_params, head, vocab, label_set,
                 s_max, stride=0):
        if kind not in KINDS:
            raise ValueError(f"encoder kind must be one of {KINDS}, got {kind!r}")
        self.kind = kind
        self.enc_config = enc_config
        self.enc_params = enc_params
        self.head = head
        self.vocab = vocab
        self.label_set = label_set
        self.s_max = int(s_max)
        self.stride = int(stride)

    @property
    def num_classes(self):
        return len(self.label_set)

    def named_parameters(self):
        return list(self.enc_params.named()) + list(self.head.named())

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def token_sequence(self, text):
        """Tokenize under the encoder's own scheme (subword vs word)."""
        if self.kind == "transformer":
            return tokenize(text, self.vocab)
        return word_ids(text, self.vocab)

    def _truncation(self):
        if self.kind == "cnn":
            return min(self.s_max, self.enc_config.max_words)
        return self.s_max

    def probs_for_ids(self, seq):
        """Per-class probabilities, Tensor[K], for a tokenized note."""
        seq = truncate(seq, self._truncation())
        if seq.s == 0:
            raise ValueError("cannot encode an empty token sequence")
        if self.kind == "transformer":
            cfg = self.enc_config
            padded = pad_to_multiple(seq, cfg.seg_len, self.vocab.pad_id)
            plan = plan_segments(len(padded.ids), cfg.seg_len, self.stride)
            def enc(ids, pad_mask):
                return encode_segment(self.enc_params, cfg, ids, pad_mask)
            hidden = encode_long(enc, padded, plan)
        else:
            hidden = encode_cnn(self.enc_params, self.enc_config, seq.ids[: seq.s])
        return predict(hidden, self.head)

    def probs_for_text(self, text):
        return self.probs_for_ids(self.token_sequence(text))

    def rank_codes(self, text, top_n=None):
        """(code, probability) pairs sorted by descending probability."""
        with no_grad():
            probs = self.probs_for_text(text).data.astype(np.float64)
        order = np.argsort(-probs, kind="stable")
        if top_n is not None:
            order = order[:top_n]
        return [(self.label_set.codes[i], float(probs[i])) for i in order]

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        cfg = {
            "kind": self.kind,
            "s_max": self.s_max,
            "stride": self.stride,
            "encoder": dataclasses.asdict(self.enc_config),
        }
        with open(os.path.join(directory, CONFIG_NAME), "w", encoding="utf-8") as f:
            json.dump(cfg, f, indent=2, sort_keys=True)
            f.write("\n")
        self.vocab.save(os.path.join(directory, VOCAB_NAME))
        self.label_set.save(os.path.join(directory, CODES_NAME))
        checkpoint.save_tensors(directory, [(n, t.data) for n, t in self.named_parameters()])

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, CONFIG_NAME), encoding="utf-8") as f:
            cfg = json.load(f)
        vocab = Vocab.from_file(os.path.join(directory, VOCAB_NAME))
        label_set = LabelSet.from_file(os.path.join(directory, CODES_NAME))
        model = new_model(cfg["kind"], _config_from_dict(cfg["kind"], cfg["encoder"]),
                          vocab, label_set, s_max=cfg["s_max"], stride=cfg["stride"],
                          seed=0)
        arrays = checkpoint.load_tensors(directory)
        named = dict(model.named_parameters())
        if set(arrays) != set(named):
            missing = sorted(set(named) - set(arrays))
            extra = sorted(set(arrays) - set(named))
            raise ValueError(f"checkpoint mismatch: missing={missing} extra={extra}")
        for name, arr in arrays.items():
            t = named[name]
            if arr.shape != t.data.shape:
                raise ValueError(f"{name}: stored shape {arr.shape} != expected {t.data.shape}")
            t.data = arr
        return model


def _config_from_dict(kind, d):
    if kind == "transformer":
        return EncoderConfig(**d)
    return CnnConfig(**d)


def new_model(kind, enc_config, vocab, label_set, s_max, stride=0, seed=0):
    """Freshly initialized model; all weights drawn from one seeded stream."""
    if len(label_set) == 0:
        raise ValueError("label set is empty; training needs at least one code")
    rng = np.random.default_rng(seed)
    if kind == "transformer":
        if len(vocab) != enc_config.vocab_size:
            enc_config = dataclasses.replace(enc_config, vocab_size=len(vocab))
        enc_params = EncoderParams(enc_config, rng)
        hidden = enc_config.hidden
    elif kind == "cnn":
        if enc_config.vocab_size != len(vocab):
            enc_config = dataclasses.replace(enc_config, vocab_size=len(vocab))
        enc_params = CnnParams(enc_config, rng)
        hidden = enc_config.filters
    else:
        raise ValueError(f"encoder kind must be one of {KINDS}, got {kind!r}")
    head = LabelHeadParams(len(label_set), hidden, rng)
    return CodingModel(kind, enc_config, enc_params, head, vocab, label_set,
                       s_max=s_max, stride=stride)
