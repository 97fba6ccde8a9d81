"""Per-class attention pooling and binary classifiers.

Each class c owns an attention vector q_c used to pool the s token vectors
into one document vector z_c, and a linear classifier (w_c, b_c) whose
sigmoid output is the class probability. The attention layer holds d*K
scalars and the classifier layer (d+1)*K.
"""

import numpy as np

from .tensor import (
    Tensor,
    add,
    matmul,
    mul,
    reshape,
    sigmoid,
    softmax,
    tensor_sum,
    transpose,
)
from .transformer import truncated_normal


class LabelHeadParams:
    def __init__(self, num_classes, hidden, rng, dtype=np.float32):
        self.num_classes = num_classes
        self.hidden = hidden
        self.Q = Tensor(truncated_normal(rng, (num_classes, hidden), dtype=dtype), requires_grad=True)
        self.W = Tensor(truncated_normal(rng, (num_classes, hidden), dtype=dtype), requires_grad=True)
        self.b = Tensor(np.zeros(num_classes, dtype=dtype), requires_grad=True)

    def named(self):
        return [("head.Q", self.Q), ("head.W", self.W), ("head.b", self.b)]

    def tensors(self):
        return [t for _, t in self.named()]


def attention_param_count(hidden, num_classes):
    return hidden * num_classes


def classifier_param_count(hidden, num_classes):
    return (hidden + 1) * num_classes


def _require_tokens(E):
    if E.data.ndim != 2 or E.data.shape[0] < 1:
        raise ValueError(f"need at least one token row, got shape {E.data.shape}")


def attention_weights(E, q_c):
    """Softmax attention over tokens for one class vector q_c."""
    _require_tokens(E)
    s, d = E.data.shape
    scores = reshape(matmul(E, reshape(q_c, (d, 1))), (1, s))
    return reshape(softmax(scores, axis=-1), (s,))


def pool_document(E, q_c):
    """Attention-weighted sum of token vectors: a convex combination."""
    s = E.data.shape[0]
    alpha = attention_weights(E, q_c)
    return reshape(matmul(reshape(alpha, (1, s)), E), (E.data.shape[1],))


def predict(E, head):
    """Probabilities for all classes from token representations E [s, d].

    Computed as one E @ Q^T product with a per-class softmax over tokens,
    which equals the per-class loop but scales to large K.
    """
    _require_tokens(E)
    if E.data.shape[1] != head.hidden:
        raise ValueError(f"token dim {E.data.shape[1]} != head dim {head.hidden}")
    scores = transpose(matmul(E, transpose(head.Q)))          # [K, s]
    alpha = softmax(scores, axis=-1)
    z = matmul(alpha, E)                                      # [K, d]
    logits = add(tensor_sum(mul(z, head.W), axis=1), head.b)  # [K]
    return sigmoid(logits)
