"""Compare the numba-jitted kernels against the pure-numpy fallback.

Times each hot kernel on training-sized arrays, then a full optimizer step
on a small transformer through both backends. Numba compile time is paid
during warmup and excluded from the timings.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import sys
import time

import numpy as np

from segcoder import kernels
from segcoder.corpus import LabelSet, Note
from segcoder.model import new_model
from segcoder.optim import init_adam
from segcoder.tokenizer import PAD_TOKEN, UNK_TOKEN, Vocab
from segcoder.training import prepare_examples, train_step
from segcoder.transformer import EncoderConfig


def best_of(fn, repeats):
    fn()  # warmup; compiles jitted kernels on first call
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng):
    """(name, shape label, argument builder) for every kernel pair."""
    f32 = lambda *s: rng.normal(size=s).astype(np.float32)

    x_sm = f32(2048, 128)
    y_sm = kernels.numpy_impl.softmax_fwd(x_sm)
    x_ln = f32(2048, 256)
    gamma, beta = np.abs(f32(256)) + 0.5, f32(256)
    _, mean, rstd = kernels.numpy_impl.layernorm_fwd(x_ln, gamma, beta, 1e-12)
    x_el = f32(2048 * 1024)
    y_sig = kernels.numpy_impl.sigmoid_fwd(x_el)
    p, g = f32(1_000_000), f32(1_000_000)
    m, v = np.zeros_like(p), np.zeros_like(p)
    table = np.zeros((30522, 256), dtype=np.float32)
    ids = rng.integers(0, 30522, size=2048)
    rows = f32(2048, 256)

    return [
        ("softmax fwd", "2048x128", lambda k: k.softmax_fwd(x_sm)),
        ("softmax bwd", "2048x128", lambda k: k.softmax_bwd(y_sm, y_sm)),
        ("layernorm fwd", "2048x256",
         lambda k: k.layernorm_fwd(x_ln, gamma, beta, 1e-12)),
        ("layernorm bwd", "2048x256",
         lambda k: k.layernorm_bwd(x_ln, x_ln, gamma, mean, rstd)),
        ("gelu fwd", "2M", lambda k: k.gelu_fwd(x_el)),
        ("gelu bwd", "2M", lambda k: k.gelu_bwd(x_el, x_el)),
        ("sigmoid fwd", "2M", lambda k: k.sigmoid_fwd(x_el)),
        ("sigmoid bwd", "2M", lambda k: k.sigmoid_bwd(y_sig, y_sig)),
        ("adam update", "1M params",
         lambda k: k.adam_update(p, g, m, v, 10, 1e-3, 0.9, 0.999, 1e-8)),
        ("scatter add", "2048x256 into 30522",
         lambda k: k.scatter_add(table, ids, rows)),
    ]


def bench_train_step(backend, repeats):
    kernels.set_backend(backend)
    rng = np.random.default_rng(0)
    vocab = Vocab([PAD_TOKEN, UNK_TOKEN] + [f"t{i}" for i in range(30)])
    cfg = EncoderConfig(num_blocks=1, hidden=32, heads=2, intermediate=128,
                        vocab_size=len(vocab), max_positions=64, type_vocab=2,
                        seg_len=64, include_pooler=False)
    labels = LabelSet([f"C{i}" for i in range(8)])
    model = new_model("transformer", cfg, vocab, labels, s_max=256, seed=0)
    notes = [Note(f"n{i}", " ".join(f"t{j % 30}" for j in range(i, i + 256)),
                  [f"C{i % 8}"]) for i in range(4)]
    batch = prepare_examples(model, notes)
    state = init_adam(model.parameters(), lr=1e-3)
    return best_of(lambda: train_step(model, batch, state), repeats)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed runs per case; the best is reported")
    args = ap.parse_args(argv)

    if kernels.numba_impl is None:
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1

    print(f"{'kernel':<16} {'shape':<22} {'numpy ms':>9} {'numba ms':>9} {'speedup':>8}")
    rng = np.random.default_rng(42)
    for name, shape, run in kernel_cases(rng):
        t_np = best_of(lambda: run(kernels.numpy_impl), args.repeats) * 1e3
        t_nb = best_of(lambda: run(kernels.numba_impl), args.repeats) * 1e3
        print(f"{name:<16} {shape:<22} {t_np:>9.3f} {t_nb:>9.3f} {t_np / t_nb:>7.2f}x")

    t_np = bench_train_step("numpy", args.repeats) * 1e3
    t_nb = bench_train_step("numba", args.repeats) * 1e3
    print(f"{'train step':<16} {'d=32 L=1 s=256 B=4':<22} "
          f"{t_np:>9.3f} {t_nb:>9.3f} {t_np / t_nb:>7.2f}x")

    kernels.set_backend(os.environ.get("SEGCODER_BACKEND", "auto"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
