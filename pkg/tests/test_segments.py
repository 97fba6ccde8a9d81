"""Window planning and long-document stitching semantics."""

import numpy as np
import pytest

from conftest import param_gradcheck
from segcoder.segments import encode_long, plan_segments
from segcoder.tensor import Tensor, mul, no_grad, tensor_sum
from segcoder.tokenizer import TokenSequence, pad_to_multiple
from segcoder.transformer import EncoderConfig, EncoderParams, encode_segment

TINY = dict(num_blocks=1, hidden=8, heads=2, intermediate=16, vocab_size=12,
            max_positions=4, type_vocab=2, seg_len=4, include_pooler=False)


def tiny_encoder(seed=7, dtype=np.float32):
    cfg = EncoderConfig(**TINY)
    params = EncoderParams(cfg, np.random.default_rng(seed), dtype=dtype)

    def enc(ids, pad_mask):
        return encode_segment(params, cfg, ids, pad_mask)

    return enc, params, cfg


class TestPlanSegments:
    def test_disjoint_two_windows(self):
        plan = plan_segments(1024, 512, stride=0)
        assert plan.segments == [(0, 512), (512, 1024)]
        assert list(plan.owner[:512]) == [0] * 512
        assert list(plan.owner[512:]) == [1] * 512

    def test_single_window_any_stride(self):
        for stride in (0, 1, 256, 511):
            plan = plan_segments(512, 512, stride=stride)
            assert plan.segments == [(0, 512)]
            assert np.all(plan.owner == 0)

    def test_overlap_owner_by_center_distance(self):
        plan = plan_segments(768, 512, stride=256)
        assert plan.segments == [(0, 512), (256, 768)]
        # centers at 256 and 512; position 300 is nearer the first center
        assert plan.owner[300] == 0
        # equidistant position 384 goes to the earlier window
        assert plan.owner[384] == 0
        assert plan.owner[385] == 1

    def test_overlap_tail_window_flush_right(self):
        plan = plan_segments(10, 4, stride=2)
        assert plan.segments == [(0, 4), (2, 6), (4, 8), (6, 10)]
        ranges = plan.owned_ranges()
        assert ranges[0][0] == 0 and ranges[-1][1] == 10

    def test_every_position_owned_exactly_once(self):
        for padded, seg, stride in ((12, 4, 0), (20, 5, 2), (16, 8, 3), (9, 4, 1)):
            plan = plan_segments(padded, seg, stride)
            covered = np.zeros(padded, dtype=int)
            for i, (lo, hi) in enumerate(plan.owned_ranges()):
                covered[lo:hi] += 1
                assert np.all(plan.owner[lo:hi] == i)
            assert np.all(covered == 1)

    def test_invalid_stride(self):
        with pytest.raises(ValueError):
            plan_segments(8, 4, stride=4)
        with pytest.raises(ValueError):
            plan_segments(8, 4, stride=-1)

    def test_disjoint_requires_multiple(self):
        with pytest.raises(ValueError):
            plan_segments(10, 4, stride=0)


class TestEncodeLong:
    def test_single_segment_equivalence(self):
        enc, params, cfg = tiny_encoder()
        seq = pad_to_multiple(TokenSequence(ids=np.array([3, 5, 1]), s=3), cfg.seg_len)
        plan = plan_segments(len(seq.ids), cfg.seg_len)
        with no_grad():
            long_out = encode_long(enc, seq, plan)
            direct = enc(seq.ids, np.array([False, False, False, True]))
        assert long_out.data.shape == (3, cfg.hidden)
        np.testing.assert_allclose(long_out.data, direct.data[:3], atol=1e-6)

    def test_two_disjoint_segments_concatenate(self):
        enc, params, cfg = tiny_encoder()
        ids = np.arange(8) % 12
        seq = TokenSequence(ids=ids, s=8)
        plan = plan_segments(8, 4)
        with no_grad():
            long_out = encode_long(enc, seq, plan)
            first = enc(ids[:4], np.zeros(4, bool))
            second = enc(ids[4:], np.zeros(4, bool))
        np.testing.assert_array_equal(long_out.data[:4], first.data)
        np.testing.assert_array_equal(long_out.data[4:], second.data)

    def test_row_count_always_s(self):
        enc, params, cfg = tiny_encoder()
        for s in (1, 3, 4, 5, 9):
            seq = pad_to_multiple(TokenSequence(ids=np.ones(s, dtype=np.int64), s=s),
                                  cfg.seg_len)
            plan = plan_segments(len(seq.ids), cfg.seg_len)
            with no_grad():
                out = encode_long(enc, seq, plan)
            assert out.data.shape == (s, cfg.hidden)

    def test_locality_bit_exact_under_distant_edit(self):
        enc, params, cfg = tiny_encoder()
        ids_a = np.array([1, 2, 3, 4, 5, 6, 7, 8])
        ids_b = ids_a.copy()
        ids_b[6] = 11  # edit inside the second window only
        plan = plan_segments(8, 4)
        with no_grad():
            out_a = encode_long(enc, TokenSequence(ids=ids_a, s=8), plan)
            out_b = encode_long(enc, TokenSequence(ids=ids_b, s=8), plan)
        np.testing.assert_array_equal(out_a.data[:4], out_b.data[:4])
        assert not np.array_equal(out_a.data[4:], out_b.data[4:])

    def test_overlap_agrees_with_disjoint_on_identical_window_content(self):
        # stride>0 windows starting at 0 see the same content as the
        # disjoint first window, so owned rows there must agree exactly
        enc, params, cfg = tiny_encoder()
        ids = np.array([1, 2, 3, 4, 5, 6, 7, 8])
        seq = TokenSequence(ids=ids, s=8)
        with no_grad():
            disjoint = encode_long(enc, seq, plan_segments(8, 4, stride=0))
            overlap = encode_long(enc, seq, plan_segments(8, 4, stride=2))
        # overlap plan: windows (0,4),(2,6),(4,8); window (0,4) owns [0,3)
        np.testing.assert_array_equal(overlap.data[:3], disjoint.data[:3])

    def test_plan_length_mismatch_rejected(self):
        enc, params, cfg = tiny_encoder()
        seq = TokenSequence(ids=np.ones(8, dtype=np.int64), s=8)
        with pytest.raises(ValueError):
            encode_long(enc, seq, plan_segments(12, 4))

    def test_gradients_flow_from_every_segment(self):
        enc, params, cfg = tiny_encoder()
        seq = TokenSequence(ids=(np.arange(8) % 12), s=8)
        plan = plan_segments(8, 4)
        out = encode_long(enc, seq, plan)
        tensor_sum(out).backward()
        # position embeddings are used by both windows; token embedding rows
        # for ids appearing only in the second window must still get grads
        assert params.pos_emb.grad is not None and np.any(params.pos_emb.grad != 0)
        only_second = int(seq.ids[6])
        assert np.any(params.token_emb.grad[only_second] != 0)

    def test_gradient_matches_finite_differences(self):
        enc, params, cfg = tiny_encoder(dtype=np.float64)
        seq = TokenSequence(ids=(np.arange(8) % 12), s=8)
        plan = plan_segments(8, 4)
        probe = Tensor(np.random.default_rng(5).normal(size=(8, 8)))

        def loss():
            return tensor_sum(mul(encode_long(enc, seq, plan), probe))

        named = params.named()
        param_gradcheck([t for _, t in named], loss, rtol=1e-3, atol=1e-6,
                        names=[n for n, _ in named])
