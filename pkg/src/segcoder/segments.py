"""Long-document handling: window planning and per-segment encoding.

A padded token sequence is split into fixed-length windows (disjoint by
default, overlapping when ``stride > 0``), each window is encoded
independently, and the per-token vectors are stitched back into one long
sequence. With overlap, each token's vector comes from the window whose
center is nearest (ties to the earlier window), so every position is owned
by exactly one window.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import concat_rows, slice_rows


@dataclass
class SegmentPlan:
    seg_len: int
    stride: int
    segments: list          # (start, end) pairs covering [0, padded_len)
    owner: np.ndarray       # per-token index of the owning segment

    @property
    def padded_len(self):
        return len(self.owner)

    def owned_ranges(self):
        """Per segment, the contiguous [lo, hi) span of tokens it owns."""
        ranges = []
        for i, (start, end) in enumerate(self.segments):
            pos = np.nonzero(self.owner == i)[0]
            if len(pos) == 0:
                ranges.append((0, 0))
                continue
            lo, hi = int(pos[0]), int(pos[-1]) + 1
            if hi - lo != len(pos):
                raise AssertionError(f"segment {i} owns a non-contiguous span")
            if lo < start or hi > end:
                raise AssertionError(
                    f"segment {i} owns [{lo},{hi}) outside its window [{start},{end})")
            ranges.append((lo, hi))
        return ranges


def plan_segments(padded_len, seg_len, stride=0):
    """Window layout for a padded sequence.

    stride=0 tiles the sequence with disjoint windows (padded_len must be a
    multiple of seg_len); stride>0 advances windows by seg_len - stride and
    appends a final flush-right window if needed.
    """
    if not 0 <= stride < seg_len:
        raise ValueError(f"stride must satisfy 0 <= stride < seg_len, got {stride}")
    if padded_len < seg_len:
        raise ValueError(f"padded length {padded_len} shorter than segment {seg_len}")
    if stride == 0:
        if padded_len % seg_len != 0:
            raise ValueError(
                f"padded length {padded_len} is not a multiple of seg_len {seg_len}"
            )
        starts = list(range(0, padded_len, seg_len))
    else:
        step = seg_len - stride
        starts = list(range(0, padded_len - seg_len + 1, step))
        if starts[-1] + seg_len < padded_len:
            starts.append(padded_len - seg_len)
    segments = [(s, s + seg_len) for s in starts]
    centers = np.array([(s + e) / 2.0 for s, e in segments])
    lo = np.array([s for s, _ in segments])
    hi = np.array([e for _, e in segments])
    positions = np.arange(padded_len)
    # a token may only be owned by a window containing it; among those the
    # nearest center wins, with argmin breaking ties toward the earlier one
    dist = np.abs(positions[:, None] - centers[None, :])
    contained = (positions[:, None] >= lo[None, :]) & (positions[:, None] < hi[None, :])
    dist = np.where(contained, dist, np.inf)
    owner = np.argmin(dist, axis=1).astype(np.int64)
    return SegmentPlan(seg_len=seg_len, stride=stride, segments=segments, owner=owner)


def encode_long(encoder, seq, plan):
    """Stitched per-token representations for a whole document.

    ``encoder`` maps (ids, pad_mask) for one window to a [seg_len, d]
    tensor. Windows are encoded in order; each real token position i < s
    takes its row from its owner window, and the padded tail is dropped, so
    the result has exactly ``seq.s`` rows.
    """
    padded = len(seq.ids)
    if plan.padded_len != padded:
        raise ValueError(f"plan covers {plan.padded_len} tokens, sequence has {padded}")
    pad_mask = np.arange(padded) >= seq.s
    pieces = []
    for (start, end), (lo, hi) in zip(plan.segments, plan.owned_ranges()):
        out = encoder(seq.ids[start:end], pad_mask[start:end])
        if hi > lo:
            pieces.append(slice_rows(out, lo - start, hi - start))
    stitched = concat_rows(pieces)
    return slice_rows(stitched, 0, seq.s)
