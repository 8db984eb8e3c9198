"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the library's code paths: counting by scanning,
event extraction by frame-state enumeration, correlation by the raw-sum
formula.
"""

from __future__ import annotations

import math

import numpy as np


def ngram_prob(corpus, order, alpha, vocab_ext, context, token) -> float:
    """(count + alpha) / (total + alpha * V) by scanning every window."""
    bos = vocab_ext
    ctx = tuple(([bos] * order + list(context))[-order:])
    num = 0
    den = 0
    for seq in corpus:
        padded = [bos] * order + list(seq)
        for i in range(order, len(padded)):
            if tuple(padded[i - order : i]) == ctx:
                den += 1
                if padded[i] == token:
                    num += 1
    return (num + alpha) / (den + alpha * vocab_ext)


def sequence_perplexity(corpus, order, alpha, vocab_ext, sequence, skip=0) -> float:
    nll = 0.0
    for i in range(skip, len(sequence)):
        p = ngram_prob(corpus, order, alpha, vocab_ext, sequence[:i], sequence[i])
        nll -= math.log(p)
    return math.exp(nll / (len(sequence) - skip))


def pearson_sums(xs, ys) -> float:
    """Raw-sum product-moment formula."""
    n = len(xs)
    sx = sum(xs)
    sy = sum(ys)
    sxy = sum(x * y for x, y in zip(xs, ys))
    sxx = sum(x * x for x in xs)
    syy = sum(y * y for y in ys)
    return (n * sxy - sx * sy) / math.sqrt((n * sxx - sx * sx) * (n * syy - sy * sy))


def _fill_gaps(voiced: np.ndarray, gap_frames: int) -> np.ndarray:
    out = voiced.copy()
    n = len(out)
    i = 0
    while i < n:
        if not out[i]:
            j = i
            while j < n and not out[j]:
                j += 1
            interior = i > 0 and j < n
            if interior and (j - i) < gap_frames:
                out[i:j] = True
            i = j
        else:
            i += 1
    return out


def _runs(arr: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = None
    for i, v in enumerate(arr):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(arr)))
    return runs


def frame_state_events(
    seg0, seg1, frame_ms: int, ipu_gap_ms: int, backchannel_containment: bool = True
) -> set[tuple]:
    """Event set computed by enumerating frame state.

    Returns tuples: ("ipu", channel, start_ms, end_ms),
    ("pause", channel, start_ms, end_ms),
    ("fto", (from, to), start_ms, end_ms).
    """
    all_segs = list(seg0) + list(seg1)
    n = max((s.end_ms // frame_ms for s in all_segs), default=0) + 2
    voiced = np.zeros((2, n), dtype=bool)
    for s in all_segs:
        voiced[s.channel, s.start_ms // frame_ms : s.end_ms // frame_ms] = True

    gap_frames = ipu_gap_ms // frame_ms
    merged = [_fill_gaps(voiced[c], gap_frames) for c in (0, 1)]
    ipus = {c: _runs(merged[c]) for c in (0, 1)}

    events: set[tuple] = set()
    for c in (0, 1):
        for a, b in ipus[c]:
            events.add(("ipu", c, a * frame_ms, b * frame_ms))
        for (a1, b1), (a2, b2) in zip(ipus[c], ipus[c][1:]):
            if a2 > b1 and not merged[1 - c][b1:a2].any():
                events.add(("pause", c, b1 * frame_ms, a2 * frame_ms))

    def is_bc(c: int, a: int, b: int) -> bool:
        other = merged[1 - c]
        if not other[a:b].all():
            return False
        starts_before = a > 0 and other[a - 1]
        ends_after = b < n and other[b]
        return starts_before or ends_after

    starts: dict[tuple[int, int], tuple[int, int]] = {}
    for c in (0, 1):
        for a, b in ipus[c]:
            if backchannel_containment and is_bc(c, a, b):
                continue
            starts[(a, c)] = (b, c)

    last: tuple[int, int] | None = None  # (end_frame, channel)
    for f in range(n):
        for c in (0, 1):
            if (f, c) in starts:
                end, _ = starts[(f, c)]
                if last is not None and last[1] != c:
                    events.add(
                        ("fto", (last[1], c), last[0] * frame_ms, f * frame_ms)
                    )
                last = (end, c)
    return events
