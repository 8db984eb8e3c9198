"""Synthetic dual-channel dialogues with controllable turn-taking.

A dialogue alternates turns between the two speakers. A turn is one or
more voiced segments (IPUs) separated by same-speaker pauses; the floor
transfers with a signed offset (negative = overlap) from the end of the
turn's final IPU to the start of the other speaker's first IPU. Short
backchannel bursts can be injected on the listening channel, fully inside
the floor-holder's non-final IPUs. Voiced frames follow a self-looping
Markov chain over non-silence units; silent frames are the silence token.

Durations are Gaussian, rounded to whole frames and truncated at one
frame. Every dialogue derives its RNG stream from (seed, index), so
parallel and serial generation agree bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadDuration, EmptyCorpus
from .tokens import TokenStream, Vocab, chunk_streams, deduplicate, flatten


@dataclass(frozen=True)
class DialogueStyle:
    """Generation knobs; all duration pairs are (mean_ms, std_ms)."""

    vocab: Vocab = field(default_factory=Vocab)
    ipu_ms: tuple[float, float] = (2000.0, 500.0)
    pause_ms: tuple[float, float] = (600.0, 150.0)
    fto_ms: tuple[float, float] = (250.0, 150.0)
    turn_continue_prob: float = 0.35
    backchannel_prob: float = 0.15
    backchannel_ms: tuple[float, float] = (320.0, 80.0)
    p_self: float = 0.35
    silence_token: int = 0
    unit_range: tuple[int, int] | None = None
    successor_count: int | None = None

    def __post_init__(self) -> None:
        for name in ("ipu_ms", "pause_ms", "backchannel_ms"):
            mean, std = getattr(self, name)
            if mean <= 0 or std < 0:
                raise ValueError(f"{name} needs mean > 0 and std >= 0, got {(mean, std)}")
        for name in ("turn_continue_prob", "backchannel_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 0.0 <= self.p_self < 1.0:
            raise ValueError(f"p_self must be in [0, 1), got {self.p_self}")
        if self.silence_token not in self.vocab.silence_tokens:
            raise ValueError(
                f"silence_token {self.silence_token} not in vocab silence set"
            )
        if self.unit_range is not None:
            lo, hi = self.unit_range
            if not (0 <= lo < hi <= self.vocab.size):
                raise ValueError(f"unit_range {self.unit_range} outside [0, {self.vocab.size})")
        if self.successor_count is not None and self.successor_count < 1:
            raise ValueError(f"successor_count must be >= 1, got {self.successor_count}")
        if len(self.units) == 0:
            raise ValueError("no non-silence units available for content")

    @property
    def units(self) -> tuple[int, ...]:
        """Non-silence content alphabet."""
        lo, hi = self.unit_range if self.unit_range else (0, self.vocab.size)
        return tuple(u for u in range(lo, hi) if u not in self.vocab.silence_tokens)

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab.size,
            "frame_ms": self.vocab.frame_ms,
            "silence_token": self.silence_token,
            "ipu_ms": list(self.ipu_ms),
            "pause_ms": list(self.pause_ms),
            "fto_ms": list(self.fto_ms),
            "turn_continue_prob": self.turn_continue_prob,
            "backchannel_prob": self.backchannel_prob,
            "backchannel_ms": list(self.backchannel_ms),
            "p_self": self.p_self,
            "unit_range": list(self.unit_range) if self.unit_range else None,
            "successor_count": self.successor_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueStyle":
        known = {
            "vocab_size", "frame_ms", "silence_token", "ipu_ms", "pause_ms",
            "fto_ms", "turn_continue_prob", "backchannel_prob",
            "backchannel_ms", "p_self", "unit_range", "successor_count",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown style keys: {sorted(unknown)}")
        base = cls()
        vocab = Vocab(
            size=int(data.get("vocab_size", base.vocab.size)),
            frame_ms=int(data.get("frame_ms", base.vocab.frame_ms)),
            silence_tokens=frozenset({int(data.get("silence_token", 0))}),
        )
        def pair(key: str, default: tuple[float, float]) -> tuple[float, float]:
            raw = data.get(key, default)
            return (float(raw[0]), float(raw[1]))
        unit_range = data.get("unit_range")
        return cls(
            vocab=vocab,
            ipu_ms=pair("ipu_ms", base.ipu_ms),
            pause_ms=pair("pause_ms", base.pause_ms),
            fto_ms=pair("fto_ms", base.fto_ms),
            turn_continue_prob=float(data.get("turn_continue_prob", base.turn_continue_prob)),
            backchannel_prob=float(data.get("backchannel_prob", base.backchannel_prob)),
            backchannel_ms=pair("backchannel_ms", base.backchannel_ms),
            p_self=float(data.get("p_self", base.p_self)),
            silence_token=int(data.get("silence_token", 0)),
            unit_range=(int(unit_range[0]), int(unit_range[1])) if unit_range else None,
            successor_count=(int(data["successor_count"])
                             if data.get("successor_count") is not None else None),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "DialogueStyle":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class PlannedEvent:
    """An event as constructed by the generator (frame units).

    For ftos, start_frame is the outgoing turn's final IPU end and
    end_frame the incoming turn's first IPU start; duration is signed.
    ``realized`` marks events that lie fully inside the dialogue and are
    therefore recoverable by measurement.
    """

    kind: str  # ipu | pause | fto | backchannel
    channel: int | None
    start_frame: int
    end_frame: int
    realized: bool

    @property
    def duration_frames(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class DialogueRecord:
    id: str
    s0: TokenStream
    s1: TokenStream


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[DialogueRecord, ...]
    style: DialogueStyle | None = None
    seed: int | None = None

    def as_dict(self) -> dict[str, tuple[TokenStream, TokenStream]]:
        return {d.id: (d.s0, d.s1) for d in self.dialogues}

    def __len__(self) -> int:
        return len(self.dialogues)


def _gauss_frames(rng: np.random.Generator, pair: tuple[float, float], frame_ms: int) -> int:
    """Gaussian duration in frames, minimum one frame."""
    ms = rng.normal(pair[0], pair[1])
    return max(1, int(round(ms / frame_ms)))


def _gauss_frames_signed(rng: np.random.Generator, pair: tuple[float, float], frame_ms: int) -> int:
    return int(round(rng.normal(pair[0], pair[1]) / frame_ms))


def _markov_content(
    rng: np.random.Generator,
    units: Sequence[int],
    p_self: float,
    length: int,
    successor_count: int | None = None,
) -> list[int]:
    """Self-looping Markov chain over the content units.

    With ``successor_count`` set, each unit jumps only within a fixed
    per-unit successor set (sparse transition matrix, learnable by a
    low-order model); otherwise jumps are uniform over the other units.
    """
    if length <= 0:
        return []
    m = len(units)
    idx = int(rng.integers(m))
    out = []
    for _ in range(length):
        out.append(units[idx])
        if m > 1 and rng.random() >= p_self:
            if successor_count is None:
                j = int(rng.integers(m - 1))
                idx = (m - 1) if j == idx else j
            else:
                j = int(rng.integers(successor_count))
                idx = (idx + 1 + ((idx * 7 + j * 11) % (m - 1))) % m
    return out


def generate_dialogue_with_log(
    style: DialogueStyle, duration_ms: int, seed
) -> tuple[TokenStream, TokenStream, list[PlannedEvent]]:
    """Like :func:`generate_dialogue` but also returns the construction log."""
    frame_ms = style.vocab.frame_ms
    if duration_ms < 0 or duration_ms % frame_ms != 0:
        raise BadDuration(
            f"duration_ms={duration_ms} must be a non-negative multiple of frame_ms={frame_ms}"
        )
    n = duration_ms // frame_ms
    rng = np.random.default_rng(seed)
    sil = style.silence_token
    ch: list[list[int]] = [[sil] * n, [sil] * n]
    units = style.units
    events: list[PlannedEvent] = []

    def paint(c: int, a: int, b: int) -> None:
        content = _markov_content(rng, units, style.p_self, b - a,
                                  style.successor_count)
        for off, tok in enumerate(content):
            f = a + off
            if 0 <= f < n:
                ch[c][f] = tok

    speaker = 0
    t = 0
    while t < n:
        ipus: list[tuple[int, int]] = []
        cursor = t
        while True:
            dur = _gauss_frames(rng, style.ipu_ms, frame_ms)
            ipus.append((cursor, cursor + dur))
            if rng.random() < style.turn_continue_prob:
                gap = _gauss_frames(rng, style.pause_ms, frame_ms)
                cursor = cursor + dur + gap
                if cursor >= n:
                    break
            else:
                break
        for a, b in ipus:
            paint(speaker, a, b)
            events.append(PlannedEvent("ipu", speaker, a, b, realized=b <= n))
        for (a1, b1), (a2, b2) in zip(ipus, ipus[1:]):
            events.append(
                PlannedEvent("pause", speaker, b1, a2, realized=b1 <= n and a2 < n)
            )
        # Backchannels live strictly inside the floor-holder's non-final
        # IPUs so they never blur floor transfers.
        other = 1 - speaker
        for a, b in ipus[:-1]:
            if rng.random() < style.backchannel_prob:
                bc_dur = _gauss_frames(rng, style.backchannel_ms, frame_ms)
                lo, hi = a + 1, b - 1 - bc_dur
                if hi >= lo:
                    bc_a = lo + int(rng.integers(hi - lo + 1))
                    paint(other, bc_a, bc_a + bc_dur)
                    events.append(
                        PlannedEvent("backchannel", other, bc_a, bc_a + bc_dur,
                                     realized=bc_a + bc_dur <= n)
                    )
        last_a, last_b = ipus[-1]
        fto = _gauss_frames_signed(rng, style.fto_ms, frame_ms)
        nxt = max(last_b + fto, last_a + 1)
        events.append(
            PlannedEvent("fto", None, last_b, nxt, realized=last_b <= n and nxt < n)
        )
        t = nxt
        speaker = other

    s0 = TokenStream(speaker=0, tokens=tuple(ch[0]), frame_ms=frame_ms)
    s1 = TokenStream(speaker=1, tokens=tuple(ch[1]), frame_ms=frame_ms)
    return s0, s1, events


def generate_dialogue(
    style: DialogueStyle, duration_ms: int, seed
) -> tuple[TokenStream, TokenStream]:
    """Generate one dialogue; both channels are exactly duration_ms long."""
    s0, s1, _ = generate_dialogue_with_log(style, duration_ms, seed)
    return s0, s1


def generate_corpus(
    style: DialogueStyle, count: int, duration_ms: int, seed: int
) -> Corpus:
    dialogues = []
    for i in range(count):
        s0, s1 = generate_dialogue(style, duration_ms, [seed, i])
        dialogues.append(DialogueRecord(id=f"d{i:05d}", s0=s0, s1=s1))
    return Corpus(dialogues=tuple(dialogues), style=style, seed=seed)


def build_stage2_corpus(
    turns: Sequence[tuple[int, Sequence[int]]], style: DialogueStyle
) -> tuple[TokenStream, TokenStream]:
    """Turn-based dialogue as strictly exclusive channels.

    During each turn, the speaking channel carries the utterance and the
    other channel carries silence of identical duration, so the two
    channels never voice simultaneously.
    """
    ch: list[list[int]] = [[], []]
    sil = style.silence_token
    for speaker, utterance in turns:
        if speaker not in (0, 1):
            raise ValueError(f"speaker must be 0 or 1, got {speaker}")
        utt = list(utterance)
        if not utt:
            raise ValueError("stage-2 utterances must be non-empty")
        ch[speaker].extend(utt)
        ch[1 - speaker].extend([sil] * len(utt))
    frame_ms = style.vocab.frame_ms
    return (
        TokenStream(speaker=0, tokens=tuple(ch[0]), frame_ms=frame_ms),
        TokenStream(speaker=1, tokens=tuple(ch[1]), frame_ms=frame_ms),
    )


def generate_stage2_dialogue(
    style: DialogueStyle, n_turns: int, seed
) -> tuple[TokenStream, TokenStream]:
    """Alternating-turn dialogue in the exclusive stage-2 shape."""
    rng = np.random.default_rng(seed)
    turns = []
    for i in range(n_turns):
        dur = _gauss_frames(rng, style.ipu_ms, style.vocab.frame_ms)
        content = _markov_content(rng, style.units, style.p_self, dur,
                                  style.successor_count)
        # trailing silence marks the turn's end on the speaking channel
        gap = _gauss_frames(rng, style.pause_ms, style.vocab.frame_ms)
        turns.append((i % 2, content + [style.silence_token] * gap))
    return build_stage2_corpus(turns, style)


@dataclass(frozen=True)
class CorpusStats:
    """Aggregate event and token-rate statistics for a corpus."""

    event_means_ms: dict[str, float]
    event_stds_ms: dict[str, float]
    event_counts: dict[str, int]
    overlap_frames: int
    total_frames_per_channel: int
    raw_tokens_per_s: float
    dedup_tokens_per_s: float
    dedup_rates_per_dialogue: tuple[float, ...]

    @property
    def compression_ratio(self) -> float:
        return self.dedup_tokens_per_s / self.raw_tokens_per_s


def corpus_stats(corpus: Corpus, chunk_ms: int = 160, event_params=None) -> CorpusStats:
    """Empirical per-event duration statistics plus codec token rates.

    Raw rate counts the fully interleaved chunk form (both tags plus every
    frame of both channels); dedup rate counts the flattened deduplicated
    wire form.
    """
    from . import metrics  # local import; metrics stays synth-agnostic

    if len(corpus) == 0:
        raise EmptyCorpus("corpus has no dialogues")
    params = event_params if event_params is not None else metrics.EventParams()
    vocab = _corpus_vocab(corpus)

    durations: dict[str, list[float]] = {"ipu": [], "pause": [], "fto": []}
    overlap = 0
    total_frames = 0
    raw_tokens = 0
    dedup_tokens = 0
    total_seconds = 0.0
    rates = []
    for rec in corpus.dialogues:
        silence = vocab.silence_tokens
        seg0 = metrics.vad(rec.s0, silence, params.min_voiced_ms, params.bridge_ms)
        seg1 = metrics.vad(rec.s1, silence, params.min_voiced_ms, params.bridge_ms)
        for ev in metrics.turn_events(seg0, seg1, params.ipu_gap_ms,
                                      params.backchannel_containment):
            durations[ev.kind].append(float(ev.duration_ms))
        overlap += sum(
            1
            for a, b in zip(rec.s0.tokens, rec.s1.tokens)
            if a not in silence and b not in silence
        )
        total_frames += len(rec.s0)
        if len(rec.s0) > 0:
            chunked = chunk_streams(rec.s0, rec.s1, chunk_ms, vocab)
            flat = flatten(deduplicate(chunked))
            raw = len(chunked.chunks) * (2 + 2 * chunked.frames_per_chunk)
            seconds = len(chunked.chunks) * chunk_ms / 1000.0
            raw_tokens += raw
            dedup_tokens += len(flat)
            total_seconds += seconds
            rates.append(len(flat) / seconds)

    means = {k: float(np.mean(v)) if v else float("nan") for k, v in durations.items()}
    stds = {k: float(np.std(v)) if v else float("nan") for k, v in durations.items()}
    counts = {k: len(v) for k, v in durations.items()}
    return CorpusStats(
        event_means_ms=means,
        event_stds_ms=stds,
        event_counts=counts,
        overlap_frames=overlap,
        total_frames_per_channel=total_frames,
        raw_tokens_per_s=raw_tokens / total_seconds if total_seconds else float("nan"),
        dedup_tokens_per_s=dedup_tokens / total_seconds if total_seconds else float("nan"),
        dedup_rates_per_dialogue=tuple(rates),
    )


def _corpus_vocab(corpus: Corpus) -> Vocab:
    if corpus.style is not None:
        return corpus.style.vocab
    frame_ms = corpus.dialogues[0].s0.frame_ms
    return Vocab(frame_ms=frame_ms)
