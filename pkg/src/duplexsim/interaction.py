"""Continuation-mode generation and the latency-tolerant interaction loop.

Decoding is grammar-constrained over the wire format: the channel-0 tag
opens every chunk, a channel's novel token may never equal its previous
novel token, the channel-1 tag implies at least one novel token, and
per-chunk novel counts are capped at the chunk's frame slots. Stopping a
channel's novel list is the act of sampling either tag; whether channel 1
speaks in a chunk is always decided by a dedicated two-way draw so that
estimation and free-running generation share one sampling discipline.

The interaction loop runs both sides chunk-by-chunk. To emit its chunk at
step t, an agent holds the other side's actual chunks only up to
t - latency and fills the missing window with freshly sampled estimates;
arrived actual chunks replace estimates in every later context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ChunkOverflow, SourceExhausted
from .ngram import NgramModel, SamplerConfig, sample_constrained
from .tokens import DedupChunk, DedupDialogue, Vocab, flatten, parse

OVERFLOW_POLICIES = ("truncate", "error")


@dataclass(frozen=True)
class InteractionConfig:
    chunk_ms: int = 160
    latency_chunks: int = 1
    max_chunks: int = 50
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    overflow_policy: str = "truncate"

    def __post_init__(self) -> None:
        if self.latency_chunks < 0:
            raise ValueError(f"latency_chunks must be >= 0, got {self.latency_chunks}")
        if self.max_chunks < 1:
            raise ValueError(f"max_chunks must be >= 1, got {self.max_chunks}")
        if self.overflow_policy not in OVERFLOW_POLICIES:
            raise ValueError(f"overflow_policy must be one of {OVERFLOW_POLICIES}")


@dataclass
class StepRecord:
    """One generated chunk: what the model emitted, what the user actually
    said, and the context the model saw when emitting."""

    index: int
    llm_chunk: list[int]
    user_actual: list[int]
    user_estimated: list[int] | None
    estimate_history: list[list[int]]
    context_snapshot: list[int]
    context_snapshot_len: int
    truncations: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "llm_chunk": self.llm_chunk,
            "user_actual": self.user_actual,
            "user_estimated": self.user_estimated,
            "estimate_history": self.estimate_history,
            "context_snapshot": self.context_snapshot,
            "context_snapshot_len": self.context_snapshot_len,
            "truncations": self.truncations,
        }


@dataclass
class InteractionTranscript:
    config: InteractionConfig
    seed: int
    prompt_chunks: int
    steps: list[StepRecord]
    dialogue: DedupDialogue
    user_truncations: int = 0

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "chunk_ms": self.config.chunk_ms,
                "latency_chunks": self.config.latency_chunks,
                "max_chunks": self.config.max_chunks,
                "sampler": {
                    "temperature": self.config.sampler.temperature,
                    "top_k": self.config.sampler.top_k,
                    "seed": self.config.sampler.seed,
                },
                "overflow_policy": self.config.overflow_policy,
            },
            "seed": self.seed,
            "prompt_chunks": self.prompt_chunks,
            "steps": [s.to_dict() for s in self.steps],
            "dialogue": dialogue_to_json_dict(self.dialogue),
            "user_truncations": self.user_truncations,
        }


def dialogue_to_json_dict(d: DedupDialogue) -> dict:
    return {
        "vocab_size": d.vocab.size,
        "frame_ms": d.vocab.frame_ms,
        "silence": sorted(d.vocab.silence_tokens),
        "chunk_ms": d.chunk_ms,
        "chunks": [
            {"s0": list(c.s0_novel), "s1": list(c.s1_novel)} for c in d.chunks
        ],
    }


def dialogue_from_json_dict(data: dict) -> DedupDialogue:
    vocab = Vocab(
        size=int(data["vocab_size"]),
        frame_ms=int(data["frame_ms"]),
        silence_tokens=frozenset(int(t) for t in data["silence"]),
    )
    chunks = tuple(
        DedupChunk(s0_novel=tuple(c["s0"]), s1_novel=tuple(c["s1"]))
        for c in data["chunks"]
    )
    return DedupDialogue(vocab=vocab, chunk_ms=int(data["chunk_ms"]), chunks=chunks)


class _Decoder:
    """Grammar-constrained sampler for one agent; owns that agent's RNG."""

    def __init__(
        self,
        model: NgramModel,
        vocab: Vocab,
        chunk_ms: int,
        cfg: SamplerConfig,
        rng: np.random.Generator,
        policy: str = "truncate",
    ):
        if model.vocab_ext != vocab.extended_size:
            raise ValueError(
                f"model vocab_ext={model.vocab_ext} does not match vocab extended size "
                f"{vocab.extended_size}"
            )
        self.model = model
        self.vocab = vocab
        self.fpc = vocab.frames_per_chunk(chunk_ms)
        self.cfg = cfg
        self.rng = rng
        self.policy = policy
        self.truncations = 0

    def _allowed_units(self, last_tok: int | None) -> list[int]:
        return [u for u in range(self.vocab.size) if u != last_tok]

    def channel_novels(
        self, ctx: list[int], last_tok: int | None, require_first: bool = False
    ) -> list[int]:
        """Sample one channel's novel tokens for the current chunk.

        ``ctx`` must end where the channel's first unit would go; sampled
        units are appended to it. Sampling either tag stops the list (the
        tag itself is not appended; chunk structure is the caller's job).
        """
        tags = [self.vocab.tag_s0, self.vocab.tag_s1]
        novels: list[int] = []
        while True:
            at_capacity = len(novels) >= self.fpc
            if at_capacity:
                if self.policy == "error":
                    tok = sample_constrained(
                        self.model, ctx, self._allowed_units(last_tok) + tags,
                        self.cfg, self.rng,
                    )
                    if tok < self.vocab.size:
                        raise ChunkOverflow(
                            f"model emitted {self.fpc + 1} novel tokens in one chunk"
                        )
                else:
                    self.truncations += 1
                break
            allowed = self._allowed_units(last_tok)
            if not (require_first and not novels):
                allowed = allowed + tags
            tok = sample_constrained(self.model, ctx, allowed, self.cfg, self.rng)
            if tok >= self.vocab.size:
                break
            novels.append(tok)
            ctx.append(tok)
            last_tok = tok
        return novels

    def s1_speaks(self, ctx: list[int]) -> bool:
        """Two-way draw: does channel 1 contribute novel tokens this chunk?"""
        tok = sample_constrained(
            self.model, ctx, [self.vocab.tag_s0, self.vocab.tag_s1], self.cfg, self.rng
        )
        return tok == self.vocab.tag_s1

    def estimate_channel1(self, ctx: list[int], last_tok: int | None) -> list[int]:
        """Channel-1 side of the current chunk; extends ctx with its wire
        form when non-empty."""
        if not self.s1_speaks(ctx):
            return []
        ctx.append(self.vocab.tag_s1)
        return self.channel_novels(ctx, last_tok, require_first=True)


def _scan_last_novels(wire: Sequence[int], vocab: Vocab) -> tuple[int | None, int | None]:
    """Last novel unit of each channel in a wire-format prefix."""
    last: list[int | None] = [None, None]
    channel = 0
    for tok in wire:
        if tok == vocab.tag_s0:
            channel = 0
        elif tok == vocab.tag_s1:
            channel = 1
        else:
            last[channel] = tok
    return last[0], last[1]


def _append_chunk_wire(
    ctx: list[int], vocab: Vocab, s0: Sequence[int], s1: Sequence[int],
    last: list[int | None],
) -> None:
    ctx.append(vocab.tag_s0)
    ctx.extend(s0)
    if s0:
        last[0] = s0[-1]
    if s1:
        ctx.append(vocab.tag_s1)
        ctx.extend(s1)
        last[1] = s1[-1]


def _validate_prompt(prompt: DedupDialogue) -> None:
    # cheap well-formedness check: the wire form must parse back
    parse(flatten(prompt), prompt.vocab, prompt.chunk_ms)


def continue_dialogue(
    model: NgramModel,
    prompt: DedupDialogue,
    n_chunks: int,
    cfg: SamplerConfig | None = None,
    forced_user: Sequence[Sequence[int]] | None = None,
    overflow_policy: str = "truncate",
) -> DedupDialogue:
    """Autoregressively extend a dialogue by ``n_chunks`` chunks.

    With ``forced_user`` the channel-1 side of each new chunk is spliced
    in verbatim (teacher forcing) instead of being sampled.
    """
    if n_chunks < 1:
        raise ValueError(f"n_chunks must be >= 1, got {n_chunks}")
    if forced_user is not None and len(forced_user) != n_chunks:
        raise ValueError("forced_user must provide one chunk per generated chunk")
    _validate_prompt(prompt)
    cfg = cfg if cfg is not None else SamplerConfig()
    vocab = prompt.vocab
    rng = np.random.default_rng(cfg.seed)
    dec = _Decoder(model, vocab, prompt.chunk_ms, cfg, rng, overflow_policy)

    ctx = flatten(prompt)
    last = list(_scan_last_novels(ctx, vocab))
    chunks = list(prompt.chunks)
    for i in range(n_chunks):
        ctx.append(vocab.tag_s0)
        s0 = dec.channel_novels(ctx, last[0])
        if s0:
            last[0] = s0[-1]
        if forced_user is not None:
            s1 = list(forced_user[i])
            if s1:
                ctx.append(vocab.tag_s1)
                ctx.extend(s1)
                last[1] = s1[-1]
        else:
            s1 = dec.estimate_channel1(ctx, last[1])
            if s1:
                last[1] = s1[-1]
        chunks.append(DedupChunk(s0_novel=tuple(s0), s1_novel=tuple(s1)))
    return DedupDialogue(vocab=vocab, chunk_ms=prompt.chunk_ms, chunks=tuple(chunks))


def estimate_user_chunk(
    model: NgramModel,
    context: Sequence[int],
    vocab: Vocab,
    chunk_ms: int,
    cfg: SamplerConfig | None = None,
    rng: np.random.Generator | None = None,
    overflow_policy: str = "truncate",
) -> list[int]:
    """One chunk of the channel-1 side given a context that ends at a
    channel-1 boundary (right after the chunk's channel-0 content)."""
    cfg = cfg if cfg is not None else SamplerConfig()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    dec = _Decoder(model, vocab, chunk_ms, cfg, rng, overflow_policy)
    ctx = list(context)
    _, last1 = _scan_last_novels(ctx, vocab)
    return dec.estimate_channel1(ctx, last1)


def simulate_interaction(
    model_llm: NgramModel,
    user_source: NgramModel | DedupDialogue,
    cfg: InteractionConfig,
    vocab: Vocab | None = None,
    prompt: DedupDialogue | None = None,
) -> InteractionTranscript:
    """Run the lockstep protocol between the model and a user source.

    The user source is either a second model (which runs the same
    estimate-ahead protocol from its side) or a scripted dialogue whose
    channel-1 chunks are revealed with the configured latency.
    """
    scripted = isinstance(user_source, DedupDialogue)
    if vocab is None:
        if prompt is not None:
            vocab = prompt.vocab
        elif scripted:
            vocab = user_source.vocab
        else:
            vocab = Vocab()
    if prompt is not None and prompt.chunk_ms != cfg.chunk_ms:
        raise ValueError(
            f"prompt chunk_ms {prompt.chunk_ms} != config chunk_ms {cfg.chunk_ms}"
        )
    if prompt is not None:
        _validate_prompt(prompt)
    L = cfg.latency_chunks
    p_chunks = len(prompt.chunks) if prompt is not None else 0
    if cfg.max_chunks <= p_chunks:
        raise ValueError(
            f"max_chunks ({cfg.max_chunks}) must exceed prompt length ({p_chunks})"
        )
    if scripted:
        if user_source.chunk_ms != cfg.chunk_ms:
            raise ValueError("scripted user chunk_ms does not match config")
        if len(user_source.chunks) < cfg.max_chunks:
            raise SourceExhausted(
                f"scripted user has {len(user_source.chunks)} chunks, "
                f"run needs {cfg.max_chunks}"
            )

    llm_novel: list[list[int]] = []
    usr_novel: list[list[int]] = []
    if prompt is not None:
        for c in prompt.chunks:
            llm_novel.append(list(c.s0_novel))
            usr_novel.append(list(c.s1_novel))

    dec_a = _Decoder(
        model_llm, vocab, cfg.chunk_ms, cfg.sampler,
        np.random.default_rng(cfg.sampler.seed), cfg.overflow_policy,
    )
    dec_b = None
    if not scripted:
        dec_b = _Decoder(
            user_source, vocab, cfg.chunk_ms, cfg.sampler,
            np.random.default_rng([cfg.sampler.seed, 1]), cfg.overflow_policy,
        )

    est_hist: dict[int, list[list[int]]] = {}
    records: list[StepRecord] = []
    trunc_before = 0

    for t in range(p_chunks, cfg.max_chunks):
        # --- agent A emits chunk t of channel 0
        avail = max(p_chunks, t - L)  # user chunks < avail have arrived
        ctx: list[int] = []
        last: list[int | None] = [None, None]
        for j in range(avail):
            _append_chunk_wire(ctx, vocab, llm_novel[j], usr_novel[j], last)
        for j in range(avail, t):
            ctx.append(vocab.tag_s0)
            ctx.extend(llm_novel[j])
            if llm_novel[j]:
                last[0] = llm_novel[j][-1]
            est = dec_a.estimate_channel1(ctx, last[1])
            if est:
                last[1] = est[-1]
            est_hist.setdefault(j, []).append(est)
        snapshot = list(ctx)
        ctx.append(vocab.tag_s0)
        s0 = dec_a.channel_novels(ctx, last[0])
        llm_novel.append(s0)

        # --- the user side produces its chunk t
        if scripted:
            usr_t = list(user_source.chunks[t].s1_novel)
        else:
            avail_b = max(p_chunks, t - L + 1)  # LLM chunks < avail_b have arrived at B
            ctx_b: list[int] = []
            last_b: list[int | None] = [None, None]
            cut = min(avail_b, t)
            for j in range(cut):
                _append_chunk_wire(ctx_b, vocab, llm_novel[j], usr_novel[j], last_b)
            for j in range(cut, t):
                # estimated channel-0 part, actual own channel-1 part
                ctx_b.append(vocab.tag_s0)
                est0 = dec_b.channel_novels(ctx_b, last_b[0])
                if est0:
                    last_b[0] = est0[-1]
                if usr_novel[j]:
                    ctx_b.append(vocab.tag_s1)
                    ctx_b.extend(usr_novel[j])
                    last_b[1] = usr_novel[j][-1]
            ctx_b.append(vocab.tag_s0)
            if t < avail_b:
                ctx_b.extend(llm_novel[t])
                if llm_novel[t]:
                    last_b[0] = llm_novel[t][-1]
            else:
                est0 = dec_b.channel_novels(ctx_b, last_b[0])
                if est0:
                    last_b[0] = est0[-1]
            usr_t = dec_b.estimate_channel1(ctx_b, last_b[1])
        usr_novel.append(usr_t)

        records.append(
            StepRecord(
                index=t,
                llm_chunk=list(s0),
                user_actual=list(usr_t),
                user_estimated=None,
                estimate_history=[],
                context_snapshot=snapshot,
                context_snapshot_len=len(snapshot),
                truncations=dec_a.truncations - trunc_before,
            )
        )
        trunc_before = dec_a.truncations

    for rec in records:
        hist = est_hist.get(rec.index, [])
        rec.estimate_history = [list(e) for e in hist]
        rec.user_estimated = list(hist[-1]) if hist else None

    chunks = tuple(
        DedupChunk(s0_novel=tuple(a), s1_novel=tuple(b))
        for a, b in zip(llm_novel, usr_novel)
    )
    dialogue = DedupDialogue(vocab=vocab, chunk_ms=cfg.chunk_ms, chunks=chunks)
    return InteractionTranscript(
        config=cfg,
        seed=cfg.sampler.seed,
        prompt_chunks=p_chunks,
        steps=records,
        dialogue=dialogue,
        user_truncations=dec_b.truncations if dec_b is not None else 0,
    )
