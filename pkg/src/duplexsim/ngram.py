"""Trainable next-token model over the extended vocabulary.

An add-alpha smoothed n-gram: exact, deterministic, and cheap enough that
every probability can be cross-checked by brute-force counting. ``order``
is the context length in tokens; contexts shorter than ``order`` are
left-padded with an internal begin marker (id ``vocab_ext``, never
predicted).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpus, EmptySequence, ModelFormatError

MODEL_FILE_VERSION = 1


@dataclass(frozen=True)
class SamplerConfig:
    """Decoding knobs. Greedy decoding is ``top_k=1``; temperature must
    stay positive."""

    temperature: float = 1.0
    top_k: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


class NgramModel:
    """Add-alpha smoothed n-gram over ``vocab_ext`` symbols.

    Training mutates the model; a trained model is immutable in use and
    safe to share across threads.
    """

    def __init__(self, order: int, vocab_ext: int, alpha: float = 0.1):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if vocab_ext < 1:
            raise ValueError(f"vocab_ext must be >= 1, got {vocab_ext}")
        if alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        self.order = order
        self.vocab_ext = vocab_ext
        self.alpha = alpha
        self.counts: dict[tuple[int, ...], dict[int, int]] = {}
        self.totals: dict[tuple[int, ...], int] = {}

    @property
    def bos(self) -> int:
        return self.vocab_ext

    def _key(self, context: Sequence[int]) -> tuple[int, ...]:
        ctx = list(context)[-self.order :]
        if len(ctx) < self.order:
            ctx = [self.bos] * (self.order - len(ctx)) + ctx
        return tuple(ctx)

    def observe(self, sequence: Sequence[int]) -> None:
        seq = [int(t) for t in sequence]
        for tok in seq:
            if not 0 <= tok < self.vocab_ext:
                raise ValueError(f"token {tok} outside vocab_ext={self.vocab_ext}")
        padded = [self.bos] * self.order + seq
        for i in range(self.order, len(padded)):
            key = tuple(padded[i - self.order : i])
            tok = padded[i]
            slot = self.counts.setdefault(key, {})
            slot[tok] = slot.get(tok, 0) + 1
            self.totals[key] = self.totals.get(key, 0) + 1

    def next_dist(self, context: Sequence[int]) -> np.ndarray:
        """Smoothed next-token distribution; sums to 1, all entries > 0."""
        key = self._key(context)
        dist = np.full(self.vocab_ext, self.alpha, dtype=np.float64)
        for tok, c in self.counts.get(key, {}).items():
            dist[tok] += c
        dist /= self.totals.get(key, 0) + self.alpha * self.vocab_ext
        return dist

    def log_prob(self, context: Sequence[int], token: int) -> float:
        key = self._key(context)
        c = self.counts.get(key, {}).get(token, 0)
        total = self.totals.get(key, 0)
        return math.log((c + self.alpha) / (total + self.alpha * self.vocab_ext))

    def sequence_nll(self, sequence: Sequence[int], skip: int = 0) -> tuple[float, int]:
        """Total negative log-likelihood and token count, scoring positions
        ``skip`` onward (earlier tokens still condition the context)."""
        seq = list(sequence)
        nll = 0.0
        scored = 0
        for i in range(skip, len(seq)):
            nll -= self.log_prob(seq[:i], seq[i])
            scored += 1
        return nll, scored

    def save(self, path: str | Path) -> None:
        payload = {
            "version": MODEL_FILE_VERSION,
            "order": self.order,
            "alpha": self.alpha,
            "vocab_ext": self.vocab_ext,
            "counts": {
                ",".join(map(str, key)): dict(sorted(slot.items()))
                for key, slot in sorted(self.counts.items())
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        version = payload.get("version")
        if version != MODEL_FILE_VERSION:
            raise ModelFormatError(
                f"model file version {version!r} not supported (expected {MODEL_FILE_VERSION})"
            )
        model = cls(
            order=int(payload["order"]),
            vocab_ext=int(payload["vocab_ext"]),
            alpha=float(payload["alpha"]),
        )
        for key_str, slot in payload["counts"].items():
            key = tuple(int(t) for t in key_str.split(","))
            model.counts[key] = {int(tok): int(c) for tok, c in slot.items()}
            model.totals[key] = sum(model.counts[key].values())
        return model


def train(
    corpus: Iterable[Sequence[int]],
    order: int = 4,
    alpha: float = 0.1,
    vocab_ext: int = 503,
) -> NgramModel:
    """Count all order-length context windows over the corpus sequences."""
    model = NgramModel(order=order, vocab_ext=vocab_ext, alpha=alpha)
    n = 0
    for seq in corpus:
        model.observe(seq)
        n += 1
    if n == 0:
        raise EmptyCorpus("training corpus is empty")
    return model


def next_dist(model: NgramModel, context: Sequence[int]) -> np.ndarray:
    return model.next_dist(context)


def _apply_sampler(
    probs: np.ndarray, indices: np.ndarray, cfg: SamplerConfig
) -> tuple[np.ndarray, np.ndarray]:
    # Rank with stable index tie-breaking so top_k (and the greedy k=1
    # case) is deterministic.
    if cfg.top_k is not None and cfg.top_k < len(indices):
        rank = sorted(range(len(indices)), key=lambda i: (-probs[i], indices[i]))
        keep = sorted(rank[: cfg.top_k])
        probs = probs[keep]
        indices = indices[keep]
    if cfg.temperature != 1.0:
        logits = np.log(probs) / cfg.temperature
        logits -= logits.max()
        probs = np.exp(logits)
    return probs / probs.sum(), indices


def sample_constrained(
    model: NgramModel,
    context: Sequence[int],
    allowed: Sequence[int],
    cfg: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> int:
    """Sample the next token restricted to ``allowed`` ids.

    A single legal token is returned without touching the RNG; greedy
    (top_k=1) likewise consumes no randomness.
    """
    if not allowed:
        raise ValueError("allowed token set is empty")
    indices = np.asarray(sorted(allowed), dtype=np.int64)
    if len(indices) == 1:
        return int(indices[0])
    dist = model.next_dist(context)[indices]
    probs, indices = _apply_sampler(dist, indices, cfg)
    if len(indices) == 1:
        return int(indices[0])
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return int(indices[rng.choice(len(indices), p=probs)])


def sample_next(
    model: NgramModel,
    context: Sequence[int],
    cfg: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> int:
    """Sample from the full extended vocabulary."""
    return sample_constrained(model, context, range(model.vocab_ext), cfg, rng)


def perplexity(model: NgramModel, sequence: Sequence[int], skip: int = 0) -> float:
    """exp(mean negative log-likelihood per scored token)."""
    nll, scored = model.sequence_nll(sequence, skip=skip)
    if scored == 0:
        raise EmptySequence("no tokens to score")
    return math.exp(nll / scored)


def corpus_perplexity(
    model: NgramModel, sequences: Iterable[Sequence[int]], skip: int = 0
) -> float:
    """Token-weighted perplexity over whole sequences; invariant to how the
    sequences are grouped into batches."""
    nll = 0.0
    scored = 0
    for seq in sequences:
        s_nll, s_scored = model.sequence_nll(seq, skip=skip)
        nll += s_nll
        scored += s_scored
    if scored == 0:
        raise EmptySequence("no tokens to score")
    return math.exp(nll / scored)
