"""File formats: JSONL dialogue corpora and flattened training dumps.

Corpus files hold one dialogue per line:

    {"id": str, "frame_ms": int, "vocab": int, "silence": [int],
     "channels": [[int, ...], [int, ...]]}

Flattened dumps are newline-delimited, space-separated integer lists (one
wire sequence per line).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .errors import LengthMismatch, MalformedSequence
from .tokens import TokenStream, Vocab

_REQUIRED_KEYS = {"id", "frame_ms", "vocab", "silence", "channels"}


def dialogue_to_record(
    did: str, s0: TokenStream, s1: TokenStream, vocab: Vocab
) -> dict:
    if len(s0) != len(s1):
        raise LengthMismatch(f"dialogue {did}: channel lengths differ")
    return {
        "id": did,
        "frame_ms": vocab.frame_ms,
        "vocab": vocab.size,
        "silence": sorted(vocab.silence_tokens),
        "channels": [list(s0.tokens), list(s1.tokens)],
    }


def record_to_dialogue(rec: dict) -> tuple[str, TokenStream, TokenStream, Vocab]:
    missing = _REQUIRED_KEYS - rec.keys()
    if missing:
        raise MalformedSequence(f"corpus record missing keys: {sorted(missing)}")
    vocab = Vocab(
        size=int(rec["vocab"]),
        frame_ms=int(rec["frame_ms"]),
        silence_tokens=frozenset(int(t) for t in rec["silence"]),
    )
    ch = rec["channels"]
    if len(ch) != 2 or len(ch[0]) != len(ch[1]):
        raise LengthMismatch(f"dialogue {rec['id']}: channels must be two equal-length lists")
    s0 = TokenStream(speaker=0, tokens=tuple(int(t) for t in ch[0]), frame_ms=vocab.frame_ms)
    s1 = TokenStream(speaker=1, tokens=tuple(int(t) for t in ch[1]), frame_ms=vocab.frame_ms)
    return str(rec["id"]), s0, s1, vocab


def write_corpus(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_corpus(path: str | Path) -> list[tuple[str, TokenStream, TokenStream, Vocab]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_to_dialogue(json.loads(line)))
    return out


def write_flat(path: str | Path, sequences: Iterable[Iterable[int]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(" ".join(str(t) for t in seq))
            fh.write("\n")


def read_flat(path: str | Path) -> list[list[int]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append([int(t) for t in line.split()])
    return out
