"""Corpus persistence: metadata JSON Lines, CFBF frame binaries, the lexicon
JSON document, and plain-text hotword lists."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from cifbias.corpus.generate import Utterance
from cifbias.corpus.hotwords import HotwordList
from cifbias.corpus.lexicon import Lexicon

FRAMES_MAGIC = b"CFBF"


def save_metadata(path, utterances: list[Utterance]) -> None:
    """One utterance per line: {"id", "chars", "syllables", "paired"}."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for u in utterances:
            f.write(json.dumps({"id": u.uid, "chars": list(u.chars),
                                "syllables": list(u.syllables), "paired": u.paired},
                               separators=(",", ":")) + "\n")


def load_metadata(path) -> list[Utterance]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        d = json.loads(line)
        out.append(Utterance(int(d["id"]), tuple(d["chars"]), tuple(d["syllables"]),
                             bool(d["paired"])))
    return out


def save_frames(path, utterances: list[Utterance]) -> None:
    """Binary frames: magic CFBF, u32 count, then per utterance
    u32 id | u32 T | u32 F | T*F little-endian f32."""
    with_frames = [u for u in utterances if u.frames is not None]
    with open(path, "wb") as f:
        f.write(FRAMES_MAGIC)
        f.write(struct.pack("<I", len(with_frames)))
        for u in with_frames:
            a = np.ascontiguousarray(u.frames, dtype="<f4")
            f.write(struct.pack("<III", u.uid, a.shape[0], a.shape[1]))
            f.write(a.tobytes(order="C"))


def load_frames(path) -> dict[int, np.ndarray]:
    """id -> (T, F) float64 frames (stored precision is f32)."""
    raw = Path(path).read_bytes()
    if raw[:4] != FRAMES_MAGIC:
        raise ValueError(f"{path}: not a CFBF frames file")
    (count,) = struct.unpack_from("<I", raw, 4)
    off = 8
    out: dict[int, np.ndarray] = {}
    for _ in range(count):
        uid, t, fdim = struct.unpack_from("<III", raw, off)
        off += 12
        a = np.frombuffer(raw, dtype="<f4", count=t * fdim, offset=off).reshape(t, fdim)
        off += 4 * t * fdim
        out[uid] = a.astype(np.float64)
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return out


def attach_frames(utterances: list[Utterance], frames: dict[int, np.ndarray]) -> None:
    for u in utterances:
        if u.uid in frames:
            u.frames = frames[u.uid]


def save_lexicon(path, lexicon: Lexicon) -> None:
    doc = {
        "n_chars": lexicon.n_chars,
        "n_syllables": lexicon.n_syllables,
        "frame_dim": lexicon.frame_dim,
        "g2p": list(lexicon.g2p_table),
        "words": [list(w) for w in lexicon.words],
        "prototypes": [[float(x) for x in row] for row in lexicon.prototypes],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_lexicon(path) -> Lexicon:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return Lexicon(int(d["n_chars"]), int(d["n_syllables"]), int(d["frame_dim"]),
                   tuple(int(s) for s in d["g2p"]),
                   np.array(d["prototypes"], dtype=np.float64),
                   tuple(tuple(int(c) for c in w) for w in d["words"]))


def save_hotwords(path, hotwords: HotwordList) -> None:
    """Text file, one phrase per line as space-separated char ids."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in hotwords:
            f.write(" ".join(str(c) for c in p) + "\n")


def load_hotwords(path) -> HotwordList:
    phrases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            phrases.append(tuple(int(c) for c in line.split()))
    return HotwordList(tuple(phrases))
