"""Per-token latent embedding extraction from a frozen model."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from cifbias.asr.cif import confidence_index
from cifbias.asr.model import AsrModel, asr_forward

EXTRACT_MAGIC = b"CFBE"


@dataclass
class EmbeddingExtract:
    """One utterance's aligned latent vectors with its length confidence."""

    uid: int
    n_ref: int
    n_hyp: int
    w: float
    s_cif: np.ndarray
    s_dec: np.ndarray


def extract_embeddings(model: AsrModel, utterances) -> list[EmbeddingExtract]:
    """For each utterance: free-run once for the fired count (hence the
    confidence), then re-run teacher-forced so exactly n_ref vectors come
    out of both latent spaces, aligned to the reference tokens.

    Utterances whose integration mass is zero cannot be scaled and are
    skipped with a warning.
    """
    if not model.frozen:
        raise ValueError("extract_embeddings: model must be frozen first")
    out: list[EmbeddingExtract] = []
    for utt in utterances:
        if utt.frames is None:
            continue
        free = asr_forward(model, utt.frames)
        if float(free.sum_alpha.data) <= 0.0:
            warnings.warn(f"utterance {utt.uid}: zero integration mass, skipped")
            continue
        n_ref = len(utt.chars)
        forced = asr_forward(model, utt.frames, labels=utt.chars)
        out.append(EmbeddingExtract(
            uid=utt.uid,
            n_ref=n_ref,
            n_hyp=free.n_fired,
            w=confidence_index(free.n_fired, n_ref),
            s_cif=forced.e_cif.data.copy(),
            s_dec=forced.dec_hidden.data.copy(),
        ))
    return out


def save_extracts(path, extracts: list[EmbeddingExtract]) -> None:
    dim = extracts[0].s_cif.shape[1] if extracts else 0
    with open(path, "wb") as f:
        f.write(EXTRACT_MAGIC)
        f.write(struct.pack("<II", len(extracts), dim))
        for ex in extracts:
            f.write(struct.pack("<IId", ex.uid, ex.n_ref, ex.w))
            f.write(ex.s_cif.astype("<f4").tobytes())
            f.write(ex.s_dec.astype("<f4").tobytes())


def load_extracts(path) -> list[EmbeddingExtract]:
    """Read an extraction dump; the free-running count is not stored, so
    n_hyp comes back as -1 while w keeps the recorded confidence."""
    blob = open(path, "rb").read()
    if blob[:4] != EXTRACT_MAGIC:
        raise ValueError("not a CFBE extraction file")
    count, dim = struct.unpack_from("<II", blob, 4)
    off = 12
    out: list[EmbeddingExtract] = []
    for _ in range(count):
        uid, n_ref = struct.unpack_from("<II", blob, off)
        (w,) = struct.unpack_from("<d", blob, off + 8)
        off += 16
        span = n_ref * dim
        s_cif = np.frombuffer(blob, dtype="<f4", count=span, offset=off).astype(np.float64)
        off += span * 4
        s_dec = np.frombuffer(blob, dtype="<f4", count=span, offset=off).astype(np.float64)
        off += span * 4
        out.append(EmbeddingExtract(uid, n_ref, -1, w,
                                    s_cif.reshape(n_ref, dim), s_dec.reshape(n_ref, dim)))
    if off != len(blob):
        raise ValueError("trailing bytes in extraction file")
    return out
