"""Inference-time contextualization: collaborative decoding with hotword
replacement, plus attention score filtering (ASF) as an optional masked
second pass over the most active hotwords."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from cifbias.asr import AsrModel, asr_forward
from cifbias.bias import bias_decode, bias_encode
from cifbias.bias.model import BiasModel
from cifbias.bias.train import QUERY_SPACES
from cifbias.corpus import HotwordList

DEFAULT_K = 10


@dataclass(frozen=True)
class DecodeResult:
    """One utterance's decode: the raw hypothesis, the bias posteriors
    and activities that produced the final transcript, the ASF keep-set,
    and the positions the bias decoder overrode."""

    uid: int
    hyp: tuple[int, ...]
    final: tuple[int, ...]
    replaced: tuple[int, ...]
    asf_keep: tuple[int, ...]
    activity: np.ndarray
    posterior: np.ndarray | None


def asf_filter(activity, k: int) -> tuple[int, ...]:
    """Indices of the k most active hotwords, ascending; ties keep the
    lower index."""
    if k < 1:
        raise ValueError(f"asf_filter: k must be >= 1, got {k}")
    scores = np.asarray(activity, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError("asf_filter: activity must be a 1-D array")
    if k >= scores.shape[0]:
        return tuple(range(scores.shape[0]))
    order = np.argsort(-scores, kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def collaborative_decode(hyp, posterior) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Replace each hypothesis char whose bias argmax is not no-bias.

    Returns (final transcript, replaced positions); the transcript always
    has the hypothesis length."""
    hyp = tuple(int(c) for c in hyp)
    post = np.asarray(posterior, dtype=np.float64)
    if post.ndim != 2 or post.shape[0] != len(hyp):
        raise ValueError(
            f"collaborative_decode: posterior rows {post.shape[0] if post.ndim == 2 else post.shape} "
            f"!= hypothesis length {len(hyp)}")
    no_bias = post.shape[1] - 1
    final = list(hyp)
    replaced = []
    for t in range(len(hyp)):
        top = int(np.argmax(post[t]))
        if top != no_bias:
            final[t] = top
            replaced.append(t)
    return tuple(final), tuple(replaced)


def _queries(forward, space: str) -> np.ndarray:
    if space == "cif":
        return forward.e_cif.data
    if space == "dec":
        return forward.dec_hidden.data
    return forward.e_cif.data + forward.dec_hidden.data


def decode_utterance(asr_model: AsrModel, bias_model: BiasModel | None,
                     frames, hotwords: HotwordList | None, k: int | None = None,
                     space: str = "cif", uid: int = 0) -> DecodeResult:
    """Free-run the ASR, then bias the hypothesis against the hotword
    list: encode phrases, cross-attend from the chosen query space, and
    replace characters collaboratively.  ``k`` switches on ASF: a second
    decode with every hotword outside the k most active masked out; the
    reported posteriors and activities then come from that second pass.

    With no hotwords (or no bias model) the result is the plain ASR
    transcript."""
    if space not in QUERY_SPACES:
        raise ValueError(f"decode_utterance: unknown space {space!r}")
    forward = asr_forward(asr_model, frames)
    hyp = forward.hyp
    n_hot = 0 if hotwords is None else len(hotwords)
    if bias_model is None or n_hot == 0:
        return DecodeResult(uid=uid, hyp=hyp, final=hyp, replaced=(),
                            asf_keep=(), activity=np.zeros(0),
                            posterior=None)
    if forward.n_fired == 0:
        return DecodeResult(uid=uid, hyp=(), final=(), replaced=(),
                            asf_keep=tuple(range(n_hot)),
                            activity=np.zeros(n_hot), posterior=None)
    queries = _queries(forward, space)
    z = bias_encode(bias_model, hotwords)
    run = bias_decode(bias_model, queries, z)
    keep: tuple[int, ...] = tuple(range(n_hot))
    if k is not None:
        keep = asf_filter(run.activity, k)
        if len(keep) < n_hot:
            mask = np.zeros(n_hot + 1, dtype=bool)
            mask[list(keep)] = True
            mask[n_hot] = True
            run = bias_decode(bias_model, queries, z, key_mask=mask)
    final, replaced = collaborative_decode(hyp, run.posterior)
    return DecodeResult(uid=uid, hyp=hyp, final=final, replaced=replaced,
                        asf_keep=keep, activity=run.activity,
                        posterior=run.posterior)


def decode_split(asr_model: AsrModel, bias_model: BiasModel | None,
                 utterances, hotwords: HotwordList | None,
                 k: int | None = None, space: str = "cif",
                 jsonl_path=None) -> list[DecodeResult]:
    """Decode every utterance that has frames, ordered by utterance id;
    optionally dump one JSON line per utterance."""
    results = []
    for utt in sorted(utterances, key=lambda u: u.uid):
        if utt.frames is None:
            continue
        results.append(decode_utterance(asr_model, bias_model, utt.frames,
                                        hotwords, k=k, space=space,
                                        uid=utt.uid))
    if jsonl_path is not None:
        with open(jsonl_path, "w", newline="\n") as fh:
            for res in results:
                fh.write(json.dumps({
                    "id": res.uid,
                    "hyp": list(res.hyp),
                    "final": list(res.final),
                    "replaced": list(res.replaced),
                    "asf_keep": list(res.asf_keep),
                }) + "\n")
    return results
