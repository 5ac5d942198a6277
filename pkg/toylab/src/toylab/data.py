"""Corpus assembly and byte-level BPE tokenization.

The corpus is built deterministically from the CPython standard library
sources installed on this machine: public, permissively licensed text
that every environment already has.  Files are concatenated in sorted
order and capped, then tokenized with a small byte-pair vocabulary
learned from a sample of the same text.
"""

from __future__ import annotations

import os
import sysconfig
from dataclasses import dataclass

import numpy as np

from .errors import ToyLabError

N_BYTE_SYMBOLS = 256
FILE_SEPARATOR = b"\n\n"


@dataclass(frozen=True)
class CorpusConfig:
    max_bytes: int = 8_000_000
    max_tokens: int = 10_000_000
    vocab: int = 512
    bpe_sample_bytes: int = 400_000
    eval_fraction: float = 0.05

    def __post_init__(self):
        if self.vocab < N_BYTE_SYMBOLS or self.vocab > 4096:
            raise ToyLabError("vocab must lie in [256, 4096]")
        if not 0.0 < self.eval_fraction < 0.5:
            raise ToyLabError("eval_fraction must lie in (0, 0.5)")
        if self.max_bytes < 10_000 or self.max_tokens < 10_000:
            raise ToyLabError("corpus caps are too small to train on")


def stdlib_text(max_bytes: int) -> bytes:
    """Concatenated stdlib .py sources, sorted for determinism."""
    root = sysconfig.get_paths()["stdlib"]
    parts = []
    total = 0
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        if "site-packages" in dirpath or "test" in dirpath.split(os.sep):
            continue
        for name in sorted(filenames):
            if not name.endswith(".py"):
                continue
            try:
                with open(os.path.join(dirpath, name), "rb") as handle:
                    blob = handle.read()
            except OSError:
                continue
            parts.append(blob)
            parts.append(FILE_SEPARATOR)
            total += len(blob) + len(FILE_SEPARATOR)
            if total >= max_bytes:
                return b"".join(parts)[:max_bytes]
    if total < 10_000:
        raise ToyLabError(f"stdlib source under {root} yielded only "
                          f"{total} bytes")
    return b"".join(parts)[:max_bytes]


def _merge_pair(seq: np.ndarray, a: int, b: int, new_id: int) -> np.ndarray:
    """Replace non-overlapping left-to-right occurrences of (a, b)."""
    matches = np.flatnonzero((seq[:-1] == a) & (seq[1:] == b))
    if len(matches) == 0:
        return seq
    keep = []
    last = -2
    for pos in matches.tolist():
        if pos > last + 1:
            keep.append(pos)
            last = pos
    keep = np.asarray(keep, dtype=np.int64)
    out = seq.copy()
    out[keep] = new_id
    mask = np.ones(len(seq), dtype=bool)
    mask[keep + 1] = False
    return out[mask]


def train_bpe(sample: bytes, vocab: int) -> list[tuple[int, int]]:
    """Greedy byte-pair merges on a sample, most frequent pair first."""
    seq = np.frombuffer(sample, dtype=np.uint8).astype(np.int32)
    merges = []
    for new_id in range(N_BYTE_SYMBOLS, vocab):
        if len(seq) < 2:
            break
        pair_codes = seq[:-1].astype(np.int64) * vocab + seq[1:]
        counts = np.bincount(pair_codes)
        best = int(np.argmax(counts))
        if counts[best] < 2:
            break
        a, b = best // vocab, best % vocab
        merges.append((a, b))
        seq = _merge_pair(seq, a, b, new_id)
    return merges


def encode(text: bytes, merges: list[tuple[int, int]]) -> np.ndarray:
    seq = np.frombuffer(text, dtype=np.uint8).astype(np.int32)
    for index, (a, b) in enumerate(merges):
        seq = _merge_pair(seq, a, b, N_BYTE_SYMBOLS + index)
    return seq


@dataclass(frozen=True)
class Corpus:
    tokens: np.ndarray
    n_eval: int
    vocab: int
    identity: str

    @property
    def train_tokens(self) -> np.ndarray:
        return self.tokens[:-self.n_eval]

    @property
    def eval_tokens(self) -> np.ndarray:
        return self.tokens[-self.n_eval:]


def build_corpus(config: CorpusConfig = CorpusConfig(),
                 cache_path: str | None = None) -> Corpus:
    """Tokenized stdlib corpus, cached to .npz when a path is given."""
    identity = (f"cpython-stdlib-{sysconfig.get_python_version()}"
                f"-cap{config.max_bytes}-v{config.vocab}")
    if cache_path is not None and os.path.exists(cache_path):
        stored = np.load(cache_path, allow_pickle=False)
        if str(stored["identity"]) == identity:
            return Corpus(tokens=stored["tokens"],
                          n_eval=int(stored["n_eval"]),
                          vocab=config.vocab, identity=identity)
    text = stdlib_text(config.max_bytes)
    merges = train_bpe(text[:config.bpe_sample_bytes], config.vocab)
    tokens = encode(text, merges)[:config.max_tokens]
    n_eval = max(1, int(len(tokens) * config.eval_fraction))
    if len(tokens) - n_eval < 1000:
        raise ToyLabError("corpus too small after the eval split")
    corpus = Corpus(tokens=tokens, n_eval=n_eval, vocab=config.vocab,
                    identity=identity)
    if cache_path is not None:
        os.makedirs(os.path.dirname(cache_path) or ".", exist_ok=True)
        np.savez_compressed(cache_path, tokens=tokens, n_eval=n_eval,
                            identity=identity)
    return corpus


def batch_iterator(tokens: np.ndarray, context: int, batch_tokens: int,
                   rng: np.random.Generator):
    """Endless stream of (batch, context+1) windows from random offsets."""
    n_seq = max(1, batch_tokens // context)
    span = context + 1
    if len(tokens) <= span:
        raise ToyLabError("token stream shorter than one context window")
    while True:
        starts = rng.integers(0, len(tokens) - span, size=n_seq)
        yield np.stack([tokens[s:s + span] for s in starts])


def eval_batches(tokens: np.ndarray, context: int, batch_tokens: int,
                 n_batches: int) -> list[np.ndarray]:
    """Fixed, evenly spaced evaluation windows (no randomness)."""
    n_seq = max(1, batch_tokens // context)
    span = context + 1
    total = n_batches * n_seq
    if len(tokens) <= span:
        raise ToyLabError("eval split shorter than one context window")
    starts = np.linspace(0, len(tokens) - span, num=total).astype(np.int64)
    batches = []
    for b in range(n_batches):
        chunk = starts[b * n_seq:(b + 1) * n_seq]
        batches.append(np.stack([tokens[s:s + span] for s in chunk]))
    return batches
