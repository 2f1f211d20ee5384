"""Word embeddings and keyword extraction for topic scoring.

A small continuous bag-of-words trainer with negative sampling produces
the embedding table (deterministic given a seed); TF-IDF ranks weekly
exercise keywords; averaging and cosine turn token bags into the topic
and segment vectors used downstream. Externally trained tables can be
dropped in through the text table format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .corpus import _LATIN_RUN_RE, is_cjk

# Minimum distinct in-vocabulary tokens for a trainable corpus.
MIN_VOCAB = 50


def tokenize(text: str) -> list[str]:
    """Embedding tokens: lowercased Latin runs plus single CJK characters."""
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        m = _LATIN_RUN_RE.match(text, i)
        if m:
            tokens.append(m.group().lower())
            i = m.end()
        else:
            if is_cjk(text[i]):
                tokens.append(text[i])
            i += 1
    return tokens


@dataclass(frozen=True)
class TrainingConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    min_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.dim, self.window, self.negatives, self.min_count) < 1:
            raise ValueError("dim, window, negatives, min_count must be positive")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.lr_end <= self.lr_start:
            raise ValueError("need 0 < lr_end <= lr_start")


class EmbeddingTable:
    """Token -> dense vector lookup backed by a |V| x d matrix."""

    def __init__(self, vocabulary: Mapping[str, int], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(vocabulary):
            raise ValueError("vector matrix shape does not match vocabulary")
        if vectors.shape[1] < 2:
            raise ValueError("embedding dimension must be >= 2")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding table contains non-finite values")
        self.vocabulary = dict(vocabulary)
        self.vectors = vectors

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, token: str) -> bool:
        return token in self.vocabulary

    def vector(self, token: str) -> np.ndarray | None:
        idx = self.vocabulary.get(token)
        return None if idx is None else self.vectors[idx]

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vocabulary)} {self.dim}\n")
            for token, idx in sorted(self.vocabulary.items(), key=lambda kv: kv[1]):
                # plain float repr round-trips exactly and stays readable
                row = " ".join(repr(float(v)) for v in self.vectors[idx])
                fh.write(f"{token} {row}\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingTable":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: expected '|V| d' header")
            size, dim = int(header[0]), int(header[1])
            vocab: dict[str, int] = {}
            vectors = np.empty((size, dim), dtype=np.float64)
            for i in range(size):
                parts = fh.readline().rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}: row {i + 2} has {len(parts) - 1} values, expected {dim}")
                vocab[parts[0]] = i
                vectors[i] = [float(v) for v in parts[1:]]
        return cls(vocab, vectors)


@dataclass(frozen=True)
class KeywordSet:
    """Ranked weekly keywords with non-increasing TF-IDF weights."""

    week: int
    keywords: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        weights = [w for _, w in self.keywords]
        if any(b > a for a, b in zip(weights, weights[1:])):
            raise ValueError("keyword weights must be non-increasing")
        tokens = [t for t, _ in self.keywords]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate keyword tokens")

    def tokens(self) -> list[str]:
        return [t for t, _ in self.keywords]


def tfidf_keywords(
    documents: Mapping[int, Sequence[str]],
    week: int,
    top_k: int = 10,
) -> KeywordSet:
    """Rank the week's tokens by tf * ln(N / df) over the weekly documents.

    Ties break lexicographically; zero-weight tokens (present in every
    document) never enter the ranking.
    """
    if len(documents) < 2:
        raise ValueError("need at least 2 weekly documents for TF-IDF")
    if week not in documents:
        raise ValueError(f"no document for week {week}")
    doc = list(documents[week])
    if not doc:
        raise ValueError(f"week {week} document is empty")

    n_docs = len(documents)
    df: dict[str, int] = {}
    for tokens in documents.values():
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1

    tf: dict[str, int] = {}
    for token in doc:
        tf[token] = tf.get(token, 0) + 1

    weighted = [
        (token, count * math.log(n_docs / df[token]))
        for token, count in tf.items()
        if df[token] < n_docs
    ]
    weighted.sort(key=lambda kv: (-kv[1], kv[0]))
    return KeywordSet(week, tuple(weighted[:top_k]))


def average_vector(tokens: Iterable[str], table: EmbeddingTable) -> np.ndarray | None:
    """Mean vector of in-vocabulary tokens; None when every token is OOV."""
    rows = [table.vocabulary[t] for t in tokens if t in table.vocabulary]
    if not rows:
        return None
    return table.vectors[rows].mean(axis=0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("undefined similarity for zero vector")
    return float(np.dot(u, v) / (nu * nv))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def build_vocabulary(
    corpus: Sequence[Sequence[str]], min_count: int
) -> tuple[dict[str, int], np.ndarray]:
    """Frequency-ordered vocabulary and counts for tokens seen >= min_count times."""
    counts: dict[str, int] = {}
    for doc in corpus:
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(
        ((t, c) for t, c in counts.items() if c >= min_count),
        key=lambda kv: (-kv[1], kv[0]),
    )
    vocab = {t: i for i, (t, _) in enumerate(kept)}
    freq = np.array([c for _, c in kept], dtype=np.float64)
    return vocab, freq


def train_cbow(
    corpus: Sequence[Sequence[str]],
    config: TrainingConfig = TrainingConfig(),
) -> tuple[EmbeddingTable, list[float]]:
    """Train CBOW embeddings with negative sampling.

    Returns the table and the mean per-example loss of each epoch.
    Strictly sequential updates keep the run reproducible: identical
    (corpus, config) pairs yield bit-identical tables.
    """
    vocab, freq = build_vocabulary(corpus, config.min_count)
    if len(vocab) < MIN_VOCAB:
        raise ValueError(
            f"vocabulary too small: {len(vocab)} tokens with count >= "
            f"{config.min_count}, need {MIN_VOCAB}"
        )

    rng = np.random.default_rng(config.seed)
    dim = config.dim
    syn0 = (rng.random((len(vocab), dim)) - 0.5) / dim
    syn1 = np.zeros((len(vocab), dim))

    # Unigram^0.75 negative-sampling distribution.
    noise = freq ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    encoded = [[vocab[t] for t in doc if t in vocab] for doc in corpus]
    encoded = [doc for doc in encoded if len(doc) >= 2]
    total_centers = sum(len(doc) for doc in encoded) * max(config.epochs, 1)

    losses: list[float] = []
    processed = 0
    window = config.window
    for _ in range(config.epochs):
        epoch_loss = 0.0
        epoch_examples = 0
        for doc in encoded:
            n = len(doc)
            for t, target in enumerate(doc):
                alpha = config.lr_start - (config.lr_start - config.lr_end) * (
                    processed / total_centers
                )
                processed += 1
                context = doc[max(0, t - window):t] + doc[t + 1:t + 1 + window]
                if not context:
                    continue
                h = syn0[context].mean(axis=0)
                err = np.zeros(dim)
                example_loss = 0.0

                draws = rng.random(config.negatives)
                negatives = np.searchsorted(noise_cdf, draws)
                for word, label in [(target, 1.0)] + [
                    (int(neg), 0.0) for neg in negatives if int(neg) != target
                ]:
                    score = _sigmoid(float(np.dot(h, syn1[word])))
                    example_loss -= math.log(max(score if label else 1.0 - score, 1e-12))
                    g = (label - score) * alpha
                    err += g * syn1[word]
                    syn1[word] += g * h

                syn0[context] += err / len(context)
                epoch_loss += example_loss
                epoch_examples += 1
        losses.append(epoch_loss / max(epoch_examples, 1))

    if not np.all(np.isfinite(syn0)):
        raise ArithmeticError("training diverged: non-finite embedding values")
    return EmbeddingTable(vocab, syn0), losses
