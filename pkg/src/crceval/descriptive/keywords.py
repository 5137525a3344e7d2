"""Corpus-wide keyword frequencies and top-k overlap."""
from __future__ import annotations

import re
from collections import Counter
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..exceptions import ConfigurationError

__all__ = ["tokenize", "load_stopwords", "read_corpus", "extract_keywords", "keyword_overlap"]

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs."""
    return _TOKEN.findall(text.lower())


def load_stopwords(path=None) -> frozenset[str]:
    """One word per line; ``#`` starts a comment. Without ``path`` the bundled English list is used."""
    if path is None:
        text = resources.files("crceval").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.update(tokenize(line))
    return frozenset(words)


def read_corpus(path) -> list[str]:
    """Documents from a directory (one per ``*.txt`` file, name order) or one per non-empty line of a file."""
    path = Path(path)
    if path.is_dir():
        return [p.read_text(encoding="utf-8") for p in sorted(path.glob("*.txt"))]
    return [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def extract_keywords(corpus: Iterable[str], k: int = 75, stopwords: Iterable[str] | None = None) -> list[tuple[str, int]]:
    """Top ``k`` terms by corpus-wide frequency, ties broken alphabetically.

    Tokens shorter than two characters and stopwords are dropped. ``stopwords``
    defaults to the bundled list; pass an empty set to keep everything.
    """
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    stop = load_stopwords() if stopwords is None else frozenset(w.lower() for w in stopwords)
    counts: Counter = Counter()
    for doc in corpus:
        counts.update(t for t in tokenize(doc) if len(t) >= 2 and t not in stop)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def keyword_overlap(a: Sequence[tuple[str, int]] | Sequence[str], b: Sequence[tuple[str, int]] | Sequence[str]) -> float:
    """Fraction of the ``k`` top terms shared by two equally long ranked lists."""
    if len(a) != len(b):
        raise ConfigurationError(f"ranked lists differ in length ({len(a)} vs {len(b)})")
    if not a:
        raise ConfigurationError("ranked lists must be non-empty")
    terms = lambda lst: {x[0] if isinstance(x, tuple) else x for x in lst}
    return len(terms(a) & terms(b)) / len(a)
