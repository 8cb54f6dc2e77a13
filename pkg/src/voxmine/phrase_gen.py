"""Mine TF-IDF-ranked three-word search phrases from a language corpus.

Terms are contiguous in-sentence word trigrams; the score of a trigram is
max over documents of tf * ln(N/df). Mined phrases are filtered against
stop-words, digit tokens and the text language identifier before use.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import DataError
from .text_lid import LidModel, matches
from .wiki_ingest import LanguageCorpus

# sentence terminators across major scripts, effective before whitespace/EOL
_SENTENCE_RE = re.compile(r"[.!?។。॥]+(?=\s|$)")
_EDGE_PUNCT = "\"'()[]{}<>«»„“”‘’,;:.!?%&*+/\\|~`^@#$£€§©®–—-"


@dataclass(frozen=True)
class SearchPhrase:
    language: str
    tokens: tuple[str, str, str]
    score: float
    source_doc_count: int

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class ScoredTrigram(NamedTuple):
    tokens: tuple[str, str, str]
    score: float
    doc_count: int


def split_sentences(text: str) -> list[str]:
    parts: list[str] = []
    for chunk in text.split("\n"):
        parts.extend(_SENTENCE_RE.split(chunk))
    return [p for p in (s.strip() for s in parts) if p]


def tokenize(sentence: str) -> list[str]:
    tokens = []
    for raw in sentence.split():
        tok = raw.strip(_EDGE_PUNCT).lower()
        if tok:
            tokens.append(tok)
    return tokens


def extract_candidates(
    corpus: LanguageCorpus,
) -> dict[tuple[str, str, str], dict[int, int]]:
    """Count every contiguous in-sentence word trigram, per document.

    Returns trigram -> {document index -> occurrence count}. Trigrams never
    cross sentence boundaries.
    """
    if corpus.article_count == 0:
        raise DataError("cannot extract candidates from an empty corpus")
    counts: dict[tuple[str, str, str], dict[int, int]] = {}
    for doc_id, article in enumerate(corpus.articles):
        for sentence in split_sentences(article.body):
            tokens = tokenize(sentence)
            for i in range(len(tokens) - 2):
                tri = (tokens[i], tokens[i + 1], tokens[i + 2])
                per_doc = counts.setdefault(tri, {})
                per_doc[doc_id] = per_doc.get(doc_id, 0) + 1
    return counts


def score_tfidf(
    candidates: dict[tuple[str, str, str], dict[int, int]],
    corpus: LanguageCorpus,
) -> list[ScoredTrigram]:
    """Score each trigram as max over documents of tf * ln(N/df).

    Sorted by score descending, ties broken lexicographically on tokens, so
    the ranking is a pure function of the input.
    """
    n_docs = corpus.article_count
    scored = []
    for tri, per_doc in candidates.items():
        df = len(per_doc)
        idf = math.log(n_docs / df)
        scored.append(ScoredTrigram(tri, max(per_doc.values()) * idf, df))
    scored.sort(key=lambda s: (-s.score, s.tokens))
    return scored


_DIGIT_SEPARATORS = str.maketrans("", "", ",.:;-")


def is_digit_token(token: str) -> bool:
    stripped = token.translate(_DIGIT_SEPARATORS)
    return bool(stripped) and all(ch.isdigit() for ch in stripped)


def filter_phrases(
    scored: Iterable[ScoredTrigram],
    lid_model: LidModel,
    language: str,
    stopwords: frozenset[str] | set[str] = frozenset(),
    top_k: int = 10000,
) -> list[SearchPhrase]:
    """Drop stop-word/digit phrases and LID mismatches; keep top_k by score."""
    if top_k < 1:
        raise DataError("top_k must be >= 1")
    ranked = sorted(scored, key=lambda s: (-s.score, s.tokens))
    out: list[SearchPhrase] = []
    for cand in ranked:
        if len(out) >= top_k:
            break
        if any(tok in stopwords or is_digit_token(tok) for tok in cand.tokens):
            continue
        if not matches(lid_model, " ".join(cand.tokens), language):
            continue
        out.append(
            SearchPhrase(
                language=language,
                tokens=cand.tokens,
                score=cand.score,
                source_doc_count=cand.doc_count,
            )
        )
    return out


def mine_phrases(
    corpus: LanguageCorpus,
    lid_model: LidModel,
    stopwords: frozenset[str] | set[str] = frozenset(),
    top_k: int = 10000,
) -> list[SearchPhrase]:
    candidates = extract_candidates(corpus)
    return filter_phrases(
        score_tfidf(candidates, corpus), lid_model, corpus.language, stopwords, top_k
    )


def load_stopwords(path) -> frozenset[str]:
    """One word per line; blank lines and # comments ignored. Empty is valid."""
    words = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


def write_phrases(phrases: Iterable[SearchPhrase], path) -> None:
    """One phrase per line: `language<TAB>score<TAB>token1 token2 token3`."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in phrases:
            fh.write(f"{p.language}\t{p.score!r}\t{p.text}\n")


def read_phrases(path) -> list[SearchPhrase]:
    phrases = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                language, score, text = line.split("\t")
                tokens = tuple(text.split(" "))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad phrase record") from exc
            if len(tokens) != 3:
                raise DataError(f"{path}:{lineno}: phrase must have 3 tokens")
            phrases.append(
                SearchPhrase(language=language, tokens=tokens, score=float(score), source_doc_count=0)
            )
    return phrases
