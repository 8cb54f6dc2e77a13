"""Character n-gram text language identification.

Used to keep mined search phrases and retrieved video metadata in the
expected language. Scoring is a length-normalized sum of additively smoothed
character n-gram log probabilities (n = 1..order); the verdict is UNKNOWN
when the best-vs-second margin per character falls under a threshold or the
text is too short to judge.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import DataError

UNKNOWN = "unknown"

_DIGIT_RE = re.compile(r"\d")
_WS_RE = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Lowercase, collapse whitespace, map digits to one placeholder symbol."""
    text = _DIGIT_RE.sub("0", text.lower())
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class LidVerdict:
    language: str
    margin: float  # log-likelihood ratio per character, best vs second best


@dataclass
class LidModel:
    languages: list[str]
    ngram_order: int
    # per language: n-gram string -> log probability (gram length encodes n)
    log_probs: dict[str, dict[str, float]]
    # per language, per order n: probability mass of any unseen n-gram
    smoothing_mass: dict[str, dict[int, float]]
    theta: float = 0.05  # decision margin, nats per character
    min_chars: int = 10
    alpha: float = 1.0

    def log_likelihoods(self, text: str) -> dict[str, float]:
        """Per-language normalized log likelihood (nats per character)."""
        norm = normalize(text)
        length = len(norm)
        out: dict[str, float] = {}
        for lang in self.languages:
            probs = self.log_probs[lang]
            unseen = self.smoothing_mass[lang]
            total = 0.0
            for n in range(1, self.ngram_order + 1):
                log_unseen = math.log(unseen[n])
                for i in range(length - n + 1):
                    total += probs.get(norm[i : i + n], log_unseen)
            out[lang] = total / length if length else 0.0
        return out

    def classify(self, text: str) -> LidVerdict:
        norm = normalize(text)
        if len(norm) < self.min_chars:
            return LidVerdict(UNKNOWN, 0.0)
        scores = self.log_likelihoods(norm)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        margin = ranked[0][1] - ranked[1][1]
        if margin < self.theta:
            return LidVerdict(UNKNOWN, margin)
        return LidVerdict(ranked[0][0], margin)

    def save(self, path) -> None:
        save_model(self, path)


def train_lid(
    corpora: Mapping[str, Iterable[str] | str],
    ngram_order: int = 3,
    alpha: float = 1.0,
    theta: float = 0.05,
    min_chars: int = 10,
) -> LidModel:
    """Train additive-smoothed n-gram distributions for n = 1..ngram_order.

    Per (language, order) the observed-gram probabilities plus a single
    unseen-gram bucket sum to one.
    """
    if len(corpora) < 2:
        raise DataError("language identification needs at least 2 languages")
    languages = sorted(corpora)
    log_probs: dict[str, dict[str, float]] = {}
    smoothing: dict[str, dict[int, float]] = {}
    for lang in languages:
        texts = corpora[lang]
        if isinstance(texts, str):
            texts = [texts]
        norm = normalize(" ".join(texts))
        if not norm:
            raise DataError(f"empty corpus for language {lang!r}")
        probs: dict[str, float] = {}
        unseen: dict[int, float] = {}
        for n in range(1, ngram_order + 1):
            counts: dict[str, int] = {}
            for i in range(len(norm) - n + 1):
                gram = norm[i : i + n]
                counts[gram] = counts.get(gram, 0) + 1
            total = sum(counts.values())
            vocab = len(counts)
            denom = total + alpha * (vocab + 1)
            for gram, c in counts.items():
                probs[gram] = math.log((c + alpha) / denom)
            unseen[n] = alpha / denom
        log_probs[lang] = probs
        smoothing[lang] = unseen
    return LidModel(
        languages=languages,
        ngram_order=ngram_order,
        log_probs=log_probs,
        smoothing_mass=smoothing,
        theta=theta,
        min_chars=min_chars,
        alpha=alpha,
    )


def classify(model: LidModel, text: str) -> LidVerdict:
    return model.classify(text)


def matches(model: LidModel, text: str, expected: str) -> bool:
    """True iff the classifier assigns `expected`; UNKNOWN never matches."""
    if expected not in model.languages:
        raise DataError(f"language {expected!r} not covered by the model")
    return model.classify(text).language == expected


_FORMAT_VERSION = "voxmine-lid v1"


def save_model(model: LidModel, path) -> None:
    """Line-based text serialization: header, config, U/G triples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_VERSION}\n")
        fh.write(f"order\t{model.ngram_order}\n")
        fh.write(f"alpha\t{model.alpha!r}\n")
        fh.write(f"theta\t{model.theta!r}\n")
        fh.write(f"minchars\t{model.min_chars}\n")
        fh.write("languages\t" + "\t".join(model.languages) + "\n")
        for lang in model.languages:
            for n in sorted(model.smoothing_mass[lang]):
                fh.write(f"U\t{lang}\t{n}\t{model.smoothing_mass[lang][n]!r}\n")
            for gram in sorted(model.log_probs[lang]):
                fh.write(f"G\t{lang}\t{gram}\t{model.log_probs[lang][gram]!r}\n")


def load_model(path) -> LidModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format {header!r}")
        config: dict[str, str] = {}
        languages: list[str] = []
        log_probs: dict[str, dict[str, float]] = {}
        smoothing: dict[str, dict[int, float]] = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split("\t")
            kind = parts[0]
            if kind == "languages":
                languages = parts[1:]
                for lang in languages:
                    log_probs[lang] = {}
                    smoothing[lang] = {}
            elif kind == "U":
                _, lang, n, mass = parts
                smoothing[lang][int(n)] = float(mass)
            elif kind == "G":
                _, lang, gram, logp = parts
                log_probs[lang][gram] = float(logp)
            elif kind in ("order", "alpha", "theta", "minchars"):
                config[kind] = parts[1]
            else:
                raise DataError(f"{path}:{lineno}: unknown record kind {kind!r}")
    if not languages:
        raise DataError(f"{path}: no languages record")
    return LidModel(
        languages=languages,
        ngram_order=int(config["order"]),
        log_probs=log_probs,
        smoothing_mass=smoothing,
        theta=float(config["theta"]),
        min_chars=int(config["minchars"]),
        alpha=float(config["alpha"]),
    )
