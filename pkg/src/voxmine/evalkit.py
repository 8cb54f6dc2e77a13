"""Label purity, annotator agreement, and classifier evaluation metrics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError


class Verdict(str, Enum):
    TARGET_SPEECH = "target_speech"
    OTHER_LANGUAGE = "other_language"
    NON_SPEECH = "non_speech"
    UNSURE = "unsure"


@dataclass(frozen=True)
class CrowdLabel:
    segment_id: str
    annotator_id: str
    verdict: Verdict
    proficiency: int
    timestamp: float = 0.0

    def __post_init__(self):
        if not (1 <= self.proficiency <= 5):
            raise DataError(f"proficiency {self.proficiency} outside 1..5")
        if not isinstance(self.verdict, Verdict):
            object.__setattr__(self, "verdict", Verdict(self.verdict))


def write_labels(labels: Iterable[CrowdLabel], path) -> None:
    """`segment_id<TAB>annotator_id<TAB>verdict<TAB>proficiency<TAB>timestamp`."""
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(
                f"{lab.segment_id}\t{lab.annotator_id}\t{lab.verdict.value}"
                f"\t{lab.proficiency}\t{lab.timestamp!r}\n"
            )


def read_labels(path) -> list[CrowdLabel]:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 tab-separated fields")
            segment_id, annotator_id, verdict, proficiency, ts = parts
            labels.append(
                CrowdLabel(segment_id, annotator_id, Verdict(verdict), int(proficiency), float(ts))
            )
    return labels


@dataclass(frozen=True)
class LabelDistribution:
    counts: dict[Verdict, int]
    proportions: dict[Verdict, float]
    purity: float | None  # TARGET / (TARGET + OTHER); None when undefined
    total: int


def label_distribution(labels: Sequence[CrowdLabel]) -> LabelDistribution:
    """Proportions over the four verdicts plus speech-conditional purity
    (non-speech and no-answer labels excluded from the purity denominator)."""
    if not labels:
        raise DataError("cannot compute a distribution of zero labels")
    counts = {v: 0 for v in Verdict}
    for lab in labels:
        counts[lab.verdict] += 1
    total = len(labels)
    proportions = {v: c / total for v, c in counts.items()}
    speech = counts[Verdict.TARGET_SPEECH] + counts[Verdict.OTHER_LANGUAGE]
    purity = counts[Verdict.TARGET_SPEECH] / speech if speech else None
    return LabelDistribution(counts=counts, proportions=proportions, purity=purity, total=total)


def agreement(labels: Sequence[CrowdLabel]) -> float:
    """Pairwise inter-annotator agreement, UNSURE labels discarded.

    Over all unordered annotator pairs on the same segment, the fraction
    whose verdicts coincide.
    """
    by_segment: dict[str, list[Verdict]] = defaultdict(list)
    for lab in labels:
        if lab.verdict is not Verdict.UNSURE:
            by_segment[lab.segment_id].append(lab.verdict)
    agree = 0
    pairs = 0
    for verdicts in by_segment.values():
        for i in range(len(verdicts)):
            for j in range(i + 1, len(verdicts)):
                pairs += 1
                if verdicts[i] == verdicts[j]:
                    agree += 1
    if pairs == 0:
        raise DataError("no segment has two or more definite labels")
    return agree / pairs


def correctness_from_labels(labels: Sequence[CrowdLabel]) -> dict[str, bool]:
    """Map crowd labels to per-segment correct/incorrect flags.

    Correct: at least one TARGET_SPEECH label and none contradicting
    (OTHER_LANGUAGE or NON_SPEECH). Incorrect: the reverse. Segments with
    contradicting labels or only UNSURE answers are omitted.
    """
    by_segment: dict[str, set[Verdict]] = defaultdict(set)
    for lab in labels:
        by_segment[lab.segment_id].add(lab.verdict)
    out: dict[str, bool] = {}
    for segment_id, verdicts in by_segment.items():
        has_target = Verdict.TARGET_SPEECH in verdicts
        has_contra = Verdict.OTHER_LANGUAGE in verdicts or Verdict.NON_SPEECH in verdicts
        if has_target and not has_contra:
            out[segment_id] = True
        elif has_contra and not has_target:
            out[segment_id] = False
    return out


@dataclass(frozen=True)
class ErrorRateReport:
    bucket_errors: list[tuple[tuple[float, float], float]]  # ((lo, hi), percent)
    average: float  # percent, over all trials


def error_rate(
    trials: Iterable[tuple[str, str, float]],
    buckets: Sequence[tuple[float, float]] = ((0.0, 5.0), (5.0, 20.0)),
) -> ErrorRateReport:
    """Per-duration-bucket and overall error.

    Each trial is (predicted, reference, duration_s); a bucket (lo, hi)
    covers lo < duration <= hi.
    """
    wrong = {b: 0 for b in buckets}
    total = {b: 0 for b in buckets}
    all_wrong = 0
    all_total = 0
    for predicted, reference, duration in trials:
        for b in buckets:
            if b[0] < duration <= b[1]:
                bucket = b
                break
        else:
            raise DataError(f"duration {duration} outside all buckets")
        total[bucket] += 1
        all_total += 1
        if predicted != reference:
            wrong[bucket] += 1
            all_wrong += 1
    if all_total == 0:
        raise DataError("no trials")
    per_bucket = [
        (b, 100.0 * wrong[b] / total[b] if total[b] else 0.0) for b in buckets
    ]
    return ErrorRateReport(bucket_errors=per_bucket, average=100.0 * all_wrong / all_total)


def eer(target_scores: Sequence[float], nontarget_scores: Sequence[float]) -> float:
    """Equal error rate, in percent.

    Exhaustive scan over observed scores as thresholds (accept when
    score >= threshold). Where the false-acceptance and false-rejection step
    functions cross between candidate thresholds, the midpoint of the two
    bracketing rates is returned.
    """
    tar = np.asarray(target_scores, dtype=np.float64)
    non = np.asarray(nontarget_scores, dtype=np.float64)
    if tar.size == 0 or non.size == 0:
        raise DataError("EER needs both target and non-target trials")
    candidates = np.unique(np.concatenate([tar, non]))[::-1]  # descending
    prev_far = 0.0  # at threshold +inf: accept nothing
    for t in candidates:
        far = float((non >= t).mean())
        frr = float((tar < t).mean())
        if far >= frr:
            return 100.0 * (prev_far + frr) / 2.0
        prev_far = far
    # all thresholds reject more targets than they accept non-targets;
    # the crossing sits below the smallest score where FAR jumps to 1
    return 100.0 * (prev_far + 0.0) / 2.0


def cavg(
    scores: Mapping[str, Mapping[str, float]],
    true_languages: Mapping[str, str],
    p_target: float = 0.5,
    c_miss: float = 1.0,
    c_fa: float = 1.0,
) -> float:
    """Average language-detection cost.

    `scores[trial][language]` are log-likelihood-ratio detection scores; the
    detector says yes iff score >= 0. Cost per target language L_t:
    c_miss * p_target * P_miss(L_t)
      + sum over L_n != L_t of c_fa * (1 - p_target) * P_fa(L_t, L_n) / (N-1),
    averaged over the N target languages.
    """
    langs = sorted(set(true_languages.values()))
    if len(langs) < 2:
        raise DataError("C_avg needs at least 2 languages")
    trials_by_lang: dict[str, list[str]] = defaultdict(list)
    for trial, lang in true_languages.items():
        trials_by_lang[lang].append(trial)
    for trial in true_languages:
        if trial not in scores:
            raise DataError(f"trial {trial!r} has no scores")
        for lang in langs:
            if lang not in scores[trial]:
                raise DataError(f"trial {trial!r} missing a score for language {lang!r}")
    n = len(langs)
    total = 0.0
    for lt in langs:
        own = trials_by_lang[lt]
        p_miss = sum(1 for t in own if scores[t][lt] < 0) / len(own)
        cost = c_miss * p_target * p_miss
        for ln in langs:
            if ln == lt:
                continue
            others = trials_by_lang[ln]
            p_fa = sum(1 for t in others if scores[t][lt] >= 0) / len(others)
            cost += c_fa * (1.0 - p_target) * p_fa / (n - 1)
        total += cost
    return total / n


def read_trials(path) -> tuple[dict[str, dict[str, float]], dict[str, str]]:
    """Trial file: `trial_id<TAB>true_lang<TAB>lang:score,lang:score,...`."""
    scores: dict[str, dict[str, float]] = {}
    truth: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            trial_id, true_lang, cells = parts
            if trial_id in truth:
                raise DataError(f"{path}:{lineno}: duplicate trial {trial_id!r}")
            truth[trial_id] = true_lang
            per_lang = {}
            for cell in cells.split(","):
                lang, _, score = cell.partition(":")
                if not _:
                    raise DataError(f"{path}:{lineno}: bad score cell {cell!r}")
                per_lang[lang] = float(score)
            scores[trial_id] = per_lang
    if not truth:
        raise DataError(f"{path}: no trials")
    return scores, truth


def write_trials(scores: Mapping[str, Mapping[str, float]], truth: Mapping[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trial_id in sorted(truth):
            cells = ",".join(f"{lang}:{scores[trial_id][lang]!r}" for lang in sorted(scores[trial_id]))
            fh.write(f"{trial_id}\t{truth[trial_id]}\t{cells}\n")


def eer_from_trials(
    scores: Mapping[str, Mapping[str, float]], truth: Mapping[str, str]
) -> float:
    """Pool (trial, language) detection scores into one EER."""
    tar, non = [], []
    for trial, lang in truth.items():
        for cand, score in scores[trial].items():
            (tar if cand == lang else non).append(score)
    return eer(tar, non)
