"""Assemble the official train/eval split with leakage prevention, plus
per-language corpus statistics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .evalkit import CrowdLabel, Verdict


@dataclass(frozen=True)
class SegmentRecord:
    segment_id: str
    video_id: str
    channel_id: str
    language: str
    duration_s: float


@dataclass(frozen=True)
class ManifestEntry:
    segment_id: str
    video_id: str
    channel_id: str
    language: str
    duration_s: float
    split: str  # "train" | "eval"


@dataclass
class Manifest:
    entries: list[ManifestEntry]

    def __post_init__(self):
        seen: set[str] = set()
        videos: dict[str, str] = {}
        for e in self.entries:
            if e.segment_id in seen:
                raise DataError(f"duplicate segment id {e.segment_id!r}")
            seen.add(e.segment_id)
            prev = videos.setdefault(e.video_id, e.split)
            if prev != e.split:
                raise DataError(f"video {e.video_id!r} appears in both splits")

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]


def eligible_for_eval(
    labels_by_segment: Mapping[str, Sequence[CrowdLabel]], min_confirmations: int = 2
) -> set[str]:
    """Segments confirmed as target-language speech by >= min_confirmations
    distinct annotators, with no annotator answering otherwise."""
    out = set()
    for segment_id, labels in labels_by_segment.items():
        confirmers = {l.annotator_id for l in labels if l.verdict is Verdict.TARGET_SPEECH}
        contradicted = any(l.verdict is not Verdict.TARGET_SPEECH for l in labels)
        if len(confirmers) >= min_confirmations and not contradicted:
            out.add(segment_id)
    return out


def build_eval(
    segments: Sequence[SegmentRecord],
    crowd_labels: Sequence[CrowdLabel],
    per_lang_cap: int = 100,
    min_confirmations: int = 2,
    seed: int = 0,
) -> list[SegmentRecord]:
    """Select at most per_lang_cap confirmed segments per language, by seeded
    uniform sampling among the qualifiers."""
    by_id = {s.segment_id: s for s in segments}
    labels_by_segment: dict[str, list[CrowdLabel]] = defaultdict(list)
    for lab in crowd_labels:
        if lab.segment_id not in by_id:
            raise DataError(f"label references unknown segment {lab.segment_id!r}")
        labels_by_segment[lab.segment_id].append(lab)
    qualifying = eligible_for_eval(labels_by_segment, min_confirmations)
    by_language: dict[str, list[str]] = defaultdict(list)
    for segment_id in sorted(qualifying):
        by_language[by_id[segment_id].language].append(segment_id)
    rng = np.random.default_rng(seed)
    chosen: list[SegmentRecord] = []
    for language in sorted(by_language):
        ids = by_language[language]
        if len(ids) > per_lang_cap:
            picked = rng.choice(len(ids), size=per_lang_cap, replace=False)
            ids = [ids[i] for i in sorted(picked)]
        chosen.extend(by_id[s] for s in ids)
    return chosen


def build_train(
    segments: Sequence[SegmentRecord], eval_entries: Sequence[SegmentRecord]
) -> list[SegmentRecord]:
    """Everything not sharing a video with the eval set."""
    eval_ids = {s.segment_id for s in eval_entries}
    eval_videos = {s.video_id for s in eval_entries}
    return [s for s in segments if s.segment_id not in eval_ids and s.video_id not in eval_videos]


@dataclass(frozen=True)
class AssemblyReport:
    manifest: Manifest
    removed_by_leakage: list[str]  # segment ids dropped for sharing an eval video
    shared_channels: list[str]  # channels present in both splits (reported only)


def assemble(
    segments: Sequence[SegmentRecord],
    crowd_labels: Sequence[CrowdLabel],
    per_lang_cap: int = 100,
    min_confirmations: int = 2,
    seed: int = 0,
    channel_strict: bool = False,
) -> AssemblyReport:
    """Build the manifest: eval selection, video-level leakage removal, and a
    channel-overlap report (removal only under channel_strict)."""
    eval_entries = build_eval(segments, crowd_labels, per_lang_cap, min_confirmations, seed)
    train_entries = build_train(segments, eval_entries)
    if channel_strict:
        eval_channels = {s.channel_id for s in eval_entries}
        train_entries = [s for s in train_entries if s.channel_id not in eval_channels]
    in_split = {s.segment_id for s in eval_entries} | {s.segment_id for s in train_entries}
    removed = sorted(s.segment_id for s in segments if s.segment_id not in in_split)
    shared = sorted(
        {s.channel_id for s in eval_entries} & {s.channel_id for s in train_entries}
    )
    entries = [
        ManifestEntry(s.segment_id, s.video_id, s.channel_id, s.language, s.duration_s, "train")
        for s in train_entries
    ] + [
        ManifestEntry(s.segment_id, s.video_id, s.channel_id, s.language, s.duration_s, "eval")
        for s in eval_entries
    ]
    entries.sort(key=lambda e: (e.split, e.language, e.segment_id))
    return AssemblyReport(
        manifest=Manifest(entries), removed_by_leakage=removed, shared_channels=shared
    )


@dataclass(frozen=True)
class StatsTable:
    rows: list[tuple[str, float, int]]  # (language, exact hours, rounded hours)
    total_hours: int
    average_hours: int
    n_languages: int


def stats(manifest: Manifest, split: str | None = "train") -> StatsTable:
    """Per-language total duration in hours (reported rounded to integers),
    plus the grand total and the across-language average."""
    seconds: dict[str, float] = defaultdict(float)
    for e in manifest.entries:
        if split is None or e.split == split:
            seconds[e.language] += e.duration_s
    rows = [(lang, seconds[lang] / 3600.0, round(seconds[lang] / 3600.0)) for lang in sorted(seconds)]
    total_exact = sum(r[1] for r in rows)
    n = len(rows)
    return StatsTable(
        rows=rows,
        total_hours=round(total_exact),
        average_hours=round(total_exact / n) if n else 0,
        n_languages=n,
    )


_HEADER = "segment_id\tvideo_id\tchannel_id\tlanguage\tduration_s\tsplit"


def write_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + "\n")
        for e in manifest.entries:
            fh.write(
                f"{e.segment_id}\t{e.video_id}\t{e.channel_id}\t{e.language}"
                f"\t{e.duration_s!r}\t{e.split}\n"
            )


def read_manifest(path) -> Manifest:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _HEADER:
            raise DataError(f"{path}: unexpected manifest header")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 tab-separated fields")
            segment_id, video_id, channel_id, language, duration_s, split = parts
            if split not in ("train", "eval"):
                raise DataError(f"{path}:{lineno}: unknown split {split!r}")
            entries.append(
                ManifestEntry(segment_id, video_id, channel_id, language, float(duration_s), split)
            )
    return Manifest(entries)


def records_from(
    segment_ids: Iterable[str],
    segment_meta: Mapping[str, tuple[str, str, str, float]],
) -> list[SegmentRecord]:
    """Build SegmentRecords from ids plus (video, channel, language, duration)."""
    out = []
    for segment_id in segment_ids:
        video_id, channel_id, language, duration_s = segment_meta[segment_id]
        out.append(SegmentRecord(segment_id, video_id, channel_id, language, duration_s))
    return out
