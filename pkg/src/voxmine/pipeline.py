"""End-to-end pipeline: ingest -> phrases -> retrieve -> segment -> embed ->
filter -> assemble.

One declarative config file (YAML or JSON) drives all stages; every stage
writes its outputs (plus a .meta.json sidecar recording the config digest and
seed) before the next stage starts, so runs are resumable and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import time
from collections import defaultdict
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import (
    audio_seg,
    dataset_assembly,
    embed,
    evalkit,
    phrase_gen,
    retrieval,
    robust_filter,
    text_lid,
    wiki_ingest,
)
from .errors import DataError

STAGES = ["ingest", "phrases", "retrieve", "segment", "embed", "filter", "assemble"]


class PipelineConfig:
    def __init__(self, raw: dict[str, Any], path: Path | None = None):
        self.raw = raw
        self.path = path

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise DataError(f"{path}: config must be a mapping")
        return cls(raw, path)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def workdir(self) -> Path:
        return Path(self.raw.get("workdir", "voxmine-out"))

    @property
    def languages(self) -> list[str]:
        langs = self.raw.get("languages")
        if not langs:
            raise DataError("config: languages list is required")
        return list(langs)

    def section(self, name: str) -> dict[str, Any]:
        value = self.raw.get(name, {})
        return dict(value) if isinstance(value, dict) else {}

    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, ensure_ascii=True, default=str)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


class _Stage:
    """Output bookkeeping for one pipeline stage."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.work = cfg.workdir

    def path(self, *parts) -> Path:
        return self.work.joinpath(*parts)

    def done(self, output: Path, stage: str) -> Path:
        meta = {"config_digest": self.cfg.digest(), "seed": self.cfg.seed, "stage": stage}
        Path(str(output) + ".meta.json").write_text(
            json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8"
        )
        return output

    def require(self, path: Path, produced_by: str) -> Path:
        if not path.exists():
            raise DataError(
                f"missing input {path} (produced by the {produced_by!r} stage); "
                f"run it first or widen --from"
            )
        return path


def _stage_ingest(st: _Stage) -> dict:
    cfg = st.cfg.section("ingest")
    dumps = cfg.get("dumps", {})
    min_chars = int(cfg.get("min_chars", 3000))
    min_articles = int(cfg.get("min_articles", 10000))
    st.path("corpus").mkdir(parents=True, exist_ok=True)
    report = {"languages": {}, "skipped": []}
    for language in st.cfg.languages:
        if language not in dumps:
            raise DataError(f"config: no dump path for language {language!r}")
        with open(dumps[language], "rb") as fh:
            corpus = wiki_ingest.build_corpus(
                wiki_ingest.parse_dump(fh, language), language, min_chars=min_chars
            )
        if not wiki_ingest.language_eligible(corpus, min_articles=min_articles):
            report["skipped"].append(language)
            continue
        out = st.path("corpus", f"{language}.tsv")
        wiki_ingest.write_corpus(corpus, out)
        st.done(out, "ingest")
        report["languages"][language] = corpus.article_count
    if not report["languages"]:
        raise DataError("ingest: no language met the article-count eligibility rule")
    return report


def _read_corpora(st: _Stage) -> dict[str, wiki_ingest.LanguageCorpus]:
    corpora = {}
    for language in st.cfg.languages:
        path = st.path("corpus", f"{language}.tsv")
        if path.exists():
            corpora[language] = wiki_ingest.read_corpus(path, language)
    if not corpora:
        st.require(st.path("corpus", f"{st.cfg.languages[0]}.tsv"), "ingest")
    return corpora


def _stage_phrases(st: _Stage) -> dict:
    cfg = st.cfg.section("phrases")
    lid_cfg = st.cfg.section("lid")
    corpora = _read_corpora(st)
    model = text_lid.train_lid(
        {code: [a.body for a in corpus.articles] for code, corpus in corpora.items()},
        ngram_order=int(lid_cfg.get("ngram_order", 3)),
        alpha=float(lid_cfg.get("alpha", 1.0)),
        theta=float(lid_cfg.get("theta", 0.05)),
        min_chars=int(lid_cfg.get("min_chars", 10)),
    )
    lid_path = st.path("lid.model")
    model.save(lid_path)
    st.done(lid_path, "phrases")

    top_k = int(cfg.get("top_k", 10000))
    stopword_paths = cfg.get("stopwords", {})
    all_phrases: list[phrase_gen.SearchPhrase] = []
    counts = {}
    for language, corpus in corpora.items():
        stopwords = (
            phrase_gen.load_stopwords(stopword_paths[language])
            if language in stopword_paths
            else frozenset()
        )
        mined = phrase_gen.mine_phrases(corpus, model, stopwords=stopwords, top_k=top_k)
        all_phrases.extend(mined)
        counts[language] = len(mined)
    out = st.path("phrases.tsv")
    phrase_gen.write_phrases(all_phrases, out)
    st.done(out, "phrases")
    return {"phrases": counts}


def _stage_retrieve(st: _Stage) -> dict:
    cfg = st.cfg.section("retrieve")
    phrases = phrase_gen.read_phrases(st.require(st.path("phrases.tsv"), "phrases"))
    model = text_lid.load_model(st.require(st.path("lid.model"), "phrases"))
    provider = retrieval.make_provider(str(cfg.get("provider", "")))
    max_results = int(cfg.get("max_results", 20))
    max_duration = float(cfg.get("max_duration_s", 3600.0))
    workers = int(st.cfg.raw.get("workers", 1))

    by_language: dict[str, list[phrase_gen.SearchPhrase]] = defaultdict(list)
    for p in phrases:
        by_language[p.language].append(p)
    accepted: list[retrieval.VideoMeta] = []
    counts = {}
    for language in st.cfg.languages:
        hits = retrieval.search_all(
            provider, by_language.get(language, []), max_results=max_results, workers=workers
        )
        kept = retrieval.filter_metadata(hits, model, language, max_duration_s=max_duration)
        accepted.extend(kept)
        counts[language] = {"searched": len(by_language.get(language, [])), "accepted": len(kept)}
    out = st.path("accepted.tsv")
    retrieval.write_accepted(accepted, out)
    st.done(out, "retrieve")
    return {"videos": counts}


def _acquire_wav(video_id: str, wav_dir: Path, command: str | None) -> Path:
    wav = wav_dir / f"{video_id}.wav"
    if wav.exists():
        return wav
    if not command:
        raise DataError(f"missing audio file {wav} and no acquire command configured")
    rendered = command.format(video_id=video_id, out=str(wav))
    proc = subprocess.run(shlex.split(rendered), capture_output=True, text=True)
    if proc.returncode != 0 or not wav.exists():
        raise DataError(f"acquire command failed for {video_id}: {proc.stderr.strip()}")
    return wav


def _stage_segment(st: _Stage) -> dict:
    cfg = st.cfg.section("segment")
    videos = retrieval.read_accepted(st.require(st.path("accepted.tsv"), "retrieve"))
    wav_dir = Path(cfg.get("wav_dir", st.path("wavs")))
    command = cfg.get("acquire_command")
    vad = audio_seg.VadConfig(**cfg.get("vad", {}))
    min_s = float(cfg.get("min_s", 2.0))
    max_s = float(cfg.get("max_s", 20.0))
    segments: list[audio_seg.AudioSegment] = []
    for video in videos:
        wav = _acquire_wav(video.video_id, wav_dir, command)
        segments.extend(audio_seg.segment_wav(wav, video.video_id, config=vad, min_s=min_s, max_s=max_s))
    out = st.path("segments.tsv")
    audio_seg.write_segments(segments, out)
    st.done(out, "segment")
    return {"segments": len(segments)}


def _stage_embed(st: _Stage) -> dict:
    cfg = st.cfg.section("embed")
    seg_cfg = st.cfg.section("segment")
    segments = audio_seg.read_segments(st.require(st.path("segments.tsv"), "segment"))
    wav_dir = Path(seg_cfg.get("wav_dir", st.path("wavs")))
    n_mels = int(cfg.get("n_mels", embed.DEFAULT_N_MELS))
    by_video: dict[str, list[audio_seg.AudioSegment]] = defaultdict(list)
    for seg in segments:
        by_video[seg.video_id].append(seg)
    embeddings: list[embed.Embedding] = []
    for video_id in sorted(by_video):
        samples, sr = audio_seg.read_wav(wav_dir / f"{video_id}.wav")
        for seg in by_video[video_id]:
            piece = audio_seg.extract_segment(samples, sr, seg)
            embeddings.append(embed.Embedding(seg.segment_id, embed.embed_segment(piece, sr, n_mels=n_mels)))
    embeddings.sort(key=lambda e: e.segment_id)
    out = st.path("embeddings.tsv")
    embed.write_embeddings(embeddings, out)
    st.done(out, "embed")
    return {"embeddings": len(embeddings)}


def _segment_languages(st: _Stage) -> dict[str, str]:
    segments = audio_seg.read_segments(st.require(st.path("segments.tsv"), "segment"))
    videos = retrieval.read_accepted(st.require(st.path("accepted.tsv"), "retrieve"))
    video_lang = {v.video_id: v.language for v in videos}
    out = {}
    for seg in segments:
        if seg.video_id not in video_lang:
            raise DataError(f"segment {seg.segment_id} references unknown video {seg.video_id}")
        out[seg.segment_id] = video_lang[seg.video_id]
    return out


def _filter_projection(cfg: dict, X: np.ndarray, y: list[str]) -> embed.LinearProjection | None:
    """Dimension reduction ahead of the robust fit.

    Default is label-free PCA: a supervised projection fit on the noisy
    labels can memorize exactly the mislabelings the filter is meant to
    catch when points are scarce relative to the dimension.
    """
    kind = str(cfg.get("projection", "pca")).lower()
    if kind == "none":
        return None
    min_class = min(y.count(c) for c in set(y))
    if kind == "pca":
        out_dim = min(int(cfg.get("projection_dim", 8)), min_class - 1)
        return embed.pca_fit(X, out_dim)
    if kind == "lda":
        return embed.lda_fit(X, y, out_dim=int(cfg.get("lda_dim", 250)))
    raise DataError(f"unknown filter projection {kind!r}; use pca, lda or none")


def _stage_filter(st: _Stage) -> dict:
    cfg = st.cfg.section("filter")
    asm_cfg = st.cfg.section("assemble")
    embeddings = embed.load_embeddings(st.require(st.path("embeddings.tsv"), "embed"))
    segment_langs = _segment_languages(st)
    labels_path = asm_cfg.get("labels")
    if not labels_path:
        raise DataError("config: assemble.labels (crowd label file) is required for filtering")
    crowd = [l for l in evalkit.read_labels(labels_path) if l.segment_id in segment_langs]

    ids = sorted(segment_langs)
    missing = [s for s in ids if s not in embeddings]
    if missing:
        raise DataError(f"missing embeddings for segments: {', '.join(missing)}")
    X = np.stack([embeddings[s].vector for s in ids])
    y = [segment_langs[s] for s in ids]
    projection = _filter_projection(cfg, X, y)
    if projection is None:
        projected = {s: embeddings[s].vector for s in ids}
    else:
        projected = {s: projection.project(embeddings[s].vector) for s in ids}

    model = robust_filter.fit_rog(
        np.stack([projected[s] for s in ids]),
        y,
        n_starts=int(cfg.get("n_starts", robust_filter.DEFAULT_N_STARTS)),
        seed=st.cfg.seed,
    )
    correctness = evalkit.correctness_from_labels(crowd)
    scored_ids = sorted(s for s in correctness if s in projected)
    if not scored_ids:
        raise DataError("no crowd-labeled segments available to calibrate the threshold")
    scores = model.posterior_at(
        np.stack([projected[s] for s in scored_ids]), [segment_langs[s] for s in scored_ids]
    )
    tau = robust_filter.select_threshold(
        scores, np.array([correctness[s] for s in scored_ids], dtype=bool)
    )
    model.threshold = tau
    model_path = st.path("rog.model")
    robust_filter.save_model(model, model_path)
    st.done(model_path, "filter")
    if projection is not None:
        proj_path = st.path("projection.tsv")
        with open(proj_path, "w", encoding="utf-8") as fh:
            for row in projection.matrix:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        st.done(proj_path, "filter")

    report = robust_filter.filter_dataset(segment_langs, projected, model, tau, correctness)
    kept_path = st.path("kept.tsv")
    with open(kept_path, "w", encoding="utf-8") as fh:
        for s in sorted(report.kept):
            fh.write(s + "\n")
    st.done(kept_path, "filter")
    summary = {
        "tau": tau,
        "kept": len(report.kept),
        "removed": len(report.removed),
        "est_fpr": report.est_fpr,
        "est_fnr": report.est_fnr,
        "noise_before": report.noise_before,
        "noise_after": report.noise_after,
    }
    report_path = st.path("filter_report.json")
    report_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    st.done(report_path, "filter")
    return summary


def _stage_assemble(st: _Stage) -> dict:
    cfg = st.cfg.section("assemble")
    segments = audio_seg.read_segments(st.require(st.path("segments.tsv"), "segment"))
    videos = retrieval.read_accepted(st.require(st.path("accepted.tsv"), "retrieve"))
    kept_path = st.require(st.path("kept.tsv"), "filter")
    kept = set(kept_path.read_text(encoding="utf-8").split())
    video_meta = {v.video_id: v for v in videos}
    records = []
    for seg in segments:
        if seg.segment_id not in kept:
            continue
        video = video_meta[seg.video_id]
        records.append(
            dataset_assembly.SegmentRecord(
                segment_id=seg.segment_id,
                video_id=seg.video_id,
                channel_id=video.channel_id,
                language=video.language,
                duration_s=seg.duration_s,
            )
        )
    record_ids = {r.segment_id for r in records}
    crowd = [
        l for l in evalkit.read_labels(cfg["labels"]) if l.segment_id in record_ids
    ]
    result = dataset_assembly.assemble(
        records,
        crowd,
        per_lang_cap=int(cfg.get("per_lang_cap", 100)),
        min_confirmations=int(cfg.get("min_confirmations", 2)),
        seed=st.cfg.seed,
        channel_strict=bool(cfg.get("channel_strict", False)),
    )
    manifest_path = st.path("manifest.tsv")
    dataset_assembly.write_manifest(result.manifest, manifest_path)
    st.done(manifest_path, "assemble")

    table = dataset_assembly.stats(result.manifest)
    stats_path = st.path("stats.tsv")
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write("language\thours\n")
        for language, _exact, rounded in table.rows:
            fh.write(f"{language}\t{rounded}\n")
        fh.write(f"TOTAL\t{table.total_hours}\n")
        fh.write(f"AVERAGE\t{table.average_hours}\n")
    st.done(stats_path, "assemble")

    summary = {
        "train": len(result.manifest.split("train")),
        "eval": len(result.manifest.split("eval")),
        "removed_by_leakage": len(result.removed_by_leakage),
        "shared_channels": result.shared_channels,
    }
    report_path = st.path("assembly_report.json")
    report_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    st.done(report_path, "assemble")
    return summary


_STAGE_FUNCS: dict[str, Callable[[_Stage], dict]] = {
    "ingest": _stage_ingest,
    "phrases": _stage_phrases,
    "retrieve": _stage_retrieve,
    "segment": _stage_segment,
    "embed": _stage_embed,
    "filter": _stage_filter,
    "assemble": _stage_assemble,
}


def run_pipeline(
    config: PipelineConfig,
    from_stage: str | None = None,
    to_stage: str | None = None,
) -> dict:
    """Run the stage range [from_stage, to_stage] in order; each stage writes
    its outputs before the next starts. Returns the pipeline report."""
    for name in (from_stage, to_stage):
        if name is not None and name not in STAGES:
            raise DataError(f"unknown stage {name!r}; stages are {', '.join(STAGES)}")
    first = STAGES.index(from_stage) if from_stage else 0
    last = STAGES.index(to_stage) if to_stage else len(STAGES) - 1
    if last < first:
        raise DataError("--to stage precedes --from stage")
    config.workdir.mkdir(parents=True, exist_ok=True)
    st = _Stage(config)
    report: dict[str, Any] = {
        "config_digest": config.digest(),
        "seed": config.seed,
        "stages": {},
    }
    for stage in STAGES[first : last + 1]:
        start = time.monotonic()
        report["stages"][stage] = _STAGE_FUNCS[stage](st)
        report["stages"][stage]["elapsed_s"] = round(time.monotonic() - start, 3)
        report_path = st.path("report.json")
        report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return report
