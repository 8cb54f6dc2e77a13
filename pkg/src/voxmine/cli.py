"""Command-line interface exposing every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import (
    audio_seg,
    dataset_assembly,
    embed,
    evalkit,
    phrase_gen,
    pipeline,
    retrieval,
    robust_filter,
    synthetic,
    text_lid,
    wiki_ingest,
)
from .errors import DataError, ProviderError, VoxmineError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voxmine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a dump into a per-language corpus file")
    p.add_argument("--dump", required=True)
    p.add_argument("--language", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-chars", type=int, default=3000)
    p.add_argument("--min-articles", type=int, default=10000)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("lid", help="text language identification")
    lid_sub = p.add_subparsers(dest="lid_command", required=True, parser_class=_Parser)
    t = lid_sub.add_parser("train")
    t.add_argument("--corpus", action="append", required=True, metavar="LANG=PATH")
    t.add_argument("--out", required=True)
    t.add_argument("--order", type=int, default=3)
    t.set_defaults(func=cmd_lid_train)
    c = lid_sub.add_parser("classify")
    c.add_argument("--model", required=True)
    c.add_argument("--expected")
    c.add_argument("--text")
    c.add_argument("--in", dest="infile")
    c.set_defaults(func=cmd_lid_classify)

    p = sub.add_parser("phrases", help="phrase mining")
    ph_sub = p.add_subparsers(dest="phrases_command", required=True, parser_class=_Parser)
    m = ph_sub.add_parser("mine")
    m.add_argument("--corpus", required=True)
    m.add_argument("--language", required=True)
    m.add_argument("--lid", required=True)
    m.add_argument("--top-k", type=int, default=10000)
    m.add_argument("--stopwords")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_phrases_mine)

    p = sub.add_parser("retrieve", help="search phrases and filter video metadata")
    p.add_argument("--phrases", required=True)
    p.add_argument("--provider", required=True, help="fixture:PATH or live:URL")
    p.add_argument("--lid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-results", type=int, default=20)
    p.add_argument("--max-duration", type=float, default=3600.0)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("segment", help="speech detection and segmentation")
    p.add_argument("--wav-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--extract", metavar="DIR", help="also write per-segment WAVs")
    p.add_argument("--min-s", type=float, default=2.0)
    p.add_argument("--max-s", type=float, default=20.0)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("embed", help="segment embeddings")
    p.add_argument("--segments", required=True)
    p.add_argument("--wav-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-mels", type=int, default=embed.DEFAULT_N_MELS)
    p.add_argument("--accepted", help="accepted-video manifest, enables language embeddings")
    p.add_argument("--distances-out", help="write the language cosine-distance matrix here")
    p.add_argument("--lang-emb-out", help="write unit-norm language embeddings here")
    p.add_argument("--lda-dim", type=int, default=250)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("filter", help="robust label filtering")
    f_sub = p.add_subparsers(dest="filter_command", required=True, parser_class=_Parser)
    ff = f_sub.add_parser("fit")
    ff.add_argument("--emb", required=True)
    ff.add_argument("--labels", required=True, help="crowd label file")
    ff.add_argument("--dataset", required=True, help="segment_id<TAB>language file")
    ff.add_argument("--out", required=True)
    ff.add_argument("--projection", choices=["pca", "lda", "none"], default="pca")
    ff.add_argument("--projection-dim", type=int, default=8)
    ff.add_argument("--lda-dim", type=int, default=250)
    ff.add_argument("--seed", type=int, default=0)
    ff.set_defaults(func=cmd_filter_fit)
    fa = f_sub.add_parser("apply")
    fa.add_argument("--model", required=True)
    fa.add_argument("--emb", required=True)
    fa.add_argument("--dataset", required=True)
    fa.add_argument("--out", required=True)
    fa.set_defaults(func=cmd_filter_apply)

    p = sub.add_parser("assemble", help="build the train/eval manifest")
    p.add_argument("--segments", required=True, help="segment_id<TAB>video<TAB>channel<TAB>language<TAB>duration file")
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--per-lang-cap", type=int, default=100)
    p.add_argument("--min-confirmations", type=int, default=2)
    p.add_argument("--channel-strict", action="store_true")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("stats", help="per-language hours from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="train", choices=["train", "eval", "all"])
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="evaluation metrics")
    e_sub = p.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)
    for name in ("purity", "agreement"):
        ep = e_sub.add_parser(name)
        ep.add_argument("--in", dest="infile", required=True, help="crowd label file")
        ep.set_defaults(func=cmd_eval, metric=name)
    ep = e_sub.add_parser("error")
    ep.add_argument("--in", dest="infile", required=True, help="pred<TAB>ref<TAB>duration file")
    ep.set_defaults(func=cmd_eval, metric="error")
    for name in ("eer", "cavg"):
        ep = e_sub.add_parser(name)
        ep.add_argument("--in", dest="infile", required=True, help="trial file")
        ep.set_defaults(func=cmd_eval, metric=name)

    p = sub.add_parser("serve", help="start the crowd-validation service")
    p.add_argument("--segments", required=True)
    p.add_argument("--accepted", required=True)
    p.add_argument("--wav-dir", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--labels", required=True, help="append-only label log path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--from", dest="from_stage", choices=pipeline.STAGES)
    p.add_argument("--to", dest="to_stage", choices=pipeline.STAGES)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fixtures", help="generate the bundled synthetic fixture set")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixtures)

    return parser


def cmd_ingest(args) -> int:
    with open(args.dump, "rb") as fh:
        corpus = wiki_ingest.build_corpus(
            wiki_ingest.parse_dump(fh, args.language), args.language, min_chars=args.min_chars
        )
    eligible = wiki_ingest.language_eligible(corpus, min_articles=args.min_articles)
    wiki_ingest.write_corpus(corpus, args.out)
    print(f"{args.language}: {corpus.article_count} articles kept; eligible={eligible}")
    return 0


def cmd_lid_train(args) -> int:
    corpora = {}
    for spec in args.corpus:
        lang, _, path = spec.partition("=")
        if not path:
            raise DataError(f"--corpus expects LANG=PATH, got {spec!r}")
        corpus = wiki_ingest.read_corpus(path, lang)
        corpora[lang] = [a.body for a in corpus.articles]
    model = text_lid.train_lid(corpora, ngram_order=args.order)
    model.save(args.out)
    print(f"trained {len(corpora)} languages -> {args.out}")
    return 0


def cmd_lid_classify(args) -> int:
    model = text_lid.load_model(args.model)
    if args.text is not None:
        text = args.text
    elif args.infile:
        text = Path(args.infile).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    verdict = model.classify(text)
    print(f"{verdict.language}\t{verdict.margin:.6f}")
    if args.expected is not None:
        return 0 if text_lid.matches(model, text, args.expected) else 2
    return 0


def cmd_phrases_mine(args) -> int:
    corpus = wiki_ingest.read_corpus(args.corpus, args.language)
    model = text_lid.load_model(args.lid)
    stopwords = phrase_gen.load_stopwords(args.stopwords) if args.stopwords else frozenset()
    phrases = phrase_gen.mine_phrases(corpus, model, stopwords=stopwords, top_k=args.top_k)
    phrase_gen.write_phrases(phrases, args.out)
    print(f"{len(phrases)} phrases -> {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    phrases = phrase_gen.read_phrases(args.phrases)
    model = text_lid.load_model(args.lid)
    provider = retrieval.make_provider(args.provider)
    accepted = []
    languages = sorted({p.language for p in phrases})
    for language in languages:
        hits = retrieval.search_all(
            provider, [p for p in phrases if p.language == language], max_results=args.max_results
        )
        accepted.extend(
            retrieval.filter_metadata(hits, model, language, max_duration_s=args.max_duration)
        )
    retrieval.write_accepted(accepted, args.out)
    print(f"{len(accepted)} videos accepted -> {args.out}")
    return 0


def cmd_segment(args) -> int:
    wav_dir = Path(args.wav_dir)
    segments = []
    for wav in sorted(wav_dir.glob("*.wav")):
        segments.extend(
            audio_seg.segment_wav(wav, wav.stem, min_s=args.min_s, max_s=args.max_s)
        )
    audio_seg.write_segments(segments, args.out)
    if args.extract:
        out_dir = Path(args.extract)
        out_dir.mkdir(parents=True, exist_ok=True)
        by_video = {}
        for seg in segments:
            by_video.setdefault(seg.video_id, []).append(seg)
        for video_id, segs in by_video.items():
            samples, sr = audio_seg.read_wav(wav_dir / f"{video_id}.wav")
            for seg in segs:
                audio_seg.write_wav(
                    out_dir / f"{seg.segment_id}.wav",
                    audio_seg.extract_segment(samples, sr, seg),
                    sr,
                )
    print(f"{len(segments)} segments -> {args.out}")
    return 0


def cmd_embed(args) -> int:
    segments = audio_seg.read_segments(args.segments)
    wav_dir = Path(args.wav_dir)
    by_video = {}
    for seg in segments:
        by_video.setdefault(seg.video_id, []).append(seg)
    embeddings = []
    for video_id in sorted(by_video):
        samples, sr = audio_seg.read_wav(wav_dir / f"{video_id}.wav")
        for seg in by_video[video_id]:
            piece = audio_seg.extract_segment(samples, sr, seg)
            embeddings.append(
                embed.Embedding(seg.segment_id, embed.embed_segment(piece, sr, n_mels=args.n_mels))
            )
    embeddings.sort(key=lambda e: e.segment_id)
    embed.write_embeddings(embeddings, args.out)
    print(f"{len(embeddings)} embeddings -> {args.out}")
    if args.distances_out or args.lang_emb_out:
        if not args.accepted:
            raise DataError("--accepted is required to derive language embeddings")
        videos = retrieval.read_accepted(args.accepted)
        video_lang = {v.video_id: v.language for v in videos}
        seg_lang = {}
        for seg in segments:
            if seg.video_id in video_lang:
                seg_lang[seg.segment_id] = video_lang[seg.video_id]
        groups = embed.mean_by_language({e.segment_id: e for e in embeddings}, seg_lang)
        labeled = [e for e in embeddings if e.segment_id in seg_lang]
        projection = embed.lda_fit(
            np.stack([e.vector for e in labeled]),
            [seg_lang[e.segment_id] for e in labeled],
            out_dim=args.lda_dim,
        )
        lang_embs = [
            embed.language_embedding(lang, groups[lang], projection) for lang in sorted(groups)
        ]
        if args.distances_out:
            embed.write_distance_matrix(lang_embs, args.distances_out)
            print(f"{len(lang_embs)}x{len(lang_embs)} distance matrix -> {args.distances_out}")
        if args.lang_emb_out:
            embed.write_embeddings(
                [embed.Embedding(le.language, le.vector) for le in lang_embs], args.lang_emb_out
            )
            print(f"{len(lang_embs)} language embeddings -> {args.lang_emb_out}")
    return 0


def _read_dataset(path) -> dict[str, str]:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected segment_id<TAB>language")
            out[parts[0]] = parts[1]
    return out


def cmd_filter_fit(args) -> int:
    embeddings = embed.load_embeddings(args.emb)
    dataset = _read_dataset(args.dataset)
    crowd = [l for l in evalkit.read_labels(args.labels) if l.segment_id in dataset]
    missing = sorted(s for s in dataset if s not in embeddings)
    if missing:
        raise DataError(f"missing embeddings for segments: {', '.join(missing)}")
    ids = sorted(dataset)
    X = np.stack([embeddings[s].vector for s in ids])
    y = [dataset[s] for s in ids]
    projection = pipeline._filter_projection(
        {"projection": args.projection, "projection_dim": args.projection_dim, "lda_dim": args.lda_dim},
        X,
        y,
    )
    if projection is None:
        projected = {s: embeddings[s].vector for s in ids}
    else:
        projected = {s: projection.project(embeddings[s].vector) for s in ids}
    model = robust_filter.fit_rog(np.stack([projected[s] for s in ids]), y, seed=args.seed)
    correctness = evalkit.correctness_from_labels(crowd)
    scored = sorted(s for s in correctness if s in projected)
    scores = model.posterior_at(
        np.stack([projected[s] for s in scored]), [dataset[s] for s in scored]
    )
    model.threshold = robust_filter.select_threshold(
        scores, np.array([correctness[s] for s in scored], dtype=bool)
    )
    robust_filter.save_model(model, args.out)
    if projection is not None:
        with open(str(args.out) + ".proj", "w", encoding="utf-8") as fh:
            for row in projection.matrix:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"model (tau={model.threshold}) -> {args.out}")
    return 0


def cmd_filter_apply(args) -> int:
    model = robust_filter.load_model(args.model)
    embeddings = embed.load_embeddings(args.emb)
    dataset = _read_dataset(args.dataset)
    proj_path = Path(str(args.model) + ".proj")
    if proj_path.exists():
        matrix = np.array(
            [
                [float(v) for v in line.split(",")]
                for line in proj_path.read_text(encoding="utf-8").splitlines()
                if line
            ]
        )
        projection = embed.LinearProjection(matrix)
        vectors = {s: projection.project(e.vector) for s, e in embeddings.items()}
    else:
        vectors = {s: e.vector for s, e in embeddings.items()}
    if model.threshold is None:
        raise DataError("model has no threshold; run `filter fit` first")
    report = robust_filter.filter_dataset(dataset, vectors, model, model.threshold)
    with open(args.out, "w", encoding="utf-8") as fh:
        for s in sorted(report.kept):
            fh.write(s + "\n")
    print(f"kept {len(report.kept)} / removed {len(report.removed)} -> {args.out}")
    return 0


def _read_segment_records(path) -> list[dataset_assembly.SegmentRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(
                    f"{path}:{lineno}: expected segment_id<TAB>video<TAB>channel<TAB>language<TAB>duration"
                )
            records.append(
                dataset_assembly.SegmentRecord(parts[0], parts[1], parts[2], parts[3], float(parts[4]))
            )
    return records


def cmd_assemble(args) -> int:
    records = _read_segment_records(args.segments)
    ids = {r.segment_id for r in records}
    crowd = [l for l in evalkit.read_labels(args.labels) if l.segment_id in ids]
    result = dataset_assembly.assemble(
        records,
        crowd,
        per_lang_cap=args.per_lang_cap,
        min_confirmations=args.min_confirmations,
        seed=args.seed,
        channel_strict=args.channel_strict,
    )
    dataset_assembly.write_manifest(result.manifest, args.out)
    print(
        f"train={len(result.manifest.split('train'))} eval={len(result.manifest.split('eval'))} "
        f"leakage-removed={len(result.removed_by_leakage)} shared-channels={len(result.shared_channels)}"
    )
    return 0


def cmd_stats(args) -> int:
    manifest = dataset_assembly.read_manifest(args.manifest)
    table = dataset_assembly.stats(manifest, split=None if args.split == "all" else args.split)
    for language, _exact, rounded in table.rows:
        print(f"{language}\t{rounded}")
    print(f"TOTAL\t{table.total_hours}")
    print(f"AVERAGE\t{table.average_hours}")
    return 0


def cmd_eval(args) -> int:
    if args.metric in ("purity", "agreement"):
        labels = evalkit.read_labels(args.infile)
        if args.metric == "purity":
            dist = evalkit.label_distribution(labels)
            for verdict, frac in dist.proportions.items():
                print(f"{verdict.value}\t{100 * frac:.1f}%")
            purity = "n/a" if dist.purity is None else f"{100 * dist.purity:.1f}%"
            print(f"purity\t{purity}")
        else:
            print(f"agreement\t{100 * evalkit.agreement(labels):.1f}%")
    elif args.metric == "error":
        trials = []
        with open(args.infile, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    pred, ref, dur = line.split("\t")
                    trials.append((pred, ref, float(dur)))
        report = evalkit.error_rate(trials)
        for (lo, hi), pct in report.bucket_errors:
            print(f"{lo:g}..{hi:g}s\t{pct:.2f}%")
        print(f"average\t{report.average:.2f}%")
    else:
        scores, truth = evalkit.read_trials(args.infile)
        if args.metric == "eer":
            print(f"eer\t{evalkit.eer_from_trials(scores, truth):.2f}%")
        else:
            print(f"cavg\t{evalkit.cavg(scores, truth):.4f}")
    return 0


def build_service(segments_path, accepted_path, wav_dir, tokens_path, labels_path):
    from . import validation_service as vs

    segments = audio_seg.read_segments(segments_path)
    videos = retrieval.read_accepted(accepted_path)
    catalog = vs.ClipCatalog.from_segments(
        segments, {v.video_id: v.language for v in videos}, wav_dir
    )
    return vs.ValidationService(
        catalog, vs.LabelStore(labels_path), vs.load_tokens(tokens_path)
    )


def cmd_serve(args) -> int:
    import uvicorn

    from . import validation_service as vs

    service = build_service(args.segments, args.accepted, args.wav_dir, args.tokens, args.labels)
    uvicorn.run(vs.create_app(service), host=args.host, port=args.port)
    return 0


def cmd_run(args) -> int:
    config = pipeline.PipelineConfig.load(args.config)
    report = pipeline.run_pipeline(config, args.from_stage, args.to_stage)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_fixtures(args) -> int:
    config_path = synthetic.build_fixture_tree(args.out, seed=args.seed)
    print(f"fixture set -> {args.out} (config: {config_path})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except VoxmineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
