"""Synthetic languages, audio, and the bundled end-to-end fixture set.

Each synthetic language owns a disjoint alphabet block and a Zipf-weighted
word inventory, and is paired with a distinct audio signature (a band-limited
noise passband), so text LID, embeddings and the robust filter all have real
structure to find. Everything is deterministic under a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import audio_seg, phrase_gen, text_lid, wiki_ingest
from .audio_seg import write_wav
from .evalkit import CrowdLabel, Verdict, write_labels

SAMPLE_RATE = 16000

# disjoint alphabet blocks: latin, greek, cyrillic, armenian, georgian,
# hebrew, thai, devanagari
_ALPHABET_BASES = [0x0061, 0x03B1, 0x0430, 0x0561, 0x10D0, 0x05D0, 0x0E01, 0x0915]
# distinct audio passbands (Hz) per language
_AUDIO_BANDS = [
    (200.0, 900.0),
    (1200.0, 2400.0),
    (3000.0, 5200.0),
    (600.0, 1500.0),
    (2000.0, 3600.0),
    (4500.0, 7000.0),
    (900.0, 1800.0),
    (2800.0, 4200.0),
]


@dataclass(frozen=True)
class SyntheticLanguage:
    code: str
    alphabet: str
    words: tuple[str, ...]
    weights: tuple[float, ...]
    band_hz: tuple[float, float]

    def word(self, rng: np.random.Generator) -> str:
        return self.words[rng.choice(len(self.words), p=self.weights)]

    def sentence(self, rng: np.random.Generator, n_words: int | None = None) -> str:
        if n_words is None:
            n_words = int(rng.integers(4, 11))
        return " ".join(self.word(rng) for _ in range(n_words)) + "."

    def text(self, rng: np.random.Generator, target_chars: int) -> str:
        parts: list[str] = []
        size = 0
        while size < target_chars:
            s = self.sentence(rng)
            parts.append(s)
            size += len(s) + 1
        return " ".join(parts)


def make_languages(n: int = 3, seed: int = 0, n_words: int = 150) -> list[SyntheticLanguage]:
    """Isomorphic languages: one shared word-shape skeleton rendered through
    per-language disjoint alphabets, so their corpus statistics match up to a
    character bijection (mixed-language text then has a symmetric, near-zero
    LID margin)."""
    if n > len(_ALPHABET_BASES):
        raise ValueError(f"at most {len(_ALPHABET_BASES)} synthetic languages supported")
    rng = np.random.default_rng(seed)
    alphabet_size = 20
    shapes: set[tuple[int, ...]] = set()
    while len(shapes) < n_words:
        length = int(rng.integers(3, 9))
        shapes.add(tuple(int(c) for c in rng.integers(0, alphabet_size, size=length)))
    ordered_shapes = sorted(shapes)
    ranks = np.arange(1, len(ordered_shapes) + 1, dtype=np.float64)
    weights = 1.0 / ranks**1.05
    weights /= weights.sum()
    langs = []
    for i in range(n):
        alphabet = "".join(chr(_ALPHABET_BASES[i] + j) for j in range(alphabet_size))
        words = tuple("".join(alphabet[c] for c in shape) for shape in ordered_shapes)
        langs.append(
            SyntheticLanguage(
                code=f"l{i}",
                alphabet=alphabet,
                words=words,
                weights=tuple(weights),
                band_hz=_AUDIO_BANDS[i],
            )
        )
    return langs


def isomorphic_corpora(
    langs: list[SyntheticLanguage], target_chars: int = 20000, seed: int = 0
) -> dict[str, str]:
    """Per-language training text drawn with identical word-index sequences,
    so the corpora are exactly isomorphic across languages."""
    return {lang.code: lang.text(np.random.default_rng(seed), target_chars) for lang in langs}


def mixed_sample(
    la: SyntheticLanguage, lb: SyntheticLanguage, rng: np.random.Generator, n_words: int = 20
) -> str:
    """50/50 interleaved two-language text: every drawn word appears in both
    languages' rendering, so the sample is statistically symmetric."""
    words = []
    for _ in range(n_words):
        i = int(rng.choice(len(la.words), p=la.weights))
        words.append(la.words[i])
        words.append(lb.words[i])
    return " ".join(words)


# ---------------------------------------------------------------------------
# Audio synthesis
# ---------------------------------------------------------------------------


def band_noise(
    rng: np.random.Generator,
    duration_s: float,
    band_hz: tuple[float, float],
    sample_rate: int = SAMPLE_RATE,
    amplitude: float = 0.1,
    am_hz: float = 3.5,
) -> np.ndarray:
    """Speech-shaped stand-in: band-limited noise with syllabic-rate AM."""
    n = int(round(duration_s * sample_rate))
    white = rng.normal(size=n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    spectrum[(freqs < band_hz[0]) | (freqs > band_hz[1])] = 0.0
    shaped = np.fft.irfft(spectrum, n=n)
    rms = np.sqrt(np.mean(shaped**2))
    if rms > 0:
        shaped = shaped / rms
    t = np.arange(n) / sample_rate
    envelope = 1.0 + 0.4 * np.sin(2 * np.pi * am_hz * t + rng.uniform(0, 2 * np.pi))
    return amplitude * shaped * envelope


def speech_over_silence(
    rng: np.random.Generator,
    total_s: float,
    spans: list[tuple[float, float]],
    band_hz: tuple[float, float],
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Silence with speech-shaped bursts at the given (start, end) spans."""
    samples = np.zeros(int(round(total_s * sample_rate)))
    for start_s, end_s in spans:
        lo = int(round(start_s * sample_rate))
        burst = band_noise(rng, end_s - start_s, band_hz, sample_rate)
        samples[lo : lo + len(burst)] = burst
    return samples


def steady_tone(duration_s: float, freq_hz: float = 1000.0, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return 0.1 * np.sin(2 * np.pi * freq_hz * t)


# ---------------------------------------------------------------------------
# Dump building
# ---------------------------------------------------------------------------


def make_dump(pages: list[tuple[str, str]]) -> bytes:
    """Page/revision dump container around raw (title, markup) pairs."""
    parts = ["<mediawiki>\n"]
    for title, markup in pages:
        parts.append(
            "  <page>\n"
            f"    <title>{escape(title)}</title>\n"
            "    <ns>0</ns>\n"
            "    <revision>\n"
            f"      <text>{escape(markup)}</text>\n"
            "    </revision>\n"
            "  </page>\n"
        )
    parts.append("</mediawiki>\n")
    return "".join(parts).encode("utf-8")


def _decorate_markup(rng: np.random.Generator, lang: SyntheticLanguage, body: str) -> str:
    """Wrap a plain body in light wiki markup so stripping is exercised."""
    sentences = body.split(". ")
    if len(sentences) > 4:
        word = lang.word(rng)
        sentences[1] = sentences[1].replace(" ", f" [[{word}]] ", 1)
        sentences[3] = "{{infobox|" + lang.word(rng) + "}} " + sentences[3]
    return f"== {lang.word(rng)} ==\n" + ". ".join(sentences)


def language_dump(
    rng: np.random.Generator,
    lang: SyntheticLanguage,
    n_articles: int = 12,
    min_chars: int = 3000,
) -> bytes:
    """A dump with n_articles long articles plus degenerate pages that the
    ingest filters must drop (redirect, short, title-only)."""
    pages = []
    for i in range(n_articles):
        title = f"{lang.word(rng)} {i}"
        body = lang.text(rng, target_chars=min_chars + int(rng.integers(200, 1500)))
        pages.append((title, _decorate_markup(rng, lang, body)))
    pages.append((f"{lang.word(rng)} redirect", f"#REDIRECT [[{lang.word(rng)}]]"))
    pages.append((f"{lang.word(rng)} short", lang.text(rng, target_chars=200)))
    title_only = f"{lang.word(rng)} bare"
    pages.append((title_only, title_only))
    return make_dump(pages)


# ---------------------------------------------------------------------------
# Full fixture tree for end-to-end runs
# ---------------------------------------------------------------------------


def build_fixture_tree(
    out_dir,
    seed: int = 0,
    n_languages: int = 3,
    articles_per_language: int = 10,
    videos_per_language: int = 5,
) -> Path:
    """Create dumps, a retrieval fixture, per-video WAVs, crowd labels, a
    token registry and a pipeline config under out_dir. Returns the config
    path.

    Per language, one video carries another language's audio signature (a
    false positive for the robust filter to catch), one fixture entry is
    over-long and one has a wrong-language title (both must be dropped at
    retrieval time).
    """
    out = Path(out_dir)
    (out / "dumps").mkdir(parents=True, exist_ok=True)
    (out / "wavs").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    langs = make_languages(n_languages, seed=seed)

    corpora = {}
    for lang in langs:
        dump_path = out / "dumps" / f"{lang.code}.xml"
        dump_path.write_bytes(language_dump(rng, lang, n_articles=articles_per_language))
        with open(dump_path, "rb") as fh:
            built = wiki_ingest.build_corpus(wiki_ingest.parse_dump(fh, lang.code), lang.code)
        # mine from the corpus exactly as the pipeline will read it back from
        # disk (the line-oriented format flattens whitespace)
        corpora[lang.code] = wiki_ingest.LanguageCorpus(
            lang.code,
            [
                wiki_ingest.ArticleRecord(
                    lang.code, " ".join(a.title.split()), " ".join(a.body.split())
                )
                for a in built.articles
            ],
        )

    lid = text_lid.train_lid(
        {code: [a.body for a in corpus.articles] for code, corpus in corpora.items()}
    )

    fixture_lines: list[str] = []
    video_language: dict[str, SyntheticLanguage] = {}  # audio signature
    video_claimed: dict[str, str] = {}
    by_code = {lang.code: lang for lang in langs}
    for li, lang in enumerate(langs):
        phrases = phrase_gen.mine_phrases(corpora[lang.code], lid, top_k=videos_per_language + 2)
        other = langs[(li + 1) % len(langs)]
        for pi, phrase in enumerate(phrases):
            title = f"{lang.word(rng)} {phrase.text} {lang.word(rng)}"
            description = lang.text(rng, target_chars=90)
            if pi < videos_per_language:
                video_id = f"{lang.code}vid{pi:02d}"
                duration = float(rng.integers(45, 75))
                channel = f"{lang.code}chan{pi % 2}"
                fixture_lines.append(
                    f"{phrase.text}\t{video_id}\t{duration!r}\t{title}\t{description}\t{channel}"
                )
                # last video per language gets contaminated audio
                video_language[video_id] = other if pi == videos_per_language - 1 else lang
                video_claimed[video_id] = lang.code
            elif pi == videos_per_language:
                # over-long: dropped by the duration rule
                fixture_lines.append(
                    f"{phrase.text}\t{lang.code}vidlong\t{3601.0!r}\t{title}\t{description}\t{lang.code}chan0"
                )
            else:
                # wrong-language metadata: dropped by the LID rule
                wrong_title = other.text(rng, target_chars=60)
                fixture_lines.append(
                    f"{phrase.text}\t{lang.code}vidwrong\t{60.0!r}\t{wrong_title}\t{wrong_title}\t{lang.code}chan1"
                )
    (out / "search_fixture.tsv").write_text("\n".join(fixture_lines) + "\n", encoding="utf-8")

    # WAVs: a few speech spans over silence, one over-long span to split.
    # Labeling plan: the first two videos per language are eval candidates
    # (double-confirmed even segments); later clean videos stay train-only
    # (at most single labels) so video-level leakage removal leaves a train
    # split; contaminated videos are marked other-language.
    all_labels: list[CrowdLabel] = []
    annotators = [("v1", 5), ("v2", 4), ("v3", 3)]
    for video_id, sig_lang in sorted(video_language.items()):
        spans = [(2.0, 8.5), (11.0, 16.0), (19.0, 44.0)]
        total_s = 47.0
        samples = speech_over_silence(rng, total_s, spans, sig_lang.band_hz)
        write_wav(out / "wavs" / f"{video_id}.wav", samples)
        segs = audio_seg.segment_wav(out / "wavs" / f"{video_id}.wav", video_id)
        clean = sig_lang.code == video_claimed[video_id]
        video_index = int(video_id[-2:])
        for si, seg in enumerate(segs):
            if not clean:
                all_labels.append(
                    CrowdLabel(seg.segment_id, "v1", Verdict.OTHER_LANGUAGE, 5, float(len(all_labels)))
                )
            elif video_index < 2:
                n_annot = 2 if si % 2 == 0 else 1
                for name, prof in annotators[:n_annot]:
                    all_labels.append(
                        CrowdLabel(seg.segment_id, name, Verdict.TARGET_SPEECH, prof, float(len(all_labels)))
                    )
            elif si == 0:
                all_labels.append(
                    CrowdLabel(seg.segment_id, "v2", Verdict.TARGET_SPEECH, 4, float(len(all_labels)))
                )
            elif si == 1 and video_index == 2:
                all_labels.append(
                    CrowdLabel(seg.segment_id, "v3", Verdict.UNSURE, 3, float(len(all_labels)))
                )
    write_labels(all_labels, out / "labels.tsv")

    (out / "tokens.tsv").write_text(
        "".join(f"token-{name}\t{name}\n" for name, _ in annotators), encoding="utf-8"
    )

    config = {
        "seed": seed,
        "workdir": str(out / "pipeline"),
        "languages": [lang.code for lang in langs],
        "ingest": {
            "dumps": {lang.code: str(out / "dumps" / f"{lang.code}.xml") for lang in langs},
            "min_chars": 3000,
            "min_articles": 2,
        },
        "lid": {"ngram_order": 3, "theta": 0.05, "min_chars": 10, "alpha": 1.0},
        "phrases": {"top_k": videos_per_language + 2},
        "retrieve": {
            "provider": f"fixture:{out / 'search_fixture.tsv'}",
            "max_results": 5,
            "max_duration_s": 3600.0,
        },
        "segment": {"wav_dir": str(out / "wavs"), "min_s": 2.0, "max_s": 20.0},
        "embed": {"n_mels": 40},
        "filter": {"projection": "pca", "projection_dim": 8, "n_starts": 500},
        "assemble": {
            "labels": str(out / "labels.tsv"),
            "per_lang_cap": 100,
            "min_confirmations": 2,
        },
        "serve": {"tokens": str(out / "tokens.tsv")},
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True), encoding="utf-8")
    return config_path
