"""Speech activity detection and utterance segmentation.

Energy VAD over 25 ms frames with 10 ms hop: a frame is speech when its log
energy clears an adaptive noise floor (a low percentile of all frame
energies plus an offset) and an absolute floor, and its spectral flatness is
high enough to rule out steady tones. Speech runs are smoothed with a
hangover gap-merge, then cut into 2-20 s utterance-like segments, splitting
over-long runs at low-energy frames.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import accel
from .errors import DataError

SAMPLE_RATE = 16000


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV as float64 samples in [-1, 1)."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise DataError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise DataError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        sr = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, sr


def write_wav(path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767.0 / 32768.0)
    pcm = (clipped * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


@dataclass(frozen=True)
class VadConfig:
    frame_s: float = 0.025
    hop_s: float = 0.010
    noise_percentile: float = 20.0
    offset_db: float = 6.0
    abs_floor_db: float = -55.0
    # spectral flatness of the flat_top_bins strongest band bins; a steady
    # tone concentrates power in a few bins and scores near zero
    flatness_min: float = 0.15
    flat_top_bins: int = 24
    flat_band_hz: tuple[float, float] = (100.0, 6000.0)
    hangover_s: float = 0.3
    n_fft: int = 512


@dataclass(frozen=True)
class FrameTrack:
    """Per-frame analysis of one audio stream."""

    energy_db: np.ndarray
    flatness: np.ndarray
    frame_s: float
    hop_s: float
    n_samples: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return len(self.energy_db)

    def frame_center(self, i: int) -> float:
        return i * self.hop_s + self.frame_s / 2


@dataclass(frozen=True)
class AudioSegment:
    video_id: str
    index: int
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def segment_id(self) -> str:
        return f"{self.video_id}-{self.index:04d}"


def _frame_signal(samples: np.ndarray, win: int, hop: int) -> np.ndarray:
    n = (len(samples) - win) // hop + 1
    if n <= 0:
        return np.empty((0, win))
    strides = (samples.strides[0] * hop, samples.strides[0])
    return np.lib.stride_tricks.as_strided(samples, shape=(n, win), strides=strides)


def analyze(samples: np.ndarray, sample_rate: int = SAMPLE_RATE, config: VadConfig = VadConfig()) -> FrameTrack:
    """Compute per-frame log energy and band spectral flatness."""
    samples = np.asarray(samples, dtype=np.float64)
    win = int(round(config.frame_s * sample_rate))
    hop = int(round(config.hop_s * sample_rate))
    frames = _frame_signal(samples, win, hop)
    if frames.shape[0] == 0:
        return FrameTrack(
            energy_db=np.empty(0),
            flatness=np.empty(0),
            frame_s=config.frame_s,
            hop_s=config.hop_s,
            n_samples=len(samples),
            sample_rate=sample_rate,
        )
    energy = np.mean(frames**2, axis=1)
    energy_db = 10.0 * np.log10(energy + 1e-12)

    window = np.hanning(win)
    spec = np.abs(np.fft.rfft(frames * window, n=config.n_fft, axis=1)) ** 2
    freqs = np.fft.rfftfreq(config.n_fft, d=1.0 / sample_rate)
    band = (freqs >= config.flat_band_hz[0]) & (freqs <= config.flat_band_hz[1])
    power = spec[:, band]
    k = min(config.flat_top_bins, power.shape[1])
    top = -np.partition(-power, k - 1, axis=1)[:, :k]
    top = top + 1e-300
    flatness = np.exp(np.mean(np.log(top), axis=1)) / top.mean(axis=1)

    return FrameTrack(
        energy_db=energy_db,
        flatness=flatness,
        frame_s=config.frame_s,
        hop_s=config.hop_s,
        n_samples=len(samples),
        sample_rate=sample_rate,
    )


def detect_speech(
    samples: np.ndarray,
    sample_rate: int = SAMPLE_RATE,
    config: VadConfig = VadConfig(),
    track: FrameTrack | None = None,
) -> list[tuple[float, float]]:
    """Return disjoint, time-ordered (start_s, end_s) speech intervals."""
    if track is None:
        track = analyze(samples, sample_rate, config)
    if track.n_frames == 0:
        return []
    floor = np.percentile(track.energy_db, config.noise_percentile)
    flags = (
        (track.energy_db > floor + config.offset_db)
        & (track.energy_db > config.abs_floor_db)
        & (track.flatness >= config.flatness_min)
    ).astype(np.uint8)
    max_gap = int(round(config.hangover_s / config.hop_s))
    flags = accel.smooth_gaps(flags, max_gap)

    total_s = track.n_samples / track.sample_rate
    edges = np.diff(np.concatenate(([0], flags, [0])))
    run_starts = np.flatnonzero(edges == 1)
    run_ends = np.flatnonzero(edges == -1) - 1
    return [_run_to_interval(int(a), int(b), track, total_s) for a, b in zip(run_starts, run_ends)]


def _run_to_interval(first: int, last: int, track: FrameTrack, total_s: float) -> tuple[float, float]:
    start_s = first * track.hop_s
    end_s = min(last * track.hop_s + track.frame_s, total_s)
    return (start_s, end_s)


def segment(
    intervals: Sequence[tuple[float, float]],
    min_s: float = 2.0,
    max_s: float = 20.0,
    video_id: str = "",
    track: FrameTrack | None = None,
) -> list[AudioSegment]:
    """Cut speech intervals into segments with durations in [min_s, max_s].

    Intervals shorter than min_s are dropped. Over-long intervals are split
    at the lowest-energy frame within the middle 50% of the remaining span
    (midpoint when no frame track is supplied), so every piece lands in
    bounds.
    """
    if min_s <= 0 or max_s < 2 * min_s:
        raise DataError("need 0 < min_s and max_s >= 2*min_s for valid splits")
    prev_end = -math.inf
    segments: list[AudioSegment] = []
    index = 0
    for start_s, end_s in intervals:
        if start_s < prev_end or end_s <= start_s:
            raise DataError("intervals must be disjoint, ordered and non-empty")
        prev_end = end_s
        if end_s - start_s < min_s:
            continue
        cursor = start_s
        while end_s - cursor > max_s:
            span = end_s - cursor
            lo = cursor + max(0.25 * span, min_s)
            hi = cursor + min(0.75 * span, max_s)
            hi = min(hi, end_s - min_s)
            if lo > hi:
                lo = cursor + min_s
            cut = _lowest_energy_time(track, lo, hi)
            cut = min(max(cut, cursor + min_s), cursor + max_s, end_s - min_s)
            segments.append(AudioSegment(video_id, index, cursor, cut))
            index += 1
            cursor = cut
        segments.append(AudioSegment(video_id, index, cursor, end_s))
        index += 1
    return segments


def _lowest_energy_time(track: FrameTrack | None, lo: float, hi: float) -> float:
    if track is None or track.n_frames == 0:
        return (lo + hi) / 2
    centers = np.arange(track.n_frames) * track.hop_s + track.frame_s / 2
    in_window = np.flatnonzero((centers >= lo) & (centers <= hi))
    if in_window.size == 0:
        return (lo + hi) / 2
    best = in_window[np.argmin(track.energy_db[in_window])]
    return float(centers[best])


def segment_wav(
    path,
    video_id: str,
    config: VadConfig = VadConfig(),
    min_s: float = 2.0,
    max_s: float = 20.0,
) -> list[AudioSegment]:
    """Full per-video pass: read, detect speech, segment."""
    samples, sr = read_wav(path)
    track = analyze(samples, sr, config)
    intervals = detect_speech(samples, sr, config, track=track)
    return segment(intervals, min_s=min_s, max_s=max_s, video_id=video_id, track=track)


def extract_segment(samples: np.ndarray, sample_rate: int, seg: AudioSegment) -> np.ndarray:
    lo = int(round(seg.start_s * sample_rate))
    hi = int(round(seg.end_s * sample_rate))
    return samples[lo:hi]


def write_segments(segments: Iterable[AudioSegment], path) -> None:
    """Segment manifest: `segment_id<TAB>video_id<TAB>start_s<TAB>end_s`."""
    with open(path, "w", encoding="utf-8") as fh:
        for seg in segments:
            fh.write(f"{seg.segment_id}\t{seg.video_id}\t{seg.start_s!r}\t{seg.end_s!r}\n")


def read_segments(path) -> list[AudioSegment]:
    segments = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields")
            segment_id, video_id, start_s, end_s = parts
            index = int(segment_id.rsplit("-", 1)[1])
            segments.append(AudioSegment(video_id, index, float(start_s), float(end_s)))
    return segments
