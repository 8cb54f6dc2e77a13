"""Fixed-dimension utterance embeddings and per-language mean embeddings.

The built-in baseline embeds a segment as per-band mean and standard
deviation of 40-band log-mel energies (d = 80), a desk-scale stand-in for
neural utterance embeddings; externally computed vectors load from the
documented file format. Language embeddings are class means projected with
LDA and length-normalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import linalg as sla

from .errors import DataError

DEFAULT_N_MELS = 40
_LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Embedding:
    segment_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class LanguageEmbedding:
    language: str
    vector: np.ndarray  # unit Euclidean norm


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters over [0, sample_rate/2]; (n_mels, n_fft//2+1)."""
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2), n_mels + 2))
    bank = np.zeros((n_mels, len(freqs)))
    for b in range(n_mels):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - freqs) / max(hi - mid, 1e-12)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def embed_segment(
    samples: np.ndarray,
    sample_rate: int = 16000,
    n_mels: int = DEFAULT_N_MELS,
    frame_s: float = 0.025,
    hop_s: float = 0.010,
    n_fft: int = 512,
) -> np.ndarray:
    """Per-band mean and std of log-mel energies; vector of length 2*n_mels."""
    samples = np.asarray(samples, dtype=np.float64)
    win = int(round(frame_s * sample_rate))
    hop = int(round(hop_s * sample_rate))
    if len(samples) < win:
        raise DataError(f"segment of {len(samples)} samples is shorter than one analysis frame ({win})")
    n_frames = (len(samples) - win) // hop + 1
    strides = (samples.strides[0] * hop, samples.strides[0])
    frames = np.lib.stride_tricks.as_strided(samples, shape=(n_frames, win), strides=strides)
    window = np.hanning(win)
    spec = np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1)) ** 2
    mel = spec @ mel_filterbank(n_mels, n_fft, sample_rate).T
    logmel = np.log10(mel + _LOG_FLOOR)
    vec = np.concatenate([logmel.mean(axis=0), logmel.std(axis=0)])
    if not np.all(np.isfinite(vec)):
        raise DataError("embedding contains non-finite values")
    return vec


def write_embeddings(embeddings: Iterable[Embedding], path) -> None:
    """Header `dim=<d>`, then `segment_id<TAB>v1,v2,...,vd` per line."""
    embeddings = list(embeddings)
    if not embeddings:
        raise DataError("no embeddings to write")
    dim = len(embeddings[0].vector)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dim}\n")
        for emb in embeddings:
            if len(emb.vector) != dim:
                raise DataError(f"embedding {emb.segment_id!r} has dimension {len(emb.vector)}, expected {dim}")
            fh.write(emb.segment_id + "\t" + ",".join(repr(float(x)) for x in emb.vector) + "\n")


def load_embeddings(path) -> dict[str, Embedding]:
    """Load the embedding file; all vectors must share one dimension, ids
    must be unique, values must be finite."""
    out: dict[str, Embedding] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise DataError(f"{path}: missing dim= header")
        dim = int(header[4:])
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                segment_id, values = line.split("\t")
                vector = np.array([float(v) for v in values.split(",")])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad embedding record") from exc
            if len(vector) != dim:
                raise DataError(
                    f"{path}:{lineno}: segment {segment_id!r} has dimension {len(vector)}, expected {dim}"
                )
            if not np.all(np.isfinite(vector)):
                raise DataError(f"{path}:{lineno}: segment {segment_id!r} has non-finite values")
            if segment_id in out:
                raise DataError(f"{path}:{lineno}: duplicate segment id {segment_id!r}")
            out[segment_id] = Embedding(segment_id, vector)
    return out


@dataclass(frozen=True)
class LinearProjection:
    matrix: np.ndarray  # (d, out_dim)

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[1]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.matrix


def pca_fit(vectors: np.ndarray, out_dim: int) -> LinearProjection:
    """Principal components of centered data; label-free reduction.

    Deterministic up to sign, fixed like lda_fit's basis.
    """
    X = np.asarray(vectors, dtype=np.float64)
    k = min(out_dim, X.shape[1], max(X.shape[0] - 1, 1))
    _, _, vt = np.linalg.svd(X - X.mean(axis=0), full_matrices=False)
    W = vt[:k].T.copy()
    for j in range(W.shape[1]):
        if W[np.argmax(np.abs(W[:, j])), j] < 0:
            W[:, j] = -W[:, j]
    return LinearProjection(matrix=W)


def lda_fit(vectors: np.ndarray, labels: Sequence[str], out_dim: int = 250) -> LinearProjection:
    """Fisher LDA: maximize between/within-class scatter ratio.

    out_dim clamps to min(d, n_classes - 1). Singular within-class scatter is
    ridge-regularized (eps = 1e-6 * trace/d) with a warning. Basis sign is
    fixed by making each column's largest-magnitude entry positive.
    """
    X = np.asarray(vectors, dtype=np.float64)
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("LDA needs at least 2 classes")
    n, d = X.shape
    k = min(out_dim, d, len(classes) - 1)
    grand = X.mean(axis=0)
    s_within = np.zeros((d, d))
    s_between = np.zeros((d, d))
    y = np.array(labels)
    for c in classes:
        Xc = X[y == c]
        mu = Xc.mean(axis=0)
        diff = Xc - mu
        s_within += diff.T @ diff
        md = (mu - grand)[:, None]
        s_between += len(Xc) * (md @ md.T)
    eigvals_w = np.linalg.eigvalsh(s_within)
    if eigvals_w[0] <= 1e-12 * max(float(eigvals_w[-1]), 1.0):
        eps = 1e-6 * np.trace(s_within) / d + 1e-12
        warnings.warn(f"singular within-class scatter; adding ridge {eps:.3e}")
        s_within = s_within + eps * np.eye(d)
    vals, vecs = sla.eigh(s_between, s_within)
    order = np.argsort(vals)[::-1][:k]
    W = vecs[:, order]
    for j in range(W.shape[1]):
        if W[np.argmax(np.abs(W[:, j])), j] < 0:
            W[:, j] = -W[:, j]
    return LinearProjection(matrix=W)


def language_embedding(
    language: str,
    vectors: Sequence[np.ndarray],
    projection: LinearProjection,
) -> LanguageEmbedding:
    """Mean of raw vectors, projected, scaled to unit norm."""
    if len(vectors) == 0:
        raise DataError(f"no embeddings for language {language!r}")
    mean = np.mean(np.asarray(vectors, dtype=np.float64), axis=0)
    proj = projection.project(mean)
    norm = float(np.linalg.norm(proj))
    if norm <= 0.0:
        raise DataError(f"language {language!r}: projected mean has zero norm")
    return LanguageEmbedding(language=language, vector=proj / norm)


def distance_matrix(embeddings: Sequence[LanguageEmbedding]) -> tuple[list[str], np.ndarray]:
    """Pairwise cosine distances between unit-norm language embeddings."""
    codes = [e.language for e in embeddings]
    M = np.stack([e.vector for e in embeddings])
    return codes, 1.0 - M @ M.T


def write_distance_matrix(embeddings: Sequence[LanguageEmbedding], path) -> None:
    codes, dist = distance_matrix(embeddings)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t" + "\t".join(codes) + "\n")
        for code, row in zip(codes, dist):
            fh.write(code + "\t" + "\t".join(f"{v:.6f}" for v in row) + "\n")


def mean_by_language(
    embeddings: Mapping[str, Embedding], segment_languages: Mapping[str, str]
) -> dict[str, list[np.ndarray]]:
    """Group embedding vectors by the language assigned to their segment."""
    groups: dict[str, list[np.ndarray]] = {}
    for segment_id, emb in embeddings.items():
        lang = segment_languages.get(segment_id)
        if lang is None:
            continue
        groups.setdefault(lang, []).append(emb.vector)
    return groups
