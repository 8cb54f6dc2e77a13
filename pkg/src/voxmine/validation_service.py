"""Serve audio clips to human validators and record 4-way labels.

Bearer-token auth against a static registry; labels persist to an
append-only tab-separated log with an in-memory index rebuilt on start; the
at-most-once rule per (segment, annotator) is enforced by a single writer
lock. Batches prefer a quota of once-labeled clips so inter-annotator
agreement can be measured.
"""

from __future__ import annotations

import io
import threading
import time
import uuid
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from pydantic import BaseModel

from . import audio_seg, evalkit
from .audio_seg import AudioSegment
from .errors import AuthError, ConflictError, DataError, NotFoundError
from .evalkit import CrowdLabel, Verdict

BATCH_SIZE = 10


@dataclass
class Session:
    session_id: str
    annotator_id: str
    language: str
    proficiency: int
    issued_clips: list[str] = field(default_factory=list)  # current batch, <= batch_size
    issued_all: set[str] = field(default_factory=set)  # every clip issued to this session
    exhausted: bool = False


@dataclass(frozen=True)
class ClipRef:
    segment_id: str
    language: str
    wav_path: Path
    start_s: float
    end_s: float


class ClipCatalog:
    """Maps segment ids to language and audio location."""

    def __init__(self, clips: dict[str, ClipRef]):
        self._clips = clips
        self._by_language: dict[str, list[str]] = {}
        for segment_id in sorted(clips):
            self._by_language.setdefault(clips[segment_id].language, []).append(segment_id)

    @classmethod
    def from_segments(
        cls,
        segments: list[AudioSegment],
        languages: Mapping[str, str],  # video_id -> language
        wav_dir,
    ) -> "ClipCatalog":
        clips = {}
        wav_dir = Path(wav_dir)
        for seg in segments:
            language = languages.get(seg.video_id)
            if language is None:
                raise DataError(f"no language known for video {seg.video_id!r}")
            clips[seg.segment_id] = ClipRef(
                segment_id=seg.segment_id,
                language=language,
                wav_path=wav_dir / f"{seg.video_id}.wav",
                start_s=seg.start_s,
                end_s=seg.end_s,
            )
        return cls(clips)

    def languages(self) -> list[str]:
        return sorted(self._by_language)

    def clips_for(self, language: str) -> list[str]:
        if language not in self._by_language:
            raise NotFoundError(f"unknown language {language!r}")
        return self._by_language[language]

    def get(self, segment_id: str) -> ClipRef:
        try:
            return self._clips[segment_id]
        except KeyError:
            raise NotFoundError(f"unknown segment {segment_id!r}") from None

    def audio_bytes(self, segment_id: str) -> bytes:
        clip = self.get(segment_id)
        samples, sr = audio_seg.read_wav(clip.wav_path)
        lo = int(round(clip.start_s * sr))
        hi = int(round(clip.end_s * sr))
        piece = np.clip(samples[lo:hi], -1.0, 32767.0 / 32768.0)
        buf = io.BytesIO()
        with wave.open(buf, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(sr)
            wf.writeframes((piece * 32768.0).astype("<i2").tobytes())
        return buf.getvalue()


class LabelStore:
    """Append-only label log; one label per (segment, annotator), ever."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._labels: list[CrowdLabel] = []
        self._index: set[tuple[str, str]] = set()
        if self.path.exists():
            for lab in evalkit.read_labels(self.path):
                self._labels.append(lab)
                self._index.add((lab.segment_id, lab.annotator_id))
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, label: CrowdLabel) -> None:
        key = (label.segment_id, label.annotator_id)
        with self._lock:
            if key in self._index:
                raise ConflictError(
                    f"annotator {label.annotator_id!r} already labeled {label.segment_id!r}"
                )
            self._fh.write(
                f"{label.segment_id}\t{label.annotator_id}\t{label.verdict.value}"
                f"\t{label.proficiency}\t{label.timestamp!r}\n"
            )
            self._fh.flush()
            self._index.add(key)
            self._labels.append(label)

    def labels(self) -> list[CrowdLabel]:
        with self._lock:
            return list(self._labels)

    def labeled_by(self, annotator_id: str) -> set[str]:
        with self._lock:
            return {s for s, a in self._index if a == annotator_id}

    def label_counts(self) -> dict[str, int]:
        with self._lock:
            counts: dict[str, int] = {}
            for lab in self._labels:
                counts[lab.segment_id] = counts.get(lab.segment_id, 0) + 1
            return counts

    def close(self) -> None:
        self._fh.close()


def load_tokens(path) -> dict[str, str]:
    """Token registry: `token<TAB>annotator_id` per line."""
    tokens = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                token, annotator_id = line.split("\t")
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: expected token<TAB>annotator") from exc
            tokens[token] = annotator_id
    return tokens


class ValidationService:
    def __init__(
        self,
        catalog: ClipCatalog,
        store: LabelStore,
        tokens: Mapping[str, str],
        reannotation_quota: int = 3,
        batch_size: int = BATCH_SIZE,
        seed: int = 0,
    ):
        self.catalog = catalog
        self.store = store
        self.tokens = dict(tokens)
        self.reannotation_quota = reannotation_quota
        self.batch_size = batch_size
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._issued_ever: dict[str, set[str]] = {}  # annotator -> segment ids

    def authenticate(self, token: str | None) -> str:
        if not token or token not in self.tokens:
            raise AuthError("invalid or missing bearer token")
        return self.tokens[token]

    def create_session(self, token: str | None, language: str, proficiency: int) -> Session:
        annotator_id = self.authenticate(token)
        if language not in self.catalog.languages():
            raise NotFoundError(f"unknown language {language!r}")
        if not (1 <= proficiency <= 5):
            raise DataError(f"proficiency {proficiency} outside 1..5")
        session = Session(
            session_id=uuid.uuid4().hex,
            annotator_id=annotator_id,
            language=language,
            proficiency=proficiency,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None

    def next_clips(self, session_id: str) -> Session:
        """Issue up to batch_size clips: a quota of once-labeled-by-another
        clips when available, the remainder sampled from unlabeled ones.
        Never re-issues a segment to the same annotator."""
        session = self.get_session(session_id)
        with self._lock:
            done = self.store.labeled_by(session.annotator_id)
            issued = self._issued_ever.setdefault(session.annotator_id, set())
            counts = self.store.label_counts()
            eligible = [
                s
                for s in self.catalog.clips_for(session.language)
                if s not in done and s not in issued
            ]
            once_by_other = [s for s in eligible if counts.get(s, 0) == 1]
            fresh = [s for s in eligible if counts.get(s, 0) == 0]
            batch = self._sample(once_by_other, min(self.reannotation_quota, len(once_by_other)))
            batch += self._sample(fresh, min(self.batch_size - len(batch), len(fresh)))
            session.issued_clips = batch
            session.issued_all.update(batch)
            session.exhausted = not batch
            issued.update(batch)
        return session

    def _sample(self, pool: list[str], k: int) -> list[str]:
        if k <= 0:
            return []
        picked = self._rng.choice(len(pool), size=k, replace=False)
        return [pool[i] for i in sorted(picked)]

    def submit_label(self, session_id: str, segment_id: str, verdict: Verdict) -> CrowdLabel:
        session = self.get_session(session_id)
        if segment_id not in session.issued_all:
            raise DataError(f"segment {segment_id!r} was not issued to this session")
        label = CrowdLabel(
            segment_id=segment_id,
            annotator_id=session.annotator_id,
            verdict=verdict,
            proficiency=session.proficiency,
            timestamp=time.time(),
        )
        self.store.append(label)  # raises ConflictError on duplicates
        return label

    def language_stats(self, language: str) -> dict:
        segment_ids = set(self.catalog.clips_for(language))
        labels = [l for l in self.store.labels() if l.segment_id in segment_ids]
        out: dict = {
            "language": language,
            "total_labels": len(labels),
            "over_50_labels": len(labels) > 50,
            "counts": {v.value: 0 for v in Verdict},
            "proportions": None,
            "purity": None,
            "agreement": None,
        }
        if labels:
            dist = evalkit.label_distribution(labels)
            out["counts"] = {v.value: dist.counts[v] for v in Verdict}
            out["proportions"] = {v.value: dist.proportions[v] for v in Verdict}
            out["purity"] = dist.purity
            try:
                out["agreement"] = evalkit.agreement(labels)
            except DataError:
                pass  # no doubly-labeled segment yet
        return out


class SessionRequest(BaseModel):
    language: str
    proficiency: int


class LabelRequest(BaseModel):
    segment_id: str
    verdict: str


def _bearer(authorization: str | None) -> str | None:
    if authorization and authorization.startswith("Bearer "):
        return authorization[len("Bearer ") :]
    return None


def create_app(service: ValidationService):
    """FastAPI wiring over the service core."""
    from fastapi import FastAPI, Header, Response
    from fastapi.responses import JSONResponse

    app = FastAPI(title="voxmine validation service")

    @app.exception_handler(AuthError)
    async def _auth(request, exc):
        return JSONResponse(status_code=401, content={"error": str(exc)})

    @app.exception_handler(NotFoundError)
    async def _notfound(request, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(request, exc):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(DataError)
    async def _data(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/languages")
    def languages():
        return {"languages": service.catalog.languages()}

    @app.post("/sessions")
    def create_session(body: SessionRequest, authorization: str | None = Header(default=None)):
        session = service.create_session(_bearer(authorization), body.language, body.proficiency)
        return {
            "session_id": session.session_id,
            "annotator_id": session.annotator_id,
            "language": session.language,
            "proficiency": session.proficiency,
        }

    @app.get("/sessions/{session_id}/clips")
    def next_clips(session_id: str):
        session = service.next_clips(session_id)
        return {
            "clips": [
                {"segment_id": s, "audio_url": f"/clips/{s}/audio"}
                for s in session.issued_clips
            ],
            "exhausted": session.exhausted,
        }

    @app.post("/sessions/{session_id}/labels")
    def submit_label(session_id: str, body: LabelRequest):
        try:
            verdict = Verdict(body.verdict)
        except ValueError:
            raise DataError(f"unknown verdict {body.verdict!r}") from None
        label = service.submit_label(session_id, body.segment_id, verdict)
        return {"status": "stored", "segment_id": label.segment_id, "verdict": label.verdict.value}

    @app.get("/stats/{language}")
    def language_stats(language: str):
        return service.language_stats(language)

    @app.get("/clips/{segment_id}/audio")
    def clip_audio(segment_id: str):
        return Response(content=service.catalog.audio_bytes(segment_id), media_type="audio/wav")

    return app
