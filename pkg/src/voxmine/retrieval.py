"""Search-provider client: execute phrases, filter by metadata language and
duration, deduplicate.

Two providers ship: a live HTTP provider (endpoint + key from the
environment) and a file-backed fixture provider, so tests and offline runs
never touch the network.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .errors import DataError, ProviderError
from .phrase_gen import SearchPhrase
from .text_lid import LidModel, matches

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    title: str
    description: str
    duration_s: float
    channel_id: str
    query_phrase: str
    language: str


class SearchProvider(Protocol):
    def search(self, phrase_text: str, max_results: int) -> list[dict]: ...


class FixtureProvider:
    """Offline provider backed by a TSV file.

    Record format, one per line:
    `phrase<TAB>video_id<TAB>duration_s<TAB>title<TAB>description<TAB>channel_id`
    """

    def __init__(self, path):
        self.path = path
        self._entries: dict[str, list[dict]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 6:
                    raise DataError(f"{path}:{lineno}: expected 6 tab-separated fields")
                phrase, video_id, duration_s, title, description, channel_id = parts
                self._entries.setdefault(phrase, []).append(
                    {
                        "video_id": video_id,
                        "title": title,
                        "description": description,
                        "duration_s": float(duration_s),
                        "channel_id": channel_id,
                    }
                )

    def search(self, phrase_text: str, max_results: int) -> list[dict]:
        hits = self._entries.get(phrase_text)
        if hits is None:
            log.info("fixture miss for phrase %r", phrase_text)
            return []
        return hits[:max_results]


class LiveProvider:
    """HTTP provider; expects a JSON array of result objects.

    The endpoint receives `q` (phrase) and `limit` query params plus a bearer
    key read from `key_env`. Requests are rate-limited and retried with
    bounded exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        key_env: str = "VOXMINE_PROVIDER_KEY",
        max_retries: int = 3,
        backoff_s: float = 0.5,
        rate_limit_s: float = 0.0,
        timeout_s: float = 10.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.key = os.environ.get(key_env, "")
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.rate_limit_s = rate_limit_s
        self.timeout_s = timeout_s
        self._session = session or requests.Session()
        self._sleep = sleep
        self._last_request = 0.0

    def search(self, phrase_text: str, max_results: int) -> list[dict]:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            wait = self.rate_limit_s - (time.monotonic() - self._last_request)
            if wait > 0:
                self._sleep(wait)
            self._last_request = time.monotonic()
            try:
                resp = self._session.get(
                    self.endpoint,
                    params={"q": phrase_text, "limit": max_results},
                    headers={"Authorization": f"Bearer {self.key}"} if self.key else {},
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                payload = resp.json()
                if not isinstance(payload, list):
                    raise ProviderError(
                        f"provider returned {type(payload).__name__}, expected list",
                        phrase=phrase_text,
                    )
                return payload[:max_results]
            except ProviderError:
                raise
            except Exception as exc:  # network/HTTP/decoding failures: retry
                last_error = exc
                if attempt < self.max_retries:
                    self._sleep(self.backoff_s * (2**attempt))
        raise ProviderError(
            f"search failed after {self.max_retries + 1} attempts: {last_error}",
            phrase=phrase_text,
        )


def make_provider(spec: str) -> SearchProvider:
    """Build a provider from `fixture:PATH` or `live:URL`."""
    kind, _, arg = spec.partition(":")
    if kind == "fixture" and arg:
        return FixtureProvider(arg)
    if kind == "live" and arg:
        return LiveProvider(arg)
    raise DataError(f"unknown provider spec {spec!r}; use fixture:PATH or live:URL")


def search(provider: SearchProvider, phrase: SearchPhrase, max_results: int = 20) -> list[VideoMeta]:
    """Run one phrase; tag every hit with the phrase and expected language."""
    out = []
    for rec in provider.search(phrase.text, max_results):
        out.append(
            VideoMeta(
                video_id=str(rec["video_id"]),
                title=str(rec.get("title", "")),
                description=str(rec.get("description", "")),
                duration_s=float(rec["duration_s"]),
                channel_id=str(rec.get("channel_id", "")),
                query_phrase=phrase.text,
                language=phrase.language,
            )
        )
    return out


def search_all(
    provider: SearchProvider,
    phrases: Sequence[SearchPhrase],
    max_results: int = 20,
    workers: int = 4,
) -> list[VideoMeta]:
    """Search many phrases concurrently; results concatenate in phrase order."""
    if workers <= 1 or len(phrases) <= 1:
        batches = [search(provider, p, max_results) for p in phrases]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda p: search(provider, p, max_results), phrases))
    return [video for batch in batches for video in batch]


def filter_metadata(
    videos: Iterable[VideoMeta],
    lid_model: LidModel,
    language: str,
    max_duration_s: float = 3600.0,
) -> list[VideoMeta]:
    """Keep videos whose title+description match the language and whose
    duration is within bounds; deduplicate by video_id (first wins)."""
    seen: set[str] = set()
    kept = []
    for video in videos:
        if video.video_id in seen:
            continue
        if video.duration_s > max_duration_s:
            continue
        if not matches(lid_model, f"{video.title} {video.description}", language):
            continue
        seen.add(video.video_id)
        kept.append(video)
    return kept


def write_accepted(videos: Iterable[VideoMeta], path) -> None:
    """Accepted-video manifest:
    `video_id<TAB>duration_s<TAB>title<TAB>description<TAB>channel_id<TAB>language`.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for v in videos:
            title = v.title.replace("\t", " ").replace("\n", " ")
            desc = v.description.replace("\t", " ").replace("\n", " ")
            fh.write(f"{v.video_id}\t{v.duration_s!r}\t{title}\t{desc}\t{v.channel_id}\t{v.language}\n")


def read_accepted(path) -> list[VideoMeta]:
    videos = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 tab-separated fields")
            video_id, duration_s, title, description, channel_id, language = parts
            videos.append(
                VideoMeta(
                    video_id=video_id,
                    title=title,
                    description=description,
                    duration_s=float(duration_s),
                    channel_id=channel_id,
                    query_phrase="",
                    language=language,
                )
            )
    return videos
