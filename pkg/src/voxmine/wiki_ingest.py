"""Stream-parse article dumps, strip markup, filter per-language corpora.

The dump container is the standard public-dump page/revision XML layout
(<mediawiki><page><title/><ns/><revision><text/></revision></page>...).
Parsing is streaming: memory stays constant in the number of pages.
Decompression (e.g. bz2) is a pre-step outside this module.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Iterable, Iterator
from xml.etree import ElementTree as ET

from .errors import DataError, DumpFormatError, TruncatedDumpError


@dataclass(frozen=True)
class ArticleRecord:
    """One cleaned article: plain-text body, no markup delimiters."""

    language: str
    title: str
    body: str

    @property
    def char_count(self) -> int:
        # Unicode scalar values, not bytes: the length rule must behave the
        # same for Latin and non-Latin scripts.
        return len(self.body)


@dataclass
class LanguageCorpus:
    language: str
    articles: list[ArticleRecord] = field(default_factory=list)

    @property
    def article_count(self) -> int:
        return len(self.articles)


# expat error codes that indicate an unexpectedly ended (truncated) stream
_TRUNCATION_CODES = {3, 5, 6}  # no element found, unclosed token, partial char


class _CountingReader:
    """Wraps a binary stream and tracks bytes consumed, for error offsets."""

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self.bytes_read = 0

    def read(self, size: int = -1) -> bytes:
        chunk = self._stream.read(size)
        self.bytes_read += len(chunk)
        return chunk


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_dump(dump_stream: BinaryIO, language: str) -> Iterator[tuple[str, str]]:
    """Yield (title, markup_text) for every article page, in stream order.

    Pages outside the main namespace (ns != 0) are skipped. Redirect pages are
    yielded; callers flag them via is_redirect(). Raises DumpFormatError with
    the approximate byte offset on malformed input, TruncatedDumpError after
    all complete pages when the stream ends mid-document.
    """
    reader = _CountingReader(dump_stream)
    root = None
    try:
        for event, elem in ET.iterparse(reader, events=("start", "end")):
            if event == "start":
                if root is None:
                    root = elem
                continue
            if _local(elem.tag) != "page":
                continue
            title = ""
            ns = 0
            text = ""
            for child in elem:
                tag = _local(child.tag)
                if tag == "title":
                    title = child.text or ""
                elif tag == "ns":
                    try:
                        ns = int(child.text or 0)
                    except ValueError:
                        ns = 0
                elif tag == "revision":
                    for sub in child:
                        if _local(sub.tag) == "text":
                            text = sub.text or ""
            if root is not None:
                root.clear()  # keep memory flat across pages
            if ns == 0:
                yield title, text
    except ET.ParseError as exc:
        offset = reader.bytes_read
        if getattr(exc, "code", None) in _TRUNCATION_CODES:
            raise TruncatedDumpError(
                f"{language} dump ended unexpectedly near byte {offset}: {exc}",
                byte_offset=offset,
            ) from exc
        raise DumpFormatError(
            f"malformed {language} dump near byte {offset}: {exc}",
            byte_offset=offset,
        ) from exc


def is_redirect(markup_text: str) -> bool:
    return markup_text.lstrip()[:9].upper() == "#REDIRECT"


_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_DROP_TAG_RE = re.compile(
    r"<(ref|math|gallery|source|syntaxhighlight|timeline|score|code)\b[^>/]*(?:/\s*>|>.*?</\1\s*>)",
    re.DOTALL | re.IGNORECASE,
)
_TAG_RE = re.compile(r"</?[a-zA-Z][^>]*>")
_TEMPLATE_RE = re.compile(r"\{\{[^{}]*\}\}", re.DOTALL)
_TABLE_RE = re.compile(r"\{\|(?:(?!\{\||\|\}).)*?\|\}", re.DOTALL)
_FILE_LINK_RE = re.compile(r"\[\[[^\[\]|]*?:[^\[\]]*\]\]")
_PIPED_LINK_RE = re.compile(r"\[\[(?:[^\[\]|]*\|)?([^\[\]|]*)\]\]")
_EXT_LINK_RE = re.compile(r"\[\w+://[^ \]]*( [^\]]*)?\]")
_QUOTES_RE = re.compile(r"'{2,}")
_HEADING_RE = re.compile(r"^\s*=+\s*(.*?)\s*=+\s*$", re.MULTILINE)
_LIST_RE = re.compile(r"^[*#:;]+\s*", re.MULTILINE)
_MAGIC_RE = re.compile(r"__[A-Z]+__")
_LEFTOVER_RE = re.compile(r"\[\[|\]\]|\{\{|\}\}|\{\||\|\}")


def strip_markup(markup_text: str) -> str:
    """Best-effort lossy conversion of wiki markup to plain text.

    Templates, tables, refs and media links are dropped entirely; link labels
    and heading text are kept; unknown constructs are removed rather than
    expanded. Paragraph breaks survive as single newlines.
    """
    text = _COMMENT_RE.sub("", markup_text)
    text = _DROP_TAG_RE.sub(" ", text)
    # innermost-out to handle nesting
    for pattern in (_TEMPLATE_RE, _TABLE_RE):
        prev = None
        while prev != text:
            prev = text
            text = pattern.sub(" ", text)
    prev = None
    while prev != text:
        prev = text
        text = _FILE_LINK_RE.sub(" ", text)
        text = _PIPED_LINK_RE.sub(r"\1", text)
    text = _EXT_LINK_RE.sub(lambda m: (m.group(1) or " ").strip(), text)
    text = _TAG_RE.sub(" ", text)
    text = _QUOTES_RE.sub("", text)
    text = _HEADING_RE.sub(r"\1", text)
    text = _LIST_RE.sub("", text)
    text = _MAGIC_RE.sub("", text)
    text = html.unescape(text)
    text = _LEFTOVER_RE.sub(" ", text)
    return _normalize_whitespace(text)


def _normalize_whitespace(text: str) -> str:
    out: list[str] = []
    for run in re.split(r"(\s+)", text):
        if not run:
            continue
        if run.isspace():
            out.append("\n" if "\n" in run else " ")
        else:
            out.append(run)
    return "".join(out).strip()


def filter_articles(
    articles: Iterable[ArticleRecord],
    min_chars: int = 3000,
    extra_filter: Callable[[ArticleRecord], bool] | None = None,
) -> LanguageCorpus:
    """Keep articles with char_count >= min_chars and a body beyond the title.

    All articles must share one language. `extra_filter` is a hook for
    corpus-specific rejection rules (returns False to drop).
    """
    kept: list[ArticleRecord] = []
    language = None
    for art in articles:
        if language is None:
            language = art.language
        elif art.language != language:
            raise DataError(
                f"mixed-language input: expected {language!r}, got {art.language!r} "
                f"in article {art.title!r}"
            )
        if not art.body or art.body == art.title:
            continue
        if art.char_count < min_chars:
            continue
        if extra_filter is not None and not extra_filter(art):
            continue
        kept.append(art)
    return LanguageCorpus(language=language or "", articles=kept)


def language_eligible(corpus: LanguageCorpus, min_articles: int = 10000) -> bool:
    """True iff the corpus has strictly more than `min_articles` articles."""
    return corpus.article_count > min_articles


def build_corpus(
    pages: Iterable[tuple[str, str]],
    language: str,
    min_chars: int = 3000,
    extra_filter: Callable[[ArticleRecord], bool] | None = None,
) -> LanguageCorpus:
    """Strip and filter raw (title, markup) pages into a LanguageCorpus."""
    records = (
        ArticleRecord(language=language, title=title, body=strip_markup(markup))
        for title, markup in pages
        if not is_redirect(markup)
    )
    return filter_articles(records, min_chars=min_chars, extra_filter=extra_filter)


def write_corpus(corpus: LanguageCorpus, path) -> None:
    """One record per line: `title<TAB>plain_body`, UTF-8.

    Tabs and newlines inside fields flatten to spaces (the on-disk format is
    line-oriented).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for art in corpus.articles:
            title = _flatten(art.title)
            body = _flatten(art.body)
            fh.write(f"{title}\t{body}\n")


def read_corpus(path, language: str) -> LanguageCorpus:
    articles = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                title, body = line.split("\t", 1)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: expected title<TAB>body") from exc
            articles.append(ArticleRecord(language=language, title=title, body=body))
    return LanguageCorpus(language=language, articles=articles)


def _flatten(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()
