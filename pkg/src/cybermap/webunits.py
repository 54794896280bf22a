"""URL normalization and decomposition into online domain, subdomains and directories.

A university web space is addressed by URLs whose host is split into a
registrable *online domain* (second-level identifier plus top-level
suffix) and a chain of subdomain labels, followed by directory segments.
Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

__all__ = [
    "MalformedUrl",
    "UnresolvableSuffix",
    "NormalizedUrl",
    "OnlineDomain",
    "UrlLocus",
    "SuffixRules",
    "normalize",
    "as_url",
    "parse_locus",
    "is_within",
    "specificity",
]

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*://")
_LABEL_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_\-]*[a-z0-9_])?$")


class MalformedUrl(ValueError):
    """No parseable host could be recovered from the input."""


class UnresolvableSuffix(ValueError):
    """The host is a bare public suffix (or has no usable top-level label)."""


@dataclass(frozen=True, order=True)
class NormalizedUrl:
    """Canonical scheme-less URL: lowercase host plus case-preserved path segments."""

    host: str
    path: tuple[str, ...] = ()
    original: str = field(default="", compare=False, repr=False)

    def render(self) -> str:
        if not self.path:
            return self.host
        return self.host + "/" + "/".join(self.path)

    def __str__(self) -> str:
        return self.render()

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.host.split("."))


def normalize(raw: str) -> NormalizedUrl:
    """Canonicalize a raw URL string.

    Scheme, credentials, port, query and fragment are dropped, a leading
    ``www.`` label is removed, the host is lowercased and the path is split
    into non-empty segments. Path text is kept verbatim (no percent decoding,
    no case folding).

    >>> normalize("http://www.ucm.es/centros/webs/d168/").render()
    'ucm.es/centros/webs/d168'
    """
    if raw is None or not raw.strip():
        raise MalformedUrl("empty URL")
    text = raw.strip()
    text = _SCHEME_RE.sub("", text, count=1)
    if text.startswith("//"):
        text = text[2:]
    # fragment first, then query: "a/b?x#y" and "a/b#y?x" both reduce to "a/b"
    text = text.split("#", 1)[0].split("?", 1)[0]

    netloc, _, path = text.partition("/")
    netloc = netloc.rpartition("@")[2]
    if netloc.startswith("["):
        raise MalformedUrl(f"IP literal hosts are not supported: {raw!r}")
    host = netloc.split(":", 1)[0].strip().lower().rstrip(".")
    if not host:
        raise MalformedUrl(f"no host in {raw!r}")
    labels = host.split(".")
    if any(not _LABEL_RE.match(label) for label in labels):
        raise MalformedUrl(f"invalid host {host!r} in {raw!r}")
    if labels[0] == "www" and len(labels) > 2:
        labels = labels[1:]

    segments = tuple(seg for seg in path.split("/") if seg)
    return NormalizedUrl(".".join(labels), segments, raw)


def as_url(value: Union[str, NormalizedUrl]) -> NormalizedUrl:
    """Accept either a raw string or an already normalized URL."""
    if isinstance(value, NormalizedUrl):
        return value
    return normalize(value)


@dataclass(frozen=True)
class OnlineDomain:
    """Registrable domain: an identifying label under a (possibly multi-label) suffix."""

    tld: str
    second_level: str

    def __post_init__(self):
        if not self.tld or not self.second_level:
            raise ValueError("online domain labels must be non-empty")
        if self.tld != self.tld.lower() or self.second_level != self.second_level.lower():
            raise ValueError("online domain labels must be lowercase")

    def render(self) -> str:
        return f"{self.second_level}.{self.tld}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class UrlLocus:
    registrable: OnlineDomain
    subdomain_labels: tuple[str, ...] = ()  # nearest-to-registrable first
    path_segments: tuple[str, ...] = ()

    @property
    def subdomain_level(self) -> int:
        return 2 + len(self.subdomain_labels)

    @property
    def host(self) -> str:
        return ".".join(tuple(reversed(self.subdomain_labels)) + (self.registrable.render(),))

    def render(self) -> str:
        return NormalizedUrl(self.host, self.path_segments).render()

    def to_url(self) -> NormalizedUrl:
        return NormalizedUrl(self.host, self.path_segments)


class SuffixRules:
    """Set of multi-label public suffixes; any single label is an acceptable TLD."""

    def __init__(self, suffixes: Iterable[str] = ()):
        cleaned = set()
        for s in suffixes:
            s = s.strip().lower().strip(".")
            if s:
                cleaned.add(s)
        self.suffixes = frozenset(cleaned)
        self._max_labels = max((s.count(".") + 1 for s in self.suffixes), default=1)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "SuffixRules":
        return cls(line.split("#", 1)[0] for line in lines)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SuffixRules":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def default(cls) -> "SuffixRules":
        return _default_rules()

    def extended(self, suffixes: Iterable[str]) -> "SuffixRules":
        return SuffixRules(self.suffixes | set(suffixes))

    def suffix_length(self, labels: tuple[str, ...]) -> int:
        """Number of trailing labels forming the public suffix of ``labels``."""
        for n in range(min(self._max_labels, len(labels)), 1, -1):
            if ".".join(labels[-n:]) in self.suffixes:
                return n
        return 1

    def __contains__(self, suffix: str) -> bool:
        return suffix in self.suffixes

    def __len__(self) -> int:
        return len(self.suffixes)


@lru_cache(maxsize=1)
def _default_rules() -> SuffixRules:
    text = resources.files("cybermap.data").joinpath("suffixes.txt").read_text(encoding="utf-8")
    return SuffixRules.from_lines(text.splitlines())


def parse_locus(url: Union[str, NormalizedUrl], suffix_rule: SuffixRules | None = None) -> UrlLocus:
    """Split a URL into registrable domain, subdomain chain and directory path."""
    url = as_url(url)
    rules = suffix_rule if suffix_rule is not None else _default_rules()
    labels = url.labels
    if labels[-1].isdigit():
        raise UnresolvableSuffix(f"numeric top-level label in {url.host!r}")
    n = rules.suffix_length(labels)
    if len(labels) <= n:
        raise UnresolvableSuffix(f"{url.host!r} is a bare public suffix")
    tld = ".".join(labels[-n:])
    second = labels[-n - 1]
    subs = tuple(reversed(labels[: -n - 1]))
    return UrlLocus(OnlineDomain(tld, second), subs, url.path)


def is_within(url: Union[str, NormalizedUrl], scope: Union[str, NormalizedUrl]) -> bool:
    """True iff ``url`` lies at or under ``scope`` (host suffix and path prefix)."""
    url, scope = as_url(url), as_url(scope)
    if url.host != scope.host and not url.host.endswith("." + scope.host):
        return False
    n = len(scope.path)
    return url.path[:n] == scope.path


def specificity(url: NormalizedUrl) -> tuple[int, int]:
    """Sort key: deeper host first, then deeper path."""
    return (len(url.labels), len(url.path))
