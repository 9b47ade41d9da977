"""Cache-first MediaWiki Action API client and XML dump reader."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any, Callable, Iterator

import requests

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://en.wiktionary.org/w/api.php"
DEFAULT_USER_AGENT = "gapcheck/0.1 (inflectional-gap validation; python-requests)"
CACHE_ENV = "GAPCHECK_CACHE"


class WiktionaryError(Exception):
    pass


class NetworkError(WiktionaryError):
    pass


class CacheMiss(NetworkError):
    """Offline mode and the response is not cached."""


class ResponseFormatError(WiktionaryError):
    def __init__(self, message: str, payload: Any = None):
        snippet = json.dumps(payload, ensure_ascii=False)[:300] if payload is not None else ""
        super().__init__(f"{message}: {snippet}" if snippet else message)


class PageMissing(WiktionaryError):
    pass


@dataclass
class CategoryListing:
    category: str
    members: list[str]
    fetched_at: str
    continuation: dict | None = None

    @property
    def empty(self) -> bool:
        return not self.members

    @property
    def complete(self) -> bool:
        return self.continuation is None


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gapcheck"


@dataclass
class MediaWikiClient:
    """Polite client for category members and page wikitext.

    Every response is stored verbatim under ``cache_dir`` keyed by endpoint,
    request kind, subject and continuation token, so later runs can be fully
    offline. ``session`` only needs a requests-style ``get``.
    """

    endpoint: str = DEFAULT_ENDPOINT
    cache_dir: Path | None = None
    min_interval: float = 1.0
    user_agent: str = DEFAULT_USER_AGENT
    max_retries: int = 4
    backoff_base: float = 1.0
    backoff_cap: float = 30.0
    timeout: float = 30.0
    offline: bool = False
    session: Any = None
    sleep: Callable[[float], None] = time.sleep
    clock: Callable[[], float] = time.monotonic
    requests_made: int = field(default=0, init=False)
    _last_request: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.cache_dir = Path(self.cache_dir) if self.cache_dir else default_cache_dir()
        if self.session is None:
            self.session = requests.Session()

    # -- cache ---------------------------------------------------------------

    def _cache_path(self, key: list) -> Path:
        digest = hashlib.sha256(json.dumps(key, sort_keys=True, ensure_ascii=False)
                                .encode("utf-8")).hexdigest()
        return self.cache_dir / digest[:2] / f"{digest}.json"

    def _cache_get(self, key: list) -> dict | None:
        path = self._cache_path(key)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _cache_put(self, key: list, response: dict) -> dict:
        entry = {"key": key,
                 "fetched_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                 "response": response}
        path = self._cache_path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, path)
        return entry

    # -- transport -----------------------------------------------------------

    def _throttle(self) -> None:
        if self._last_request is not None:
            wait = self.min_interval - (self.clock() - self._last_request)
            if wait > 0:
                self.sleep(wait)
        self._last_request = self.clock()

    def _get(self, params: dict) -> dict:
        params = {**params, "format": "json", "formatversion": "2"}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(min(self.backoff_cap, self.backoff_base * 2 ** (attempt - 1)))
            self._throttle()
            self.requests_made += 1
            try:
                resp = self.session.get(self.endpoint, params=params, timeout=self.timeout,
                                        headers={"User-Agent": self.user_agent})
            except requests.RequestException as exc:
                last_exc = exc
                log.warning("request failed (%s), attempt %d", exc, attempt + 1)
                continue
            status = getattr(resp, "status_code", 200)
            if status == 429 or status >= 500:
                last_exc = NetworkError(f"HTTP {status}")
                log.warning("HTTP %d from %s, attempt %d", status, self.endpoint, attempt + 1)
                continue
            if status >= 400:
                raise NetworkError(f"HTTP {status} from {self.endpoint}")
            try:
                data = resp.json()
            except ValueError:
                raise ResponseFormatError("response is not JSON",
                                          getattr(resp, "text", "")[:300]) from None
            if not isinstance(data, dict):
                raise ResponseFormatError("response is not a JSON object", data)
            if "error" in data:
                err = data["error"]
                raise WiktionaryError(f"API error {err.get('code')}: {err.get('info')}")
            return data
        raise NetworkError(f"giving up after {self.max_retries + 1} attempts: {last_exc}")

    def _cached_query(self, kind: str, subject: str, cont: dict | None, params: dict) -> dict:
        key = [self.endpoint, kind, subject, json.dumps(cont or {}, sort_keys=True)]
        entry = self._cache_get(key)
        if entry is None:
            if self.offline:
                raise CacheMiss(f"{kind} {subject!r} not cached")
            entry = self._cache_put(key, self._get({**params, **(cont or {})}))
        return entry

    # -- API -----------------------------------------------------------------

    def fetch_category(self, category: str, max_pages: int | None = None,
                       namespace: int | None = 0) -> CategoryListing:
        """All page titles in ``category``, following continuation tokens."""
        title = category if category.startswith("Category:") else f"Category:{category}"
        params = {"action": "query", "list": "categorymembers", "cmtitle": title,
                  "cmlimit": "500", "cmprop": "title"}
        if namespace is not None:
            params["cmnamespace"] = str(namespace)
        members: list[str] = []
        seen: set[str] = set()
        cont: dict | None = None
        fetched_at = ""
        pages = 0
        while True:
            entry = self._cached_query("categorymembers", title, cont, params)
            fetched_at = fetched_at or entry["fetched_at"]
            data = entry["response"]
            try:
                batch = data["query"]["categorymembers"]
                titles = [m["title"] for m in batch]
            except (KeyError, TypeError):
                raise ResponseFormatError("malformed categorymembers response", data) from None
            for t in titles:
                if t not in seen:
                    seen.add(t)
                    members.append(t)
            pages += 1
            cont = data.get("continue")
            if not cont or (max_pages is not None and pages >= max_pages):
                break
        return CategoryListing(title, members, fetched_at, cont or None)

    def fetch_wikitext(self, title: str) -> str:
        params = {"action": "query", "prop": "revisions", "rvprop": "content",
                  "rvslots": "main", "titles": title}
        data = self._cached_query("wikitext", title, None, params)["response"]
        try:
            page = data["query"]["pages"][0]
        except (KeyError, IndexError, TypeError):
            raise ResponseFormatError("malformed revisions response", data) from None
        if page.get("missing") or page.get("invalid"):
            raise PageMissing(title)
        try:
            return page["revisions"][0]["slots"]["main"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ResponseFormatError("revision without content", data) from None


def iter_dump_pages(stream: IO[bytes], namespace: int | None = 0) -> Iterator[tuple[str, str]]:
    """Yield ``(title, wikitext)`` from a MediaWiki XML export stream."""
    title = ns = text = None
    for event, elem in ET.iterparse(stream, events=("end",)):
        tag = elem.tag.rsplit("}", 1)[-1]
        if tag == "title":
            title = elem.text or ""
        elif tag == "ns":
            ns = int(elem.text or 0)
        elif tag == "text":
            text = elem.text or ""
        elif tag == "page":
            if title is not None and text is not None and (namespace is None or ns == namespace):
                yield title, text
            title = ns = text = None
            elem.clear()
