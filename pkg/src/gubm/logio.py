"""Session logs, annotation files and train/test split manifests.

Log format: UTF-8 text, one JSON object per line.  The first line is the
header ``{"format":"gubm-log","version":1}``; every further line is a
session::

    {"events":[{"col":0,"kind":"hover","row":1,"t_ms":950,"dwell_ms":400}],
     "images":["a","b",...],"query_id":"q1","row_counts":[4,5],"session_id":"s1"}

``images`` lists image ids row by row.  ``dwell_ms`` is optional.  Writers
emit sorted keys and no insignificant whitespace, so equal sessions always
serialize to equal bytes.
"""

from __future__ import annotations

import json
import logging
import zlib
from collections import Counter, OrderedDict
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .grid import EventKind, GridLayout, GridPosition, InteractionEvent, Session, truncate_session
from .metrics import AnnotationRecord

logger = logging.getLogger(__name__)

LOG_HEADER = {"format": "gubm-log", "version": 1}
SPLIT_HEADER = "# gubm-split 1"


class LogFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def session_to_dict(s: Session) -> dict:
    events = []
    for ev in s.events:
        e = {"t_ms": ev.timestamp, "kind": ev.kind.value, "row": ev.position.row, "col": ev.position.col}
        if ev.dwell_ms is not None:
            e["dwell_ms"] = ev.dwell_ms
        events.append(e)
    return {
        "session_id": s.session_id,
        "query_id": s.query_id,
        "row_counts": list(s.layout.row_counts),
        "images": [u for row in s.images for u in row],
        "events": events,
    }


def session_from_dict(d: dict) -> Session:
    layout = GridLayout(tuple(d["row_counts"]))
    flat = list(d["images"])
    if len(flat) != layout.total:
        raise ValueError(f"{len(flat)} image ids for a layout of {layout.total} cells")
    images = []
    k = 0
    for n in layout.row_counts:
        images.append(tuple(str(u) for u in flat[k:k + n]))
        k += n
    events = []
    for e in d.get("events", []):
        try:
            kind = EventKind(e["kind"])
        except ValueError:
            raise ValueError(f"unknown event kind {e['kind']!r}") from None
        dwell = e.get("dwell_ms")
        events.append(InteractionEvent(int(e["t_ms"]), kind, GridPosition(int(e["row"]), int(e["col"])),
                                       None if dwell is None else int(dwell)))
    # stable sort keeps the logged order of equal timestamps
    events.sort(key=lambda ev: ev.timestamp)
    return Session(str(d["session_id"]), str(d["query_id"]), layout, tuple(images), tuple(events))


def iter_sessions(path) -> Iterator[Session]:
    """Stream sessions from a log file."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        try:
            head = json.loads(header)
        except json.JSONDecodeError:
            raise LogFormatError("missing log header", 1) from None
        if not isinstance(head, dict) or head.get("format") != LOG_HEADER["format"]:
            raise LogFormatError("missing log header", 1)
        if head.get("version") != LOG_HEADER["version"]:
            raise LogFormatError(f"unsupported log version {head.get('version')!r}", 1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                yield session_from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise LogFormatError(msg, lineno) from None


def write_sessions(sessions: Iterable[Session], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(LOG_HEADER) + "\n")
        for s in sessions:
            fh.write(_dumps(session_to_dict(s)) + "\n")
            n += 1
    return n


@dataclass
class LogFilters:
    min_sessions_per_query: int = 10
    max_sessions_per_query: int | None = 1000
    drop_hovers: bool = False
    min_hover_dwell_ms: int = 0
    truncation: int | None = 100


def filter_events(s: Session, filters: LogFilters) -> Session:
    if not filters.drop_hovers and filters.min_hover_dwell_ms <= 0:
        return s
    kept = []
    for ev in s.events:
        if ev.kind is EventKind.HOVER:
            if filters.drop_hovers:
                continue
            if ev.dwell_ms is not None and ev.dwell_ms < filters.min_hover_dwell_ms:
                continue
        kept.append(ev)
    return s.with_events(kept)


def apply_filters(sessions: Iterable[Session], filters: LogFilters | None = None) -> list[Session]:
    """Query thresholds, per-query cap, event filters and truncation; keeps input order."""
    filters = filters or LogFilters()
    sessions = list(sessions)
    per_query: dict[str, int] = Counter(s.query_id for s in sessions)
    seen: Counter = Counter()
    out = []
    dropped_queries = {q for q, n in per_query.items() if n < filters.min_sessions_per_query}
    dropped_events = 0
    for s in sessions:
        if s.query_id in dropped_queries:
            continue
        seen[s.query_id] += 1
        if filters.max_sessions_per_query is not None and seen[s.query_id] > filters.max_sessions_per_query:
            continue
        s = filter_events(s, filters)
        s, d = truncate_session(s, filters.truncation)
        dropped_events += d
        out.append(s)
    if dropped_queries:
        logger.info("dropped %d queries with fewer than %d sessions", len(dropped_queries),
                    filters.min_sessions_per_query)
    if dropped_events:
        logger.info("dropped %d events beyond the first %s positions", dropped_events, filters.truncation)
    return out


def load_sessions(path, filters: LogFilters | None = None) -> list[Session]:
    sessions = list(iter_sessions(path))
    ids = Counter(s.session_id for s in sessions)
    dup = [k for k, n in ids.items() if n > 1]
    if dup:
        raise LogFormatError(f"duplicate session ids, e.g. {dup[0]!r}")
    return apply_filters(sessions, filters)


# -- annotations ------------------------------------------------------------


def _resolve_votes(values: list[int]) -> int:
    counts = Counter(values)
    top = max(counts.values())
    return max(v for v, n in counts.items() if n == top)


def resolve_duplicates(records: Iterable[AnnotationRecord]) -> list[AnnotationRecord]:
    """One record per (query, image): majority topical label, ties to the larger label,
    then the same rule for quality among the records carrying that topical label."""
    groups: OrderedDict[tuple[str, str], list[AnnotationRecord]] = OrderedDict()
    for r in records:
        groups.setdefault((r.query_id, r.image_id), []).append(r)
    out = []
    for (q, u), recs in groups.items():
        topical = _resolve_votes([r.topical for r in recs])
        quality = _resolve_votes([r.quality for r in recs if r.topical == topical])
        out.append(AnnotationRecord(q, u, topical, quality))
    return out


def load_annotations(path) -> list[AnnotationRecord]:
    """Read ``query_id image_id topical quality`` rows (tab or space separated)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise LogFormatError(f"expected 4 fields, got {len(parts)}", lineno)
            q, u, t, g = parts
            try:
                records.append(AnnotationRecord(q, u, int(t), int(g)))
            except ValueError as exc:
                raise LogFormatError(str(exc), lineno) from None
    return resolve_duplicates(records)


# -- train/test split -------------------------------------------------------


def split_sessions(sessions: Iterable[Session], ratio: tuple[int, int] = (7, 3), seed: int = 0) -> dict[str, str]:
    """Assign every session to ``train`` or ``test`` within its query.

    Each query is shuffled with its own generator derived from ``seed`` and the
    query id, so a query's split does not depend on the rest of the log.
    """
    a, b = ratio
    if a < 0 or b < 0 or a + b == 0:
        raise ValueError(f"bad split ratio {ratio}")
    by_query: OrderedDict[str, list[str]] = OrderedDict()
    for s in sessions:
        by_query.setdefault(s.query_id, []).append(s.session_id)
    fold = {}
    for q, ids in by_query.items():
        rng = np.random.default_rng([seed, zlib.crc32(q.encode("utf-8"))])
        order = rng.permutation(len(ids))
        n_train = int(round(len(ids) * a / (a + b)))
        train = set(order[:n_train].tolist())
        for k, sid in enumerate(ids):
            fold[sid] = "train" if k in train else "test"
    return fold


def parse_ratio(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"ratio must look like 7:3, got {text!r}") from None
    return a, b


def write_manifest(fold: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SPLIT_HEADER + "\n")
        for sid, f in fold.items():
            fh.write(f"{sid}\t{f}\n")


def read_manifest(path) -> dict[str, str]:
    fold = {}
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != SPLIT_HEADER:
            raise LogFormatError("missing split manifest header", 1)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("train", "test"):
                raise LogFormatError(f"bad manifest line {line!r}", lineno)
            fold[parts[0]] = parts[1]
    return fold


def select_fold(sessions: Iterable[Session], fold: dict[str, str], name: str) -> list[Session]:
    return [s for s in sessions if fold.get(s.session_id) == name]
