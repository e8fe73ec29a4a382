"""Core timeline data types shared by every pipeline stage.

All values are immutable after construction and safe to share across
parallel workers. Times are real-valued seconds; rendering quantizes to
frame/sample boundaries at the very last step.
"""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional


class ClipKind(str, Enum):
    STANDARD = "standard"
    QUOTE = "quote"
    VOICE = "voice"
    BLACK = "black"


class AudioPolicy(str, Enum):
    FULL = "full"
    VOCALS_ONLY = "vocals_only"
    MUTED = "muted"
    VOICE_ONLY = "voice_only"


@dataclass(frozen=True)
class TimeSpan:
    """Half-open interval [start_s, end_s) on a source or trailer timeline."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValueError(f"non-finite time span ({self.start_s}, {self.end_s})")
        if self.start_s < 0:
            raise ValueError(f"negative start time {self.start_s}")
        if self.end_s <= self.start_s:
            raise ValueError(f"empty or inverted span ({self.start_s}, {self.end_s})")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def overlaps(self, other: "TimeSpan") -> bool:
        return self.start_s < other.end_s and other.start_s < self.end_s

    def shifted(self, offset_s: float) -> "TimeSpan":
        return TimeSpan(self.start_s + offset_s, self.end_s + offset_s)


@dataclass(frozen=True)
class Shot:
    """A maximal run of frames between two cuts, in source-video time."""

    span: TimeSpan
    first_frame_idx: int
    last_frame_idx: int

    def __post_init__(self) -> None:
        if self.first_frame_idx > self.last_frame_idx:
            raise ValueError("first_frame_idx after last_frame_idx")


_POLICY_FOR_KIND = {
    ClipKind.QUOTE: AudioPolicy.VOCALS_ONLY,
    ClipKind.STANDARD: AudioPolicy.MUTED,
}


@dataclass(frozen=True)
class Clip:
    """One timeline unit. Black clips are first-class so duration invariants
    hold before rendering (they carry no source and render as silence)."""

    kind: ClipKind
    source_span: Optional[TimeSpan] = None
    trailer_span: Optional[TimeSpan] = None
    audio_policy: AudioPolicy = AudioPolicy.FULL
    label: str = ""

    def __post_init__(self) -> None:
        required = _POLICY_FOR_KIND.get(self.kind)
        if required is not None and self.audio_policy is not required:
            raise ValueError(
                f"{self.kind.value} clip requires audio_policy={required.value}"
            )
        if self.kind is ClipKind.BLACK and self.source_span is not None:
            raise ValueError("black clip must not carry a source span")

    @property
    def duration_s(self) -> float:
        span = self.trailer_span or self.source_span
        if span is None:
            raise ValueError("clip has neither trailer nor source span")
        return span.duration_s

    def placed_at(self, start_s: float) -> "Clip":
        """Return a copy with the trailer span assigned at assembly time."""
        return replace(self, trailer_span=TimeSpan(start_s, start_s + self.duration_s))


def standard_clip(source_span: TimeSpan) -> Clip:
    return Clip(ClipKind.STANDARD, source_span=source_span, audio_policy=AudioPolicy.MUTED)


def quote_clip(source_span: TimeSpan, text: str) -> Clip:
    return Clip(
        ClipKind.QUOTE,
        source_span=source_span,
        audio_policy=AudioPolicy.VOCALS_ONLY,
        label=text,
    )


def black_clip(duration_s: float) -> Clip:
    return Clip(
        ClipKind.BLACK,
        trailer_span=TimeSpan(0.0, duration_s),
        audio_policy=AudioPolicy.MUTED,
    )


@dataclass(frozen=True)
class TrailerTimeline:
    """Ordered clip sequence with contiguous trailer spans starting at 0."""

    clips: tuple[Clip, ...]
    total_duration_s: float


def validate_timeline(timeline: TrailerTimeline, sample_rate: int = 44100) -> Optional[str]:
    """Return the first violated invariant as a message, or None when valid.

    Contiguity is checked to within one audio sample at ``sample_rate``.
    """
    eps = 1.0 / sample_rate
    if not timeline.clips:
        return "empty timeline"
    cursor = 0.0
    for i, clip in enumerate(timeline.clips):
        if clip.trailer_span is None:
            return f"clip {i} missing trailer span"
        if clip.trailer_span.duration_s <= 0:
            return f"non-positive duration at index {i}"
        if abs(clip.trailer_span.start_s - cursor) > eps:
            if i == 0:
                return "timeline does not start at 0"
            return f"gap/overlap at index {i}"
        cursor = clip.trailer_span.end_s
    if abs(cursor - timeline.total_duration_s) > eps:
        return "total_duration_s mismatch"
    return None


def timeline_from_clips(clips: list[Clip]) -> TrailerTimeline:
    """Assign contiguous trailer spans starting at 0 and wrap into a timeline."""
    placed = []
    cursor = 0.0
    for clip in clips:
        placed.append(clip.placed_at(cursor))
        cursor += clip.duration_s
    return TrailerTimeline(clips=tuple(placed), total_duration_s=cursor)


@dataclass(frozen=True)
class LogEntry:
    kind: ClipKind
    start_s: float
    end_s: float
    label: str


@dataclass(frozen=True)
class TimestampLog:
    """Record of Quote and Voice clip spans in trailer time.

    Written next to the rendered trailer and reused for voice placement and
    for tests. Entries stay sorted ascending by start time.
    """

    entries: tuple[LogEntry, ...] = field(default_factory=tuple)

    def quote_spans(self) -> list[TimeSpan]:
        return [TimeSpan(e.start_s, e.end_s) for e in self.entries if e.kind is ClipKind.QUOTE]

    def merged_with(self, extra: list[LogEntry]) -> "TimestampLog":
        merged = sorted(list(self.entries) + list(extra), key=lambda e: e.start_s)
        return TimestampLog(entries=tuple(merged))

    def to_json(self) -> str:
        rows = [
            {"kind": e.kind.value, "start_s": e.start_s, "end_s": e.end_s, "label": e.label}
            for e in self.entries
        ]
        return json.dumps(rows, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TimestampLog":
        rows = json.loads(text)
        entries = tuple(
            LogEntry(ClipKind(r["kind"]), float(r["start_s"]), float(r["end_s"]), r["label"])
            for r in rows
        )
        return cls(entries=entries)

    def write(self, path: Path) -> None:
        path.write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def read(cls, path: Path) -> "TimestampLog":
        return cls.from_json(path.read_text(encoding="utf-8"))


def log_from_timeline(timeline: TrailerTimeline) -> TimestampLog:
    """Project Quote (and Voice, if present) clips into a timestamp log."""
    entries = [
        LogEntry(clip.kind, clip.trailer_span.start_s, clip.trailer_span.end_s, clip.label)
        for clip in timeline.clips
        if clip.kind in (ClipKind.QUOTE, ClipKind.VOICE) and clip.trailer_span is not None
    ]
    entries.sort(key=lambda e: e.start_s)
    return TimestampLog(entries=tuple(entries))


DEFAULT_GENRE = "Drama"


@dataclass(frozen=True)
class MovieMetadata:
    """The fields scraped per movie: synopsis, raw quotes, genres, credits."""

    imdb_id: str
    title: str
    synopsis: str
    quotes_raw: tuple[str, ...]
    genres: tuple[str, ...]
    director: str
    release_date: datetime.date

    def __post_init__(self) -> None:
        if not self.synopsis.strip():
            raise ValueError("synopsis must be non-empty")
        if not self.genres:
            raise ValueError("genres must be non-empty (apply DEFAULT_GENRE before construction)")

    @property
    def release_month_name(self) -> str:
        return self.release_date.strftime("%B")

    def to_dict(self) -> dict:
        return {
            "imdb_id": self.imdb_id,
            "title": self.title,
            "synopsis": self.synopsis,
            "quotes": list(self.quotes_raw),
            "genres": list(self.genres),
            "director": self.director,
            "release_date": self.release_date.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MovieMetadata":
        return cls(
            imdb_id=data["imdb_id"],
            title=data["title"],
            synopsis=data["synopsis"],
            quotes_raw=tuple(data.get("quotes", [])),
            genres=tuple(data.get("genres") or (DEFAULT_GENRE,)),
            director=data.get("director", ""),
            release_date=datetime.date.fromisoformat(data["release_date"]),
        )
