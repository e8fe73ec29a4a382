"""Stages 2c-4: clip ordering and interleaving, voice-over placement,
soundtrack integration, and the final render."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .audio import (
    DuckParams,
    Waveform,
    concat,
    duck,
    fade,
    match_loudness,
    mix,
    rms_dbfs,
    silence,
    trim_or_pad,
)
from .config import AudioConfig
from .errors import StageError
from .media.toolkit import MediaToolkit
from .model import (
    Clip,
    ClipKind,
    LogEntry,
    MovieMetadata,
    TimeSpan,
    TimestampLog,
    TrailerTimeline,
    black_clip,
    log_from_timeline,
    timeline_from_clips,
    validate_timeline,
)
from .providers.base import ProviderClient
from .providers.prompts import (
    CORRECTIVE_SUFFIX,
    music_description_prompt,
    strip_listing,
    voiceover_prompt,
)

log = logging.getLogger(__name__)

_RESOURCE_DIR = Path(__file__).parent / "resources"

MUSIC_FIELDS = ("Instruments", "Key", "Tempo", "Dynamics", "Texture", "Mood", "Atmosphere")


# --- clip sequencing ---------------------------------------------------------

def interleave(n_sc: int, n_qc: int) -> list[ClipKind]:
    """Disperse Quote Clips among Standard Clips: the j-th QC goes after
    ceil(j * n_sc / (n_qc + 1)) SCs, so the sequence starts and ends with an
    SC and no two QCs are adjacent. Excess QCs (n_qc >= n_sc) are dropped,
    lowest-ranked first."""
    if n_sc < 0 or n_qc < 0:
        raise ValueError("clip counts must be non-negative")
    if n_sc == 0:
        if n_qc > 0:
            log.warning("no standard clips; dropping all %d quote clips", n_qc)
        return []
    kept = min(n_qc, n_sc - 1)
    if kept < n_qc:
        log.warning("dropping %d excess quote clips", n_qc - kept)
    qc_after = {-(-j * n_sc // (kept + 1)) for j in range(1, kept + 1)}
    sequence: list[ClipKind] = []
    for i in range(1, n_sc + 1):
        sequence.append(ClipKind.STANDARD)
        if i in qc_after:
            sequence.append(ClipKind.QUOTE)
    return sequence


@dataclass(frozen=True)
class ClipGroup:
    """A logical Standard or Quote clip: the main clip plus any black
    substitutes, kept together so interleaving works at the logical level."""

    clips: tuple[Clip, ...]
    subplot_idx: int = -1           # standard groups: narrative tie-breaker
    quote_text: str = ""            # quote groups: the spoken line

    @property
    def duration_s(self) -> float:
        return sum(c.duration_s for c in self.clips)

    @property
    def source_start_s(self) -> float:
        for clip in self.clips:
            if clip.source_span is not None:
                return clip.source_span.start_s
        return math.inf


def order_standard_clips(groups: Sequence[ClipGroup]) -> list[ClipGroup]:
    """Sort Standard clips by original narrative position (source start),
    ties by sub-plot index."""
    return sorted(groups, key=lambda g: (g.source_start_s, g.subplot_idx))


def assemble_visual_timeline(
    sc_groups: Sequence[ClipGroup],
    qc_groups: Sequence[ClipGroup],
    fallback_black_s: float = 10.0,
) -> TrailerTimeline:
    """Interleave ordered Standard and ranked Quote groups into a contiguous
    timeline starting at 0. With nothing to show, fall back to a single black
    clip so a degenerate run still renders a valid (if dull) trailer."""
    ordered_sc = order_standard_clips(sc_groups)
    sequence = interleave(len(ordered_sc), len(qc_groups))
    kept_qc = sum(1 for kind in sequence if kind is ClipKind.QUOTE)
    qc_iter = iter(qc_groups[:kept_qc])
    sc_iter = iter(ordered_sc)
    flat: list[Clip] = []
    for kind in sequence:
        group = next(sc_iter) if kind is ClipKind.STANDARD else next(qc_iter)
        flat.extend(group.clips)
    if not flat:
        log.warning("empty timeline after assembly; emitting fallback black trailer")
        flat = [black_clip(fallback_black_s)]
    timeline = timeline_from_clips(flat)
    problem = validate_timeline(timeline)
    if problem:
        raise StageError("assembly", f"assembled timeline invalid: {problem}")
    return timeline


# --- voice-over --------------------------------------------------------------

@dataclass(frozen=True)
class GenreVoiceMap:
    voices: dict[str, str]
    priority: tuple[str, ...]
    default: str


def load_voice_map(path: Optional[Path] = None) -> GenreVoiceMap:
    path = path or (_RESOURCE_DIR / "genre_voices.yaml")
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return GenreVoiceMap(
        voices=dict(data.get("voices", {})),
        priority=tuple(data.get("priority", [])),
        default=data["default"],
    )


def pick_voice(genres: Sequence[str], voice_map: GenreVoiceMap) -> str:
    genre_set = {g.lower() for g in genres}
    for genre in voice_map.priority:
        if genre.lower() in genre_set:
            return voice_map.voices.get(genre, voice_map.default)
    return voice_map.default


def plan_voice_count(trailer_duration_s: float, every_s: float = 15.0, minimum: int = 3) -> int:
    """Phrase quantity matches the trailer's length: one per ``every_s``
    seconds, floored, but at least ``minimum``."""
    return max(minimum, int(trailer_duration_s // every_s))


def generate_voiceover_phrases(
    provider: ProviderClient, metadata: MovieMetadata, n_phrases: int
) -> list[str]:
    """Exactly ``n_phrases`` phrases, validated to mention the director in
    exactly one phrase and the release month in exactly one. One corrective
    reprompt each for a bad count (second failure fatal) and for a failed
    mention check (second failure accepted with a warning)."""
    if n_phrases < 1:
        raise ValueError("n_phrases must be >= 1")
    base = voiceover_prompt(
        metadata.synopsis, metadata.director, metadata.release_month_name, n_phrases
    )
    prompt = base
    phrases: list[str] = []
    for attempt in range(3):
        completion = provider.llm_complete(prompt, "voiceover-phrases")
        phrases = strip_listing(completion)
        if len(phrases) != n_phrases:
            if attempt == 2:
                raise StageError(
                    "voiceover", f"phrase generation returned {len(phrases)} != {n_phrases} twice"
                )
            log.warning("voice-over parse returned %d phrases, expected %d", len(phrases), n_phrases)
            prompt = base + CORRECTIVE_SUFFIX
            continue
        director_hits = sum(metadata.director.lower() in p.lower() for p in phrases)
        month_hits = sum(metadata.release_month_name.lower() in p.lower() for p in phrases)
        if director_hits == 1 and month_hits == 1:
            return phrases
        if attempt >= 1:
            log.warning(
                "accepting voice-over with director/month mentions %d/%d",
                director_hits, month_hits,
            )
            return phrases
        log.warning(
            "voice-over mention check failed (director %d, month %d); reprompting",
            director_hits, month_hits,
        )
        prompt = base + CORRECTIVE_SUFFIX
    return phrases


@dataclass(frozen=True)
class VoicePlacement:
    phrase: str
    waveform: Waveform
    span: TimeSpan  # trailer time


@dataclass(frozen=True)
class VoicePlan:
    voice_id: str
    placements: tuple[VoicePlacement, ...]
    dropped: tuple[str, ...] = ()

    @property
    def phrases(self) -> list[str]:
        return [p.phrase for p in self.placements]


def _merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def place_voice_clips(
    voice_clips: Sequence[tuple[str, Waveform]],
    quote_log: TimestampLog,
    trailer_duration_s: float,
    pad_s: float = 0.5,
    voice_id: str = "",
) -> VoicePlan:
    """Greedy earliest-fit placement keeping >= pad_s clearance from every
    Quote span and previously placed voice clip. Clips that fit nowhere are
    dropped with a warning."""
    blocked = [
        (span.start_s - pad_s, span.end_s + pad_s) for span in quote_log.quote_spans()
    ]
    placements: list[VoicePlacement] = []
    dropped: list[str] = []
    for phrase, waveform in voice_clips:
        length = waveform.duration_s
        start = _earliest_fit(blocked, length, trailer_duration_s)
        if start is None:
            log.warning("voice clip %r (%.2fs) does not fit; dropped", phrase, length)
            dropped.append(phrase)
            continue
        placements.append(VoicePlacement(phrase, waveform, TimeSpan(start, start + length)))
        blocked.append((start - pad_s, start + length + pad_s))
    return VoicePlan(voice_id=voice_id, placements=tuple(placements), dropped=tuple(dropped))


def _earliest_fit(
    blocked: list[tuple[float, float]], length: float, duration_s: float
) -> Optional[float]:
    cursor = 0.0
    for start, end in _merge_intervals(blocked):
        if start - cursor >= length and cursor + length <= duration_s:
            return cursor
        cursor = max(cursor, end)
    if cursor + length <= duration_s:
        return cursor
    return None


def adjust_quote_volume(
    quote_waveforms: Sequence[Waveform], voice_waveforms: Sequence[Waveform]
) -> list[Waveform]:
    """Match every quote stem to the mean RMS level of the voice clips; a
    run with no voice clips leaves the quotes untouched."""
    if not voice_waveforms:
        return list(quote_waveforms)
    target = float(np.mean([rms_dbfs(v) for v in voice_waveforms]))
    return [match_loudness(w, target) for w in quote_waveforms]


# --- soundtrack ---------------------------------------------------------------

def validate_music_description(description: str) -> list[str]:
    """Return the labelled fields missing from the description."""
    return [
        label
        for label in MUSIC_FIELDS
        if not any(line.strip().startswith(label + ":") for line in description.splitlines())
    ]


def build_music(
    provider: ProviderClient,
    metadata: MovieMetadata,
    trailer_duration_s: float,
    cfg: AudioConfig = AudioConfig(),
) -> tuple[Waveform, str]:
    """LLM music description -> synthesized bed covering the trailer.

    When the provider's maximum segment length is shorter than the trailer,
    segments are tiled with a crossfade at each seam and trimmed to the
    exact trailer duration.
    """
    if trailer_duration_s <= 0:
        raise ValueError("trailer duration must be positive")
    base = music_description_prompt(metadata.title, list(metadata.genres), metadata.synopsis)
    description = provider.llm_complete(base, "music-description")
    missing = validate_music_description(description)
    if missing:
        log.warning("music description missing fields %s; reprompting", missing)
        description = provider.llm_complete(base + CORRECTIVE_SUFFIX, "music-description")
        missing = validate_music_description(description)
        if missing:
            log.warning("music description still missing %s; proceeding with raw text", missing)

    if trailer_duration_s <= cfg.music_max_s:
        return provider.generate_music(description, trailer_duration_s), description
    n_segments = math.ceil(trailer_duration_s / cfg.music_max_s)
    segment = provider.generate_music(description, cfg.music_max_s)
    half = cfg.music_crossfade_s / 2.0
    parts = [
        fade(segment, 0.0 if i == 0 else half, 0.0 if i == n_segments - 1 else half)
        for i in range(n_segments)
    ]
    bed = concat(parts)
    return trim_or_pad(bed, int(round(trailer_duration_s * bed.sample_rate))), description


# --- final render ---------------------------------------------------------------

@dataclass(frozen=True)
class RenderResult:
    trailer_path: Path
    log_path: Path
    duration_s: float
    timestamp_log: TimestampLog


def _clip_frames(
    clip: Clip,
    toolkit: MediaToolkit,
    source_path: Path,
    fps: float,
    size: tuple[int, int],
    n_frames: int,
):
    if clip.kind is ClipKind.BLACK or clip.source_span is None:
        black = np.zeros((size[1], size[0], 3), dtype=np.uint8)
        for _ in range(n_frames):
            yield black
        return
    frames = [frame for _, frame in toolkit.iter_frames(source_path, clip.source_span)]
    if not frames:
        frames = [toolkit.extract_frame(source_path, clip.source_span.start_s)]
    for i in range(n_frames):
        yield frames[min(i, len(frames) - 1)]


def render_final(
    timeline: TrailerTimeline,
    quote_tracks: Sequence[tuple[TimeSpan, Waveform]],
    voice_plan: Optional[VoicePlan],
    music: Optional[Waveform],
    source_path: Path,
    toolkit: MediaToolkit,
    cfg: AudioConfig,
    out_base: Path,
    stereo: bool = True,
) -> RenderResult:
    """Mix the audio buses, assemble the video track, and write the trailer
    container plus its timestamp log."""
    problem = validate_timeline(timeline, cfg.sample_rate)
    if problem:
        raise StageError("soundtrack", f"cannot render invalid timeline: {problem}")
    info = toolkit.probe(source_path)
    fps = info.fps
    total_frames = int(round(timeline.total_duration_s * fps))
    total_samples = int(round(total_frames / fps * cfg.sample_rate))
    duration_s = total_frames / fps

    # Foreground bus: quote stems at their trailer spans + placed voice clips.
    tracks: list[Waveform] = []
    offsets: list[float] = []
    for span, waveform in quote_tracks:
        tracks.append(waveform)
        offsets.append(span.start_s)
    if voice_plan is not None:
        for placement in voice_plan.placements:
            tracks.append(placement.waveform)
            offsets.append(placement.span.start_s)
    if tracks:
        foreground = mix(tracks, offsets, duration_s=duration_s)
    else:
        foreground = silence(duration_s, cfg.sample_rate)
    foreground = trim_or_pad(foreground, total_samples)

    if music is not None:
        bed = trim_or_pad(music, total_samples)
        params = DuckParams(
            duck_db=cfg.duck_db,
            threshold_dbfs=cfg.duck_threshold_dbfs,
            attack_s=cfg.duck_attack_s,
            release_s=cfg.duck_release_s,
        )
        bed = duck(bed, foreground, params)
        master = mix([foreground, bed], [0.0, 0.0], duration_s=duration_s)
    else:
        master = foreground
    master = fade(master, cfg.trailer_fade_in_s, cfg.trailer_fade_out_s)
    master = trim_or_pad(master, total_samples)

    def frame_stream():
        emitted = 0
        for clip in timeline.clips:
            end_frame = int(round(clip.trailer_span.end_s * fps))
            n = min(end_frame, total_frames) - emitted
            if n <= 0:
                continue
            yield from _clip_frames(
                clip, toolkit, source_path, fps, (info.width, info.height), n
            )
            emitted += n
        black = np.zeros((info.height, info.width, 3), dtype=np.uint8)
        while emitted < total_frames:
            yield black
            emitted += 1

    trailer_path = out_base.with_suffix(".avi" if _is_builtin(toolkit) else ".mp4")
    toolkit.write_video(trailer_path, frame_stream(), fps, master, stereo=stereo)

    stamp_log = log_from_timeline(timeline)
    if voice_plan is not None:
        stamp_log = stamp_log.merged_with(
            [
                LogEntry(ClipKind.VOICE, p.span.start_s, p.span.end_s, p.phrase)
                for p in voice_plan.placements
            ]
        )
    log_path = out_base.parent / (out_base.name + ".timestamps.json")
    stamp_log.write(log_path)
    return RenderResult(
        trailer_path=trailer_path,
        log_path=log_path,
        duration_s=duration_s,
        timestamp_log=stamp_log,
    )


def _is_builtin(toolkit: MediaToolkit) -> bool:
    from .media.toolkit import BuiltinToolkit

    return isinstance(toolkit, BuiltinToolkit)
