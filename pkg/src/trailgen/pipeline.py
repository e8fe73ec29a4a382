"""Stage orchestration: prep -> visual -> voiceover -> soundtrack.

Each stage persists its artifacts under ``<out>/<project>/cache`` so runs
are resumable stage by stage. Warnings raised anywhere in the package
during a run are collected into the run result (degenerate inputs degrade
with warnings, never crash).
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import assembly, prep, quotes, visual
from .audio import Waveform, fade, read_wav, rms_dbfs, write_wav
from .config import RunConfig
from .errors import StageError
from .media.toolkit import MediaToolkit, build_toolkit
from .model import (
    AudioPolicy,
    Clip,
    ClipKind,
    MovieMetadata,
    TimeSpan,
    TimestampLog,
    TrailerTimeline,
    log_from_timeline,
)
from .providers import ProviderClient, ProviderScript, build_provider

log = logging.getLogger(__name__)

STAGES = ("prep", "visual", "voiceover", "soundtrack")


class WarningCollector(logging.Handler):
    """Collects WARNING+ records emitted under the package logger."""

    def __init__(self) -> None:
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


@dataclass
class PipelineContext:
    cfg: RunConfig
    provider: ProviderClient
    toolkit: MediaToolkit
    warnings: list[str] = field(default_factory=list)

    @property
    def project_dir(self) -> Path:
        return self.cfg.project_dir

    @property
    def cache_dir(self) -> Path:
        return self.project_dir / "cache"

    @property
    def frames_dir(self) -> Path:
        return self.project_dir / "frames"

    @property
    def video_path(self) -> Path:
        return Path(self.cfg.project.video_path)

    def cache_path(self, name: str) -> Path:
        return self.cache_dir / name

    def save_json(self, name: str, data: dict) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.cache_path(name).write_text(
            json.dumps(data, indent=2, sort_keys=True), encoding="utf-8"
        )

    def load_json(self, name: str, stage: str) -> dict:
        path = self.cache_path(name)
        if not path.exists():
            raise StageError(stage, f"missing upstream artifact {path}; run earlier stages first")
        return json.loads(path.read_text(encoding="utf-8"))


def build_context(cfg: RunConfig, script: Optional[ProviderScript] = None) -> PipelineContext:
    provider = build_provider(cfg.providers, cfg.audio.sample_rate, script)
    toolkit = build_toolkit(
        cfg.media.toolkit,
        jpeg_quality=cfg.media.jpeg_quality,
        ffmpeg_path=cfg.media.ffmpeg_path,
        ffprobe_path=cfg.media.ffprobe_path,
        sample_rate=cfg.audio.sample_rate,
    )
    return PipelineContext(cfg=cfg, provider=provider, toolkit=toolkit)


# --- serialization helpers ------------------------------------------------------

def _span_to_list(span: Optional[TimeSpan]) -> Optional[list[float]]:
    return None if span is None else [span.start_s, span.end_s]


def _span_from_list(values: Optional[list[float]]) -> Optional[TimeSpan]:
    return None if values is None else TimeSpan(values[0], values[1])


def _clip_to_dict(clip: Clip) -> dict:
    return {
        "kind": clip.kind.value,
        "source_span": _span_to_list(clip.source_span),
        "trailer_span": _span_to_list(clip.trailer_span),
        "audio_policy": clip.audio_policy.value,
        "label": clip.label,
    }


def _clip_from_dict(data: dict) -> Clip:
    return Clip(
        kind=ClipKind(data["kind"]),
        source_span=_span_from_list(data["source_span"]),
        trailer_span=_span_from_list(data["trailer_span"]),
        audio_policy=AudioPolicy(data["audio_policy"]),
        label=data["label"],
    )


def _timeline_to_dict(timeline: TrailerTimeline) -> dict:
    return {
        "total_duration_s": timeline.total_duration_s,
        "clips": [_clip_to_dict(c) for c in timeline.clips],
    }


def _timeline_from_dict(data: dict) -> TrailerTimeline:
    return TrailerTimeline(
        clips=tuple(_clip_from_dict(c) for c in data["clips"]),
        total_duration_s=data["total_duration_s"],
    )


# --- stage 1: prep ---------------------------------------------------------------

def run_prep(ctx: PipelineContext) -> dict:
    cfg = ctx.cfg
    metadata = prep.load_metadata(cfg.metadata_path)
    info = ctx.toolkit.probe(ctx.video_path)
    if info.sample_rate and info.sample_rate != cfg.audio.sample_rate:
        raise StageError(
            "prep",
            f"source audio rate {info.sample_rate} != configured "
            f"{cfg.audio.sample_rate}; align audio.sample_rate with the source",
        )
    samples = prep.plan_frame_samples(info.duration_s, cfg.project)
    ctx.frames_dir.mkdir(parents=True, exist_ok=True)
    frame_paths = []
    for ts in samples:
        out = ctx.frames_dir / f"{round(ts * 1000)}.png"
        if not out.exists():
            ctx.toolkit.save_frame_png(ctx.video_path, ts, out)
        frame_paths.append(str(out))
    scene_count = prep.scene_count_for(
        cfg.project.target_trailer_s,
        cfg.assembly.avg_clip_s,
        cfg.assembly.scene_count_min,
        cfg.assembly.scene_count_max,
    )
    subplots = prep.segment_plot(ctx.provider, metadata.synopsis, scene_count)
    artifacts = {
        "metadata": metadata.to_dict(),
        "duration_s": info.duration_s,
        "fps": info.fps,
        "width": info.width,
        "height": info.height,
        "samples": samples,
        "frame_paths": frame_paths,
        "scene_count": scene_count,
        "subplots": [{"index": s.index, "text": s.text} for s in subplots],
    }
    ctx.save_json("prep.json", artifacts)
    return artifacts


# --- stage 2: visual -------------------------------------------------------------

def _zone_features(
    ctx: PipelineContext, zone: TimeSpan, fps: float, cache: visual.FeatureCache
) -> tuple[list[visual.FrameFeature], float]:
    cached = cache.get(zone, fps)
    if cached is not None:
        return cached, zone.start_s
    features = []
    first_ts = zone.start_s
    for i, (ts, frame) in enumerate(ctx.toolkit.iter_frames(ctx.video_path, zone)):
        if i == 0:
            first_ts = ts
        features.append(visual.frame_feature(frame, i, ctx.cfg.visual.feature_size))
    if not features:
        raise StageError("visual", f"no frames decoded in zone [{zone.start_s}, {zone.end_s}]")
    cache.put(zone, fps, features)
    return features, first_ts


def _standard_groups(
    ctx: PipelineContext, prep_art: dict, subplots: list[prep.SubPlot]
) -> list[assembly.ClipGroup]:
    cfg = ctx.cfg
    frames = [
        visual.FrameSample(timestamp_s=ts, image_ref=Path(path))
        for ts, path in zip(prep_art["samples"], prep_art["frame_paths"])
    ]
    if not frames:
        log.warning("no sampled frames; trailer will have no standard clips")
        return []
    frame_vectors = ctx.provider.embed_image([f.image_ref for f in frames])
    frames = [
        dataclasses.replace(f, embedding=v.values) for f, v in zip(frames, frame_vectors)
    ]
    subplot_scores = []
    for subplot in subplots:
        keywords = visual.extract_keywords(ctx.provider, subplot)
        vectors = ctx.provider.embed_text(keywords + [subplot.text])
        subplot_scores.append(visual.score_frames(vectors[:-1], vectors[-1], frames))
    chosen = visual.select_frames(
        subplot_scores,
        frames,
        prep_art["duration_s"],
        cfg.project.min_frame_gap_frac,
        ctx.provider.ocr_has_text,
        cfg.visual.ocr_top_k,
    )
    feature_cache = visual.FeatureCache(ctx.cache_dir / "features")
    groups = []
    for subplot_idx, frame in chosen:
        zone = visual.buffered_zone(
            frame.timestamp_s, cfg.visual.buffer_s, prep_art["duration_s"]
        )
        features, zone_start = _zone_features(ctx, zone, prep_art["fps"], feature_cache)
        clips = visual.cut_standard_clip(
            frame.timestamp_s,
            features,
            prep_art["fps"],
            TimeSpan(zone_start, zone.end_s),
            cfg.visual,
        )
        groups.append(assembly.ClipGroup(clips=tuple(clips), subplot_idx=subplot_idx))
    return groups


def _quote_groups(
    ctx: PipelineContext, prep_art: dict, metadata: MovieMetadata
) -> tuple[list[assembly.ClipGroup], quotes.DiscardLog]:
    cfg = ctx.cfg
    discard = quotes.DiscardLog()
    candidates: list[quotes.QuoteCandidate] = []
    for idx, raw in enumerate(metadata.quotes_raw):
        candidates.extend(quotes.clean_quote(raw, source_index=idx))
    shortlist = quotes.filter_candidates(candidates, cfg.quotes, discard=discard)
    n_quotes = cfg.quotes.n_quotes
    if n_quotes is None:
        n_quotes = max(2, round(prep_art["scene_count"] / 5))
    if not shortlist or n_quotes == 0:
        if n_quotes:
            log.warning("no quote candidates survived the funnel; no quote clips")
        return [], discard

    selected = quotes.select_quotes_llm(
        ctx.provider, shortlist, n_quotes, metadata.title, metadata.synopsis, discard
    )
    if not selected:
        return [], discard

    audio_path = ctx.cache_path("movie_audio.wav")
    if not audio_path.exists():
        ctx.cache_dir.mkdir(parents=True, exist_ok=True)
        write_wav(audio_path, ctx.toolkit.extract_audio(ctx.video_path))
    transcript = ctx.provider.transcribe(audio_path)
    vad_segments = ctx.provider.detect_voice_activity(audio_path)

    feature_cache = visual.FeatureCache(ctx.cache_dir / "features")
    groups = []
    for cand in selected:
        aligned = quotes.align_quote(
            cand, transcript, cfg.quotes.align_threshold, cfg.quotes.align_slack
        )
        if aligned is None:
            log.warning("quote %r not found in transcript; discarded", cand.text)
            discard.add("NO_MATCH", cand.text)
            continue
        refined_span = quotes.refine_with_vad(
            aligned.source_span, vad_segments, cfg.quotes.vad_pad_s
        )
        aligned = dataclasses.replace(aligned, source_span=refined_span, refined=True)
        zone = visual.buffered_zone(
            (refined_span.start_s + refined_span.end_s) / 2,
            cfg.visual.buffer_s + refined_span.duration_s / 2,
            prep_art["duration_s"],
        )
        features, zone_start = _zone_features(ctx, zone, prep_art["fps"], feature_cache)
        shots = visual.detect_shots(
            features, cfg.visual.sbd_threshold, prep_art["fps"], zone_start
        )
        clips = quotes.cut_quote_clip(aligned, shots, cfg.quotes.min_shot_s)
        groups.append(assembly.ClipGroup(clips=tuple(clips), quote_text=cand.text))
    return groups, discard


def run_visual(ctx: PipelineContext) -> dict:
    prep_art = ctx.load_json("prep.json", "visual")
    metadata = MovieMetadata.from_dict(prep_art["metadata"])
    subplots = [prep.SubPlot(s["index"], s["text"]) for s in prep_art["subplots"]]

    sc_groups = _standard_groups(ctx, prep_art, subplots)
    qc_groups, discard = _quote_groups(ctx, prep_art, metadata)
    discard.write(ctx.project_dir / "discard_log.txt")

    timeline = assembly.assemble_visual_timeline(
        sc_groups, qc_groups, ctx.cfg.assembly.fallback_black_s
    )

    # Vocal stems for the quote clips that survived interleaving, in
    # timeline order; fades applied now, loudness matching happens once the
    # voice-over level is known.
    stems_dir = ctx.cache_dir / "quote_stems"
    stems_dir.mkdir(parents=True, exist_ok=True)
    stem_paths = []
    quote_clips = [c for c in timeline.clips if c.kind is ClipKind.QUOTE]
    for i, clip in enumerate(quote_clips):
        raw = ctx.toolkit.extract_audio(ctx.video_path, clip.source_span)
        stem = ctx.provider.separate_vocals(raw)
        stem = fade(stem, ctx.cfg.audio.quote_fade_s, ctx.cfg.audio.quote_fade_s)
        path = stems_dir / f"{i:02d}.wav"
        write_wav(path, stem)
        stem_paths.append(str(path))

    artifacts = {
        "timeline": _timeline_to_dict(timeline),
        "quote_stems": stem_paths,
        "n_standard_groups": len(sc_groups),
        "n_quote_groups": len(qc_groups),
    }
    ctx.save_json("visual.json", artifacts)
    return artifacts


# --- stage 3: voiceover ------------------------------------------------------------

def run_voiceover(ctx: PipelineContext) -> dict:
    cfg = ctx.cfg
    prep_art = ctx.load_json("prep.json", "voiceover")
    visual_art = ctx.load_json("visual.json", "voiceover")
    metadata = MovieMetadata.from_dict(prep_art["metadata"])
    timeline = _timeline_from_dict(visual_art["timeline"])

    n_phrases = cfg.assembly.n_voice_phrases
    if n_phrases is None:
        n_phrases = assembly.plan_voice_count(
            timeline.total_duration_s,
            cfg.assembly.voice_phrase_every_s,
            cfg.assembly.min_voice_phrases,
        )
    artifacts: dict = {"voice_id": "", "phrases": [], "placements": [], "dropped": [],
                       "quote_target_dbfs": None}
    if n_phrases == 0:
        log.warning("voice-over disabled (0 phrases requested)")
        ctx.save_json("voiceover.json", artifacts)
        return artifacts

    phrases = assembly.generate_voiceover_phrases(ctx.provider, metadata, n_phrases)
    voice_map = assembly.load_voice_map(
        Path(cfg.assembly.voice_map_path) if cfg.assembly.voice_map_path else None
    )
    voice_id = assembly.pick_voice(metadata.genres, voice_map)

    voice_dir = ctx.cache_dir / "voice"
    voice_dir.mkdir(parents=True, exist_ok=True)
    voiced: list[tuple[str, Waveform]] = []
    for phrase in phrases:
        voiced.append((phrase, ctx.provider.synthesize_speech(phrase, voice_id)))

    quote_log = log_from_timeline(timeline)
    plan = assembly.place_voice_clips(
        voiced, quote_log, timeline.total_duration_s, cfg.audio.voice_pad_s, voice_id
    )
    placements = []
    for i, placement in enumerate(plan.placements):
        path = voice_dir / f"{i:02d}.wav"
        write_wav(path, placement.waveform)
        placements.append(
            {
                "phrase": placement.phrase,
                "wav": str(path),
                "start_s": placement.span.start_s,
                "end_s": placement.span.end_s,
            }
        )
    target = None
    if plan.placements:
        target = float(np.mean([rms_dbfs(p.waveform) for p in plan.placements]))
    artifacts = {
        "voice_id": voice_id,
        "phrases": phrases,
        "placements": placements,
        "dropped": list(plan.dropped),
        "quote_target_dbfs": target,
    }
    ctx.save_json("voiceover.json", artifacts)
    return artifacts


# --- stage 4: soundtrack -------------------------------------------------------------

def run_soundtrack(ctx: PipelineContext) -> dict:
    cfg = ctx.cfg
    prep_art = ctx.load_json("prep.json", "soundtrack")
    visual_art = ctx.load_json("visual.json", "soundtrack")
    voice_art = ctx.load_json("voiceover.json", "soundtrack")
    metadata = MovieMetadata.from_dict(prep_art["metadata"])
    timeline = _timeline_from_dict(visual_art["timeline"])

    music, description = assembly.build_music(
        ctx.provider, metadata, timeline.total_duration_s, cfg.audio
    )

    voice_waveforms = [read_wav(p["wav"]) for p in voice_art["placements"]]
    plan = assembly.VoicePlan(
        voice_id=voice_art["voice_id"],
        placements=tuple(
            assembly.VoicePlacement(
                p["phrase"], w, TimeSpan(p["start_s"], p["end_s"])
            )
            for p, w in zip(voice_art["placements"], voice_waveforms)
        ),
        dropped=tuple(voice_art["dropped"]),
    )

    stems = [read_wav(p) for p in visual_art["quote_stems"]]
    stems = assembly.adjust_quote_volume(stems, voice_waveforms)
    quote_clips = [c for c in timeline.clips if c.kind is ClipKind.QUOTE]
    quote_tracks = [(clip.trailer_span, stem) for clip, stem in zip(quote_clips, stems)]

    result = assembly.render_final(
        timeline,
        quote_tracks,
        plan,
        music,
        ctx.video_path,
        ctx.toolkit,
        cfg.audio,
        ctx.project_dir / "trailer",
        stereo=cfg.media.render_stereo,
    )
    artifacts = {
        "trailer_path": str(result.trailer_path),
        "log_path": str(result.log_path),
        "duration_s": result.duration_s,
        "music_description": description,
    }
    ctx.save_json("soundtrack.json", artifacts)
    return artifacts


# --- runner -----------------------------------------------------------------------

_STAGE_FNS = {
    "prep": run_prep,
    "visual": run_visual,
    "voiceover": run_voiceover,
    "soundtrack": run_soundtrack,
}


@dataclass
class RunResult:
    stages_run: list[str]
    warnings: list[str]
    trailer_path: Optional[str] = None
    log_path: Optional[str] = None
    duration_s: Optional[float] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_stages(
    cfg: RunConfig,
    stages: Optional[list[str]] = None,
    script: Optional[ProviderScript] = None,
) -> RunResult:
    """Run the requested stages (default: all four) and collect warnings."""
    stages = stages or list(STAGES)
    for name in stages:
        if name not in _STAGE_FNS:
            raise ValueError(f"unknown stage {name!r} (expected one of {STAGES})")
    ctx = build_context(cfg, script)
    collector = WarningCollector()
    package_logger = logging.getLogger("trailgen")
    package_logger.addHandler(collector)
    try:
        last: dict = {}
        for name in stages:
            log.info("running stage %s", name)
            last = _STAGE_FNS[name](ctx)
    finally:
        package_logger.removeHandler(collector)
    result = RunResult(stages_run=list(stages), warnings=collector.messages)
    if "soundtrack" in stages:
        result.trailer_path = last.get("trailer_path")
        result.log_path = last.get("log_path")
        result.duration_s = last.get("duration_s")
    (ctx.project_dir).mkdir(parents=True, exist_ok=True)
    (ctx.project_dir / "warnings.log").write_text(
        "".join(f"{w}\n" for w in collector.messages), encoding="utf-8"
    )
    return result


def read_timestamp_log(path: Path | str) -> TimestampLog:
    return TimestampLog.read(Path(path))
