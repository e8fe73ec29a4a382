"""Project configuration: dataclasses mirroring the YAML config file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml


@dataclass(frozen=True)
class ProjectConfig:
    """Per-movie setup: source location plus sampling/targeting knobs."""

    imdb_id: str = ""
    video_path: str = ""
    project_name: str = "project"
    sample_interval_s: float = 9.0
    head_skip_frac: float = 0.04
    tail_skip_frac: float = 0.08
    target_trailer_s: float = 90.0
    min_frame_gap_frac: float = 0.015

    def __post_init__(self) -> None:
        if not (0 <= self.head_skip_frac + self.tail_skip_frac < 1):
            raise ValueError("head_skip_frac + tail_skip_frac must be in [0, 1)")
        if self.sample_interval_s <= 0:
            raise ValueError("sample_interval_s must be positive")
        if self.min_frame_gap_frac <= 0:
            raise ValueError("min_frame_gap_frac must be positive")


@dataclass(frozen=True)
class QuoteConfig:
    min_len: int = 15
    max_len: int = 120
    polarity_min: float = 0.1
    shortlist_cap: int = 200
    align_threshold: float = 0.8
    align_slack: int = 2
    vad_pad_s: float = 0.25
    min_shot_s: float = 0.5
    # Optional override for quote count; None derives it from the scene count.
    n_quotes: Optional[int] = None


@dataclass(frozen=True)
class VisualConfig:
    buffer_s: float = 10.0
    target_clip_min_s: float = 2.5
    target_clip_max_s: float = 5.5
    sbd_threshold: float = 27.0
    min_shot_s: float = 0.5
    ocr_top_k: int = 20
    feature_size: int = 32


@dataclass(frozen=True)
class AudioConfig:
    sample_rate: int = 44100
    duck_db: float = -12.0
    duck_threshold_dbfs: float = -40.0
    duck_attack_s: float = 0.05
    duck_release_s: float = 0.5
    quote_fade_s: float = 0.15
    trailer_fade_in_s: float = 1.0
    trailer_fade_out_s: float = 2.0
    voice_pad_s: float = 0.5
    music_crossfade_s: float = 2.0
    music_max_s: float = 30.0


@dataclass(frozen=True)
class AssemblyConfig:
    avg_clip_s: float = 4.5
    scene_count_min: int = 6
    scene_count_max: int = 30
    voice_phrase_every_s: float = 15.0
    min_voice_phrases: int = 3
    # Optional override; None derives the count from the trailer length,
    # 0 disables the voice-over stage entirely.
    n_voice_phrases: Optional[int] = None
    fallback_black_s: float = 10.0
    voice_map_path: Optional[str] = None


@dataclass(frozen=True)
class ProviderConfig:
    """Where each model backend lives and how to talk to it."""

    # "synthetic" (deterministic local stand-ins), "replay" (fixture dir,
    # hermetic), or "http" (remote endpoints, one route per kind).
    mode: str = "synthetic"
    fixtures_dir: Optional[str] = None
    record: bool = False
    base_url: Optional[str] = None
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    auth_token_env: str = "TRAILGEN_PROVIDER_TOKEN"
    embedding_dim: int = 768
    temperature_creative: float = 0.9
    seed: int = 0
    # Synthetic providers need the movie script to replay transcripts etc.
    script_path: Optional[str] = None


@dataclass(frozen=True)
class MediaConfig:
    # "builtin" (pure-python AVI toolkit) or "ffmpeg" (subprocess).
    toolkit: str = "builtin"
    ffmpeg_path: str = "ffmpeg"
    ffprobe_path: str = "ffprobe"
    jpeg_quality: int = 90
    render_stereo: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs, loadable from a single YAML file."""

    project: ProjectConfig = field(default_factory=ProjectConfig)
    metadata_path: str = ""
    out_dir: str = "out"
    quotes: QuoteConfig = field(default_factory=QuoteConfig)
    visual: VisualConfig = field(default_factory=VisualConfig)
    audio: AudioConfig = field(default_factory=AudioConfig)
    assembly: AssemblyConfig = field(default_factory=AssemblyConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    media: MediaConfig = field(default_factory=MediaConfig)

    @property
    def project_dir(self) -> Path:
        return Path(self.out_dir) / self.project.project_name


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        if dataclasses.is_dataclass(f.type) or (
            isinstance(f.type, str) and f.type in _SECTION_TYPES
        ):
            section_cls = _SECTION_TYPES[f.type] if isinstance(f.type, str) else f.type
            kwargs[name] = _build(section_cls, value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


_SECTION_TYPES = {
    cls.__name__: cls
    for cls in (
        ProjectConfig,
        QuoteConfig,
        VisualConfig,
        AudioConfig,
        AssemblyConfig,
        ProviderConfig,
        MediaConfig,
    )
}


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data or {})


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: Path | str) -> RunConfig:
    """Load a run config from YAML (JSON is valid YAML, so both work)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})


def save_config(cfg: RunConfig, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
