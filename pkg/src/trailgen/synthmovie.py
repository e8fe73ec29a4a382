"""Synthetic test movie: colored scenes plus scripted tone-speech audio.

Generates a small AVI whose ground truth (spoken lines with word timings,
speech segments, scene colors, text overlays) is captured in a
``ProviderScript`` so the deterministic providers can answer every request
about it. Used by the hermetic end-to-end tests and the ``demo`` command.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .config import (
    AssemblyConfig,
    AudioConfig,
    ProjectConfig,
    ProviderConfig,
    QuoteConfig,
    RunConfig,
    save_config,
)
from .media.avi import write_avi
from .providers.synthetic import GAP_S, WORD_S, ProviderScript, tone_speech

# name -> BGR; chosen so neighbouring scenes differ strongly in HSV and
# nothing approaches white (the OCR stand-in keys on near-white pixels).
SCENE_PALETTE: list[tuple[str, tuple[int, int, int]]] = [
    ("crimson", (40, 40, 200)),
    ("cobalt", (180, 90, 30)),
    ("emerald", (60, 160, 40)),
    ("amber", (30, 160, 230)),
    ("violet", (180, 60, 140)),
    ("teal", (150, 150, 30)),
    ("rust", (30, 70, 170)),
    ("indigo", (130, 50, 70)),
    ("olive", (40, 110, 110)),
    ("magenta", (170, 40, 200)),
    ("slate", (110, 100, 90)),
    ("copper", (60, 110, 180)),
]

_SYNOPSIS_TEMPLATES = [
    "A {color} field stretches beneath a wide morning sky.",
    "Captain Mara Voss crosses the {color} plain alone.",
    "A {color} glow spreads through the research station.",
    "Engineers gather around a humming {color} machine.",
    "A storm of {color} dust swallows the horizon.",
    "Mara studies a map under a {color} lantern.",
    "The crew walks a long {color} corridor in silence.",
    "Waves of {color} light ripple across the valley.",
    "An old tower rises from the {color} mist.",
    "Children watch {color} banners over the harbor.",
    "A signal flickers on the {color} console.",
    "The expedition descends into a {color} canyon.",
]

# (line, scene_idx, offset into the scene). Every line carries a clear
# sentiment so it survives the polarity gate; line 3 deliberately straddles
# a scene boundary to exercise orphan-shot black substitution.
_SPOKEN_LINES: list[tuple[str, int, float]] = [
    ("The crimson field keeps a promise.", 0, 0.8),
    ("We will find a better world together.", 2, 1.0),
    ("This is our last great journey home.", 3, 4.6),
    ("I am afraid of what the silence hides.", 6, 1.2),
    ("No one returns from the dark water.", 9, 0.9),
]

_DECOY_QUOTES = [
    "Run.",
    "Okay.",
    "maybe we should head out now",
    "Rex: I will kill the engine before it blows.",
    "Ira: Stay close. Sola: Always.",
    "The door is over there.",
    "Narrator: When every hope has burned away and nothing remains of the world "
    "we loved, the last wonderful promise of a forgotten age still waits beyond "
    "the farthest terrible shore of night.",
]

_SPEECH_VOICE = "onscreen"
_VAD_MARGIN_S = 0.05


@dataclass(frozen=True)
class SyntheticMovie:
    video_path: Path
    metadata_path: Path
    script_path: Path
    script: ProviderScript
    duration_s: float
    fps: float
    sample_rate: int
    n_scenes: int
    scene_s: float


def build_synthetic_movie(
    out_dir: Path | str,
    n_scenes: int = 12,
    scene_s: float = 5.0,
    fps: float = 12.0,
    size: tuple[int, int] = (160, 120),
    sample_rate: int = 22050,
    text_scenes: tuple[int, ...] = (2, 8),
) -> SyntheticMovie:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if n_scenes > len(SCENE_PALETTE):
        raise ValueError(f"at most {len(SCENE_PALETTE)} scenes supported")
    palette = SCENE_PALETTE[:n_scenes]
    duration_s = n_scenes * scene_s
    width, height = size

    frames = []
    frames_per_scene = int(round(scene_s * fps))
    for scene_idx, (_name, bgr) in enumerate(palette):
        frame = np.full((height, width, 3), bgr, dtype=np.uint8)
        if scene_idx in text_scenes:
            cv2.putText(
                frame, "SAMPLE TEXT", (10, height // 2),
                cv2.FONT_HERSHEY_SIMPLEX, 0.5, (255, 255, 255), 2,
            )
        frames.extend([frame] * frames_per_scene)

    audio = np.zeros(int(round(duration_s * sample_rate)), dtype=np.float64)
    transcript = []
    speech_spans = []
    spoken_lines = []
    for line, scene_idx, offset_s in _SPOKEN_LINES:
        if scene_idx >= n_scenes:
            continue
        start_s = scene_idx * scene_s + offset_s
        wave = tone_speech(line, _SPEECH_VOICE, sample_rate)
        a = int(round(start_s * sample_rate))
        b = min(len(audio), a + len(wave.samples))
        audio[a:b] += wave.samples[: b - a]
        words = line.split()
        for k, word in enumerate(words):
            word_start = start_s + k * (WORD_S + GAP_S)
            transcript.append(
                {
                    "text": word,
                    "start_s": round(word_start, 6),
                    "end_s": round(word_start + WORD_S, 6),
                    "confidence": 0.95,
                }
            )
        line_end = start_s + len(words) * (WORD_S + GAP_S) - GAP_S
        speech_spans.append((max(0.0, start_s - _VAD_MARGIN_S),
                             min(duration_s, line_end + _VAD_MARGIN_S)))
        spoken_lines.append(line)

    vad = []
    cursor = 0.0
    for start, end in sorted(speech_spans):
        if start > cursor:
            vad.append({"start_s": cursor, "end_s": start, "is_speech": False})
        vad.append({"start_s": start, "end_s": end, "is_speech": True})
        cursor = end
    if cursor < duration_s:
        vad.append({"start_s": cursor, "end_s": duration_s, "is_speech": False})

    pcm = np.round(np.clip(audio, -1.0, 1.0) * 32767.0).astype(np.int16)
    video_path = out_dir / "movie.avi"
    write_avi(video_path, frames, fps, pcm, sample_rate)

    synopsis = " ".join(
        _SYNOPSIS_TEMPLATES[i % len(_SYNOPSIS_TEMPLATES)].format(color=name)
        for i, (name, _bgr) in enumerate(palette)
    )
    speakers = ("Mara", "Cole", "Mara", "Priya", "Cole")
    metadata = {
        "imdb_id": "tt7654321",
        "title": "The Chromatic Shore",
        "synopsis": synopsis,
        "quotes": [
            f"{speakers[i % len(speakers)]}: {line}" for i, line in enumerate(spoken_lines)
        ]
        + _DECOY_QUOTES,
        "genres": ["Sci-Fi", "Drama"],
        "director": "Ada Novak",
        "release_date": "2024-11-15",
    }
    metadata_path = out_dir / "metadata.json"
    metadata_path.write_text(json.dumps(metadata, indent=2), encoding="utf-8")

    script = ProviderScript(
        spoken_lines=spoken_lines,
        transcript=transcript,
        vad=vad,
        scene_colors=[{"name": name, "bgr": list(bgr)} for name, bgr in palette],
    )
    script_path = out_dir / "script.json"
    script.save(script_path)

    return SyntheticMovie(
        video_path=video_path,
        metadata_path=metadata_path,
        script_path=script_path,
        script=script,
        duration_s=duration_s,
        fps=fps,
        sample_rate=sample_rate,
        n_scenes=n_scenes,
        scene_s=scene_s,
    )


def demo_run_config(movie: SyntheticMovie, out_dir: Path | str) -> RunConfig:
    """A run config tuned for the small synthetic movie."""
    return RunConfig(
        project=ProjectConfig(
            imdb_id="tt7654321",
            video_path=str(movie.video_path),
            project_name="chromatic-shore",
            sample_interval_s=3.0,
            target_trailer_s=30.0,
        ),
        metadata_path=str(movie.metadata_path),
        out_dir=str(out_dir),
        quotes=QuoteConfig(),
        audio=AudioConfig(sample_rate=movie.sample_rate),
        assembly=AssemblyConfig(),
        providers=ProviderConfig(
            mode="synthetic",
            embedding_dim=64,
            script_path=str(movie.script_path),
        ),
    )


def make_demo_project(base_dir: Path | str) -> Path:
    """Generate a synthetic movie plus a ready-to-run config; returns the
    config path."""
    base_dir = Path(base_dir)
    movie = build_synthetic_movie(base_dir / "movie")
    cfg = demo_run_config(movie, base_dir / "out")
    config_path = base_dir / "config.yaml"
    save_config(cfg, config_path)
    return config_path


def scene_index_at(movie: SyntheticMovie, timestamp_s: float) -> int:
    return min(movie.n_scenes - 1, int(timestamp_s // movie.scene_s))


def line_span(movie: SyntheticMovie, line_idx: int) -> tuple[float, float]:
    """Ground-truth span of the idx-th spoken line (for tests)."""
    line, scene_idx, offset_s = _SPOKEN_LINES[line_idx]
    start = scene_idx * movie.scene_s + offset_s
    n_words = len(line.split())
    return start, start + n_words * (WORD_S + GAP_S) - GAP_S
