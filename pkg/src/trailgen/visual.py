"""Stage 2 visuals: shot boundary detection, semantic frame retrieval per
sub-plot, OCR screening, and Standard Clip cutting via buffered zones."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import cv2
import numpy as np

from .config import VisualConfig
from .errors import StageError
from .model import Clip, Shot, TimeSpan, black_clip, standard_clip
from .prep import SubPlot
from .providers.base import EmbeddingVector, ProviderClient
from .providers.prompts import CORRECTIVE_SUFFIX, keyword_extraction_prompt

log = logging.getLogger(__name__)

_STOPWORDS = {
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for",
    "with", "by", "from", "as", "is", "are", "was", "were", "be", "his", "her",
    "their", "its", "it", "he", "she", "they", "this", "that", "these", "those",
    "over", "under", "into", "out", "up", "down", "while", "through",
}


@dataclass(frozen=True)
class FrameSample:
    """A sampled frame with source timestamp, cached image, and embedding."""

    timestamp_s: float
    image_ref: Path
    embedding: Optional[np.ndarray] = None
    has_text: Optional[bool] = None


@dataclass(frozen=True)
class FrameFeature:
    frame_idx: int
    hsv_mean: tuple[float, float, float]


def frame_feature(image: np.ndarray, frame_idx: int, downscale: int = 32) -> FrameFeature:
    """Per-frame HSV channel means on a downscaled copy (cheap SBD metric)."""
    small = cv2.resize(image, (downscale, downscale), interpolation=cv2.INTER_AREA)
    hsv = cv2.cvtColor(small, cv2.COLOR_BGR2HSV)
    means = hsv.reshape(-1, 3).mean(axis=0)
    return FrameFeature(frame_idx, (float(means[0]), float(means[1]), float(means[2])))


def detect_shots(
    features: Sequence[FrameFeature],
    threshold: float = 27.0,
    fps: float = 24.0,
    start_s: float = 0.0,
) -> list[Shot]:
    """Declare a cut between consecutive frames whenever the mean absolute
    HSV channel difference is strictly above ``threshold``. The returned
    shots partition [start_s, start_s + n/fps)."""
    if not features:
        raise ValueError("detect_shots requires at least one frame feature")
    cuts = []
    for prev, cur in zip(features, features[1:]):
        diff = sum(abs(a - b) for a, b in zip(prev.hsv_mean, cur.hsv_mean)) / 3.0
        if diff > threshold:
            cuts.append(cur.frame_idx)
    bounds = [features[0].frame_idx] + cuts + [features[-1].frame_idx + 1]
    shots = []
    base = features[0].frame_idx
    for first, next_first in zip(bounds, bounds[1:]):
        span = TimeSpan(
            start_s + (first - base) / fps,
            start_s + (next_first - base) / fps,
        )
        shots.append(Shot(span=span, first_frame_idx=first, last_frame_idx=next_first - 1))
    return shots


def extract_keywords(provider: ProviderClient, subplot: SubPlot) -> list[str]:
    """Exactly five distinct lowercase keywords for one sub-plot. Two failed
    parses fall back to the longest content words of the sub-plot text."""
    if not subplot.text.strip():
        raise ValueError("subplot text must be non-empty")
    prompt = keyword_extraction_prompt(subplot.text)
    keywords: list[str] = []
    for attempt in range(2):
        completion = provider.llm_complete(prompt, "keyword-extraction")
        keywords = _parse_keywords(completion)
        if len(keywords) == 5:
            return keywords
        log.warning(
            "keyword extraction returned %d distinct keywords (attempt %d)",
            len(keywords), attempt + 1,
        )
        prompt = keyword_extraction_prompt(subplot.text) + CORRECTIVE_SUFFIX
    return _pad_keywords(keywords, subplot.text)


def _parse_keywords(completion: str) -> list[str]:
    raw = completion.replace("\n", ",").split(",")
    keywords = []
    for item in raw:
        word = item.strip().lower()
        if word and word not in keywords:
            keywords.append(word)
    return keywords[:5]


def _pad_keywords(keywords: list[str], subplot_text: str) -> list[str]:
    content = [
        "".join(ch for ch in w.lower() if ch.isalpha())
        for w in subplot_text.split()
    ]
    content = [w for w in content if w and w not in _STOPWORDS]
    for word in sorted(set(content), key=lambda w: (-len(w), subplot_text.lower().find(w))):
        if len(keywords) == 5:
            break
        if word not in keywords:
            keywords.append(word)
    i = 0
    while len(keywords) < 5:  # pathological: tiny subplot text
        filler = f"scene{i}"
        if filler not in keywords:
            keywords.append(filler)
        i += 1
    return keywords[:5]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        log.warning("zero-magnitude embedding scored as 0")
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def score_frames(
    keyword_vectors: Sequence[EmbeddingVector],
    subplot_vector: EmbeddingVector,
    frames: Sequence[FrameSample],
) -> np.ndarray:
    """Per-frame score: max cosine similarity over the keyword embeddings
    and the whole-subplot embedding."""
    anchors = [v.values for v in keyword_vectors] + [subplot_vector.values]
    scores = np.empty(len(frames))
    for i, frame in enumerate(frames):
        if frame.embedding is None:
            raise ValueError(f"frame at {frame.timestamp_s}s has no embedding")
        scores[i] = max(cosine(anchor, frame.embedding) for anchor in anchors)
    return scores


def select_frames(
    subplot_scores: Sequence[np.ndarray],
    frames: Sequence[FrameSample],
    duration_s: float,
    min_gap_frac: float,
    ocr_has_text: Callable[[Path], bool],
    top_k: int = 20,
) -> list[tuple[int, FrameSample]]:
    """Greedy narrative-order selection: each sub-plot takes its best-scoring
    frame that is text-free and at least ``min_gap_frac * duration_s`` away
    from every previously chosen frame. OCR runs only over each sub-plot's
    ``top_k`` candidates to bound provider calls. Infeasible sub-plots are
    dropped with a warning."""
    min_gap_s = min_gap_frac * duration_s
    chosen: list[tuple[int, FrameSample]] = []
    chosen_ts: list[float] = []
    text_cache: dict[Path, bool] = {}

    def frame_has_text(frame: FrameSample) -> bool:
        if frame.has_text is not None:
            return frame.has_text
        if frame.image_ref not in text_cache:
            text_cache[frame.image_ref] = bool(ocr_has_text(frame.image_ref))
        return text_cache[frame.image_ref]

    for subplot_idx, scores in enumerate(subplot_scores):
        order = sorted(range(len(frames)), key=lambda i: (-scores[i], frames[i].timestamp_s))
        picked = None
        for i in order[:top_k]:
            frame = frames[i]
            if any(abs(frame.timestamp_s - ts) < min_gap_s for ts in chosen_ts):
                continue
            if frame_has_text(frame):
                continue
            picked = replace(frame, has_text=False)
            break
        if picked is None:
            log.warning("no feasible frame for sub-plot %d; scene dropped", subplot_idx)
            continue
        chosen.append((subplot_idx, picked))
        chosen_ts.append(picked.timestamp_s)
    return chosen


def buffered_zone(anchor_s: float, buffer_s: float, video_duration_s: float) -> TimeSpan:
    """Analysis window around an anchor frame, clamped to the video bounds."""
    return TimeSpan(max(0.0, anchor_s - buffer_s), min(video_duration_s, anchor_s + buffer_s))


def cut_standard_clip(
    anchor_s: float,
    features: Sequence[FrameFeature],
    fps: float,
    zone: TimeSpan,
    cfg: VisualConfig = VisualConfig(),
) -> list[Clip]:
    """Cut a Standard Clip from the buffered zone around the anchor frame.

    The clip starts at the boundary of the shot containing the anchor and
    extends forward across whole shots until its duration enters the target
    range, trimming the final shot when it overshoots. Orphan boundary shot
    fragments become black of equal duration; if the zone runs out before
    the target minimum, trailing black pads the difference.
    """
    shots = detect_shots(features, cfg.sbd_threshold, fps, zone.start_s)
    anchor_shot_idx = next(
        (i for i, s in enumerate(shots) if s.span.start_s <= anchor_s < s.span.end_s),
        len(shots) - 1,
    )
    start = shots[anchor_shot_idx].span.start_s
    end = start
    last_idx = anchor_shot_idx
    trimmed_last = False
    for i in range(anchor_shot_idx, len(shots)):
        end = shots[i].span.end_s
        last_idx = i
        if end - start > cfg.target_clip_max_s:
            end = start + cfg.target_clip_max_s
            trimmed_last = True
            break
        if end - start >= cfg.target_clip_min_s:
            break

    clips: list[Clip] = []
    pad_black = 0.0
    if end - start < cfg.target_clip_min_s:
        pad_black = cfg.target_clip_min_s - (end - start)

    # Orphan checks on the boundary shots actually covered by the clip.
    first_cov = min(end, shots[anchor_shot_idx].span.end_s) - start
    last_cov = end - max(start, shots[last_idx].span.start_s)
    clip_start, clip_end = start, end
    lead_black = tail_black = 0.0
    if last_idx > anchor_shot_idx or trimmed_last:
        if first_cov < cfg.min_shot_s:
            lead_black = first_cov
            clip_start = shots[anchor_shot_idx].span.end_s
        if last_cov < cfg.min_shot_s and last_idx > anchor_shot_idx:
            tail_black = last_cov
            clip_end = shots[last_idx].span.start_s

    if clip_start >= clip_end:
        clip_start, clip_end = start, end
        lead_black = tail_black = 0.0
    if lead_black > 0:
        clips.append(black_clip(lead_black))
    clips.append(standard_clip(TimeSpan(clip_start, clip_end)))
    if tail_black > 0:
        clips.append(black_clip(tail_black))
    if pad_black > 0:
        clips.append(black_clip(pad_black))
    return clips


class FeatureCache:
    """Binary per-project cache of zone frame features (idx -> HSV means)."""

    def __init__(self, root: Path) -> None:
        self.root = root

    def _path(self, zone: TimeSpan, fps: float) -> Path:
        name = f"{int(round(zone.start_s * 1000))}_{int(round(zone.end_s * 1000))}_{fps:g}.npy"
        return self.root / name

    def get(self, zone: TimeSpan, fps: float) -> Optional[list[FrameFeature]]:
        path = self._path(zone, fps)
        if not path.exists():
            return None
        table = np.load(path)
        return [
            FrameFeature(int(row[0]), (float(row[1]), float(row[2]), float(row[3])))
            for row in table
        ]

    def put(self, zone: TimeSpan, fps: float, features: Sequence[FrameFeature]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        table = np.array(
            [[f.frame_idx, *f.hsv_mean] for f in features], dtype=np.float64
        )
        np.save(self._path(zone, fps), table)
