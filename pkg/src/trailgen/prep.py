"""Stage 1: metadata ingestion, frame sampling plan, plot segmentation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import ProjectConfig
from .errors import StageError
from .model import DEFAULT_GENRE, MovieMetadata
from .providers.base import ProviderClient
from .providers.prompts import CORRECTIVE_SUFFIX, plot_segmentation_prompt, strip_listing
from .quotes import scrub_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubPlot:
    """One visual sentence of the segmented synopsis = one trailer scene."""

    index: int
    text: str


def load_metadata(path: Path | str) -> MovieMetadata:
    """Parse the metadata file that mirrors the scraped per-movie fields."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StageError("prep", f"metadata file {path} is not valid JSON: {exc}") from exc
    for field_name in ("imdb_id", "title", "synopsis", "release_date"):
        if field_name not in data:
            raise StageError("prep", f"metadata file missing field {field_name!r}")
    if not str(data["synopsis"]).strip():
        raise StageError("prep", "metadata field 'synopsis' is empty")
    if not data.get("genres"):
        log.warning("metadata has no genres; defaulting to %s", DEFAULT_GENRE)
        data = {**data, "genres": [DEFAULT_GENRE]}
    try:
        return MovieMetadata.from_dict(data)
    except (ValueError, KeyError) as exc:
        raise StageError("prep", f"metadata file invalid: {exc}") from exc


def plan_frame_samples(duration_s: float, cfg: ProjectConfig) -> list[float]:
    """Evenly spaced sample timestamps inside the credit-skip window.

    Boundaries snap to the millisecond grid (matching the frame cache file
    naming), which keeps the spacing exact for interval values that are
    whole milliseconds.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    head_ms = round(duration_s * cfg.head_skip_frac * 1000)
    limit_ms = round(duration_s * (1.0 - cfg.tail_skip_frac) * 1000)
    interval_ms = round(cfg.sample_interval_s * 1000)
    if interval_ms <= 0:
        raise ValueError("sample_interval_s too small")
    if head_ms > limit_ms:
        log.warning(
            "sampling window empty (duration %.1fs, head %.3fs > limit %.3fs)",
            duration_s, head_ms / 1000, limit_ms / 1000,
        )
        return []
    count = (limit_ms - head_ms) // interval_ms + 1
    return [(head_ms + k * interval_ms) / 1000.0 for k in range(count)]


def scene_count_for(
    target_trailer_s: float, avg_clip_s: float, lo: int = 6, hi: int = 30
) -> int:
    """Number of sub-plots to request: trailer length over average clip
    length, clamped to keep prompts and trailers sane."""
    if target_trailer_s <= 0 or avg_clip_s <= 0:
        raise ValueError("target_trailer_s and avg_clip_s must be positive")
    return max(lo, min(hi, round(target_trailer_s / avg_clip_s)))


def segment_plot(
    provider: ProviderClient, synopsis: str, n_scenes: int
) -> list[SubPlot]:
    """Segment the (pre-scrubbed) synopsis into exactly ``n_scenes``
    sub-plots. One corrective reprompt is allowed; a second bad parse is a
    stage failure rather than a silent truncation or pad."""
    if n_scenes <= 0:
        raise ValueError("n_scenes must be positive")
    scrubbed = scrub_text(synopsis)
    prompt = plot_segmentation_prompt(scrubbed, n_scenes)
    for attempt in range(2):
        completion = provider.llm_complete(prompt, "plot-segmentation")
        lines = strip_listing(completion)
        if len(lines) == n_scenes:
            return [SubPlot(index=i, text=line) for i, line in enumerate(lines)]
        log.warning(
            "plot segmentation returned %d lines, expected %d (attempt %d)",
            len(lines), n_scenes, attempt + 1,
        )
        prompt = plot_segmentation_prompt(scrubbed, n_scenes) + CORRECTIVE_SUFFIX
    raise StageError("prep", f"plot segmentation failed twice to return {n_scenes} sub-plots")
