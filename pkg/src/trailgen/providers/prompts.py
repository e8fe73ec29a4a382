"""The five prompt templates the pipeline sends to the language model.

Parse-critical templates run at temperature 0; creative ones use the
configured temperature. Prompts carry their parameters as labelled lines so
any backend (including the deterministic synthetic one) can read them back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    parse_critical: bool


TEMPLATES = {
    "plot-segmentation": PromptTemplate("plot-segmentation", parse_critical=True),
    "quote-selection": PromptTemplate("quote-selection", parse_critical=True),
    "keyword-extraction": PromptTemplate("keyword-extraction", parse_critical=True),
    "voiceover-phrases": PromptTemplate("voiceover-phrases", parse_critical=False),
    "music-description": PromptTemplate("music-description", parse_critical=False),
}

CORRECTIVE_SUFFIX = (
    "\n\nYour previous answer did not follow the required format. "
    "Answer again following the format instructions exactly, one item per line, "
    "with no extra commentary."
)


def plot_segmentation_prompt(synopsis: str, n_scenes: int) -> str:
    return (
        "Split the movie synopsis below into short, strictly visual scene "
        "descriptions for a trailer. Use clear, simple language that introduces "
        "the main characters and places without revealing the ending. Avoid "
        "poetic or abstract wording. Write one scene per line and produce "
        "exactly the requested number of scenes.\n"
        f"Scene count: {n_scenes}\n"
        "Synopsis:\n"
        f"{synopsis}\n"
    )


def keyword_extraction_prompt(subplot_text: str) -> str:
    return (
        "Extract exactly five key semantic keywords from the scene description "
        "below, focusing on themes, characters, and significant events without "
        "redundancy. Answer with the five keywords on one line, comma separated, "
        "all lowercase.\n"
        f"Sub-plot: {subplot_text}\n"
    )


def quote_selection_prompt(shortlist: list[str], n_quotes: int, title: str, synopsis: str) -> str:
    lines = "\n".join(f"- {q}" for q in shortlist)
    return (
        "From the candidate movie lines below, pick the ones that are most "
        "impactful and memorable for a trailer, judged by their emotional and "
        "thematic weight for this film. Answer with the selected lines verbatim, "
        "best first, one per line, and select exactly the requested number.\n"
        f"Select: {n_quotes}\n"
        f"Title: {title}\n"
        f"Synopsis: {synopsis}\n"
        "Candidates:\n"
        f"{lines}\n"
    )


def voiceover_prompt(synopsis: str, director: str, release_month: str, n_phrases: int) -> str:
    return (
        "Write evocative voice-over phrases for a movie trailer from the plot "
        "summary below. Build anticipation, avoid spoilers, mention the "
        "director's name in exactly one phrase and the release month in exactly "
        "one other phrase. Answer with one phrase per line and produce exactly "
        "the requested number of phrases.\n"
        f"Phrase count: {n_phrases}\n"
        f"Director: {director}\n"
        f"Release month: {release_month}\n"
        "Synopsis:\n"
        f"{synopsis}\n"
    )


def music_description_prompt(title: str, genres: list[str], synopsis: str) -> str:
    return (
        "Write a music description for this movie's trailer soundtrack, "
        "inspired by the plot but focused strictly on musical elements and "
        "instrument selection. Answer with exactly these seven labelled lines:\n"
        "Instruments: ...\nKey: ...\nTempo: ...\nDynamics: ...\nTexture: ...\n"
        "Mood: ...\nAtmosphere: ...\n"
        f"Title: {title}\n"
        f"Genres: {', '.join(genres)}\n"
        f"Synopsis: {synopsis}\n"
    )


def parse_labelled_int(prompt: str, label: str) -> int | None:
    for line in prompt.splitlines():
        if line.startswith(label + ":"):
            try:
                return int(line.split(":", 1)[1].strip())
            except ValueError:
                return None
    return None


def parse_labelled_str(prompt: str, label: str) -> str:
    for line in prompt.splitlines():
        if line.startswith(label + ":"):
            return line.split(":", 1)[1].strip()
    return ""


def parse_block(prompt: str, label: str) -> str:
    """Text following a ``Label:`` line up to the next labelled line or EOF."""
    lines = prompt.splitlines()
    collected: list[str] = []
    active = False
    for line in lines:
        if active:
            if line.endswith(":") and " " not in line[:-1]:
                break
            collected.append(line)
        elif line.strip() == label + ":":
            active = True
    return "\n".join(collected).strip()


def parse_list_items(prompt: str, marker: str = "- ") -> list[str]:
    return [line[len(marker):].strip() for line in prompt.splitlines() if line.startswith(marker)]


ParseFn = Callable[[str], list[str]]


def strip_listing(text: str) -> list[str]:
    """Parse an LLM listing: drop numbering/bullets, keep non-empty lines."""
    items = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        # Strip "1." / "1)" / "-" / "*" / "•" prefixes.
        for prefix in ("- ", "* ", "• "):
            if stripped.startswith(prefix):
                stripped = stripped[len(prefix):].strip()
                break
        else:
            head, sep, tail = stripped.partition(".")
            if sep and head.isdigit():
                stripped = tail.strip()
            else:
                head, sep, tail = stripped.partition(")")
                if sep and head.isdigit():
                    stripped = tail.strip()
        if stripped:
            items.append(stripped)
    return items
