"""The quote funnel: clean -> filter -> rank -> LLM-select, plus alignment
of selected quotes to the movie audio and Quote Clip cutting.

Every rejected quote is logged with a reason code so a run can be audited
from its discard log.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .config import QuoteConfig
from .model import Clip, Shot, TimeSpan, black_clip, quote_clip
from .providers.base import ProviderClient, TranscriptWord, VadSegment
from .providers.prompts import quote_selection_prompt, strip_listing

log = logging.getLogger(__name__)

_RESOURCE_DIR = Path(__file__).parent / "resources"

_BRACKETED_RE = re.compile(r"\[[^\]]*\]")
_SPEAKER_RE = re.compile(r"(?:^|(?<=[.!?…])\s)([A-Z][A-Za-z .'\-]{0,30}?):\s+")
_WORD_RE = re.compile(r"[a-z']+")
_TERMINAL_CHARS = ".!?…"
_NEGATORS = {"not", "never", "no"}


def load_banned_words(path: Optional[Path] = None) -> list[str]:
    path = path or (_RESOURCE_DIR / "banned_words.txt")
    stems = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            stems.append(line)
    return stems


def load_sentiment_lexicon(path: Optional[Path] = None) -> dict[str, float]:
    path = path or (_RESOURCE_DIR / "sentiment_lexicon.tsv")
    lexicon = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        word, value = line.split("\t")
        lexicon[word] = float(value)
    return lexicon


_DEFAULT_LEXICON: dict[str, float] | None = None
_DEFAULT_BANNED: list[str] | None = None


def default_lexicon() -> dict[str, float]:
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        _DEFAULT_LEXICON = load_sentiment_lexicon()
    return _DEFAULT_LEXICON


def default_banned_words() -> list[str]:
    global _DEFAULT_BANNED
    if _DEFAULT_BANNED is None:
        _DEFAULT_BANNED = load_banned_words()
    return _DEFAULT_BANNED


@dataclass(frozen=True)
class QuoteCandidate:
    speaker: Optional[str]
    text: str
    char_len: int
    polarity: float
    source_index: int


@dataclass(frozen=True)
class AlignedQuote:
    quote: QuoteCandidate
    source_span: TimeSpan
    match_ratio: float
    refined: bool = False


class DiscardLog:
    """One line per rejected quote: ``REASON<TAB>text``."""

    def __init__(self) -> None:
        self.entries: list[tuple[str, str]] = []

    def add(self, reason: str, text: str) -> None:
        self.entries.append((reason, text))

    def write(self, path: Path) -> None:
        path.write_text(
            "".join(f"{reason}\t{text}\n" for reason, text in self.entries),
            encoding="utf-8",
        )


def polarity(text: str, lexicon: Optional[dict[str, float]] = None) -> float:
    """Mean polarity of lexicon-matched tokens; 'not X' flips X's sign.
    Returns 0 when nothing matches."""
    lexicon = lexicon if lexicon is not None else default_lexicon()
    tokens = _WORD_RE.findall(text.lower())
    values = []
    for i, token in enumerate(tokens):
        value = lexicon.get(token)
        if value is None:
            continue
        prev = tokens[i - 1] if i else ""
        if prev in _NEGATORS or prev.endswith("n't"):
            value = -value
        values.append(value)
    return sum(values) / len(values) if values else 0.0


def clean_quote(
    raw: str, source_index: int = 0, lexicon: Optional[dict[str, float]] = None
) -> list[QuoteCandidate]:
    """Split speaker prefixes, drop bracketed stage directions, normalize
    whitespace. Multi-speaker exchanges become one candidate per utterance."""
    text = _BRACKETED_RE.sub(" ", raw)
    text = " ".join(text.split())
    if not text:
        return []
    matches = list(_SPEAKER_RE.finditer(text))
    parts: list[tuple[Optional[str], str]] = []
    if not matches:
        parts.append((None, text))
    else:
        lead = text[: matches[0].start()].strip()
        if lead:
            parts.append((None, lead))
        for i, m in enumerate(matches):
            end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
            parts.append((m.group(1).strip(), text[m.end() : end].strip()))
    candidates = []
    for speaker, utterance in parts:
        utterance = " ".join(utterance.split())
        if not utterance:
            continue
        candidates.append(
            QuoteCandidate(
                speaker=speaker,
                text=utterance,
                char_len=len(utterance),
                polarity=polarity(utterance, lexicon),
                source_index=source_index,
            )
        )
    return candidates


def scrub_text(text: str, banned: Optional[Sequence[str]] = None) -> str:
    """Remove banned-stem words (case-insensitive prefix match). Used on
    synopses before prompting and as the hard filter for quotes."""
    banned = banned if banned is not None else default_banned_words()
    kept = [
        word
        for word in text.split()
        if not _matches_banned(word, banned)
    ]
    return " ".join(kept)


def _matches_banned(word: str, banned: Sequence[str]) -> bool:
    token = "".join(ch for ch in word.lower() if ch.isalpha())
    return any(token.startswith(stem) for stem in banned)


def _has_terminal_punct(text: str) -> bool:
    stripped = text.rstrip("\"'”’)")
    return bool(stripped) and stripped[-1] in _TERMINAL_CHARS


def filter_candidates(
    candidates: Sequence[QuoteCandidate],
    cfg: QuoteConfig = QuoteConfig(),
    banned: Optional[Sequence[str]] = None,
    discard: Optional[DiscardLog] = None,
) -> list[QuoteCandidate]:
    """Hard filters (length bounds, terminal punctuation, sentiment floor,
    banned words), then keep the ``shortlist_cap`` shortest survivors with
    ties broken by source index."""
    banned = banned if banned is not None else default_banned_words()
    discard = discard or DiscardLog()
    survivors = []
    for cand in candidates:
        if cand.char_len < cfg.min_len:
            discard.add("LEN_SHORT", cand.text)
        elif cand.char_len > cfg.max_len:
            discard.add("LEN_LONG", cand.text)
        elif not _has_terminal_punct(cand.text):
            discard.add("NO_TERMINAL_PUNCT", cand.text)
        elif abs(cand.polarity) < cfg.polarity_min:
            discard.add("LOW_POLARITY", cand.text)
        elif any(_matches_banned(w, banned) for w in cand.text.split()):
            discard.add("BANNED_WORD", cand.text)
        else:
            survivors.append(cand)
    survivors.sort(key=lambda c: (c.char_len, c.source_index))
    shortlist = survivors[: cfg.shortlist_cap]
    for cand in survivors[cfg.shortlist_cap :]:
        discard.add("OVER_CAP", cand.text)
    if not shortlist:
        log.warning("quote funnel produced an empty shortlist")
    return shortlist


def select_quotes_llm(
    provider: ProviderClient,
    shortlist: Sequence[QuoteCandidate],
    n_quotes: int,
    title: str,
    synopsis: str,
    discard: Optional[DiscardLog] = None,
) -> list[QuoteCandidate]:
    """Ask the LLM to rank the shortlist; anything it returns that is not a
    verbatim shortlist entry is dropped and the next rank promoted."""
    if n_quotes <= 0 or not shortlist:
        return []
    discard = discard or DiscardLog()
    by_text = {}
    for cand in shortlist:
        by_text.setdefault(cand.text, cand)
    prompt = quote_selection_prompt([c.text for c in shortlist], n_quotes, title, synopsis)
    completion = provider.llm_complete(prompt, "quote-selection")
    selected: list[QuoteCandidate] = []
    seen: set[str] = set()
    for line in strip_listing(completion):
        if line in seen:
            continue
        cand = by_text.get(line)
        if cand is None:
            discard.add("HALLUCINATED", line)
            continue
        seen.add(line)
        selected.append(cand)
        if len(selected) == n_quotes:
            break
    if len(selected) < n_quotes:
        log.warning("LLM selected %d/%d valid quotes", len(selected), n_quotes)
    return selected


def _tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i]
        for j, tok_b in enumerate(b, start=1):
            cur.append(
                min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (tok_a != tok_b))
            )
        prev = cur
    return prev[-1]


def token_similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """Normalized edit-similarity between token sequences in [0, 1]."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return 1.0 - _edit_distance(a, b) / max(len(a), len(b))


def align_quote(
    quote: QuoteCandidate,
    transcript: Sequence[TranscriptWord],
    threshold: float = 0.8,
    slack: int = 2,
) -> Optional[AlignedQuote]:
    """Best contiguous transcript window of length |quote tokens| +- slack by
    token edit-similarity; earliest window wins ties. Below-threshold best
    means no match and the quote is discarded by the caller."""
    quote_tokens = _tokenize(quote.text)
    if not quote_tokens or not transcript:
        return None
    n = len(transcript)
    lengths = range(max(1, len(quote_tokens) - slack), min(n, len(quote_tokens) + slack) + 1)
    word_tokens = [_tokenize(w.text) or [""] for w in transcript]
    flat = [toks[0] for toks in word_tokens]
    best_ratio = -1.0
    best_window: tuple[int, int] | None = None
    for start in range(n):
        for length in lengths:
            if start + length > n:
                break
            ratio = token_similarity(quote_tokens, flat[start : start + length])
            if ratio > best_ratio:
                best_ratio = ratio
                best_window = (start, length)
    if best_window is None or best_ratio < threshold:
        return None
    start, length = best_window
    span = TimeSpan(transcript[start].span.start_s, transcript[start + length - 1].span.end_s)
    return AlignedQuote(quote=quote, source_span=span, match_ratio=best_ratio)


def refine_with_vad(
    span: TimeSpan, segments: Sequence[VadSegment], pad_s: float = 0.25
) -> TimeSpan:
    """Snap span boundaries to the hull of overlapping speech segments,
    clamped to the input span padded by ``pad_s`` per side."""
    speech = [s.span for s in segments if s.is_speech and s.span.overlaps(span)]
    if not speech:
        log.warning("no speech segment overlaps span [%.2f, %.2f]", span.start_s, span.end_s)
        return span
    lo = min(s.start_s for s in speech)
    hi = max(s.end_s for s in speech)
    start = max(lo, max(0.0, span.start_s - pad_s))
    end = min(hi, span.end_s + pad_s)
    return TimeSpan(start, end)


def cut_quote_clip(
    aligned: AlignedQuote, shots: Sequence[Shot], min_shot_s: float = 0.5
) -> list[Clip]:
    """Cut the quote clip, substituting orphan boundary shot fragments
    (covering < ``min_shot_s`` of the clip) with black of equal duration.
    Total duration is preserved exactly."""
    span = aligned.source_span
    overlapping = [s for s in shots if s.span.overlaps(span)]
    if len(overlapping) <= 1:
        return [quote_clip(span, aligned.quote.text)]
    first, last = overlapping[0], overlapping[-1]
    lead = min(span.end_s, first.span.end_s) - span.start_s
    tail = span.end_s - max(span.start_s, last.span.start_s)
    start, end = span.start_s, span.end_s
    clips: list[Clip] = []
    lead_black = 0.0
    tail_black = 0.0
    if lead < min_shot_s:
        lead_black = lead
        start = first.span.end_s
    if tail < min_shot_s:
        tail_black = tail
        end = last.span.start_s
    if start >= end:
        log.warning("quote clip too fragmented for black substitution; kept whole")
        return [quote_clip(span, aligned.quote.text)]
    if lead_black > 0:
        clips.append(black_clip(lead_black))
    clips.append(quote_clip(TimeSpan(start, end), aligned.quote.text))
    if tail_black > 0:
        clips.append(black_clip(tail_black))
    return clips
