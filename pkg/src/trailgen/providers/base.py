"""Uniform client contract for every external model the pipeline consults.

One request/response envelope serves all backend kinds; concrete providers
only implement the transport (``_call``). Public methods build payloads and
validate every response against its type invariants before anything enters
the pipeline.

Wire contract:
    request  {"kind": str, "template_id": str|null, "payload": object}
    response {"ok": bool, "payload": object, "error": str|null}

Audio and frames travel as file references: ``{"path", "sha256", "format"}``
in local mode or ``{"data_b64", "sha256", "format"}`` in remote mode. Fixture
keys hash only content digests, never paths, so recorded fixtures replay
across machines and temp directories. Response audio is always inline
base64 WAV so fixtures stay self-contained.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..audio import Waveform, waveform_from_wav_bytes
from ..model import TimeSpan

log = logging.getLogger(__name__)

PROVIDER_KINDS = ("llm", "embedding", "asr", "vad", "tts", "music", "separation", "ocr")


class ProviderError(Exception):
    """Fatal provider failure, tagged with the pipeline stage when known."""

    def __init__(self, message: str, stage: str | None = None) -> None:
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage


class RetryableProviderError(ProviderError):
    """Transport-level failure worth retrying with backoff."""


class ProviderInputError(ProviderError):
    """The caller violated a request precondition."""


class FixtureMissError(ProviderError):
    """Replay-only mode has no recording for this request digest."""


class QuoteFilterRejection(ProviderError):
    """The backend refused the prompt on content grounds; callers must
    pre-filter text locally before retrying."""


class ConfigurationError(ProviderError):
    """Project configuration and provider output disagree (e.g. dims)."""


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_tokens: Optional[int] = None
    seed: int = 0

    def to_payload(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 1:
            raise ValueError("embedding must be 1-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding contains non-finite entries")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TranscriptWord:
    text: str
    span: TimeSpan
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class VadSegment:
    span: TimeSpan
    is_speech: bool


def validate_transcript(words: list[TranscriptWord]) -> list[TranscriptWord]:
    prev_start = -1.0
    prev_end = 0.0
    for w in words:
        if w.span.start_s < prev_start:
            raise ProviderError("transcript words not sorted by start time")
        if w.span.start_s < prev_end - 1e-6:
            raise ProviderError(
                f"overlapping transcript words at {w.span.start_s:.3f}s"
            )
        prev_start = w.span.start_s
        prev_end = w.span.end_s
    return words

def validate_vad(segments: list[VadSegment]) -> list[VadSegment]:
    prev_end = None
    for seg in segments:
        if prev_end is not None and seg.span.start_s < prev_end - 1e-6:
            raise ProviderError("VAD segments overlap or are unsorted")
        if prev_end is not None and seg.span.start_s > prev_end + 1e-3:
            raise ProviderError("VAD segments leave part of the range uncovered")
        prev_end = seg.span.end_s
    return segments


@dataclass(frozen=True)
class FileRef:
    """Payload reference to a binary blob, hashed by content for replay."""

    sha256: str
    format: str
    path: Optional[str] = None
    data: Optional[bytes] = field(default=None, repr=False)

    @classmethod
    def for_path(cls, path: Path | str, fmt: str) -> "FileRef":
        raw = Path(path).read_bytes()
        return cls(hashlib.sha256(raw).hexdigest(), fmt, path=str(path), data=raw)

    @classmethod
    def for_bytes(cls, raw: bytes, fmt: str) -> "FileRef":
        return cls(hashlib.sha256(raw).hexdigest(), fmt, data=raw)

    def to_payload(self, inline: bool) -> dict:
        out: dict[str, Any] = {"sha256": self.sha256, "format": self.format}
        if inline or self.path is None:
            if self.data is None:
                raise ProviderInputError("file ref has no data to inline")
            out["data_b64"] = base64.b64encode(self.data).decode("ascii")
        else:
            out["path"] = self.path
        return out

    def read(self) -> bytes:
        if self.data is not None:
            return self.data
        if self.path is not None:
            return Path(self.path).read_bytes()
        raise ProviderInputError("file ref has neither data nor path")


def fileref_from_payload(obj: dict) -> FileRef:
    data = base64.b64decode(obj["data_b64"]) if "data_b64" in obj else None
    return FileRef(obj["sha256"], obj.get("format", "bin"), path=obj.get("path"), data=data)


def _digest_normalize(value: Any) -> Any:
    """Strip volatile fields (paths, inline blobs) so the digest depends only
    on request content."""
    if isinstance(value, dict):
        if "sha256" in value and ("path" in value or "data_b64" in value):
            return {"sha256": value["sha256"], "format": value.get("format", "bin")}
        return {k: _digest_normalize(v) for k, v in sorted(value.items())}
    if isinstance(value, list):
        return [_digest_normalize(v) for v in value]
    return value


def request_digest(kind: str, template_id: Optional[str], payload: dict) -> str:
    canonical = json.dumps(
        {"kind": kind, "template_id": template_id, "payload": _digest_normalize(payload)},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def response_envelope(payload: dict) -> dict:
    return {"ok": True, "payload": payload, "error": None}


def error_envelope(message: str) -> dict:
    return {"ok": False, "payload": {}, "error": message}


class ProviderClient:
    """Base class: payload construction + response validation for all kinds."""

    def __init__(
        self,
        embedding_dim: int = 768,
        sample_rate: int = 44100,
        inline_files: bool = False,
        temperature_creative: float = 0.9,
        seed: int = 0,
    ) -> None:
        self.embedding_dim = embedding_dim
        self.sample_rate = sample_rate
        self.inline_files = inline_files
        self.temperature_creative = temperature_creative
        self.seed = seed

    # Transport: concrete providers implement this one hook.
    def _call(self, kind: str, template_id: Optional[str], payload: dict) -> dict:
        raise NotImplementedError

    def _invoke(self, kind: str, template_id: Optional[str], payload: dict) -> dict:
        response = self._call(kind, template_id, payload)
        if not response.get("ok", False):
            message = response.get("error") or "provider returned ok=false"
            if "content_filter" in message:
                raise QuoteFilterRejection(message)
            raise ProviderError(f"{kind} provider error: {message}")
        return response.get("payload", {})

    # -- llm ---------------------------------------------------------------

    def llm_complete(
        self, prompt: str, template_id: str, params: DecodingParams | None = None
    ) -> str:
        from .prompts import TEMPLATES

        if template_id not in TEMPLATES:
            raise ProviderInputError(f"unregistered template {template_id!r}")
        if not prompt.strip():
            raise ProviderInputError("empty prompt")
        if params is None:
            temp = 0.0 if TEMPLATES[template_id].parse_critical else self.temperature_creative
            params = DecodingParams(temperature=temp, seed=self.seed)
        payload = {"prompt": prompt, "params": params.to_payload()}
        out = self._invoke("llm", template_id, payload)
        text = out.get("text")
        if not isinstance(text, str):
            raise ProviderError("llm response missing text")
        return text

    # -- embeddings ----------------------------------------------------------

    def _check_vectors(self, raw: Any, expected: int) -> list[EmbeddingVector]:
        if not isinstance(raw, list) or len(raw) != expected:
            raise ProviderError(f"expected {expected} embedding vectors")
        vectors = []
        for values in raw:
            vec = EmbeddingVector(np.asarray(values, dtype=np.float64))
            if vec.dim != self.embedding_dim:
                raise ConfigurationError(
                    f"embedding dim {vec.dim} != configured {self.embedding_dim}"
                )
            vectors.append(vec)
        return vectors

    def embed_text(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ProviderInputError("embed_text requires at least one text")
        out = self._invoke("embedding", None, {"texts": list(texts)})
        return self._check_vectors(out.get("vectors"), len(texts))

    def embed_image(self, frames: list[Path | str]) -> list[EmbeddingVector]:
        if not frames:
            raise ProviderInputError("embed_image requires at least one frame")
        refs = [FileRef.for_path(p, "png").to_payload(self.inline_files) for p in frames]
        out = self._invoke("embedding", None, {"frames": refs})
        return self._check_vectors(out.get("vectors"), len(frames))

    # -- speech ---------------------------------------------------------------

    def transcribe(self, audio_path: Path | str) -> list[TranscriptWord]:
        ref = FileRef.for_path(audio_path, "wav").to_payload(self.inline_files)
        out = self._invoke("asr", None, {"audio": ref, "sample_rate": self.sample_rate})
        words = [
            TranscriptWord(
                text=w["text"],
                span=TimeSpan(float(w["start_s"]), float(w["end_s"])),
                confidence=float(w.get("confidence", 1.0)),
            )
            for w in out.get("words", [])
        ]
        return validate_transcript(words)

    def detect_voice_activity(self, audio_path: Path | str) -> list[VadSegment]:
        ref = FileRef.for_path(audio_path, "wav").to_payload(self.inline_files)
        out = self._invoke("vad", None, {"audio": ref, "sample_rate": self.sample_rate})
        segments = [
            VadSegment(TimeSpan(float(s["start_s"]), float(s["end_s"])), bool(s["is_speech"]))
            for s in out.get("segments", [])
        ]
        return validate_vad(segments)

    def synthesize_speech(self, text: str, voice_id: str) -> Waveform:
        if not text.strip():
            raise ProviderInputError("empty text for speech synthesis")
        payload = {"text": text, "voice_id": voice_id, "sample_rate": self.sample_rate}
        out = self._invoke("tts", None, payload)
        return self._decode_audio(out)

    def generate_music(self, description: str, duration_s: float) -> Waveform:
        if duration_s <= 0:
            raise ProviderInputError("music duration must be positive")
        payload = {
            "description": description,
            "duration_s": duration_s,
            "sample_rate": self.sample_rate,
        }
        out = self._invoke("music", None, payload)
        wave = self._decode_audio(out)
        if abs(len(wave.samples) - duration_s * wave.sample_rate) > 1:
            raise ProviderError(
                f"music length {wave.duration_s:.3f}s != requested {duration_s:.3f}s"
            )
        return wave

    def separate_vocals(self, audio: Waveform) -> Waveform:
        from ..audio import wav_bytes

        ref = FileRef.for_bytes(wav_bytes(audio), "wav").to_payload(True)
        out = self._invoke("separation", None, {"audio": ref, "sample_rate": audio.sample_rate})
        return self._decode_audio(out)

    def ocr_has_text(self, frame_path: Path | str) -> bool:
        ref = FileRef.for_path(frame_path, "png").to_payload(self.inline_files)
        out = self._invoke("ocr", None, {"frame": ref})
        value = out.get("has_text")
        if not isinstance(value, bool):
            raise ProviderError("ocr response missing has_text boolean")
        return value

    @staticmethod
    def _decode_audio(payload: dict) -> Waveform:
        if "audio_b64" not in payload:
            raise ProviderError("audio response missing audio_b64")
        return waveform_from_wav_bytes(base64.b64decode(payload["audio_b64"]))
