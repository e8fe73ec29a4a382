"""Deterministic local provider: a pure function of each request payload.

Stands in for every model backend so pipelines, fixtures, and tests never
need network access or model weights. Transcripts and voice activity come
from a movie script (the synthetic movie generator emits one); everything
else is derived from the request content itself, so identical payloads
always yield byte-identical responses.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from ..audio import Waveform, wav_bytes
from . import prompts
from .base import (
    ProviderClient,
    ProviderInputError,
    error_envelope,
    fileref_from_payload,
    response_envelope,
)

_FILLER_WORDS = (
    "horizon", "echo", "shadow", "ember", "drift",
    "stone", "signal", "harbor", "relic", "mirage",
)

_INSTRUMENT_SETS = (
    "Cello, dulcimer, low woodwinds, brass ensemble",
    "Piano, strings, soft percussion, distant choir",
    "Synth pads, electric bass, taiko drums, solo violin",
    "Acoustic guitar, flute, upright bass, hand drums",
)
_KEYS = ("D minor", "A minor", "C major", "E minor", "G major")
_TEMPOS = ("Moderate to slow", "Slow and deliberate", "Driving and steady", "Building steadily")
_MOODS = ("Ominous with moments of somber reflection", "Hopeful yet restrained",
          "Tense and searching", "Wistful and expansive")
_ATMOSPHERES = ("Tense, foreboding", "Open and airy", "Claustrophobic, urgent", "Dreamlike, vast")

# Pixel fraction of near-white content above which a frame counts as
# carrying superimposed text.
_OCR_WHITE_LEVEL = 235
_OCR_TEXT_FRACTION = 0.005


@dataclass
class ProviderScript:
    """Ground truth a synthetic provider needs about one movie."""

    spoken_lines: list[str] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)  # {text, start_s, end_s, confidence}
    vad: list[dict] = field(default_factory=list)  # {start_s, end_s, is_speech}
    scene_colors: list[dict] = field(default_factory=list)  # {name, bgr}

    def to_dict(self) -> dict:
        return {
            "spoken_lines": self.spoken_lines,
            "transcript": self.transcript,
            "vad": self.vad,
            "scene_colors": self.scene_colors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderScript":
        return cls(
            spoken_lines=list(data.get("spoken_lines", [])),
            transcript=list(data.get("transcript", [])),
            vad=list(data.get("vad", [])),
            scene_colors=list(data.get("scene_colors", [])),
        )

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "ProviderScript":
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _digest_int(*parts: str) -> int:
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def _sentences(text: str) -> list[str]:
    out = []
    for raw in text.replace("\n", " ").split("."):
        s = raw.strip()
        if s:
            out.append(s + ".")
    return out


class SyntheticProvider(ProviderClient):
    def __init__(self, script: Optional[ProviderScript] = None, **kwargs) -> None:
        super().__init__(**kwargs)
        self.script = script or ProviderScript()

    # -- transport ----------------------------------------------------------

    def _call(self, kind: str, template_id: Optional[str], payload: dict) -> dict:
        handler = getattr(self, f"_handle_{kind}", None)
        if handler is None:
            return error_envelope(f"unsupported kind {kind}")
        return handler(template_id, payload)

    # -- llm -----------------------------------------------------------------

    def _handle_llm(self, template_id: Optional[str], payload: dict) -> dict:
        prompt = payload["prompt"]
        builders = {
            "plot-segmentation": self._segmentation_text,
            "keyword-extraction": self._keyword_text,
            "quote-selection": self._quote_selection_text,
            "voiceover-phrases": self._voiceover_text,
            "music-description": self._music_description_text,
        }
        builder = builders.get(template_id or "")
        if builder is None:
            return error_envelope(f"unknown template {template_id}")
        return response_envelope({"text": builder(prompt)})

    def _segmentation_text(self, prompt: str) -> str:
        n = prompts.parse_labelled_int(prompt, "Scene count") or 0
        synopsis = prompts.parse_block(prompt, "Synopsis")
        sentences = _sentences(synopsis) or ["A story unfolds."]
        lines = [sentences[i % len(sentences)] for i in range(n)]
        return "\n".join(f"{i + 1}. {line}" for i, line in enumerate(lines))

    def _keyword_text(self, prompt: str) -> str:
        subplot = prompts.parse_labelled_str(prompt, "Sub-plot").lower()
        tokens = ["".join(ch for ch in t if ch.isalpha()) for t in subplot.split()]
        tokens = [t for t in tokens if t]
        color_names = [c["name"] for c in self.script.scene_colors]
        keywords: list[str] = [t for t in tokens if t in color_names][:1]
        for token in sorted(set(tokens) - set(keywords), key=lambda t: (-len(t), t)):
            if len(keywords) == 5:
                break
            keywords.append(token)
        i = 0
        while len(keywords) < 5:
            filler = _FILLER_WORDS[(_digest_int(subplot) + i) % len(_FILLER_WORDS)]
            if filler not in keywords:
                keywords.append(filler)
            i += 1
        return ", ".join(keywords[:5])

    def _quote_selection_text(self, prompt: str) -> str:
        n = prompts.parse_labelled_int(prompt, "Select") or 0
        candidates = prompts.parse_list_items(prompt)
        spoken = set(self.script.spoken_lines)
        picked = [c for c in candidates if c in spoken]
        picked += [c for c in candidates if c not in spoken]
        return "\n".join(f"{i + 1}. {q}" for i, q in enumerate(picked[:n]))

    def _voiceover_text(self, prompt: str) -> str:
        n = prompts.parse_labelled_int(prompt, "Phrase count") or 0
        director = prompts.parse_labelled_str(prompt, "Director")
        month = prompts.parse_labelled_str(prompt, "Release month")
        synopsis = prompts.parse_block(prompt, "Synopsis")
        sentences = _sentences(synopsis) or ["A new world awaits."]
        phrases = []
        for i in range(n):
            seed = _digest_int(synopsis, str(i))
            motif = _FILLER_WORDS[seed % len(_FILLER_WORDS)]
            base = sentences[i % len(sentences)].rstrip(".")
            if i == 0:
                if n == 1:
                    phrases.append(f"From {director}, a vision arriving this {month}.")
                else:
                    phrases.append(f"From the vision of {director}, a story takes shape.")
            elif i == 1:
                phrases.append(f"This {month}, every {motif} finds its voice.")
            else:
                phrases.append(f"Beyond the {motif}, {base.lower()}.")
        return "\n".join(phrases)

    def _music_description_text(self, prompt: str) -> str:
        seed = _digest_int(prompt)
        return "\n".join(
            [
                f"Instruments: {_INSTRUMENT_SETS[seed % len(_INSTRUMENT_SETS)]}.",
                f"Key: {_KEYS[seed % len(_KEYS)]}.",
                f"Tempo: {_TEMPOS[seed % len(_TEMPOS)]}.",
                "Dynamics: Varied, with dynamic swells mirroring conflict.",
                "Texture: Layered, introducing one instrument at a time.",
                f"Mood: {_MOODS[seed % len(_MOODS)]}.",
                f"Atmosphere: {_ATMOSPHERES[seed % len(_ATMOSPHERES)]}.",
            ]
        )

    # -- embeddings ------------------------------------------------------------

    def _basis_vector(self, index: int) -> list[float]:
        vec = np.zeros(self.embedding_dim)
        vec[index % self.embedding_dim] = 1.0
        return vec.tolist()

    def _hashed_vector(self, seed: int) -> list[float]:
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.embedding_dim)
        return (vec / np.linalg.norm(vec)).tolist()

    def _handle_embedding(self, template_id: Optional[str], payload: dict) -> dict:
        color_names = [c["name"] for c in self.script.scene_colors]
        vectors = []
        if "texts" in payload:
            for text in payload["texts"]:
                lowered = text.lower()
                hit = next((i for i, name in enumerate(color_names) if name in lowered), None)
                if hit is not None:
                    vectors.append(self._basis_vector(hit))
                else:
                    vectors.append(self._hashed_vector(_digest_int("text", lowered)))
        elif "frames" in payload:
            for obj in payload["frames"]:
                ref = fileref_from_payload(obj)
                image = cv2.imdecode(np.frombuffer(ref.read(), np.uint8), cv2.IMREAD_COLOR)
                if image is None:
                    return error_envelope("frame decode failed")
                hit = self._nearest_scene_color(image)
                if hit is not None:
                    vectors.append(self._basis_vector(hit))
                else:
                    vectors.append(self._hashed_vector(_digest_int("image", ref.sha256)))
        else:
            return error_envelope("embedding payload needs texts or frames")
        return response_envelope({"vectors": vectors})

    def _nearest_scene_color(self, image: np.ndarray) -> Optional[int]:
        if not self.script.scene_colors:
            return None
        h, w = image.shape[:2]
        center = image[h // 4 : 3 * h // 4, w // 4 : 3 * w // 4]
        mean = center.reshape(-1, 3).mean(axis=0)
        dists = [
            float(np.linalg.norm(mean - np.asarray(c["bgr"], dtype=np.float64)))
            for c in self.script.scene_colors
        ]
        return int(np.argmin(dists))

    # -- speech/audio ------------------------------------------------------------

    def _handle_asr(self, template_id: Optional[str], payload: dict) -> dict:
        return response_envelope({"words": list(self.script.transcript)})

    def _handle_vad(self, template_id: Optional[str], payload: dict) -> dict:
        return response_envelope({"segments": list(self.script.vad)})

    def _handle_tts(self, template_id: Optional[str], payload: dict) -> dict:
        rate = int(payload["sample_rate"])
        wave = tone_speech(payload["text"], payload.get("voice_id", ""), rate)
        return response_envelope({"audio_b64": _b64(wav_bytes(wave))})

    def _handle_music(self, template_id: Optional[str], payload: dict) -> dict:
        rate = int(payload["sample_rate"])
        duration_s = float(payload["duration_s"])
        seed = _digest_int("music", payload.get("description", ""))
        n = int(round(duration_s * rate))
        t = np.arange(n, dtype=np.float64) / rate
        root = 110.0 * (2.0 ** ((seed % 12) / 12.0))
        wave = (
            0.12 * np.sin(2 * math.pi * root * t)
            + 0.08 * np.sin(2 * math.pi * root * 1.5 * t)
            + 0.06 * np.sin(2 * math.pi * root * 2.0 * t)
        )
        wave *= 0.8 + 0.2 * np.sin(2 * math.pi * 0.25 * t)
        out = Waveform(wave.astype(np.float32), rate)
        return response_envelope({"audio_b64": _b64(wav_bytes(out))})

    def _handle_separation(self, template_id: Optional[str], payload: dict) -> dict:
        # The synthetic mixes are authored as vocals over silence, so the
        # vocal stem is the input itself.
        ref = fileref_from_payload(payload["audio"])
        return response_envelope({"audio_b64": _b64(ref.read())})

    def _handle_ocr(self, template_id: Optional[str], payload: dict) -> dict:
        ref = fileref_from_payload(payload["frame"])
        image = cv2.imdecode(np.frombuffer(ref.read(), np.uint8), cv2.IMREAD_COLOR)
        if image is None:
            return error_envelope("frame decode failed")
        white = np.all(image >= _OCR_WHITE_LEVEL, axis=2)
        return response_envelope({"has_text": bool(white.mean() > _OCR_TEXT_FRACTION)})


WORD_S = 0.28
GAP_S = 0.06


def tone_speech(text: str, voice_id: str, sample_rate: int) -> Waveform:
    """Speech stand-in: one pitched tone burst per word, melody and base
    pitch derived from the text and voice id. Word k spans
    [k * (WORD_S + GAP_S), k * (WORD_S + GAP_S) + WORD_S]."""
    words = [w for w in text.split() if w.strip()] or ["..."]
    if not text.strip():
        raise ProviderInputError("empty text")
    base = 150.0 + (_digest_int("voice", voice_id) % 8) * 12.0
    n_word = int(WORD_S * sample_rate)
    n_gap = int(GAP_S * sample_rate)
    edge = max(1, int(0.01 * sample_rate))
    envelope = np.ones(n_word)
    envelope[:edge] = np.linspace(0.0, 1.0, edge)
    envelope[-edge:] = np.linspace(1.0, 0.0, edge)
    chunks = []
    for word in words:
        freq = base + (_digest_int("word", word.lower()) % 10) * 17.0
        t = np.arange(n_word, dtype=np.float64) / sample_rate
        chunks.append(0.35 * np.sin(2 * math.pi * freq * t) * envelope)
        chunks.append(np.zeros(n_gap))
    samples = np.concatenate(chunks)[: -n_gap or None]
    return Waveform(samples.astype(np.float32), sample_rate)


def _b64(raw: bytes) -> str:
    import base64

    return base64.b64encode(raw).decode("ascii")
