"""Provider clients: one uniform contract over llm/embedding/asr/vad/tts/
music/separation/ocr backends, with synthetic, record/replay, and HTTP
transports."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from ..config import ProviderConfig
from .base import (
    PROVIDER_KINDS,
    ConfigurationError,
    DecodingParams,
    EmbeddingVector,
    FixtureMissError,
    ProviderClient,
    ProviderError,
    ProviderInputError,
    QuoteFilterRejection,
    RetryableProviderError,
    TranscriptWord,
    VadSegment,
    request_digest,
)
from .http import HttpProvider
from .replay import FixtureStore, RecordingProvider, ReplayProvider
from .synthetic import ProviderScript, SyntheticProvider, tone_speech

__all__ = [
    "PROVIDER_KINDS",
    "ConfigurationError",
    "DecodingParams",
    "EmbeddingVector",
    "FixtureMissError",
    "FixtureStore",
    "HttpProvider",
    "ProviderClient",
    "ProviderError",
    "ProviderInputError",
    "ProviderScript",
    "QuoteFilterRejection",
    "RecordingProvider",
    "ReplayProvider",
    "RetryableProviderError",
    "SyntheticProvider",
    "TranscriptWord",
    "VadSegment",
    "build_provider",
    "request_digest",
    "tone_speech",
]


def build_provider(
    cfg: ProviderConfig,
    sample_rate: int,
    script: Optional[ProviderScript] = None,
) -> ProviderClient:
    """Assemble the provider stack described by the config."""
    common = dict(
        embedding_dim=cfg.embedding_dim,
        sample_rate=sample_rate,
        temperature_creative=cfg.temperature_creative,
        seed=cfg.seed,
    )
    if script is None and cfg.script_path:
        script = ProviderScript.load(Path(cfg.script_path))
    if cfg.mode == "synthetic":
        provider: ProviderClient = SyntheticProvider(script=script, **common)
    elif cfg.mode == "replay":
        if not cfg.fixtures_dir:
            raise ConfigurationError("replay mode requires fixtures_dir")
        provider = ReplayProvider(FixtureStore(cfg.fixtures_dir), **common)
    elif cfg.mode == "http":
        if not cfg.base_url:
            raise ConfigurationError("http mode requires base_url")
        provider = HttpProvider(
            cfg.base_url,
            timeout_s=cfg.timeout_s,
            max_retries=cfg.max_retries,
            backoff_base_s=cfg.backoff_base_s,
            auth_token_env=cfg.auth_token_env,
            **common,
        )
    else:
        raise ConfigurationError(f"unknown provider mode {cfg.mode!r}")
    if cfg.record:
        if not cfg.fixtures_dir:
            raise ConfigurationError("record mode requires fixtures_dir")
        if cfg.mode == "replay":
            raise ConfigurationError("cannot record from a replay provider")
        provider = RecordingProvider(provider, FixtureStore(cfg.fixtures_dir))
    return provider
