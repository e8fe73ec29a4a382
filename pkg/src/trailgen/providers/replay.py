"""Record/replay fixture store keyed by request digest.

Live (or synthetic) responses can be captured into a fixture directory;
replay-only mode then serves them back hermetically, and any unseen request
is a hard failure so tests can never silently fall through to a backend.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .base import FixtureMissError, ProviderClient, request_digest


class FixtureStore:
    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def save(self, digest: str, request_envelope: dict, response_envelope: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        record = {"request": request_envelope, "response": response_envelope}
        self.path_for(digest).write_text(
            json.dumps(record, indent=2, sort_keys=True), encoding="utf-8"
        )

    def load(self, digest: str) -> Optional[dict]:
        path = self.path_for(digest)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response"]


class RecordingProvider(ProviderClient):
    """Wraps another provider, persisting every response it returns."""

    def __init__(self, inner: ProviderClient, store: FixtureStore) -> None:
        super().__init__(
            embedding_dim=inner.embedding_dim,
            sample_rate=inner.sample_rate,
            inline_files=inner.inline_files,
            temperature_creative=inner.temperature_creative,
            seed=inner.seed,
        )
        self.inner = inner
        self.store = store

    def _call(self, kind: str, template_id: str | None, payload: dict) -> dict:
        digest = request_digest(kind, template_id, payload)
        response = self.inner._call(kind, template_id, payload)
        self.store.save(
            digest,
            {"kind": kind, "template_id": template_id, "payload": _strip_blobs(payload)},
            response,
        )
        return response


class ReplayProvider(ProviderClient):
    """Serves recorded fixtures only; a miss aborts the run."""

    def __init__(self, store: FixtureStore, **kwargs) -> None:
        super().__init__(**kwargs)
        self.store = store

    def _call(self, kind: str, template_id: str | None, payload: dict) -> dict:
        digest = request_digest(kind, template_id, payload)
        response = self.store.load(digest)
        if response is None:
            raise FixtureMissError(
                f"no fixture for {kind} request {digest[:12]}… in {self.store.root}"
            )
        return response


def _strip_blobs(value):
    """Drop inline binary data from the stored request copy; the digest
    already pins the content."""
    if isinstance(value, dict):
        return {k: ("<inline>" if k == "data_b64" else _strip_blobs(v)) for k, v in value.items()}
    if isinstance(value, list):
        return [_strip_blobs(v) for v in value]
    return value
