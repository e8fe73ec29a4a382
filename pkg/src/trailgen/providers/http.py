"""HTTP transport: posts the request envelope to one route per kind."""

from __future__ import annotations

import logging
import os
import time
from typing import Optional

import httpx

from .base import ProviderClient, ProviderError, RetryableProviderError

log = logging.getLogger(__name__)


class HttpProvider(ProviderClient):
    """Client for remote provider endpoints (``POST {base_url}/{kind}``).

    Transport failures and 5xx responses are retried with exponential
    backoff; after ``max_retries`` failures the call aborts. Remote mode
    inlines audio/frames as base64.
    """

    def __init__(
        self,
        base_url: str,
        *,
        kind_urls: Optional[dict[str, str]] = None,
        timeout_s: float = 30.0,
        max_retries: int = 3,
        backoff_base_s: float = 0.5,
        auth_token_env: str = "TRAILGEN_PROVIDER_TOKEN",
        client: Optional[httpx.Client] = None,
        **kwargs,
    ) -> None:
        kwargs.setdefault("inline_files", True)
        super().__init__(**kwargs)
        self.base_url = base_url.rstrip("/")
        self.kind_urls = kind_urls or {}
        self.timeout_s = timeout_s
        self.max_retries = max(1, max_retries)
        self.backoff_base_s = backoff_base_s
        headers = {}
        token = os.environ.get(auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(headers=headers, timeout=timeout_s)

    def _url_for(self, kind: str) -> str:
        return self.kind_urls.get(kind, f"{self.base_url}/{kind}")

    def _call(self, kind: str, template_id: str | None, payload: dict) -> dict:
        envelope = {"kind": kind, "template_id": template_id, "payload": payload}
        url = self._url_for(kind)
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if attempt:
                delay = self.backoff_base_s * (2 ** (attempt - 1))
                if delay > 0:
                    time.sleep(delay)
            try:
                response = self._client.post(url, json=envelope)
            except httpx.HTTPError as exc:
                last_error = RetryableProviderError(f"{kind} transport failure: {exc}")
                log.warning("provider %s attempt %d failed: %s", kind, attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = RetryableProviderError(
                    f"{kind} server error {response.status_code}"
                )
                log.warning(
                    "provider %s attempt %d got %d", kind, attempt + 1, response.status_code
                )
                continue
            if response.status_code >= 400:
                raise ProviderError(f"{kind} request rejected ({response.status_code})")
            return response.json()
        assert last_error is not None
        raise last_error
