"""Chat-completion providers behind a single ``complete(request) -> str`` seam."""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .framework import CRITERION_IDS, Verdict

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4.1-2025-04-14"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class Variant(str, enum.Enum):
    PLAIN = "plain"
    WITH_FRAMEWORK = "framework"


@dataclass(frozen=True)
class RaterRequest:
    prompt_text: str
    variant: Variant
    images: tuple[tuple[str, bytes], ...] = ()
    model_name: str = DEFAULT_MODEL
    temperature: float | None = None
    seed: int | None = None
    purpose: str = "rate"  # "rate" | "generate"
    # which repetition of the same prompt this is; never sent to the API
    repetition: int = 0

    def digest(self) -> str:
        h = hashlib.sha256(self.prompt_text.encode())
        for label, data in self.images:
            h.update(label.encode())
            h.update(hashlib.sha256(data).digest())
        return h.hexdigest()


class ProviderError(Exception):
    def __init__(self, status: int | None, body: str):
        super().__init__(f"provider error {status}: {body[:200]}")
        self.status = status
        self.body = body


class ProviderUnreachable(ProviderError):
    def __init__(self, detail: str):
        super().__init__(None, detail)


class Provider(Protocol):
    deterministic: bool

    def complete(self, request: RaterRequest) -> str: ...


class ScriptedProvider:
    """Replays canned responses in order; the last one repeats once exhausted."""

    deterministic = True

    def __init__(self, responses: Sequence[str] | Callable[[RaterRequest, int], str]):
        self._responses = responses
        self._calls = 0
        self._lock = threading.Lock()
        self.requests: list[RaterRequest] = []

    @property
    def calls(self) -> int:
        return self._calls

    def complete(self, request: RaterRequest) -> str:
        with self._lock:
            index = self._calls
            self._calls += 1
            self.requests.append(request)
        if callable(self._responses):
            return self._responses(request, index)
        if not self._responses:
            raise ProviderError(500, "no scripted responses")
        return self._responses[min(index, len(self._responses) - 1)]


class MockProvider:
    """Deterministic stand-in for a real model.

    The answer depends only on ``seed``, the repetition index and the request
    content, so repeated runs produce byte-identical transcripts.
    """

    deterministic = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, request: RaterRequest) -> str:
        rng = random.Random(f"{self.seed}:{request.seed}:{request.repetition}:{request.digest()}")
        if request.purpose == "generate":
            return _mock_description(rng, request.prompt_text)
        verdict = rng.choices([Verdict.INCLUSIVE, Verdict.GIRL, Verdict.BOY], weights=[8, 1, 1])[0]
        if request.variant is Variant.PLAIN:
            return f"The project uses everyday characters and themes.\n{verdict.token}"
        lines = [f"{cid}: {rng.choice([0, 1, 1, 2, 2, 2, 3, 3, 4, 5])}" for cid in CRITERION_IDS]
        return "\n".join(lines) + f"\n{verdict.token}"


def _mock_description(rng: random.Random, prompt: str) -> str:
    topic = "a project"
    marker = "The general topic for the project should be: '"
    if marker in prompt:
        topic = prompt.split(marker, 1)[1].split("'", 1)[0]
    sprites = rng.sample(["Cat", "Robot", "Tree", "Star", "Ball", "Drum", "Pencil", "Planet"], 2)
    return (
        f"Project about {topic}: the {sprites[0]} and the {sprites[1]} take turns on a colourful backdrop. "
        f"Children use a forever loop and an if block to react to key presses."
    )


@dataclass
class OpenAIChatProvider:
    """OpenAI-compatible ``/chat/completions`` client with retry and backoff."""

    api_key: str
    model: str = DEFAULT_MODEL
    base_url: str = DEFAULT_BASE_URL
    temperature: float | None = None
    timeout: float = 120.0
    max_retries: int = 5
    backoff: float = 1.0
    concurrency: int = 4
    transcript_path: Path | None = None
    sleep: Callable[[float], None] = time.sleep
    transport: object | None = None
    deterministic: bool = field(default=False, init=False)

    def __post_init__(self):
        self._semaphore = threading.BoundedSemaphore(max(1, self.concurrency))
        self._transcript_lock = threading.Lock()

    def payload(self, request: RaterRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": request.prompt_text}]
        for _label, png in request.images:
            url = "data:image/png;base64," + base64.b64encode(png).decode("ascii")
            content.append({"type": "image_url", "image_url": {"url": url}})
        body: dict = {"model": request.model_name or self.model, "messages": [{"role": "user", "content": content}]}
        temperature = request.temperature if request.temperature is not None else self.temperature
        if temperature is not None:
            body["temperature"] = temperature
        if request.seed is not None:
            body["seed"] = request.seed
        return body

    def complete(self, request: RaterRequest) -> str:
        import httpx

        body = self.payload(request)
        headers = {"Authorization": f"Bearer {self.api_key}"}
        url = self.base_url.rstrip("/") + "/chat/completions"
        kwargs = {"timeout": self.timeout}
        if self.transport is not None:
            kwargs["transport"] = self.transport
        with self._semaphore, httpx.Client(**kwargs) as client:
            for attempt in range(self.max_retries + 1):
                try:
                    resp = client.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    if attempt == self.max_retries:
                        raise ProviderUnreachable(str(exc)) from exc
                    self._wait(attempt, f"transport error: {exc}")
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    if attempt == self.max_retries:
                        raise ProviderError(resp.status_code, resp.text)
                    self._wait(attempt, f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ProviderError(resp.status_code, resp.text)
                try:
                    text = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise ProviderError(resp.status_code, resp.text) from None
                self._log(request, text)
                return text if isinstance(text, str) else json.dumps(text)
        raise ProviderError(None, "retries exhausted")  # pragma: no cover

    def _wait(self, attempt: int, reason: str) -> None:
        delay = self.backoff * (2**attempt)
        logger.warning("provider %s; retrying in %.1fs", reason, delay)
        self.sleep(delay)

    def _log(self, request: RaterRequest, response: str) -> None:
        if self.transcript_path is None:
            return
        record = {
            "time": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "model": request.model_name or self.model,
            "variant": request.variant.value,
            "purpose": request.purpose,
            "prompt": request.prompt_text,
            "images": [{"label": label, "bytes": len(data)} for label, data in request.images],
            "response": response,
        }
        with self._transcript_lock, open(self.transcript_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
