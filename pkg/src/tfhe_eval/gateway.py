"""Provider-agnostic chat-completion gateway with per-call token accounting.

Two HTTP wire dialects (openai_style, anthropic_style) plus a scripted mock
provider for deterministic tests. Credentials are resolved from environment
variables at call time and never stored in configs.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

log = logging.getLogger(__name__)

Transport = Callable[[str, dict, dict, float], tuple[int, dict]]

OPENAI_STYLE = "openai_style"
ANTHROPIC_STYLE = "anthropic_style"
MOCK = "mock"

# Sampling defaults follow the evaluation protocol; override per experiment.
DEFAULT_TEMPERATURE = 0.9
DEFAULT_TOP_P = 0.85


class GatewayError(Exception):
    """Base class for completion failures surfaced to the orchestrator."""


class AuthenticationError(GatewayError):
    pass


class ProviderError(GatewayError):
    pass


class TransportError(GatewayError):
    """Network-level failure; retried up to max_retries."""


class ScriptExhausted(GatewayError):
    """The mock provider ran out of scripted responses."""


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    text: str


@dataclass(frozen=True)
class Conversation:
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("conversation must be non-empty")
        body = [m for m in self.messages if m.role != "system"]
        for m in self.messages[len(self.messages) - len(body):]:
            if m.role == "system":
                raise ValueError("system messages must lead the conversation")
        expected = "user"
        for m in body:
            if m.role != expected:
                raise ValueError(
                    f"roles must alternate user/assistant; got {m.role!r} "
                    f"where {expected!r} was expected"
                )
            expected = "assistant" if expected == "user" else "user"

    def with_message(self, role: str, text: str) -> "Conversation":
        return Conversation(self.messages + (Message(role, text),))


def conversation(*pairs: tuple[str, str]) -> Conversation:
    return Conversation(tuple(Message(role, text) for role, text in pairs))


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    provider_kind: str = MOCK
    endpoint: str = ""
    credential_ref: str = ""
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_output_tokens: int = 4096
    request_timeout: float = 120.0
    max_retries: int = 2
    retry_backoff: float = 0.5
    script: tuple[str, ...] = field(default=())
    verbose_logging: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.provider_kind not in (OPENAI_STYLE, ANTHROPIC_STYLE, MOCK):
            raise ValueError(f"unknown provider_kind {self.provider_kind!r}")


def mock_tokens(text: str) -> int:
    """Deterministic mock token count: whitespace-separated words."""
    return len(text.split())


class MockProvider:
    """Replays a fixed script of assistant responses, one per call.

    The cursor is lock-protected so a provider instance may be shared; the
    orchestrator still builds one instance per run for isolation.
    """

    def __init__(self, script: Sequence[str], model_id: str = "mock"):
        if not script:
            raise ValueError("mock script must be non-empty")
        self._script = list(script)
        self._cursor = 0
        self._lock = threading.Lock()
        self.model_id = model_id

    def complete(self, conv: Conversation) -> tuple[str, Usage]:
        with self._lock:
            if self._cursor >= len(self._script):
                raise ScriptExhausted(
                    f"mock script for {self.model_id} exhausted after "
                    f"{len(self._script)} responses"
                )
            reply = self._script[self._cursor]
            self._cursor += 1
        usage = Usage(
            input_tokens=sum(mock_tokens(m.text) for m in conv.messages),
            output_tokens=mock_tokens(reply),
        )
        return reply, usage


def mock_provider(script: Sequence[str], model_id: str = "mock") -> MockProvider:
    return MockProvider(script, model_id)


def _redact(headers: dict) -> dict:
    return {
        key: ("<redacted>" if key.lower() in ("authorization", "x-api-key") else value)
        for key, value in headers.items()
    }


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    try:
        body = response.json()
    except ValueError:
        body = {"raw": response.text}
    return response.status_code, body


def _resolve_credential(config: ModelConfig) -> str:
    if not config.credential_ref:
        raise AuthenticationError(
            f"model {config.model_id} has no credential_ref configured"
        )
    secret = os.environ.get(config.credential_ref)
    if not secret:
        raise AuthenticationError(
            f"environment variable {config.credential_ref} is not set"
        )
    return secret


class _HttpProvider:
    def __init__(self, config: ModelConfig, transport: Transport | None = None):
        self.config = config
        self.transport = transport or _requests_transport

    def complete(self, conv: Conversation) -> tuple[str, Usage]:
        config = self.config
        url, headers, payload = self._request(conv)
        if config.verbose_logging:
            log.info("POST %s headers=%s payload=%s", url, _redact(headers), payload)
        attempts = config.max_retries + 1
        last_error: GatewayError | None = None
        for attempt in range(attempts):
            if attempt:
                delay = config.retry_backoff * (2 ** (attempt - 1))
                if delay:
                    time.sleep(delay)
            try:
                status, body = self.transport(
                    url, headers, payload, config.request_timeout
                )
            except TransportError as exc:
                last_error = exc
                continue
            if status in (429,) or status >= 500:
                last_error = ProviderError(f"provider returned HTTP {status}: {body}")
                continue
            if status in (401, 403):
                raise AuthenticationError(f"provider returned HTTP {status}")
            if status >= 400:
                raise ProviderError(f"provider returned HTTP {status}: {body}")
            if config.verbose_logging:
                log.info("response %s %s", status, body)
            return self._parse(body)
        assert last_error is not None
        raise last_error

    def _request(self, conv: Conversation) -> tuple[str, dict, dict]:
        raise NotImplementedError

    def _parse(self, body: dict) -> tuple[str, Usage]:
        raise NotImplementedError


class OpenAIStyleProvider(_HttpProvider):
    def _request(self, conv: Conversation):
        config = self.config
        headers = {
            "Authorization": f"Bearer {_resolve_credential(config)}",
            "Content-Type": "application/json",
        }
        payload = {
            "model": config.model_id,
            "messages": [
                {"role": m.role, "content": m.text} for m in conv.messages
            ],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
        }
        return config.endpoint, headers, payload

    def _parse(self, body: dict) -> tuple[str, Usage]:
        try:
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            return text, Usage(
                int(usage.get("prompt_tokens", 0)),
                int(usage.get("completion_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {body}") from exc


class AnthropicStyleProvider(_HttpProvider):
    def _request(self, conv: Conversation):
        config = self.config
        headers = {
            "x-api-key": _resolve_credential(config),
            "anthropic-version": "2023-06-01",
            "Content-Type": "application/json",
        }
        system = "\n\n".join(m.text for m in conv.messages if m.role == "system")
        payload = {
            "model": config.model_id,
            "messages": [
                {"role": m.role, "content": m.text}
                for m in conv.messages
                if m.role != "system"
            ],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
        }
        if system:
            payload["system"] = system
        return config.endpoint, headers, payload

    def _parse(self, body: dict) -> tuple[str, Usage]:
        try:
            blocks = [b["text"] for b in body["content"] if b.get("type", "text") == "text"]
            usage = body.get("usage", {})
            return "".join(blocks), Usage(
                int(usage.get("input_tokens", 0)),
                int(usage.get("output_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {body}") from exc


def build_provider(config: ModelConfig, transport: Transport | None = None):
    """Instantiate the provider for a model config.

    Mock providers get a fresh script cursor per call site, which keeps
    concurrent runs isolated and replays deterministic.
    """
    if config.provider_kind == MOCK:
        return MockProvider(config.script, config.model_id)
    if config.provider_kind == OPENAI_STYLE:
        return OpenAIStyleProvider(config, transport)
    if config.provider_kind == ANTHROPIC_STYLE:
        return AnthropicStyleProvider(config, transport)
    raise ValueError(f"unknown provider_kind {config.provider_kind!r}")


def complete(
    config: ModelConfig,
    conv: Conversation,
    provider=None,
    transport: Transport | None = None,
) -> tuple[str, Usage]:
    """One chat completion: the assistant text verbatim plus reported usage.

    The conversation is never mutated; callers own history construction.
    """
    if provider is None:
        provider = build_provider(config, transport)
    return provider.complete(conv)


def sampling_overrides(config: ModelConfig, temperature=None, top_p=None) -> ModelConfig:
    updated = config
    if temperature is not None:
        updated = replace(updated, temperature=temperature)
    if top_p is not None:
        updated = replace(updated, top_p=top_p)
    return updated
