"""Chat-completions-with-tools transport for external model endpoints."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import requests

from .errors import AgentTransportError
from .runner import AgentStep
from .tools import ToolSchema

DEFAULT_MAX_OUTPUT_TOKENS = 20048
DEFAULT_TEMPERATURE = 0.0
RETRIES = 3
BACKOFF_S = 1.0


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "RADBENCH_API_KEY"
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    timeout_s: float = 120.0

    @property
    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def llm_client_step(
    conversation: list[dict], schemas: list[ToolSchema], config: EndpointConfig
) -> AgentStep:
    """One request against a chat-completions endpoint.

    Retries transport failures with exponential backoff, then raises
    :class:`AgentTransportError`.  Malformed tool-call arguments from the
    model are passed through as-is so dispatch can score them as failed
    calls.
    """
    body = {
        "model": config.model,
        "messages": conversation,
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
    }
    if schemas:
        body["tools"] = [s.function_schema() for s in schemas]
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    url = config.base_url.rstrip("/") + "/chat/completions"

    last_error: Exception | None = None
    for attempt in range(RETRIES):
        try:
            response = requests.post(
                url, json=body, headers=headers, timeout=config.timeout_s
            )
            response.raise_for_status()
            return _parse_response(response.json())
        except (requests.RequestException, KeyError, ValueError) as exc:
            last_error = exc
            if attempt < RETRIES - 1:
                time.sleep(BACKOFF_S * 2**attempt)
    raise AgentTransportError(
        f"endpoint failed after {RETRIES} attempts: {last_error}", retries=RETRIES
    )


def _parse_response(data: dict) -> AgentStep:
    message = data["choices"][0]["message"]
    calls: list[tuple[str, dict]] = []
    for call in message.get("tool_calls") or []:
        function = call.get("function", {})
        raw = function.get("arguments", "{}")
        if isinstance(raw, dict):
            args: object = raw
        else:
            try:
                args = json.loads(raw)
            except (TypeError, json.JSONDecodeError):
                args = raw  # forwarded to dispatch, scored as a failed call
        calls.append((function.get("name", ""), args))
    usage = data.get("usage")
    token_usage = None
    if usage:
        token_usage = {
            "input": usage.get("prompt_tokens"),
            "output": usage.get("completion_tokens"),
        }
    return AgentStep(text=message.get("content"), tool_calls=calls, usage=token_usage)


@dataclass
class ExternalAgent:
    """Adapter making an endpoint look like a runner agent."""

    config: EndpointConfig

    def step(self, messages: list[dict], schemas: list[ToolSchema]) -> AgentStep:
        return llm_client_step(messages, schemas, self.config)
