"""Provider-agnostic completion clients with deterministic fixture replay.

Every call is keyed by a stable digest of (prompt, settings). A transcript
maps digests to recorded responses: record mode appends to it while a live
or mock provider answers; replay mode answers from it alone, so a pipeline
run against a transcript is fully deterministic and offline.

The mock providers make every downstream stage testable without a network:
an identity editor, a scripted string replacer, a constant-score judge, and
a workflow mock that dispatches on the prompt shape and handles instruction
generation, editing, and judging in one object.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence


class ProviderError(Exception):
    """Transport or status failure after retries are exhausted."""


class ReplayMissError(ProviderError):
    """The request digest is absent from the replay transcript."""


class BudgetExceededError(ProviderError):
    """The configured call or token cap was hit."""


@dataclass(frozen=True)
class GenerationSettings:
    temperature: float = 0.2
    top_p: float = 0.95
    max_output_tokens: int = 4096

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


def request_digest(prompt: str, settings: GenerationSettings) -> str:
    """Stable hash of prompt plus settings; the replay key."""
    payload = json.dumps(
        {
            "prompt": prompt,
            "temperature": settings.temperature,
            "top_p": settings.top_p,
            "max_output_tokens": settings.max_output_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Transcript:
    """Ordered (digest, response) pairs; digests unique within a transcript."""

    def __init__(self, entries: Sequence[tuple[str, str]] = ()):
        self.entries: list[tuple[str, str]] = []
        self._by_digest: dict[str, str] = {}
        for digest, response in entries:
            self.record(digest, response)

    def __len__(self) -> int:
        return len(self.entries)

    def response_for(self, digest: str) -> str | None:
        return self._by_digest.get(digest)

    def record(self, digest: str, response: str) -> None:
        if digest in self._by_digest:
            return
        self._by_digest[digest] = response
        self.entries.append((digest, response))

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        transcript = cls()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                data = json.loads(line)
                transcript.record(data["digest"], data["response"])
        return transcript

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for digest, response in self.entries:
                handle.write(
                    json.dumps(
                        {"digest": digest, "response": response}, ensure_ascii=False
                    )
                )
                handle.write("\n")


class Provider(ABC):
    """A completion backend: prompt plus settings in, text out."""

    name = "provider"

    def complete(self, prompt: str, settings: GenerationSettings | None = None) -> str:
        if not prompt:
            raise ValueError("prompt must be nonempty")
        return self._complete(prompt, settings or GenerationSettings())

    @abstractmethod
    def _complete(self, prompt: str, settings: GenerationSettings) -> str: ...


def complete_many(
    provider: Provider,
    prompts: Sequence[str],
    settings: GenerationSettings | None = None,
    concurrency_limit: int = 1,
) -> list[str | Exception]:
    """Complete several prompts, results aligned with the input order.

    Per-prompt failures are returned in place of the text (the gather
    idiom), so one bad request does not lose the others.
    """
    if concurrency_limit < 1:
        raise ValueError("concurrency_limit must be >= 1")

    def run_one(prompt: str) -> str:
        return provider.complete(prompt, settings)

    results: list[str | Exception] = []
    with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        futures = [pool.submit(run_one, prompt) for prompt in prompts]
        for future in futures:
            try:
                results.append(future.result())
            except Exception as exc:  # noqa: BLE001 - carried per item
                results.append(exc)
    return results


class ReplayProvider(Provider):
    """Answers only from a recorded transcript."""

    name = "replay"

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        digest = request_digest(prompt, settings)
        response = self.transcript.response_for(digest)
        if response is None:
            raise ReplayMissError(f"no transcript entry for digest {digest[:12]}…")
        return response


class RecordingProvider(Provider):
    """Wraps a provider, recording every exchange into a transcript.

    A digest already present in the transcript is answered from it without
    consulting the inner provider, which keeps record mode idempotent.
    """

    name = "recording"

    def __init__(
        self,
        inner: Provider,
        transcript: Transcript | None = None,
        path: str | Path | None = None,
    ):
        self.inner = inner
        self.transcript = transcript if transcript is not None else Transcript()
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        digest = request_digest(prompt, settings)
        with self._lock:
            cached = self.transcript.response_for(digest)
        if cached is not None:
            return cached
        response = self.inner.complete(prompt, settings)
        with self._lock:
            self.transcript.record(digest, response)
            if self.path is not None:
                self.transcript.save(self.path)
        return response


class BudgetedProvider(Provider):
    """Caps calls and prompt tokens across all requests."""

    name = "budgeted"

    def __init__(
        self,
        inner: Provider,
        max_calls: int | None = None,
        max_tokens: int | None = None,
    ):
        self.inner = inner
        self.max_calls = max_calls
        self.max_tokens = max_tokens
        self.calls = 0
        self.tokens = 0
        self._lock = threading.Lock()

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        prompt_tokens = len(prompt.split())
        with self._lock:
            if self.max_calls is not None and self.calls + 1 > self.max_calls:
                raise BudgetExceededError(f"call budget of {self.max_calls} exhausted")
            if self.max_tokens is not None and self.tokens + prompt_tokens > self.max_tokens:
                raise BudgetExceededError(f"token budget of {self.max_tokens} exhausted")
            self.calls += 1
            self.tokens += prompt_tokens
        return self.inner.complete(prompt, settings)


class HttpProvider(Provider):
    """Chat-completions endpoint client with bounded retries.

    The API key is read from the environment only; endpoint and model come
    from configuration. Retries use exponential backoff with jitter and are
    bounded: total attempts per request never exceed retries + 1.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "INSTREDIT_API_KEY",
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        session=None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = session
        self._sleep = sleep
        self.attempts_total = 0

    def _get_session(self):
        if self._session is None:
            import requests

            self._session = requests.Session()
        return self._session

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        import os

        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise ProviderError(
                f"no API key: set the {self.api_key_env} environment variable"
            )
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": settings.temperature,
            "top_p": settings.top_p,
            "max_tokens": settings.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff * (2 ** (attempt - 1))
                self._sleep(delay * (1.0 + random.random() * 0.25))
            self.attempts_total += 1
            try:
                response = self._get_session().post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except Exception as exc:  # transport failure: retry
                last_error = exc
                continue
            status = getattr(response, "status_code", 0)
            if status == 200:
                try:
                    data = response.json()
                    return data["choices"][0]["message"]["content"]
                except Exception as exc:
                    raise ProviderError(f"malformed response body: {exc}") from exc
            last_error = ProviderError(f"status {status} from {self.endpoint}")
            if status not in (408, 429, 500, 502, 503, 504):
                break  # not retryable
        raise ProviderError(
            f"request failed after {self.attempts_total} attempt(s): {last_error}"
        )


# --------------------------------------------------------------------------
# Mock providers

_CONTENT_MARKER = "Content: "
_INSTRUCTION_MARKER = "\nEditing Request: "
_EDITING_TAIL = "\nPlease return the complete content after editing."
_GENERATION_CONTENT_MARKER = "The content is:\n"
_JUDGE_HEADER = "Understanding Content Differences:"
_REPLACE_INSTRUCTION = re.compile(r"[Rr]eplace\s+['\"](.*?)['\"]\s+with\s+['\"](.*?)['\"]")
_TURN_COUNT = re.compile(r"Generate exactly (\d+) distinct editing requests")


def split_editing_prompt(prompt: str) -> tuple[str, str] | None:
    """(content, instruction) from an editing prompt, or None if not one.

    The instruction marker is searched from the right so content containing
    the marker text itself stays intact.
    """
    start = prompt.find(_CONTENT_MARKER)
    tail = prompt.rfind(_EDITING_TAIL)
    if start < 0 or tail < 0:
        return None
    marker = prompt.rfind(_INSTRUCTION_MARKER, start, tail)
    if marker < 0:
        return None
    content = prompt[start + len(_CONTENT_MARKER) : marker]
    instruction = prompt[marker + len(_INSTRUCTION_MARKER) : tail]
    return content, instruction


def apply_replace_instruction(content: str, instruction: str) -> str:
    """Apply a literal Replace 'a' with 'b' instruction; identity otherwise."""
    match = _REPLACE_INSTRUCTION.search(instruction)
    if not match:
        return content
    old, new = match.group(1), match.group(2)
    if not old:
        return content
    return content.replace(old, new)


class IdentityEditorProvider(Provider):
    """Returns the content segment of an editing prompt unchanged."""

    name = "identity"

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        parts = split_editing_prompt(prompt)
        if parts is None:
            return prompt
        return parts[0]


class ScriptedReplacerProvider(Provider):
    """Applies the literal replacement stated in the editing instruction."""

    name = "replacer"

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        parts = split_editing_prompt(prompt)
        if parts is None:
            return prompt
        content, instruction = parts
        return apply_replace_instruction(content, instruction)


class ConstantJudgeProvider(Provider):
    """Answers every prompt with one constant score."""

    name = "constant-judge"

    def __init__(self, score: int = 9):
        self.score = score

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        return str(self.score)


class CannedProvider(Provider):
    """Replays a fixed queue of responses, in order."""

    name = "canned"

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self._position = 0
        self._lock = threading.Lock()

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        with self._lock:
            if self._position >= len(self._responses):
                raise ProviderError("canned provider ran out of responses")
            response = self._responses[self._position]
            self._position += 1
            return response


def _pick_words(content: str, count: int) -> list[str]:
    seen: list[str] = []
    for token in content.split():
        word = token.strip("'\".,;:()[]{}<>`")
        if len(word) >= 4 and word.isalnum() and word not in seen:
            seen.append(word)
            if len(seen) == count:
                break
    return seen


class MockWorkflowProvider(Provider):
    """One deterministic mock for the whole pipeline.

    Dispatches on prompt shape: judge prompts get a score (constant, or
    spread deterministically over 1-10 from the request digest), editing
    prompts get the scripted replacement applied, generation prompts get
    tagged Replace instructions derived from the content.
    """

    name = "workflow"

    def __init__(self, judge_score: int | None = None):
        self.judge_score = judge_score

    def _complete(self, prompt: str, settings: GenerationSettings) -> str:
        if prompt.startswith(_JUDGE_HEADER):
            if self.judge_score is not None:
                return str(self.judge_score)
            digest = request_digest(prompt, settings)
            return str(int(digest[:8], 16) % 10 + 1)

        parts = split_editing_prompt(prompt)
        if parts is not None:
            content, instruction = parts
            return apply_replace_instruction(content, instruction)

        count_match = _TURN_COUNT.search(prompt)
        count = int(count_match.group(1)) if count_match else 1
        start = prompt.find(_GENERATION_CONTENT_MARKER)
        if start < 0:
            raise ProviderError("workflow mock cannot interpret this prompt")
        end = prompt.rfind("\n\nGenerate exactly")
        content = prompt[start + len(_GENERATION_CONTENT_MARKER) : end]
        words = _pick_words(content, count)
        if len(words) < count:
            raise ProviderError(
                f"content has only {len(words)} usable words, need {count}"
            )
        blocks = [
            f"<Edit Request>Replace '{word}' with '{word}ly'</Edit Request>"
            for word in words
        ]
        return "\n".join(blocks)


_PROVIDER_FACTORIES = {
    "identity": IdentityEditorProvider,
    "replacer": ScriptedReplacerProvider,
    "workflow": MockWorkflowProvider,
}


def make_provider(name: str, **http_options) -> Provider:
    """Build a provider from a configuration name.

    Known names: identity, replacer, workflow, constant:N (judge scoring N),
    and http (requires endpoint and model keyword options).
    """
    if name in _PROVIDER_FACTORIES:
        return _PROVIDER_FACTORIES[name]()
    if name.startswith("constant:"):
        return ConstantJudgeProvider(int(name.split(":", 1)[1]))
    if name == "http":
        missing = [key for key in ("endpoint", "model") if not http_options.get(key)]
        if missing:
            raise ValueError(f"http provider needs {', '.join(missing)}")
        allowed = {"endpoint", "model", "api_key_env", "retries", "backoff", "timeout"}
        options = {k: v for k, v in http_options.items() if k in allowed and v is not None}
        return HttpProvider(**options)
    raise ValueError(f"unknown provider {name!r}")
