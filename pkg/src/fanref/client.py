"""Chat-completion transport and batched tagging with retries.

Any endpoint speaking the common chat-completion JSON shape works:
``{model, messages: [{role, content}], temperature, max_tokens, seed?}``
with the completion read from the first choice's message content.
Credentials come from the environment variable named in the config.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .ingest import GroundedComment
from .lexicon import Lexicon, lexicon_spans
from .prompts import (
    STATUS_ALIGNMENT_FAILED,
    STATUS_NO_TARGET,
    FewShotExample,
    PromptCondition,
    WpMode,
    build_explanation_prompt,
    build_prompt,
    parse_model_output,
    temperature_for,
)
from .tagging import TaggedComment, render_tagged

log = logging.getLogger(__name__)


class EndpointError(RuntimeError):
    """The endpoint failed to produce a completion."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff: float = 1.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    credential_env: str | None = None
    max_tokens: int = 512
    timeout: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "EndpointConfig":
        retry = d.get("retry", {})
        return cls(
            base_url=d["base_url"],
            model=d["model"],
            credential_env=d.get("credential_env"),
            max_tokens=int(d.get("max_tokens", 512)),
            timeout=float(d.get("timeout", 30.0)),
            retry=RetryPolicy(
                max_attempts=int(retry.get("max_attempts", 3)),
                backoff=float(retry.get("backoff", 1.0)),
            ),
            seed=d.get("seed"),
        )


class ChatClient(Protocol):
    def complete(self, prompt: str, temperature: float, max_tokens: int, seed: int | None) -> str:
        """Return the completion text for one prompt; raise EndpointError on failure."""


class HttpChatClient:
    """Single-attempt HTTP transport; retries are orchestrated per comment."""

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._session = requests.Session()
        if config.credential_env:
            token = os.environ.get(config.credential_env)
            if token:
                self._session.headers["Authorization"] = f"Bearer {token}"
            else:
                log.warning("credential env %s is not set", config.credential_env)

    def complete(self, prompt: str, temperature: float, max_tokens: int, seed: int | None) -> str:
        body: dict = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        if seed is not None:
            body["seed"] = seed
        try:
            resp = self._session.post(self.config.base_url, json=body, timeout=self.config.timeout)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise EndpointError(f"chat completion failed: {exc}") from exc


class ScriptedChatClient:
    """Test double replaying canned responses (or exceptions) in order.

    When the script runs out, the last entry repeats.
    """

    def __init__(self, script: Sequence[str | Exception]):
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self._lock = threading.Lock()
        self._calls = 0

    @property
    def calls(self) -> int:
        return self._calls

    def complete(self, prompt: str, temperature: float, max_tokens: int, seed: int | None) -> str:
        with self._lock:
            idx = min(self._calls, len(self._script) - 1)
            self._calls += 1
        entry = self._script[idx]
        if isinstance(entry, Exception):
            raise entry
        return entry


_FIELD_RE = {
    "comment": "comment: ",
    "in_group": "in-group: ",
    "out_group": "out-group: ",
}


class MockTaggerClient:
    """Offline deterministic endpoint: tags the query comment by lexicon.

    Reads the comment and team names back out of the prompt's query block,
    applies the lexicon pass, and emits a well-formed three-section output.
    """

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    @staticmethod
    def _last_field(prompt: str, prefix: str) -> str:
        idx = prompt.rfind("\n" + prefix)
        if idx < 0:
            raise EndpointError(f"prompt query lacks field {prefix!r}")
        line = prompt[idx + 1 + len(prefix) :]
        return line.split("\n", 1)[0]

    def complete(self, prompt: str, temperature: float, max_tokens: int, seed: int | None) -> str:
        comment = self._last_field(prompt, _FIELD_RE["comment"])
        in_team = self._last_field(prompt, _FIELD_RE["in_group"])
        out_team = self._last_field(prompt, _FIELD_RE["out_group"])
        in_id = self._team_id(in_team)
        out_id = self._team_id(out_team)
        spans = lexicon_spans(comment, in_id, out_id, self.lexicon)
        tc = TaggedComment(comment_id="mock", text=comment, spans=spans)
        refs = [comment[s.start : s.end] for s in spans if not s.implicit]
        ref_blob = "[" + ", ".join(f"'{r}'" for r in refs) + "]"
        if refs:
            explanation = "Tagged team aliases and first-person plural forms by lexicon lookup."
        else:
            explanation = "No explicit or implicit references to tag."
        return f"{ref_blob}\n\nexplanation: {explanation}\n\ntarget: {render_tagged(tc)}"

    def _team_id(self, name: str) -> str:
        for team_id, entry in self.lexicon.teams.items():
            if name == team_id or name == entry.name:
                return team_id
        return name


@dataclass
class TagError:
    comment_id: str
    stage: str
    reason: str

    def to_dict(self) -> dict:
        return {"comment_id": self.comment_id, "stage": self.stage, "reason": self.reason}


@dataclass
class BatchResult:
    predictions: dict[str, TaggedComment]
    errors: list[TagError]
    attempts: dict[str, int]
    statuses: dict[str, str]


def _complete_with_retries(
    client: ChatClient,
    prompt: str,
    temperature: float,
    max_tokens: int,
    seed: int | None,
    retry: RetryPolicy,
    comment_id: str,
) -> tuple[str, int]:
    attempts = 0
    while True:
        attempts += 1
        try:
            return client.complete(prompt, temperature, max_tokens, seed), attempts
        except EndpointError as exc:
            if attempts >= retry.max_attempts:
                raise
            delay = retry.backoff * (2 ** (attempts - 1))
            log.warning("comment %s attempt %d failed (%s); retrying in %.1fs", comment_id, attempts, exc, delay)
            if delay > 0:
                time.sleep(delay)


def tag_batch(
    comments: Sequence[GroundedComment],
    condition: PromptCondition,
    examples: Sequence[FewShotExample],
    client: ChatClient,
    parallelism: int = 1,
    retry: RetryPolicy = RetryPolicy(),
    max_tokens: int = 512,
    seed: int | None = None,
    journal_path: str | Path | None = None,
) -> BatchResult:
    """Tag a batch of comments through a chat-completion client.

    Successful parses are appended to the journal as they complete, so an
    interrupted batch resumes by comment id. Per-comment failures are
    recorded in the error ledger and never abort the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    predictions: dict[str, TaggedComment] = {}
    errors: list[TagError] = []
    attempts: dict[str, int] = {}
    statuses: dict[str, str] = {}
    journal_lock = threading.Lock()
    journal_file = None
    if journal_path is not None:
        journal_path = Path(journal_path)
        if journal_path.exists():
            with open(journal_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        tc = TaggedComment.from_dict(json.loads(line))
                        predictions[tc.comment_id] = tc
        journal_file = open(journal_path, "a", encoding="utf-8")

    todo = [c for c in comments if c.id not in predictions]

    def work(comment: GroundedComment) -> None:
        prompt = build_prompt(comment, condition, examples)
        temperature = temperature_for(comment.wp, condition)
        try:
            raw, tries = _complete_with_retries(
                client, prompt, temperature, max_tokens, seed, retry, comment.id
            )
        except EndpointError:
            with journal_lock:
                attempts[comment.id] = retry.max_attempts
                errors.append(TagError(comment.id, stage="endpoint", reason="endpoint-failed"))
            return
        response = parse_model_output(raw, comment.segmented_body)
        with journal_lock:
            attempts[comment.id] = tries
            statuses[comment.id] = response.status
            if response.status in (STATUS_NO_TARGET, STATUS_ALIGNMENT_FAILED):
                errors.append(TagError(comment.id, stage="parse", reason=response.status))
                return
            tc = TaggedComment(comment_id=comment.id, text=comment.segmented_body, spans=response.spans)
            predictions[comment.id] = tc
            if journal_file is not None:
                journal_file.write(json.dumps(tc.to_dict(), ensure_ascii=False) + "\n")
                journal_file.flush()

    try:
        if parallelism == 1:
            for comment in todo:
                work(comment)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                list(pool.map(work, todo))
    finally:
        if journal_file is not None:
            journal_file.close()

    errors.sort(key=lambda e: e.comment_id)
    return BatchResult(predictions=predictions, errors=errors, attempts=attempts, statuses=statuses)


def generate_explanations(
    tasks: Sequence[tuple[GroundedComment, TaggedComment]],
    client: ChatClient,
    examples: Sequence[FewShotExample],
    condition: PromptCondition = PromptCondition(wp_mode=WpMode.NUMERIC),
    max_tokens: int = 256,
    seed: int | None = 1,
    retry: RetryPolicy = RetryPolicy(),
    out_path: str | Path | None = None,
) -> tuple[dict[str, str], list[TagError]]:
    """Generate one explanation per gold-tagged comment.

    The endpoint is prompted with the gold target and reference list and
    asked for the explanation section only. With ``out_path`` each
    explanation is appended as ``{comment_id, explanation}`` JSON-lines as
    it arrives, keyed for joining back onto the gold records.
    """
    explanations: dict[str, str] = {}
    errors: list[TagError] = []
    out_file = open(out_path, "a", encoding="utf-8") if out_path is not None else None
    try:
        for grounded, tagged in tasks:
            prompt = build_explanation_prompt(grounded, tagged, condition, examples)
            try:
                raw, _ = _complete_with_retries(
                    client, prompt, 1.0, max_tokens, seed, retry, grounded.id
                )
            except EndpointError:
                errors.append(TagError(grounded.id, stage="endpoint", reason="endpoint-failed"))
                continue
            text = raw.strip()
            # Strip a leading echoed label if the model repeated it.
            label = "explanation:"
            if text.lower().startswith(label):
                text = text[len(label) :].strip()
            explanations[grounded.id] = text
            if out_file is not None:
                out_file.write(
                    json.dumps({"comment_id": grounded.id, "explanation": text}, ensure_ascii=False)
                    + "\n"
                )
                out_file.flush()
    finally:
        if out_file is not None:
            out_file.close()
    return explanations, errors
