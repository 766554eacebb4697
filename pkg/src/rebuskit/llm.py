"""Few-shot prompting of chat-completions endpoints, with a durable cache.

Every request is keyed by a digest of (model, decoding parameters, prompt);
responses land in an append-only JSON-lines cache, so re-running an
evaluation with a warm cache touches the network zero times and reproduces
the report byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import requests

from rebuskit.core import RebusError, RebusPuzzle
from rebuskit.evaluation import Report, aggregate, evaluate_example
from rebuskit.textio import (
    INSTRUCTION_LINE,
    KEY_PREFIX,
    REBUS_PREFIX,
    parse_generation,
    render_gold_generation,
    render_rebus_line,
)

# Our own format-adherence sentence, appended to the instruction when
# demonstrations are present. Configurable via FewShotPrompt.instruction.
ADHERENCE_SENTENCE = (
    "Attieniti rigorosamente al formato degli esempi precedenti nella tua risposta."
)

DEFAULT_DEMOS = 5
API_KEY_ENV = "REBUSKIT_API_KEY"


class InsufficientDemos(RebusError):
    """The train corpus has fewer verbalizable puzzles than demos requested."""


class TransportError(RebusError):
    """The endpoint could not be reached or kept failing transiently."""


class AuthRejected(RebusError):
    """The endpoint rejected our credentials (HTTP 401/403)."""


class BudgetExceeded(RebusError):
    """The configured request budget would be exceeded."""


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to send completion requests.

    ``endpoint`` is the base URL; the client posts to
    ``{endpoint}/chat/completions``. The bearer credential is read from the
    environment variable named by ``api_key_env``, never from flags.
    """

    endpoint: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 1024
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_attempts: int = 4
    backoff: float = 0.5
    max_requests: int | None = None


@dataclass(frozen=True)
class CompletionRecord:
    request_hash: str
    model: str
    temperature: float
    max_tokens: int
    response_text: str
    created: float
    status: int
    attempts: int


@dataclass(frozen=True)
class FewShotPrompt:
    """An instruction, demonstration pairs, and the query block."""

    instruction: str
    demonstrations: tuple[tuple[str, str], ...]
    query_block: str
    query_id: str

    @property
    def text(self) -> str:
        blocks = [self.instruction]
        for prompt_block, gold in self.demonstrations:
            blocks.append(prompt_block)
            blocks.append(gold)
        blocks.append(self.query_block)
        return "\n\n".join(blocks)


def request_hash(model: str, temperature: float, max_tokens: int, prompt: str) -> str:
    payload = json.dumps(
        {
            "model": model,
            "temperature": temperature,
            "max_tokens": max_tokens,
            "prompt": prompt,
        },
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSON-lines cache with an in-memory hash index."""

    def __init__(self, path):
        self.path = Path(path)
        self._index: dict[str, CompletionRecord] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                self._index[record["hash"]] = CompletionRecord(
                    request_hash=record["hash"],
                    model=record["model"],
                    temperature=record["temperature"],
                    max_tokens=record["max_tokens"],
                    response_text=record["response"],
                    created=record["created"],
                    status=record["status"],
                    attempts=record["attempts"],
                )

    def get(self, digest: str) -> CompletionRecord | None:
        with self._lock:
            return self._index.get(digest)

    def put(self, record: CompletionRecord) -> None:
        line = json.dumps(
            {
                "hash": record.request_hash,
                "model": record.model,
                "temperature": record.temperature,
                "max_tokens": record.max_tokens,
                "response": record.response_text,
                "created": record.created,
                "status": record.status,
                "attempts": record.attempts,
            },
            ensure_ascii=False,
        )
        with self._lock:
            self._index[record.request_hash] = record
            with open(self.path, "a", encoding="utf-8") as out:
                out.write(line + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._index)


def _http_transport(url: str, headers: dict, payload: dict, timeout: float):
    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    return resp.status_code, resp.text


class LlmClient:
    """Thread-safe completion client with retries, budget and cache."""

    def __init__(
        self,
        config: EndpointConfig,
        cache: ResponseCache | None = None,
        transport: Callable | None = None,
    ):
        self.config = config
        self.cache = cache
        self.transport = transport or _http_transport
        self._requests = 0
        self._lock = threading.Lock()

    @property
    def requests_sent(self) -> int:
        with self._lock:
            return self._requests

    def _take_budget(self, puzzle_id):
        with self._lock:
            limit = self.config.max_requests
            if limit is not None and self._requests >= limit:
                raise BudgetExceeded(
                    f"request budget {limit} exhausted (puzzle {puzzle_id})"
                )
            self._requests += 1

    def complete(self, prompt: str, puzzle_id: str | None = None) -> CompletionRecord:
        """Return the completion for ``prompt``, from cache when possible.

        Transient failures (connection errors, 429, 5xx) are retried with
        exponential backoff up to ``max_attempts``; 401/403 raise
        :class:`AuthRejected` immediately. Errors carry the puzzle id.
        """
        cfg = self.config
        digest = request_hash(cfg.model, cfg.temperature, cfg.max_tokens, prompt)
        if self.cache is not None:
            cached = self.cache.get(digest)
            if cached is not None:
                return cached

        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }

        last_error = None
        for attempt in range(1, cfg.max_attempts + 1):
            self._take_budget(puzzle_id)
            try:
                status, body = self.transport(url, headers, payload, cfg.timeout)
            except TransportError as exc:
                last_error = exc
                status = None
            if status == 200:
                try:
                    content = json.loads(body)["choices"][0]["message"]["content"]
                except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                    raise TransportError(
                        f"malformed response for puzzle {puzzle_id}: {exc}"
                    ) from exc
                record = CompletionRecord(
                    request_hash=digest,
                    model=cfg.model,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                    response_text=content,
                    created=time.time(),
                    status=status,
                    attempts=attempt,
                )
                if self.cache is not None:
                    self.cache.put(record)
                return record
            if status in (401, 403):
                raise AuthRejected(f"HTTP {status} for puzzle {puzzle_id}")
            if status is not None and not (status == 429 or status >= 500):
                raise TransportError(f"HTTP {status} for puzzle {puzzle_id}")
            if attempt < cfg.max_attempts:
                time.sleep(cfg.backoff * (2 ** (attempt - 1)))
        raise TransportError(
            f"gave up after {cfg.max_attempts} attempts (puzzle {puzzle_id})"
            + (f": {last_error}" if last_error else "")
        )


def prompt_block(puzzle: RebusPuzzle) -> str:
    """The rebus and key lines of one puzzle, without the instruction."""
    rebus = render_rebus_line(puzzle.first_pass)
    return f"{REBUS_PREFIX}{rebus}\n\n{KEY_PREFIX}{puzzle.key}"


def build_fewshot(
    train: Sequence[RebusPuzzle],
    query: RebusPuzzle,
    seed: int,
    n_demos: int = DEFAULT_DEMOS,
    instruction: str | None = None,
) -> FewShotPrompt:
    """Assemble the few-shot prompt for one query puzzle.

    Demonstrations are a seeded, order-stable pick from the train corpus and
    never include the query puzzle itself; with the same seed, all queries
    absent from the train set share the same demonstrations.
    """
    pool = sorted(train, key=lambda p: p.id)
    indices = list(range(len(pool)))
    random.Random(seed).shuffle(indices)
    demos = []
    for i in indices:
        if pool[i].id == query.id:
            continue
        demos.append(pool[i])
        if len(demos) == n_demos:
            break
    if len(demos) < n_demos:
        raise InsufficientDemos(
            f"need {n_demos} demonstrations, found {len(demos)} usable train puzzles"
        )
    if instruction is None:
        instruction = f"{INSTRUCTION_LINE} {ADHERENCE_SENTENCE}"
    return FewShotPrompt(
        instruction=instruction,
        demonstrations=tuple(
            (prompt_block(p), render_gold_generation(p)) for p in demos
        ),
        query_block=prompt_block(query),
        query_id=query.id,
    )


def run_eval(
    test: Sequence[RebusPuzzle],
    train: Sequence[RebusPuzzle],
    client: LlmClient,
    seed: int,
    jobs: int = 4,
    breakdown: bool = False,
) -> Report:
    """Prompt, parse and score every test puzzle; aggregate into a report.

    Per-example transport failures are scored as zeros (the parse carries a
    diagnostic) rather than aborting the batch. Output order is by puzzle id,
    so reports are byte-stable given a warm cache. With ``breakdown``, test
    examples are labelled seen/unseen against the train corpus and the report
    carries per-subset word accuracies.
    """
    ordered = sorted(test, key=lambda p: p.id)
    prompts = {p.id: build_fewshot(train, p, seed) for p in ordered}

    def run_one(puzzle: RebusPuzzle):
        try:
            record = client.complete(prompts[puzzle.id].text, puzzle_id=puzzle.id)
            parsed = parse_generation(record.response_text, shape=puzzle)
        except RebusError as exc:
            parsed = parse_generation("", shape=puzzle)
            parsed = replace(
                parsed, diagnostics=parsed.diagnostics + (f"completion failed: {exc}",)
            )
        return evaluate_example(puzzle, parsed)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        evaluated = list(pool.map(run_one, ordered))

    labels = fp_vocab = s_vocab = None
    if breakdown:
        from rebuskit.dataset import split_id_ood, train_vocabularies

        test_id, test_ood, _ = split_id_ood(train, ordered)
        labels = {p.id: "id" for p in test_id}
        labels.update({p.id: "ood" for p in test_ood})
        vocabs = train_vocabularies(train)
        fp_vocab, s_vocab = vocabs.fp_words, vocabs.solution_words
    return aggregate(evaluated, labels, fp_vocab, s_vocab)
