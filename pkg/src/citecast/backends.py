"""LLM backends: transports, strict verdict parsing, retries, and costs.

A backend is a config plus a transport. The transport sends one prompt
and returns raw text with token counts; everything above it (parsing,
retry with backoff, cost accounting) is backend-agnostic. A deterministic
mock transport stands in for a live endpoint in tests and offline runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence

from citecast.prompting import PromptBundle


class Verdict(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


class AmbiguousResponse(ValueError):
    """Model output did not reduce to a single YES or NO."""


class TransportError(RuntimeError):
    """Request-level failure: network, HTTP status, bad response shape."""


class BackendConfigError(ValueError):
    """Backend profile file is malformed."""


class PredictionIOError(ValueError):
    """Prediction file is malformed."""


class PredictionFailed(RuntimeError):
    """All attempts for one record exhausted.

    Carries what was consumed so batch accounting stays truthful even
    for failures.
    """

    def __init__(
        self,
        record_id: str,
        attempts: int,
        cause: Exception,
        input_tokens: int = 0,
        output_tokens: int = 0,
    ) -> None:
        super().__init__(
            f"prediction failed for {record_id!r} after {attempts} attempts: {cause}"
        )
        self.record_id = record_id
        self.attempts = attempts
        self.cause = cause
        self.input_tokens = input_tokens
        self.output_tokens = output_tokens


@dataclass(frozen=True)
class BackendConfig:
    """One backend profile.

    Prices are per 1000 tokens in the provider's billing currency;
    currency_rate_to_usd is how many billing units buy one USD, so USD
    pricing uses rate 1.0. The API credential is read from the
    environment variable named by api_key_env and never stored here.
    """

    name: str
    endpoint: str
    model_id: str = ""
    price_per_1k_input_tokens: float = 0.0
    price_per_1k_output_tokens: float = 0.0
    currency_rate_to_usd: float = 1.0
    max_retries: int = 2
    backoff_base: float = 0.5
    backoff_cap: float = 30.0
    max_in_flight: int = 4
    timeout: float = 60.0
    api_key_env: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise BackendConfigError("backend name must be nonempty")
        if self.max_retries < 0:
            raise BackendConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise BackendConfigError("max_in_flight must be >= 1")
        if self.currency_rate_to_usd <= 0:
            raise BackendConfigError("currency_rate_to_usd must be positive")

    @property
    def max_attempts(self) -> int:
        return self.max_retries + 1

    def api_key(self) -> str | None:
        env_name = self.api_key_env or f"{self.name.upper().replace('-', '_')}_API_KEY"
        return os.environ.get(env_name)


@dataclass(frozen=True)
class Prediction:
    """Parsed verdict for one record, with per-record accounting.

    Token counts and cost cover every attempt made for the record, not
    just the final one. latency is wall seconds and is the only
    nondeterministic field.
    """

    record_id: str
    verdict: Verdict
    raw_text: str
    input_tokens: int
    output_tokens: int
    cost_usd: float
    attempts: int
    latency: float = 0.0


@dataclass(frozen=True)
class FailedPrediction:
    """Terminal failure for one record inside a batch."""

    record_id: str
    error: str
    attempts: int
    input_tokens: int = 0
    output_tokens: int = 0
    cost_usd: float = 0.0
    latency: float = 0.0


@dataclass
class UsageLedger:
    """Additive usage totals for a run."""

    total_requests: int = 0
    total_retries: int = 0
    total_input_tokens: int = 0
    total_output_tokens: int = 0
    total_cost_usd: float = 0.0
    wall_time: float = 0.0

    def add(self, other: UsageLedger) -> UsageLedger:
        return UsageLedger(
            total_requests=self.total_requests + other.total_requests,
            total_retries=self.total_retries + other.total_retries,
            total_input_tokens=self.total_input_tokens + other.total_input_tokens,
            total_output_tokens=self.total_output_tokens + other.total_output_tokens,
            total_cost_usd=round(self.total_cost_usd + other.total_cost_usd, 6),
            wall_time=self.wall_time + other.wall_time,
        )

    def record(self, result: Prediction | FailedPrediction) -> None:
        self.total_requests += 1
        self.total_retries += result.attempts - 1
        self.total_input_tokens += result.input_tokens
        self.total_output_tokens += result.output_tokens
        self.total_cost_usd = round(self.total_cost_usd + result.cost_usd, 6)


@dataclass(frozen=True)
class TransportReply:
    """Raw model output plus the token counts the provider reported."""

    text: str
    input_tokens: int
    output_tokens: int


class Transport(Protocol):
    def send(self, prompt: str) -> TransportReply: ...


_YES = "yes"
_NO = "no"


def parse_verdict(raw: str) -> Verdict:
    """Strictly reduce model output to a verdict.

    The first whitespace-separated token, with trailing punctuation
    stripped and case ignored, must be YES or NO. If both keywords occur
    anywhere, or the first token is neither, the response is ambiguous.
    """
    tokens = raw.split()
    if not tokens:
        raise AmbiguousResponse("empty response")
    normalized = [t.rstrip(string.punctuation).lower() for t in tokens]
    seen = set(normalized)
    if _YES in seen and _NO in seen:
        raise AmbiguousResponse(f"both keywords present in {raw!r}")
    first = normalized[0]
    if first == _YES:
        return Verdict.POSITIVE
    if first == _NO:
        return Verdict.NEGATIVE
    raise AmbiguousResponse(f"no leading YES/NO in {raw!r}")


def compute_cost(input_tokens: int, output_tokens: int, config: BackendConfig) -> float:
    """Cost in USD for one record, rounded to six decimals."""
    billed = (
        input_tokens * config.price_per_1k_input_tokens
        + output_tokens * config.price_per_1k_output_tokens
    ) / 1000.0
    return round(billed / config.currency_rate_to_usd, 6)


def _backoff_delay(attempt_index: int, config: BackendConfig, rng: random.Random) -> float:
    # Exponential growth, capped, with jitter in [0.5x, 1x).
    raw = min(config.backoff_cap, config.backoff_base * (2**attempt_index))
    return raw * (0.5 + 0.5 * rng.random())


def predict_one(
    bundle: PromptBundle,
    config: BackendConfig,
    transport: Transport,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> Prediction:
    """Send one prompt, retrying transport errors and ambiguous replies.

    Makes at most config.max_retries + 1 attempts with exponential
    backoff between them. Tokens from every attempt count toward the
    returned prediction's totals and cost.
    """
    rng = rng if rng is not None else random.Random()
    total_in = 0
    total_out = 0
    last_error: Exception | None = None
    started = time.perf_counter()
    for attempt_index in range(config.max_attempts):
        attempts = attempt_index + 1
        try:
            reply = transport.send(bundle.text)
        except TransportError as exc:
            last_error = exc
        else:
            total_in += reply.input_tokens
            total_out += reply.output_tokens
            try:
                verdict = parse_verdict(reply.text)
            except AmbiguousResponse as exc:
                last_error = exc
            else:
                return Prediction(
                    record_id=bundle.record_id,
                    verdict=verdict,
                    raw_text=reply.text,
                    input_tokens=total_in,
                    output_tokens=total_out,
                    cost_usd=compute_cost(total_in, total_out, config),
                    attempts=attempts,
                    latency=time.perf_counter() - started,
                )
        if attempts < config.max_attempts:
            sleep(_backoff_delay(attempt_index, config, rng))
    assert last_error is not None
    raise PredictionFailed(
        record_id=bundle.record_id,
        attempts=config.max_attempts,
        cause=last_error,
        input_tokens=total_in,
        output_tokens=total_out,
    )


def predict_batch(
    bundles: Sequence[PromptBundle],
    config: BackendConfig,
    transport: Transport,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng_seed: int | None = None,
) -> tuple[list[Prediction | FailedPrediction], UsageLedger]:
    """Predict a batch with bounded concurrency.

    Results line up with the input order regardless of completion order.
    A record that exhausts its attempts contributes a FailedPrediction
    slot instead of aborting the batch.
    """
    results: list[Prediction | FailedPrediction | None] = [None] * len(bundles)
    started = time.perf_counter()

    def run(index: int, bundle: PromptBundle) -> None:
        # Per-slot rng so completion order never changes the jitter.
        slot_seed = None if rng_seed is None else rng_seed * 1_000_003 + index
        rng = random.Random(slot_seed)
        try:
            results[index] = predict_one(
                bundle, config, transport, sleep=sleep, rng=rng
            )
        except PredictionFailed as exc:
            results[index] = FailedPrediction(
                record_id=bundle.record_id,
                error=str(exc.cause),
                attempts=exc.attempts,
                input_tokens=exc.input_tokens,
                output_tokens=exc.output_tokens,
                cost_usd=compute_cost(exc.input_tokens, exc.output_tokens, config),
            )

    if bundles:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            futures = [
                pool.submit(run, index, bundle)
                for index, bundle in enumerate(bundles)
            ]
            for future in futures:
                future.result()

    ledger = UsageLedger()
    final: list[Prediction | FailedPrediction] = []
    for slot in results:
        assert slot is not None
        ledger.record(slot)
        final.append(slot)
    ledger.wall_time = time.perf_counter() - started
    return final, ledger


def _unit_hash(*parts: str) -> float:
    """Deterministic hash of the parts mapped into [0, 1)."""
    joined = "\x1f".join(parts).encode("utf-8")
    digest = hashlib.sha256(joined).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def mock_verdict(text: str, seed: int, positive_bias: float, flip_rate: float) -> Verdict:
    """Deterministic verdict for the mock backend.

    The base verdict depends only on the prompt text and the bias, so
    two runs with different seeds share it; the seed only drives an
    independent flip with probability flip_rate. That makes seed-to-seed
    disagreement behave like two independent flips at any bias level.
    """
    base_positive = _unit_hash("verdict", text) < positive_bias
    flipped = _unit_hash("flip", str(seed), text) < flip_rate
    positive = base_positive != flipped
    return Verdict.POSITIVE if positive else Verdict.NEGATIVE


def mock_predict(
    bundle: PromptBundle,
    seed: int,
    positive_bias: float = 0.5,
    flip_rate: float = 0.0,
) -> Prediction:
    """Predict one bundle with the seeded mock, free of charge."""
    verdict = mock_verdict(bundle.text, seed, positive_bias, flip_rate)
    return Prediction(
        record_id=bundle.record_id,
        verdict=verdict,
        raw_text="YES" if verdict is Verdict.POSITIVE else "NO",
        input_tokens=bundle.token_estimate,
        output_tokens=1,
        cost_usd=0.0,
        attempts=1,
    )


@dataclass
class MockTransport:
    """Transport wrapper around the seeded mock verdict."""

    seed: int
    positive_bias: float = 0.5
    flip_rate: float = 0.0

    def send(self, prompt: str) -> TransportReply:
        verdict = mock_verdict(prompt, self.seed, self.positive_bias, self.flip_rate)
        text = "YES" if verdict is Verdict.POSITIVE else "NO"
        # Same four-chars-per-token estimate the bundles use.
        return TransportReply(
            text=text,
            input_tokens=(len(prompt) + 3) // 4,
            output_tokens=1,
        )


@dataclass
class HttpTransport:
    """Chat-completions style HTTP transport.

    Sends the prompt as a single user message and reads the first
    choice's content plus reported usage. Request/response bodies are
    never logged; the credential only appears in the auth header.
    """

    config: BackendConfig

    def send(self, prompt: str) -> TransportReply:
        import httpx

        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = httpx.post(
                self.config.endpoint,
                json=payload,
                headers=headers,
                timeout=self.config.timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {type(exc).__name__}") from exc
        if response.status_code != 200:
            raise TransportError(f"HTTP {response.status_code}")
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            return TransportReply(
                text=str(text),
                input_tokens=int(usage.get("prompt_tokens", 0)),
                output_tokens=int(usage.get("completion_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc


MOCK_ENDPOINT = "mock"


def make_transport(
    config: BackendConfig,
    *,
    seed: int = 0,
    positive_bias: float = 0.5,
    flip_rate: float = 0.0,
) -> Transport:
    """Build the transport for a config; endpoint "mock" is offline."""
    if config.endpoint == MOCK_ENDPOINT:
        return MockTransport(seed=seed, positive_bias=positive_bias, flip_rate=flip_rate)
    return HttpTransport(config)


def load_backend_profiles(path: str | Path) -> dict[str, BackendConfig]:
    """Read named backend profiles from a JSON file.

    Shape: {"profiles": {"name": {...fields...}}}. Credentials are not
    accepted here by design; only api_key_env naming an environment
    variable is allowed.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BackendConfigError(f"invalid JSON in {path}: {exc.msg}") from exc
    profiles = raw.get("profiles")
    if not isinstance(profiles, dict):
        raise BackendConfigError(f"no profiles object in {path}")
    known = {f.name for f in BackendConfig.__dataclass_fields__.values()}
    configs: dict[str, BackendConfig] = {}
    for name, body in profiles.items():
        if not isinstance(body, dict):
            raise BackendConfigError(f"profile {name!r} must be an object")
        for key in body:
            if key.lower() in ("api_key", "apikey", "token", "secret", "password"):
                raise BackendConfigError(
                    f"profile {name!r} must not embed credentials; "
                    f"set {key!r} via the environment and name it in api_key_env"
                )
            if key == "name" or key not in known:
                raise BackendConfigError(f"unknown field {key!r} in profile {name!r}")
        try:
            configs[name] = BackendConfig(name=name, **body)
        except (TypeError, BackendConfigError) as exc:
            raise BackendConfigError(f"profile {name!r}: {exc}") from exc
    return configs


def write_predictions(
    results: Sequence[Prediction | FailedPrediction], path: str | Path
) -> None:
    """Write batch results as JSONL.

    latency is deliberately left out so files from identical seeded runs
    compare byte for byte; wall-clock figures live in the usage summary.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for result in results:
            if isinstance(result, Prediction):
                row: dict = {
                    "id": result.record_id,
                    "verdict": result.verdict.value,
                    "raw_text": result.raw_text,
                    "input_tokens": result.input_tokens,
                    "output_tokens": result.output_tokens,
                    "cost_usd": result.cost_usd,
                    "attempts": result.attempts,
                }
            else:
                row = {
                    "id": result.record_id,
                    "failed": True,
                    "error": result.error,
                    "attempts": result.attempts,
                    "input_tokens": result.input_tokens,
                    "output_tokens": result.output_tokens,
                    "cost_usd": result.cost_usd,
                }
            handle.write(json.dumps(row, sort_keys=True))
            handle.write("\n")


def read_predictions(path: str | Path) -> list[Prediction | FailedPrediction]:
    """Inverse of write_predictions."""
    results: list[Prediction | FailedPrediction] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                if raw.get("failed"):
                    results.append(
                        FailedPrediction(
                            record_id=str(raw["id"]),
                            error=str(raw["error"]),
                            attempts=int(raw["attempts"]),
                            input_tokens=int(raw.get("input_tokens", 0)),
                            output_tokens=int(raw.get("output_tokens", 0)),
                            cost_usd=float(raw.get("cost_usd", 0.0)),
                        )
                    )
                else:
                    results.append(
                        Prediction(
                            record_id=str(raw["id"]),
                            verdict=Verdict(raw["verdict"]),
                            raw_text=str(raw["raw_text"]),
                            input_tokens=int(raw["input_tokens"]),
                            output_tokens=int(raw["output_tokens"]),
                            cost_usd=float(raw["cost_usd"]),
                            attempts=int(raw["attempts"]),
                        )
                    )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise PredictionIOError(
                    f"bad prediction line {line_number}: {exc}"
                ) from exc
    return results
