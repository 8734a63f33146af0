"""Oracle interfaces for the four external models, builtin stand-ins, and adapters.

The search needs a listener (the black-box identification model under
explanation), a sentence embedder, a word proposer, and a judge. Each is
an abstract interface with:

* a deterministic in-process builtin, usable at desk scale, and
* remote adapters speaking one JSON schema over a subprocess pipe
  (one request/response per line) or HTTP POST.

Probability pairs from remote listeners are validated at this boundary;
a malformed pair never reaches the optimizer.
"""

from __future__ import annotations

import json
import math
import re
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from hashlib import blake2b
from typing import Any, Callable, Mapping, Sequence

from .errors import (
    MalformedResponseError,
    MissingAttributesError,
    NoProposalsError,
    OracleUnavailableError,
    ZeroVectorError,
)
from .text import PosLexicon, PosTag, SynonymLexicon, Utterance, tokenize

# Placeholder token marking the masked position in a proposer request.
PROPOSER_PLACEHOLDER = "WORD"

PROPOSER_PROMPT_TEMPLATE = (
    "Please replace in following sentence the word placeholder WORD with an "
    "actual word which is semantically similar to the word {original_word}, "
    "but not the same word. Please give me for this five potential words. "
    "Here is the sentence: {masked_utterance}."
)

JUDGE_SYSTEM_PROMPT = (
    "You are an English language evaluation expert. You will then be given "
    "pairs of sentences denoted as reference sentences and candidate "
    "sentences. Each input is formatted as the reference sentence followed "
    'by the candidate sentence, with the delimiter ";".'
)

JUDGE_GRAMMAR_PROMPT = (
    "If the second sentence is grammatically incorrect, provide a brief "
    "explanation identifying the grammatical issues. Be tolerant of errors "
    "or anomalies caused by tokenization, stemming, cases, and lemmatization. "
    "Ignore errors in hyphenations of superlatives and comparatives. Keep "
    "the reasoning concise and focused only on the incorrectness."
)

JUDGE_CONTEXTUAL_PROMPT = (
    "Assess the level of semantic similarity between the candidate (second) "
    "sentence and the reference (first) sentence. Assign one of the "
    "following values, ranked from highest to lowest similarity: "
    "'equivalent', 'very similar', 'similar', 'neutral', 'dissimilar,' "
    "'very dissimilar', or 'unrelated'. Respond only with the assigned value."
)

JUDGE_REASON_PROMPT = (
    "Provide a brief explanation highlighting the key elements that make the "
    "sentences semantically similar or dissimilar. Be tolerant, and keep the "
    "explanation concise and relevant."
)

#: The seven similarity labels, ranked from highest to lowest similarity.
SIMILARITY_LABELS = (
    "equivalent",
    "very similar",
    "similar",
    "neutral",
    "dissimilar",
    "very dissimilar",
    "unrelated",
)


def render_proposer_prompt(original_word: str, masked_utterance: str) -> str:
    return PROPOSER_PROMPT_TEMPLATE.format(
        original_word=original_word, masked_utterance=masked_utterance
    )


def build_judge_messages(reference: str, candidate: str) -> tuple[str, str]:
    """System and user message for one judge call, with the ``;`` pair format."""
    user = "\n\n".join(
        (
            f"{reference};{candidate}",
            JUDGE_GRAMMAR_PROMPT,
            JUDGE_CONTEXTUAL_PROMPT,
            JUDGE_REASON_PROMPT,
        )
    )
    return JUDGE_SYSTEM_PROMPT, user


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectRef:
    """Handle for one object; attribute weights feed the builtin listener only."""

    id: str
    attributes: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("object id must be non-empty")
        if self.attributes is not None:
            for word, weight in self.attributes.items():
                if not math.isfinite(weight):
                    raise ValueError(f"non-finite attribute weight for {word!r}")


@dataclass(frozen=True)
class SamplePair:
    """One explanation task: target, distractor, and the original utterance."""

    sample_id: str
    target: ObjectRef
    distractor: ObjectRef
    original: Utterance

    def __post_init__(self) -> None:
        if self.target.id == self.distractor.id:
            raise ValueError("target and distractor must be different objects")


@dataclass(frozen=True)
class ListenerOutput:
    """Complementary probabilities the listener assigns to target and distractor."""

    p_target: float
    p_distractor: float

    def __post_init__(self) -> None:
        for p in (self.p_target, self.p_distractor):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability {p!r} out of [0, 1]")
        if abs(self.p_target + self.p_distractor - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    @property
    def prefers_target(self) -> bool:
        return self.p_target > self.p_distractor

    @classmethod
    def from_p_target(cls, p_target: float) -> "ListenerOutput":
        return cls(p_target=p_target, p_distractor=1.0 - p_target)


@dataclass(frozen=True)
class JudgeResponse:
    """One judge round: grammar verdict plus a 7-level similarity label."""

    grammatical: bool
    grammar_reason: str
    similarity: str
    similarity_reason: str

    def __post_init__(self) -> None:
        if self.similarity not in SIMILARITY_LABELS:
            raise ValueError(f"unknown similarity label {self.similarity!r}")


# ---------------------------------------------------------------------------
# Interfaces
# ---------------------------------------------------------------------------


class ListenerOracle(ABC):
    """The black-box identification model being explained."""

    @abstractmethod
    def score(self, pair: SamplePair, u: Utterance) -> ListenerOutput:
        """Probabilities for (target, distractor) given an utterance."""


class EmbedderOracle(ABC):
    """Sentence embedder; output dimension is constant per instance."""

    @abstractmethod
    def embed(self, u: Utterance) -> tuple[float, ...]:
        """Embed an utterance into a fixed-dimension vector."""


class ProposerOracle(ABC):
    """Suggests replacement words for a masked position in a sentence."""

    @abstractmethod
    def propose(self, masked_utterance: str, original_word: str, k: int) -> list[str]:
        """At most ``k`` lowercase single-token words, never ``original_word``.

        ``masked_utterance`` carries the literal placeholder token ``WORD``
        at the position being replaced.
        """


class JudgeOracle(ABC):
    """Rates a candidate sentence against a reference sentence."""

    @abstractmethod
    def judge(self, reference: str, candidate: str) -> JudgeResponse:
        ...


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity of two equal-length vectors.

    Raises:
        ZeroVectorError: if either vector has zero norm.
    """
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero-norm embedding")
    return dot / (na * nb)


# ---------------------------------------------------------------------------
# Builtin implementations
# ---------------------------------------------------------------------------


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class ReferenceListener(ListenerOracle):
    """Deterministic attribute-bag listener.

    Each object carries per-word weights; an utterance scores the sum of the
    weights of its tokens (missing words count zero), and the target
    probability is a logistic over the score difference. Bag-of-words, so
    token order never matters.
    """

    def __init__(self, temperature: float = 1.0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.temperature = temperature

    def score(self, pair: SamplePair, u: Utterance) -> ListenerOutput:
        return reference_listener_score(pair, u, self.temperature)


def reference_listener_score(
    pair: SamplePair, u: Utterance, temperature: float = 1.0
) -> ListenerOutput:
    """Score an utterance with the attribute-bag listener (see ReferenceListener)."""
    if pair.target.attributes is None or pair.distractor.attributes is None:
        raise MissingAttributesError(
            f"sample {pair.sample_id!r}: both objects need attribute weights"
        )
    s_t = sum(pair.target.attributes.get(t.surface, 0.0) for t in u.tokens)
    s_d = sum(pair.distractor.attributes.get(t.surface, 0.0) for t in u.tokens)
    # Both sides go through the same logistic so swapping the two objects
    # swaps the probabilities bit-exactly; the sum stays within 1e-9 of 1.
    p_target = _logistic((s_t - s_d) / temperature)
    p_distractor = _logistic((s_d - s_t) / temperature)
    return ListenerOutput(p_target=p_target, p_distractor=p_distractor)


class ReferenceEmbedder(EmbedderOracle):
    """Signed feature-hashing embedder, deterministic across runs and platforms.

    Each token surface is hashed (keyed BLAKE2b, so Python's randomized
    ``hash()`` is never involved) into one of ``dim`` buckets with a +/-1
    sign; bucket counts are accumulated and L2-normalized.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)

    def _bucket(self, word: str) -> tuple[int, float]:
        digest = blake2b(word.encode("utf-8"), key=self._key, digest_size=9).digest()
        index = int.from_bytes(digest[:8], "big") % self.dim
        sign = 1.0 if digest[8] & 1 else -1.0
        return index, sign

    def embed(self, u: Utterance) -> tuple[float, ...]:
        vec = [0.0] * self.dim
        for token in u.tokens:
            index, sign = self._bucket(token.surface)
            vec[index] += sign
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            # Only reachable when opposite-sign tokens cancel exactly.
            return tuple(vec)
        return tuple(v / norm for v in vec)


def reference_embedder(u: Utterance, dim: int = 256, seed: int = 0) -> tuple[float, ...]:
    """Embed with a throwaway ReferenceEmbedder of the given dimension."""
    return ReferenceEmbedder(dim=dim, seed=seed).embed(u)


class ReferenceProposer(ProposerOracle):
    """Synonym-lexicon proposer: a deterministic stand-in for an LLM sampler.

    Proposes synonyms recorded under any of the original word's lexicon tags,
    in sorted order.
    """

    def __init__(self, synonyms: SynonymLexicon, pos_lexicon: PosLexicon):
        self._synonyms = synonyms
        self._pos = pos_lexicon

    def propose(self, masked_utterance: str, original_word: str, k: int) -> list[str]:
        word = original_word.lower()
        tags = self._pos.tags_for(word) or (PosTag.NOUN,)
        pool: set[str] = set()
        for tag in tags:
            pool |= self._synonyms.entries.get((word, tag), frozenset())
        pool.discard(word)
        return sorted(pool)[: max(k, 0)]


class TextCompletionProposer(ProposerOracle):
    """Proposer backed by a raw text-completion callable (an actual LLM client).

    Renders the replacement prompt, sends it through ``complete``, and parses
    the free-form reply. Parsing failures surface as NoProposalsError.
    """

    def __init__(self, complete: Callable[[str], str]):
        self._complete = complete

    def propose(self, masked_utterance: str, original_word: str, k: int) -> list[str]:
        prompt = render_proposer_prompt(original_word, masked_utterance)
        return parse_proposer_text(self._complete(prompt), original_word, k)


class ReferenceJudge(JudgeOracle):
    """Deterministic judge stand-in: embedding cosine binned onto the 7 labels.

    Grammar heuristic: a sentence with an immediately repeated word is
    flagged incorrect, everything else passes. Desk-scale only.
    """

    _BINS = (
        (0.9999, "equivalent"),
        (0.95, "very similar"),
        (0.80, "similar"),
        (0.55, "neutral"),
        (0.30, "dissimilar"),
        (0.10, "very dissimilar"),
    )

    def __init__(self, embedder: EmbedderOracle | None = None):
        self._embedder = embedder or ReferenceEmbedder()
        self._lexicon = PosLexicon({})

    def judge(self, reference: str, candidate: str) -> JudgeResponse:
        ref_u = tokenize(reference, self._lexicon)
        cand_u = tokenize(candidate, self._lexicon)
        try:
            score = cosine(self._embedder.embed(ref_u), self._embedder.embed(cand_u))
        except ZeroVectorError:
            score = 0.0
        label = "unrelated"
        for threshold, name in self._BINS:
            if score >= threshold:
                label = name
                break
        repeated = [
            a.surface
            for a, b in zip(cand_u.tokens, cand_u.tokens[1:])
            if a.surface == b.surface
        ]
        grammatical = not repeated
        grammar_reason = (
            "" if grammatical else f"repeated word: {repeated[0]!r}"
        )
        return JudgeResponse(
            grammatical=grammatical,
            grammar_reason=grammar_reason,
            similarity=label,
            similarity_reason=f"embedding cosine {score:.3f}",
        )


_LABELS_BY_LENGTH = sorted(SIMILARITY_LABELS, key=len, reverse=True)
_JUDGE_SECTION_RE = re.compile(r"\[(grammar|contextual|reason)\]\s*:?", re.IGNORECASE)
_EMPTYISH_RE = re.compile(r"[\s\.,;:!\-]+")


def _find_similarity_label(text: str) -> tuple[int, str] | None:
    """Earliest exact label occurrence; longer labels win at equal position."""
    low = text.lower()
    best: tuple[int, str] | None = None
    for label in _LABELS_BY_LENGTH:
        pos = low.find(label)
        if pos != -1 and (best is None or pos < best[0]):
            best = (pos, label)
    return best


def parse_judge_text(raw_llm_text: str) -> JudgeResponse:
    """Parse a free-form judge reply into the structured response.

    Replies carrying ``[Grammar]``/``[Contextual]``/``[Reason]`` headers are
    segmented on them; otherwise the similarity label is the earliest exact
    (case-insensitive) match of one of the seven labels, and everything
    before it is read as the grammar answer. The candidate counts as
    grammatical iff that grammar answer is empty once whitespace and
    punctuation are stripped.

    Raises:
        MalformedResponseError: if no similarity label can be found.
    """
    text = raw_llm_text.strip()
    headers = list(_JUDGE_SECTION_RE.finditer(text))
    if headers:
        sections: dict[str, str] = {}
        for i, match in enumerate(headers):
            end = headers[i + 1].start() if i + 1 < len(headers) else len(text)
            sections.setdefault(match.group(1).lower(), text[match.end() : end].strip())
        grammar = sections.get("grammar", "")
        contextual = sections.get("contextual", text)
        reason = sections.get("reason", "")
    else:
        found = _find_similarity_label(text)
        if found is None:
            raise MalformedResponseError(
                "no similarity label in judge reply", payload=raw_llm_text
            )
        grammar = text[: found[0]].strip()
        contextual = text[found[0] :]
        reason = ""

    found = _find_similarity_label(contextual)
    if found is None:
        raise MalformedResponseError(
            "no similarity label in judge reply", payload=raw_llm_text
        )
    grammatical = _EMPTYISH_RE.sub("", grammar) == ""
    return JudgeResponse(
        grammatical=grammatical,
        grammar_reason=grammar,
        similarity=found[1],
        similarity_reason=reason,
    )


class TextCompletionJudge(JudgeOracle):
    """Judge backed by a raw chat callable (an actual LLM client).

    ``complete`` receives the system and user messages and returns the
    model's reply text; raw replies are kept in ``raw_replies`` for audit.
    """

    def __init__(self, complete: Callable[[str, str], str]):
        self._complete = complete
        self.raw_replies: list[str] = []

    def judge(self, reference: str, candidate: str) -> JudgeResponse:
        system, user = build_judge_messages(reference, candidate)
        raw = self._complete(system, user)
        self.raw_replies.append(raw)
        return parse_judge_text(raw)


# ---------------------------------------------------------------------------
# Proposer text parsing
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[a-z]+(?:[-'][a-z]+)*")
_LIST_MARKER_RE = re.compile(r"\d+\s*[.):]")
_QUOTED_RE = re.compile(
    "[\"'‘’“”]([a-z]+(?:[-'][a-z]+)*)[\"'‘’“”]"
)


def parse_proposer_text(raw_llm_text: str, original_word: str, k: int) -> list[str]:
    """Extract up to ``k`` candidate words from free-form LLM text.

    Handles numbered lists, quoted words, and comma-separated lists, in that
    priority order. Multi-word items, duplicates, and the original word are
    dropped.

    Raises:
        NoProposalsError: when nothing parseable remains.
    """
    text = raw_llm_text.lower()
    items: list[str] = []

    markers = list(_LIST_MARKER_RE.finditer(text))
    if markers:
        for i, marker in enumerate(markers):
            end = markers[i + 1].start() if i + 1 < len(markers) else len(text)
            match = _WORD_RE.search(text, marker.end(), end)
            if match:
                items.append(match.group(0))
    elif _QUOTED_RE.search(text):
        items = [m.group(1) for m in _QUOTED_RE.finditer(text)]
    else:
        tail = text.rsplit(":", 1)[-1]
        for piece in re.split(r"[,;\n]|\s+or\s+|\s+and\s+", tail):
            words = _WORD_RE.findall(piece)
            if len(words) == 1:
                items.append(words[0])

    seen: list[str] = []
    for word in items:
        if word != original_word.lower() and word not in seen:
            seen.append(word)
    if not seen:
        raise NoProposalsError(f"no usable words in proposer reply: {raw_llm_text!r}")
    return seen[: max(k, 0)]


# ---------------------------------------------------------------------------
# Wire protocol
# ---------------------------------------------------------------------------


class _TransportFailure(Exception):
    """Internal marker for retryable transport-level failures."""

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


class OracleTransport(ABC):
    """Carries one JSON request dict to a remote oracle and back."""

    @abstractmethod
    def call(self, request: dict) -> dict:
        ...

    def close(self) -> None:
        pass


class SubprocessTransport(OracleTransport):
    """Line-oriented JSON over one child process's stdin/stdout.

    Requests are serialized through a lock; the child sees one request per
    line and must answer one line per request. A dead or silent child counts
    as a transport failure and the process is respawned on the next attempt.
    """

    def __init__(self, command: Sequence[str] | str):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        return self._proc

    def call(self, request: dict) -> dict:
        with self._lock:
            try:
                proc = self._ensure_proc()
            except OSError as exc:
                raise _TransportFailure(f"cannot spawn {self.command}: {exc}") from exc
            try:
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                self._terminate()
                raise _TransportFailure(f"pipe to {self.command} broke: {exc}") from exc
            if not line:
                self._terminate()
                raise _TransportFailure(f"{self.command} closed stdout")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(
                f"undecodable oracle response: {exc}", payload=line
            ) from exc

    def _terminate(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
        self._proc = None

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=3)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
            self._proc = None


class HttpTransport(OracleTransport):
    """POSTs each request to one endpoint; any non-200 reply is a transport failure."""

    def __init__(self, url: str, timeout: float = 30.0, max_in_flight: int = 8):
        self.url = url
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def call(self, request: dict) -> dict:
        body = json.dumps(request).encode("utf-8")
        http_request = urllib.request.Request(
            self.url,
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with self._slots:
            try:
                with urllib.request.urlopen(http_request, timeout=self.timeout) as reply:
                    raw = reply.read().decode("utf-8")
            except urllib.error.HTTPError as exc:
                raise _TransportFailure(
                    f"HTTP {exc.code} from {self.url}", payload=exc.read().decode("utf-8", "replace")
                ) from exc
            except (urllib.error.URLError, OSError) as exc:
                raise _TransportFailure(f"cannot reach {self.url}: {exc}") from exc
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(
                f"undecodable oracle response: {exc}", payload=raw
            ) from exc


def remote_oracle_call(transport: OracleTransport, request: dict, retries: int = 3) -> Any:
    """Send one request, retrying transport failures up to ``retries`` attempts.

    The parsed response is validated against the schema for the request's
    ``kind`` before being returned, so malformed payloads never propagate.

    Raises:
        OracleUnavailableError: after ``retries`` consecutive transport failures.
        MalformedResponseError: on any schema violation.
    """
    if retries < 1:
        raise ValueError("retries must be >= 1")
    last: _TransportFailure | None = None
    for _ in range(retries):
        try:
            response = transport.call(request)
        except _TransportFailure as failure:
            last = failure
            continue
        return _validate_response(request, response)
    raise OracleUnavailableError(
        f"oracle failed {retries} times: {last}", payload=last.payload if last else None
    )


def _require(condition: bool, message: str, payload: Any) -> None:
    if not condition:
        raise MalformedResponseError(message, payload=payload)


def _validate_response(request: dict, response: Any) -> Any:
    kind = request.get("kind")
    _require(isinstance(response, dict), "response is not a JSON object", response)

    if kind == "listener":
        p_t, p_d = response.get("p_target"), response.get("p_distractor")
        for p in (p_t, p_d):
            _require(isinstance(p, (int, float)) and not isinstance(p, bool), "non-numeric probability", response)
            _require(math.isfinite(p), "non-finite probability", response)
            _require(-1e-6 <= p <= 1.0 + 1e-6, f"probability {p} out of range", response)
        total = p_t + p_d
        _require(abs(total - 1.0) <= 1e-6, f"probabilities sum to {total}", response)
        # Off by <= 1e-6 is remote float noise: renormalize instead of failing.
        p_t = min(max(p_t / total, 0.0), 1.0)
        return ListenerOutput(p_target=p_t, p_distractor=1.0 - p_t)

    if kind == "embed":
        vector = response.get("vector")
        _require(isinstance(vector, list) and len(vector) > 0, "missing vector", response)
        values = []
        for v in vector:
            _require(isinstance(v, (int, float)) and not isinstance(v, bool), "non-numeric vector entry", response)
            _require(math.isfinite(v), "non-finite vector entry", response)
            values.append(float(v))
        return tuple(values)

    if kind == "propose":
        words = response.get("words")
        _require(isinstance(words, list), "missing words list", response)
        _require(all(isinstance(w, str) for w in words), "non-string word", response)
        original = request.get("original_word", "").lower()
        k = request.get("k", len(words))
        cleaned: list[str] = []
        for word in words:
            word = word.strip().lower()
            if not word or any(c.isspace() for c in word):
                continue
            if word == original or word in cleaned:
                continue
            cleaned.append(word)
        return cleaned[: max(k, 0)]

    if kind == "judge":
        grammatical = response.get("grammatical")
        _require(isinstance(grammatical, bool), "missing grammatical flag", response)
        label = response.get("similarity")
        _require(isinstance(label, str), "missing similarity label", response)
        label = label.strip().lower()
        _require(label in SIMILARITY_LABELS, f"unknown similarity label {label!r}", response)
        return JudgeResponse(
            grammatical=grammatical,
            grammar_reason=str(response.get("grammar_reason", "")),
            similarity=label,
            similarity_reason=str(response.get("similarity_reason", "")),
        )

    raise ValueError(f"unknown request kind {kind!r}")


def listener_request(pair: SamplePair, u: Utterance) -> dict:
    return {
        "kind": "listener",
        "sample_id": pair.sample_id,
        "target_id": pair.target.id,
        "distractor_id": pair.distractor.id,
        "utterance": u.text,
    }


def embed_request(u: Utterance) -> dict:
    return {"kind": "embed", "utterance": u.text}


def propose_request(masked_utterance: str, original_word: str, k: int) -> dict:
    return {
        "kind": "propose",
        "masked_utterance": masked_utterance,
        "original_word": original_word,
        "k": k,
    }


def judge_request(reference: str, candidate: str) -> dict:
    return {"kind": "judge", "reference": reference, "candidate": candidate}


class RemoteListener(ListenerOracle):
    def __init__(self, transport: OracleTransport, retries: int = 3):
        self._transport = transport
        self._retries = retries

    def score(self, pair: SamplePair, u: Utterance) -> ListenerOutput:
        return remote_oracle_call(self._transport, listener_request(pair, u), self._retries)


class RemoteEmbedder(EmbedderOracle):
    """Remote embedder; pins its dimension to the first response it sees."""

    def __init__(self, transport: OracleTransport, retries: int = 3):
        self._transport = transport
        self._retries = retries
        self._dim: int | None = None
        self._lock = threading.Lock()

    def embed(self, u: Utterance) -> tuple[float, ...]:
        vector = remote_oracle_call(self._transport, embed_request(u), self._retries)
        with self._lock:
            if self._dim is None:
                self._dim = len(vector)
            elif len(vector) != self._dim:
                raise MalformedResponseError(
                    f"embedding dimension changed: {len(vector)} != {self._dim}",
                    payload=vector,
                )
        return vector


class RemoteProposer(ProposerOracle):
    def __init__(self, transport: OracleTransport, retries: int = 3):
        self._transport = transport
        self._retries = retries

    def propose(self, masked_utterance: str, original_word: str, k: int) -> list[str]:
        return remote_oracle_call(
            self._transport, propose_request(masked_utterance, original_word, k), self._retries
        )


class RemoteJudge(JudgeOracle):
    def __init__(self, transport: OracleTransport, retries: int = 3):
        self._transport = transport
        self._retries = retries

    def judge(self, reference: str, candidate: str) -> JudgeResponse:
        return remote_oracle_call(
            self._transport, judge_request(reference, candidate), self._retries
        )
