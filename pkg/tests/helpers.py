"""Shared fixtures: a tiny hand-checkable world plus scripted oracle doubles."""

from __future__ import annotations

import math
import zlib
from functools import lru_cache

from utterflip.oracles import (
    EmbedderOracle,
    JudgeOracle,
    JudgeResponse,
    ListenerOracle,
    ListenerOutput,
    ObjectRef,
    ProposerOracle,
    SamplePair,
)
from utterflip.sampling import Lexicons, Vocabulary
from utterflip.text import PosLexicon, PosTag, SynonymLexicon, Utterance, tokenize

TINY_POS_ENTRIES = {
    "it": (PosTag.OTHER,),
    "has": (PosTag.VERB,),
    "a": (PosTag.OTHER,),
    "the": (PosTag.OTHER,),
    "and": (PosTag.OTHER,),
    "small": (PosTag.ADJ,),
    "tiny": (PosTag.ADJ,),
    "little": (PosTag.ADJ,),
    "big": (PosTag.ADJ,),
    "large": (PosTag.ADJ,),
    "huge": (PosTag.ADJ,),
    "tall": (PosTag.ADJ,),
    "short": (PosTag.ADJ,),
    "wide": (PosTag.ADJ,),
    "thin": (PosTag.ADJ,),
    "back": (PosTag.NOUN,),
    "seat": (PosTag.NOUN,),
    "chair": (PosTag.NOUN,),
    "legs": (PosTag.NOUN,),
    "word": (PosTag.NOUN,),
    "looks": (PosTag.VERB,),
    "have": (PosTag.VERB,),
    "seems": (PosTag.VERB,),
    "very": (PosTag.ADV,),
    "quite": (PosTag.ADV,),
}

TINY_SYNONYMS = {
    ("small", PosTag.ADJ): {"little", "tiny"},
    ("big", PosTag.ADJ): {"large", "huge"},
    ("tall", PosTag.ADJ): {"short", "big"},
    ("has", PosTag.VERB): {"have"},
    ("looks", PosTag.VERB): {"seems"},
    ("back", PosTag.NOUN): {"seat"},
}


def tiny_pos_lexicon() -> PosLexicon:
    return PosLexicon(TINY_POS_ENTRIES)


def tiny_synonym_lexicon() -> SynonymLexicon:
    return SynonymLexicon(TINY_SYNONYMS)


def oracle_levenshtein(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    """Brute-force edit distance straight from the recursive definition."""

    @lru_cache(maxsize=None)
    def dist(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            dist(i - 1, j) + 1,
            dist(i, j - 1) + 1,
            dist(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return dist(len(a), len(b))


def tiny_lexicons() -> Lexicons:
    pos = tiny_pos_lexicon()
    return Lexicons(
        pos=pos,
        synonyms=tiny_synonym_lexicon(),
        vocabulary=Vocabulary.from_pos_lexicon(pos),
    )


def small_back_pair(sample_id: str = "s1") -> SamplePair:
    """Misclassified fixture: the listener reads "small back" as the distractor.

    Replacing "small" with "tiny" flips the decision; margins are +/-2, so
    p_target is logistic(-2) on the original and logistic(+2) on the fix.
    """
    lexicon = tiny_pos_lexicon()
    return SamplePair(
        sample_id=sample_id,
        target=ObjectRef("obj-t", {"tiny": 2.0, "back": 0.5}),
        distractor=ObjectRef("obj-d", {"small": 2.0, "back": 0.5}),
        original=tokenize("it has a small back", lexicon),
    )


class FixedEmbedder(EmbedderOracle):
    """Maps utterance text to preset vectors; unknown texts get a default."""

    def __init__(self, table: dict[str, tuple[float, ...]], default: tuple[float, ...] | None = None):
        self.table = table
        self.default = default

    def embed(self, u: Utterance) -> tuple[float, ...]:
        if u.text in self.table:
            return self.table[u.text]
        if self.default is not None:
            return self.default
        raise KeyError(f"no fixed embedding for {u.text!r}")


class OverlapEmbedder(EmbedderOracle):
    """One bucket per (position, word): cosine ~= shared positions / length.

    Gives a clean, near-monotone drop in similarity per substituted position,
    handy for drift fixtures. Uses crc32 so values are stable across processes.
    """

    def __init__(self, length: int, vocab_size: int = 512):
        self.length = length
        self.vocab_size = vocab_size

    def embed(self, u: Utterance) -> tuple[float, ...]:
        vec = [0.0] * (self.length * self.vocab_size)
        scale = 1.0 / math.sqrt(len(u.tokens))
        for i, token in enumerate(u.tokens):
            bucket = zlib.crc32(token.surface.encode("utf-8")) % self.vocab_size
            vec[i % self.length * self.vocab_size + bucket] += scale
        return tuple(vec)


class SpyListener(ListenerOracle):
    """Wraps a listener and records every utterance text it scores."""

    def __init__(self, inner: ListenerOracle):
        self.inner = inner
        self.calls: list[str] = []

    def score(self, pair: SamplePair, u: Utterance) -> ListenerOutput:
        self.calls.append(u.text)
        return self.inner.score(pair, u)

    @property
    def distinct_calls(self) -> set[str]:
        return set(self.calls)


class TableListener(ListenerOracle):
    """Returns scripted p_target per utterance text."""

    def __init__(self, table: dict[str, float], default: float = 0.2):
        self.table = table
        self.default = default

    def score(self, pair: SamplePair, u: Utterance) -> ListenerOutput:
        return ListenerOutput.from_p_target(self.table.get(u.text, self.default))


class ScriptedProposer(ProposerOracle):
    """Returns preset word lists; counts calls per masked sentence."""

    def __init__(self, words: list[str]):
        self.words = words
        self.calls: list[tuple[str, str, int]] = []

    def propose(self, masked_utterance: str, original_word: str, k: int) -> list[str]:
        self.calls.append((masked_utterance, original_word, k))
        return [w for w in self.words if w != original_word][:k]


class ScriptedJudge(JudgeOracle):
    """Plays back a fixed sequence of (grammatical, similarity) votes."""

    def __init__(self, votes: list[tuple[bool, str]]):
        self.votes = list(votes)
        self.cursor = 0

    def judge(self, reference: str, candidate: str) -> JudgeResponse:
        grammatical, label = self.votes[self.cursor % len(self.votes)]
        self.cursor += 1
        return JudgeResponse(
            grammatical=grammatical,
            grammar_reason="" if grammatical else "scripted objection",
            similarity=label,
            similarity_reason="scripted",
        )
